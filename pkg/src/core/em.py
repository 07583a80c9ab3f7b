"""
Probability computation and parameter learning on support graphs

Support graphs are compiled once into index lists over a flat parameter
vector, so each EM iteration is a pair of linear scans per observation:
an inside pass from the last table atom to the goal and an outside pass back.
"""
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config
from core.errors import (ZeroProbabilityError, NumericDegeneracyError,
                         EmptySupportError)
from core.explainer import (Explanation, explain, enumerate_explanations_exhaustive)
from core.parameters import init_parameters, normalized
from core.resolution import SwitchInstance
from core.terms import format_term, term_sort_key
from utils.logger import setup_logger

logger = setup_logger(__name__)

METHODS = ('gem', 'naive')


@dataclass
class LearnConfig:
    epsilon: float = Config.EPSILON
    max_iterations: int = Config.MAX_ITERATIONS
    init_mode: str = Config.DEFAULT_INIT_MODE
    seed: Optional[int] = Config.DEFAULT_SEED
    jobs: int = 1
    record_history: bool = False
    progress: Optional[Callable] = None  # called as progress(m, loglik)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"Invalid epsilon: {self.epsilon}. Must be > 0")
        if self.max_iterations < 1:
            raise ValueError(f"Invalid max iterations: {self.max_iterations}. Must be >= 1")
        if not Config.is_valid_init_mode(self.init_mode):
            raise ValueError(
                f"Invalid init mode: {self.init_mode}. Must be one of: {', '.join(Config.INIT_MODES)}")
        if self.jobs < 1:
            raise ValueError(f"Invalid jobs: {self.jobs}. Must be >= 1")


@dataclass
class LearnResult:
    params: object
    trace: list  # λ(0) .. λ(m)
    iterations: int
    converged: bool
    expected_counts: dict  # (name, value) -> η, from the last E-step
    history: list = field(default_factory=list)  # parameter snapshots θ(0) .. θ(m)
    method: str = 'gem'

    @property
    def log_likelihood(self):
        return self.trace[-1]


class ParameterIndex:
    """Flat positions for every (switch name, value) pair of a parameter store"""

    def __init__(self, params, names=()):
        for name in names:
            params.row(name)
        self.rows = []  # (name, start, stop)
        self.position = {}
        offset = 0
        for name in params.names():
            values = params.values(name)
            self.rows.append((name, offset, offset + len(values)))
            for j, value in enumerate(values):
                self.position[(name, value)] = offset + j
            offset += len(values)
        self.size = offset
        self.keys = [None] * offset
        for key, pos in self.position.items():
            self.keys[pos] = key

    def __getitem__(self, instance):
        return self.position[(instance.name, instance.value)]

    def vector(self, params):
        theta = np.empty(self.size)
        for name, start, stop in self.rows:
            theta[start:stop] = params.row(name)
        return theta

    def write_back(self, theta, params):
        for name, start, stop in self.rows:
            params.set_row(name, theta[start:stop])
        return params

    def as_dict(self, vector):
        return {key: float(vector[pos]) for pos, key in enumerate(self.keys)}


class CompiledGraph:
    """A support graph as parallel lists of switch positions and atom positions"""

    def __init__(self, graph, index):
        self.graph = graph
        atom_index = graph.index()
        self.explanations = []
        for texps in graph.explanations:
            compiled = []
            for texp in texps:
                switches = tuple(index[n] for n in texp if isinstance(n, SwitchInstance))
                tables = tuple(atom_index[n] for n in texp if not isinstance(n, SwitchInstance))
                compiled.append((switches, tables))
            self.explanations.append(compiled)

    def __len__(self):
        return len(self.explanations)

    def inside(self, theta):
        """
        Inside pass; theta is a plain list

        Returns:
            (P, R): P[k] per table atom, R[k][j] per t-explanation
        """
        size = len(self.explanations)
        P = [0.0] * size
        R = [None] * size
        for k in range(size - 1, -1, -1):
            probs = []
            total = 0.0
            for switches, tables in self.explanations[k]:
                r = 1.0
                for i in switches:
                    r *= theta[i]
                for a in tables:
                    r *= P[a]
                probs.append(r)
                total += r
            P[k] = total
            R[k] = probs
        return P, R

    def outside(self, P, R, width):
        """
        Outside pass; adds Q[k]·R[k][j] to every switch of each t-explanation

        Returns:
            (Q, eta) with eta a list of length width, not yet divided by P[0]
        """
        Q = [0.0] * len(self.explanations)
        Q[0] = 1.0
        eta = [0.0] * width
        for k, texps in enumerate(self.explanations):
            q = Q[k]
            if q == 0.0:
                continue
            for (switches, tables), r in zip(texps, R[k]):
                w = q * r
                if w == 0.0:
                    continue
                for i in switches:
                    eta[i] += w
                for a in tables:
                    if P[a] == 0.0:
                        raise NumericDegeneracyError(
                            f"Table atom {format_term(self.graph.atoms[a])} has zero inside probability "
                            f"inside a t-explanation with nonzero weight")
                    Q[a] += w / P[a]
        return Q, eta

    def viterbi(self, theta):
        """Max-product pass; returns best value and chosen t-explanation per atom"""
        size = len(self.explanations)
        best = [0.0] * size
        choice = [None] * size
        for k in range(size - 1, -1, -1):
            top = -1.0
            for j, (switches, tables) in enumerate(self.explanations[k]):
                r = 1.0
                for i in switches:
                    r *= theta[i]
                for a in tables:
                    r *= best[a]
                if r > top:
                    top, choice[k] = r, j
            best[k] = max(top, 0.0)
        return best, choice


@dataclass
class InsideTable:
    """Inside probabilities per (observation index, table atom)"""

    atoms: list  # per observation, {atom: P}
    explanations: list  # per observation, {atom: [R per t-explanation]}

    def __getitem__(self, key):
        t, atom = key
        return self.atoms[t][atom]

    def goal_probability(self, t=0):
        return next(iter(self.atoms[t].values()))


@dataclass
class OutsideTable:
    atoms: list  # per observation, {atom: Q}

    def __getitem__(self, key):
        t, atom = key
        return self.atoms[t][atom]


@dataclass
class ExpectedCounts:
    per_goal: list  # per observation, {(name, value): η[t, i, v]}
    total: dict  # {(name, value): η[i, v]}

    def __getitem__(self, key):
        return self.total[key]


def _as_graph_list(graphs):
    return [graphs] if hasattr(graphs, 'atoms') else list(graphs)


def _index_for(graphs, params):
    names = [name for graph in graphs for name in graph.switch_names()]
    return ParameterIndex(params, names)


def inside_probs(graphs, params):
    """Inside probabilities for one support graph or a list of them"""
    graphs = _as_graph_list(graphs)
    index = _index_for(graphs, params)
    theta = index.vector(params).tolist()
    atoms, explanations = [], []
    for graph in graphs:
        P, R = CompiledGraph(graph, index).inside(theta)
        atoms.append(dict(zip(graph.atoms, P)))
        explanations.append(dict(zip(graph.atoms, R)))
    return InsideTable(atoms, explanations)


def expectations(graphs, params, inside, counts=None):
    """
    Outside probabilities and expected switch counts under params

    η[i, v] aggregates count_t · η[t, i, v] / P[t, goal_t].
    """
    graphs = _as_graph_list(graphs)
    counts = [1] * len(graphs) if counts is None else list(counts)
    index = _index_for(graphs, params)
    outside_atoms, per_goal = [], []
    total = np.zeros(index.size)
    for t, graph in enumerate(graphs):
        compiled = CompiledGraph(graph, index)
        P = [inside.atoms[t][a] for a in graph.atoms]
        R = [inside.explanations[t][a] for a in graph.atoms]
        Q, eta = compiled.outside(P, R, index.size)
        outside_atoms.append(dict(zip(graph.atoms, Q)))
        per_goal.append({index.keys[i]: v for i, v in enumerate(eta) if v != 0.0})
        if P[0] > 0.0:
            total += counts[t] * np.asarray(eta) / P[0]
    return OutsideTable(outside_atoms), ExpectedCounts(per_goal, index.as_dict(total))


def goal_probability(program, goal, params=None, max_steps=None):
    """P(goal | θ) by tabled search and one inside pass"""
    params = program.params if params is None else params
    graph = explain(program, goal, max_steps)
    return inside_probs(graph, params).goal_probability()


class _Estimator:
    """Shared E-step driver; subclasses provide per-goal inside and count passes"""

    method = None

    def __init__(self, goals, counts, params, jobs=1):
        self.goals = goals
        self.counts = counts
        self.jobs = jobs
        self.index = ParameterIndex(params, self.switch_names())

    def switch_names(self):
        raise NotImplementedError

    def goal_inside(self, t, theta):
        raise NotImplementedError

    def goal_counts(self, t, theta, state):
        raise NotImplementedError

    def _map(self, fn, items):
        if self.jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    def inside(self, theta):
        """(per-goal inside states, log-likelihood)"""
        theta = theta.tolist()
        states = self._map(lambda t: self.goal_inside(t, theta), range(len(self.goals)))
        loglik = 0.0
        for t, state in enumerate(states):
            p = state[0]
            if p <= 0.0:
                raise ZeroProbabilityError(
                    f"Observed goal {format_term(self.goals[t])} has probability 0 under the current parameters")
            loglik += self.counts[t] * math.log(p)
        if not math.isfinite(loglik):
            raise NumericDegeneracyError(f"Log-likelihood is not finite: {loglik}")
        return states, loglik

    def expected_counts(self, theta, states):
        """Aggregated η vector, summed in observation order"""
        theta_list = theta.tolist()
        parts = self._map(lambda t: self.goal_counts(t, theta_list, states[t]),
                          range(len(self.goals)))
        total = np.zeros(self.index.size)
        for t, eta in enumerate(parts):
            total += (self.counts[t] / states[t][0]) * np.asarray(eta)
        return total

    def maximize(self, theta, eta):
        """New θ: each row normalized from η; rows with zero count stay unchanged"""
        updated = theta.copy()
        for name, start, stop in self.index.rows:
            mass = eta[start:stop].sum()
            if mass > 0.0:
                updated[start:stop] = normalized(eta[start:stop])
        return updated


class GraphicalEM(_Estimator):
    """EM over support graphs built once per distinct observed goal"""

    method = 'gem'

    def __init__(self, program, goals, counts, params, jobs=1, max_steps=None):
        self.graphs = [explain(program, goal, max_steps) for goal in goals]
        super().__init__(goals, counts, params, jobs)
        self.compiled = [CompiledGraph(graph, self.index) for graph in self.graphs]
        logger.info(f"Compiled {len(self.graphs)} support graphs, total size {self.support_size()}")

    def switch_names(self):
        return [name for graph in self.graphs for name in graph.switch_names()]

    def support_size(self):
        return sum(graph.size() for graph in self.graphs)

    def goal_inside(self, t, theta):
        P, R = self.compiled[t].inside(theta)
        return P[0], P, R

    def goal_counts(self, t, theta, state):
        _, P, R = state
        _, eta = self.compiled[t].outside(P, R, self.index.size)
        return eta


class NaiveEM(_Estimator):
    """EM over fully enumerated explanation sets"""

    method = 'naive'

    def __init__(self, program, goals, counts, params, jobs=1, max_steps=None):
        self.explanations = [
            sorted(enumerate_explanations_exhaustive(program, goal, max_steps),
                   key=lambda e: [i.sort_key() for i in e.ordered()])
            for goal in goals]
        super().__init__(goals, counts, params, jobs)
        self.positions = [[tuple(self.index[i] for i in e.ordered()) for e in explanations]
                          for explanations in self.explanations]
        logger.info(f"Enumerated {sum(len(e) for e in self.explanations)} explanations "
                    f"for {len(goals)} goals")

    def switch_names(self):
        return [i.name for explanations in self.explanations for e in explanations for i in e]

    def goal_inside(self, t, theta):
        probs = []
        for positions in self.positions[t]:
            p = 1.0
            for i in positions:
                p *= theta[i]
            probs.append(p)
        return sum(probs), probs

    def goal_counts(self, t, theta, state):
        eta = [0.0] * self.index.size
        for positions, p in zip(self.positions[t], state[1]):
            # each switch instance in an explanation is a distinct trial
            for i in positions:
                eta[i] += p
        return eta


def _estimator(method, program, observations, params, jobs, max_steps=None):
    grouped = observations.grouped()
    goals = [goal for goal, _ in grouped]
    counts = [count for _, count in grouped]
    if method == 'gem':
        return GraphicalEM(program, goals, counts, params, jobs, max_steps)
    if method == 'naive':
        return NaiveEM(program, goals, counts, params, jobs, max_steps)
    raise ValueError(f"Invalid method: {method}. Must be one of: {', '.join(METHODS)}")


def _learn(method, program, observations, cfg, params, max_steps):
    cfg = LearnConfig() if cfg is None else cfg
    if params is None:
        params = init_parameters(program, cfg.init_mode, cfg.seed)
    else:
        params = params.copy()
    estimator = _estimator(method, program, observations, params, cfg.jobs, max_steps)
    index = estimator.index
    theta = index.vector(params)

    states, loglik = estimator.inside(theta)
    trace = [loglik]
    history = [index.as_dict(theta)] if cfg.record_history else []
    if cfg.progress:
        cfg.progress(0, loglik)
    logger.info(f"{method}: initial log-likelihood {loglik!r}")

    converged = False
    eta = np.zeros(index.size)
    m = 0
    while m < cfg.max_iterations:
        m += 1
        eta = estimator.expected_counts(theta, states)
        theta = estimator.maximize(theta, eta)
        states, loglik = estimator.inside(theta)
        trace.append(loglik)
        if cfg.record_history:
            history.append(index.as_dict(theta))
        if cfg.progress:
            cfg.progress(m, loglik)
        delta = trace[-1] - trace[-2]
        if delta < -Config.MONOTONE_TOLERANCE:
            logger.warning(f"{method}: log-likelihood decreased by {-delta!r} at iteration {m}; "
                           f"the program may violate the exclusiveness or independence conditions")
        if delta < cfg.epsilon:
            converged = True
            break

    index.write_back(theta, params)
    logger.info(f"{method}: {'converged' if converged else 'stopped'} after {m} iterations, "
                f"log-likelihood {loglik!r}")
    return LearnResult(params=params, trace=trace, iterations=m, converged=converged,
                       expected_counts=index.as_dict(eta), history=history, method=method)


def learn_gEM(program, observations, cfg=None, params=None, max_steps=None):
    """
    Graphical EM

    Support graphs are built once; λ(0) is computed before any update and the
    loop stops when λ(m) - λ(m-1) < ε or after cfg.max_iterations updates.

    Raises:
        ZeroProbabilityError: an observed goal has probability 0 initially
    """
    return _learn('gem', program, observations, cfg, params, max_steps)


def learn_naive(program, observations, cfg=None, params=None, max_steps=None):
    """EM computed directly over every explanation of every observed goal"""
    return _learn('naive', program, observations, cfg, params, max_steps)


def learn(program, observations, cfg=None, params=None, method='gem', max_steps=None):
    return _learn(method, program, observations, cfg, params, max_steps)


def expected_counts(program, observations, params=None, method='gem', max_steps=None):
    """Aggregated η[i, v] at fixed parameters"""
    params = program.params if params is None else params
    estimator = _estimator(method, program, observations, params, 1, max_steps)
    theta = estimator.index.vector(params)
    states, _ = estimator.inside(theta)
    return estimator.index.as_dict(estimator.expected_counts(theta, states))


def log_likelihood(program, observations, params=None, max_steps=None):
    params = program.params if params is None else params
    estimator = _estimator('gem', program, observations, params, 1, max_steps)
    return estimator.inside(estimator.index.vector(params))[1]


def viterbi(graph, params):
    """
    Most likely explanation of the graph's goal

    Ties go to the earliest t-explanation in stored order.

    Returns:
        (Explanation, probability)

    Raises:
        EmptySupportError: the goal has no explanation
    """
    if not graph.explanations[0]:
        raise EmptySupportError(f"{format_term(graph.goal)} has no explanation")
    index = _index_for([graph], params)
    compiled = CompiledGraph(graph, index)
    _, choice = compiled.viterbi(index.vector(params).tolist())

    atom_index = graph.index()
    instances = set()
    pending = [0]
    seen = set()
    while pending:
        k = pending.pop()
        if k in seen:
            continue
        seen.add(k)
        texp = graph.explanations[k][choice[k]]
        for node in texp:
            if isinstance(node, SwitchInstance):
                instances.add(node)
            else:
                pending.append(atom_index[node])
    explanation = Explanation(instances)
    return explanation, explanation.probability(params)


def viterbi_goal(program, goal, params=None, max_steps=None):
    params = program.params if params is None else params
    return viterbi(explain(program, goal, max_steps), params)


def format_expected_counts(counts):
    keys = sorted(counts, key=lambda k: (term_sort_key(k[0]), term_sort_key(k[1])))
    return [f"eta {format_term(name, 999)} {format_term(value, 999)} {counts[(name, value)]!r}"
            for name, value in keys]
