"""
Discrete Bayesian networks: enumeration reference and program encoders

encode_bn writes the whole joint distribution as one clause. For singly
connected networks compile_bn_polytree writes one tabled predicate per
directed edge away from the evidence node, giving support graphs whose size
grows linearly with the network. compile_bn_elimination sums nodes out in a
given order, one tabled predicate per eliminated node.
"""
import itertools
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config
from core.errors import ResourceLimitError
from core.program import parse_program
from core.terms import atom, compound, make_list, format_atom
from utils.logger import setup_logger

logger = setup_logger(__name__)

_PLAIN = re.compile(r'^[a-z][a-z0-9]*$')


@dataclass
class BayesNet:
    nodes: tuple
    values: dict  # node -> tuple of values
    parents: dict  # node -> tuple of parents
    cpt: dict  # node -> array indexed by parent value positions, then own value

    def __post_init__(self):
        self.nodes = tuple(self.nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("Node names must be distinct")
        self.parents = {n: tuple(self.parents.get(n, ())) for n in self.nodes}
        self.values = {n: tuple(self.values[n]) for n in self.nodes}
        for node in self.nodes:
            if not self.values[node]:
                raise ValueError(f"Node {node} has no values")
            for p in self.parents[node]:
                if p not in self.values:
                    raise ValueError(f"Unknown parent {p} of node {node}")
        self.order = self.topological_order()
        self.cpt = {n: np.asarray(self.cpt[n], dtype=float) for n in self.nodes}
        for node in self.nodes:
            shape = tuple(len(self.values[p]) for p in self.parents[node]) + (len(self.values[node]),)
            table = self.cpt[node]
            if table.shape != shape:
                raise ValueError(f"CPT of {node} has shape {table.shape}, expected {shape}")
            if np.any(table < 0) or np.any(np.abs(table.sum(axis=-1) - 1.0) > Config.SUM_TOLERANCE * 10):
                raise ValueError(f"CPT rows of {node} must be distributions")

    def topological_order(self):
        """Parents before children, ties in declaration order"""
        order = []
        placed = set()
        remaining = list(self.nodes)
        while remaining:
            ready = [n for n in remaining if all(p in placed for p in self.parents[n])]
            if not ready:
                raise ValueError(f"Network has a directed cycle among {', '.join(remaining)}")
            node = ready[0]
            order.append(node)
            placed.add(node)
            remaining.remove(node)
        return tuple(order)

    def children(self, node):
        return tuple(n for n in self.nodes if node in self.parents[n])

    def prob(self, node, value, assignment):
        """P(node = value | parents as in assignment)"""
        index = tuple(self.values[p].index(assignment[p]) for p in self.parents[node])
        return float(self.cpt[node][index + (self.values[node].index(value),)])

    def state_count(self):
        count = 1
        for node in self.nodes:
            count *= len(self.values[node])
        return count

    def to_text(self):
        lines = []
        for node in self.nodes:
            line = f"node {node} " + " ".join(self.values[node])
            if self.parents[node]:
                line += " | " + " ".join(self.parents[node])
            lines.append(line)
        for node in self.nodes:
            parent_values = [self.values[p] for p in self.parents[node]]
            for combo in itertools.product(*parent_values):
                index = tuple(self.values[p].index(v) for p, v in zip(self.parents[node], combo))
                row = " ".join(repr(float(x)) for x in self.cpt[node][index])
                lines.append(f"cpt {' '.join((node,) + combo)} : {row}")
        return "\n".join(lines) + "\n"


def parse_bayesnet(text):
    """Read the line format written by BayesNet.to_text"""
    nodes, values, parents, rows = [], {}, {}, []
    for number, line in enumerate(text.splitlines(), 1):
        words = line.split('#', 1)[0].split()
        if not words:
            continue
        if words[0] == 'node' and len(words) >= 3:
            head, _, tail = " ".join(words[1:]).partition('|')
            names = head.split()
            nodes.append(names[0])
            values[names[0]] = tuple(names[1:])
            parents[names[0]] = tuple(tail.split())
        elif words[0] == 'cpt' and ':' in words:
            split = words.index(':')
            rows.append((number, words[1], tuple(words[2:split]), words[split + 1:]))
        else:
            raise ValueError(f"Bad network line {number}: {line.strip()}")
    cpt = {n: np.zeros(tuple(len(values.get(p, ())) for p in parents[n]) + (len(values[n]),))
           for n in nodes}
    try:
        for number, node, combo, probs in rows:
            if len(combo) != len(parents[node]):
                raise ValueError(f"{node} has {len(parents[node])} parents")
            index = tuple(values[p].index(v) for p, v in zip(parents[node], combo))
            cpt[node][index] = [float(x) for x in probs]
    except (KeyError, ValueError) as e:
        raise ValueError(f"Bad cpt line {number}: {e}")
    return BayesNet(tuple(nodes), values, parents, cpt)


def joint_probability(b, assignment):
    """Product of CPT entries for a full assignment"""
    p = 1.0
    for node in b.order:
        p *= b.prob(node, assignment[node], assignment)
    return p


def bn_joint_enumerate(b, partial=None):
    """
    Marginal probability of a partial assignment by summing the joint

    Raises:
        ResourceLimitError: more than Config.MAX_BN_STATES joint states to sum
    """
    partial = dict(partial or {})
    for node, value in partial.items():
        if node not in b.values or value not in b.values[node]:
            raise ValueError(f"Invalid assignment {node}={value}")
    free = [n for n in b.nodes if n not in partial]
    states = 1
    for n in free:
        states *= len(b.values[n])
    if states > Config.MAX_BN_STATES:
        raise ResourceLimitError(f"Enumeration over {states} states exceeds {Config.MAX_BN_STATES}")
    total = 0.0
    for combo in itertools.product(*(b.values[n] for n in free)):
        assignment = dict(partial)
        assignment.update(zip(free, combo))
        total += joint_probability(b, assignment)
    return total


def _variable_names(b):
    names = {}
    used = set()
    for k, node in enumerate(b.nodes):
        name = node.capitalize() if _PLAIN.match(node) else f"X{k}"
        while name in used:
            name += "_"
        used.add(name)
        names[node] = name
    return names


def _list_text(items):
    return "[" + ",".join(items) + "]"


def _cpt_switch_names(b, node):
    for combo in itertools.product(*(b.values[p] for p in b.parents[node])):
        yield combo, compound('par', atom(node), make_list(atom(v) for v in combo))


def _values_lines(b):
    lines = []
    for node in b.nodes:
        values = ",".join(format_atom(v) for v in b.values[node])
        lines.append(f"values(par({format_atom(node)},_),[{values}]).")
    return lines


def set_bn_parameters(b, params):
    """Copy every CPT row into the par(node, parent values) switches"""
    for node in b.nodes:
        for combo, name in _cpt_switch_names(b, node):
            index = tuple(b.values[p].index(v) for p, v in zip(b.parents[node], combo))
            params.set_row(name, b.cpt[node][index])
    return params


def encode_bn_text(b):
    """values declarations plus the single bn/N clause, body in topological order"""
    var = _variable_names(b)
    body = []
    for node in b.order:
        ps = _list_text(var[p] for p in b.parents[node])
        body.append(f"msw(par({format_atom(node)},{ps}),once,{var[node]})")
    head = f"bn({','.join(var[n] for n in b.nodes)})"
    return "\n".join(_values_lines(b) + [f"{head} :- {', '.join(body)}."]) + "\n"


def marginal_clause(b, query, name='bn2'):
    """Clause summing out every node not in query, e.g. bn2(C,D) :- bn(A,B,C,D,E,F)."""
    var = _variable_names(b)
    for node in query:
        if node not in var:
            raise ValueError(f"Unknown query node {node}")
    head_args = ",".join(var[n] for n in query)
    return f"{format_atom(name)}({head_args}) :- bn({','.join(var[n] for n in b.nodes)}).\n"


def encode_bn(b, marginals=()):
    """
    Program for the joint distribution of b

    marginals: (name, query nodes) pairs, each adding a marginalization clause
    """
    text = encode_bn_text(b) + "".join(marginal_clause(b, q, n) for n, q in marginals)
    program = parse_program(text)
    set_bn_parameters(b, program.params)
    return program


def bn_goal(b, assignment, name='bn', nodes=None):
    nodes = b.nodes if nodes is None else nodes
    return compound(name, *(atom(assignment[n]) for n in nodes))


def check_singly_connected(b):
    """Raise ValueError unless the undirected skeleton is a forest"""
    root = {n: n for n in b.nodes}

    def find(n):
        while root[n] != n:
            root[n] = root[root[n]]
            n = root[n]
        return n

    for node in b.nodes:
        for p in b.parents[node]:
            a, c = find(node), find(p)
            if a == c:
                raise ValueError(f"Network is multiply connected: edge {p} -> {node} closes a loop")
            root[a] = c


def _edge_predicate(b, x, y):
    if all(_PLAIN.match(n) for n in b.nodes):
        return f"call_{x}_{y}"
    return f"call_{b.nodes.index(x)}_{b.nodes.index(y)}"


def _value_predicate(b, x):
    if all(_PLAIN.match(n) for n in b.nodes):
        return f"val_{x}"
    return f"val_{b.nodes.index(x)}"


def compile_bn_polytree(b, evidence):
    """
    Tabled program computing P(evidence = u) as tbn(u)

    Rooting the skeleton at the evidence node, each edge X-Y pointing away from
    the root gets one call predicate. Going up to a parent Y it visits Y's own
    parents, draws Y, then descends into Y's other children; going down to a
    child Y it visits Y's other parents, draws Y given X, then descends.

    Raises:
        ValueError: the network is not singly connected or evidence is unknown
    """
    if evidence not in b.nodes:
        raise ValueError(f"Unknown evidence node {evidence}")
    check_singly_connected(b)
    var = {n: f"V{k}" for k, n in enumerate(b.nodes)}
    clauses = []
    value_facts = set()
    tables = ["tbn/1"]

    def draw(y):
        ps = _list_text(var[p] for p in b.parents[y])
        return f"msw(par({format_atom(y)},{ps}),once,{var[y]})"

    def visit_parent(x, p):
        value_facts.add(p)
        return [f"{_value_predicate(b, p)}({var[p]})", f"{_edge_predicate(b, x, p)}({var[p]})"]

    def visit_child(x, c):
        return [f"{_edge_predicate(b, x, c)}({var[x]})"]

    def emit(x, y, upward):
        """Clause for call_x_y, then recurse into y's neighbours other than x"""
        tables.append(f"{_edge_predicate(b, x, y)}/1")
        body = []
        for p in b.parents[y]:
            if p != x:
                body.extend(visit_parent(y, p))
        body.append(draw(y))
        for c in b.children(y):
            if c != x:
                body.extend(visit_child(y, c))
        head_var = var[y] if upward else var[x]
        clauses.append(f"{_edge_predicate(b, x, y)}({head_var}) :- {', '.join(body)}.")
        for p in b.parents[y]:
            if p != x:
                emit(y, p, True)
        for c in b.children(y):
            if c != x:
                emit(y, c, False)

    u = evidence
    body = []
    for p in b.parents[u]:
        body.extend(visit_parent(u, p))
    body.append(draw(u))
    for c in b.children(u):
        body.extend(visit_child(u, c))
    clauses.insert(0, f"tbn({var[u]}) :- {', '.join(body)}.")
    for p in b.parents[u]:
        emit(u, p, True)
    for c in b.children(u):
        emit(u, c, False)

    facts = [f"{_value_predicate(b, n)}({format_atom(v)})."
             for n in b.nodes if n in value_facts for v in b.values[n]]
    text = "\n".join(_values_lines(b) + [f":- table {', '.join(tables)}."] + clauses + facts) + "\n"
    program = parse_program(text)
    set_bn_parameters(b, program.params)
    logger.debug(f"Compiled polytree rooted at {evidence}: {len(clauses)} clauses")
    return program


def _sum_predicate(b, y):
    if all(_PLAIN.match(n) for n in b.nodes):
        return f"sum_{y}"
    return f"sum_{b.nodes.index(y)}"


def compile_bn_elimination(b, query, order=None, name='ve'):
    """
    Tabled program computing the marginal of the query nodes as name(values...)

    Every CPT is a factor over its node and parents. Eliminating Y in `order`
    gathers the factors mentioning Y into one clause for sum_Y, whose head
    keeps their other variables; Y stays local to the body and is summed out.
    The factors left after the last elimination form the body of the top
    clause. A body variable no goal can bind before a tabled call gets a
    val_Y/1 generator. The default order is reverse topological.

    Raises:
        ValueError: unknown or repeated query node, or `order` is not a
            permutation of the non-query nodes
    """
    query = tuple(query)
    if not query:
        raise ValueError("At least one query node is needed")
    for node in query:
        if node not in b.nodes:
            raise ValueError(f"Unknown query node {node}")
    if len(set(query)) != len(query):
        raise ValueError("Query nodes must be distinct")
    hidden = [n for n in b.order if n not in query]
    order = tuple(reversed(hidden)) if order is None else tuple(order)
    if sorted(order) != sorted(hidden):
        raise ValueError(f"Elimination order must list each of {', '.join(hidden)} once")

    var = _variable_names(b)
    value_facts = set()
    clauses = []
    tables = [f"{format_atom(name)}/{len(query)}"]

    def scope(factor):
        kind, head, nodes = factor
        return set(nodes) | ({head} if kind == 'cpt' else set())

    def inputs(factor):
        return set(factor[2])

    def goal(factor):
        kind, head, nodes = factor
        if kind == 'cpt':
            ps = _list_text(var[p] for p in nodes)
            return f"msw(par({format_atom(head)},{ps}),once,{var[head]})"
        return f"{head}({','.join(var[n] for n in nodes)})" if nodes else head

    def body(factors, bound):
        """Goals for factors, each called once its inputs are bound"""
        bound = set(bound)
        remaining = list(factors)
        goals = []
        while remaining:
            ready = next((f for f in remaining if inputs(f) <= bound), remaining[0])
            for node in b.nodes:
                if node in inputs(ready) - bound:
                    goals.append(f"{_value_predicate(b, node)}({var[node]})")
                    value_facts.add(node)
                    bound.add(node)
            goals.append(goal(ready))
            bound |= scope(ready)
            remaining.remove(ready)
        return goals

    factors = [('cpt', node, b.parents[node]) for node in b.order]
    for y in order:
        touching = [f for f in factors if y in scope(f)]
        factors = [f for f in factors if y not in scope(f)]
        kept = set().union(*(scope(f) for f in touching)) - {y}
        head_nodes = tuple(n for n in b.nodes if n in kept)
        predicate = _sum_predicate(b, y)
        head = goal(('sum', predicate, head_nodes))
        clauses.append(f"{head} :- {', '.join(body(touching, head_nodes))}.")
        tables.append(f"{predicate}/{len(head_nodes)}")
        factors.append(('sum', predicate, head_nodes))

    top = f"{format_atom(name)}({','.join(var[n] for n in query)})"
    clauses.insert(0, f"{top} :- {', '.join(body(factors, query))}.")
    facts = [f"{_value_predicate(b, n)}({format_atom(v)})."
             for n in b.nodes if n in value_facts for v in b.values[n]]
    text = "\n".join(_values_lines(b) + [f":- table {', '.join(tables)}."] + clauses + facts) + "\n"
    program = parse_program(text)
    set_bn_parameters(b, program.params)
    logger.debug(f"Compiled elimination of {', '.join(order) or 'nothing'} for {', '.join(query)}")
    return program


def random_cpts(nodes, values, parents, rng):
    cpt = {}
    for node in nodes:
        shape = tuple(len(values[p]) for p in parents[node]) + (len(values[node]),)
        raw = 1.0 - rng.random(shape)
        cpt[node] = raw / raw.sum(axis=-1, keepdims=True)
    return cpt


def random_dag(n_nodes, seed=None, max_parents=2, arity=2):
    """Random DAG over x1..xn, each node drawing parents among earlier nodes"""
    rng = np.random.default_rng(seed)
    nodes = tuple(f"x{i + 1}" for i in range(n_nodes))
    values = {n: tuple(f"v{j}" for j in range(arity)) for n in nodes}
    parents = {}
    for i, node in enumerate(nodes):
        k = int(rng.integers(0, min(i, max_parents) + 1))
        chosen = sorted(rng.choice(i, size=k, replace=False)) if k else []
        parents[node] = tuple(nodes[j] for j in chosen)
    return BayesNet(nodes, values, parents, random_cpts(nodes, values, parents, rng))


def random_polytree(n_nodes, seed=None, arity=2):
    """Random tree skeleton with random edge directions"""
    rng = np.random.default_rng(seed)
    nodes = tuple(f"x{i + 1}" for i in range(n_nodes))
    values = {n: tuple(f"v{j}" for j in range(arity)) for n in nodes}
    parents = {n: [] for n in nodes}
    for i in range(1, n_nodes):
        j = int(rng.integers(0, i))
        if rng.random() < 0.5:
            parents[nodes[i]].append(nodes[j])
        else:
            parents[nodes[j]].append(nodes[i])
    parents = {n: tuple(ps) for n, ps in parents.items()}
    return BayesNet(nodes, values, parents, random_cpts(nodes, values, parents, rng))


def chain(n_nodes, seed=None):
    """x1 -> x2 -> ... -> xn with binary nodes"""
    rng = np.random.default_rng(seed)
    nodes = tuple(f"x{i + 1}" for i in range(n_nodes))
    values = {n: ('t', 'f') for n in nodes}
    parents = {n: (nodes[i - 1],) if i else () for i, n in enumerate(nodes)}
    return BayesNet(nodes, values, parents, random_cpts(nodes, values, parents, rng))
