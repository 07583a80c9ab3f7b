"""
Hidden Markov models: a Baum-Welch reference and the logic-program encoding

The reference works on plain numpy arrays and shares nothing with the
support-graph code, so agreement between the two is a real check.
"""
import os
import sys
from dataclasses import dataclass

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config
from core.errors import ZeroProbabilityError
from core.program import parse_program, ObservationSet
from core.terms import atom, compound, make_list, format_term
from utils.logger import setup_logger

logger = setup_logger(__name__)


def _check_rows(label, matrix):
    matrix = np.atleast_2d(matrix)
    if np.any(matrix < 0) or np.any(matrix > 1):
        raise ValueError(f"{label} has entries outside [0, 1]")
    sums = matrix.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > Config.SUM_TOLERANCE * 10):
        raise ValueError(f"{label} rows must sum to 1, got {sums.tolist()}")


@dataclass
class HmmSpec:
    states: tuple
    alphabet: tuple
    initial: np.ndarray  # (N,)
    transition: np.ndarray  # (N, N)
    emission: np.ndarray  # (N, M)

    def __post_init__(self):
        self.states = tuple(self.states)
        self.alphabet = tuple(self.alphabet)
        self.initial = np.asarray(self.initial, dtype=float)
        self.transition = np.asarray(self.transition, dtype=float)
        self.emission = np.asarray(self.emission, dtype=float)
        n, m = len(self.states), len(self.alphabet)
        if n == 0 or m == 0:
            raise ValueError("An HMM needs at least one state and one symbol")
        if self.initial.shape != (n,) or self.transition.shape != (n, n) \
                or self.emission.shape != (n, m):
            raise ValueError(f"Array shapes do not match {n} states and {m} symbols")
        _check_rows("initial distribution", self.initial)
        _check_rows("transition matrix", self.transition)
        _check_rows("emission matrix", self.emission)

    @property
    def n_states(self):
        return len(self.states)

    @classmethod
    def uniform(cls, n_states, alphabet):
        n, m = n_states, len(alphabet)
        return cls(tuple(f"s{i}" for i in range(n)), alphabet,
                   np.full(n, 1.0 / n), np.full((n, n), 1.0 / n), np.full((n, m), 1.0 / m))

    @classmethod
    def random(cls, n_states, alphabet, seed=None):
        """Random rows with strictly positive entries"""
        rng = np.random.default_rng(seed)
        n, m = n_states, len(alphabet)

        def rows(shape):
            raw = 1.0 - rng.random(shape)
            return raw / raw.sum(axis=-1, keepdims=True)

        return cls(tuple(f"s{i}" for i in range(n)), alphabet,
                   rows(n), rows((n, n)), rows((n, m)))

    def symbol_indices(self, string):
        try:
            return [self.alphabet.index(c) for c in string]
        except ValueError:
            raise ValueError(f"String {' '.join(string)} uses symbols outside {self.alphabet}")

    def sample(self, length, rng):
        """One string of the given length"""
        state = rng.choice(self.n_states, p=self.initial)
        symbols = []
        for _ in range(length):
            symbols.append(self.alphabet[rng.choice(len(self.alphabet), p=self.emission[state])])
            state = rng.choice(self.n_states, p=self.transition[state])
        return tuple(symbols)

    def sample_strings(self, length, count, seed=None):
        rng = np.random.default_rng(seed)
        return [self.sample(length, rng) for _ in range(count)]

    def string_probability(self, string):
        alpha, _ = forward(self, self.symbol_indices(string))
        return float(alpha[-1].sum())

    def apply_to(self, params):
        """Write these rows into a parameter store of an encoded program"""
        params.set_row(atom('init'), self.initial)
        for i, s in enumerate(self.states):
            params.set_row(compound('tr', atom(s)), self.transition[i])
            params.set_row(compound('out', atom(s)), self.emission[i])
        return params

    @classmethod
    def from_params(cls, params, states, alphabet):
        return cls(states, alphabet,
                   params.row(atom('init')),
                   np.array([params.row(compound('tr', atom(s))) for s in states]),
                   np.array([params.row(compound('out', atom(s))) for s in states]))

    @classmethod
    def from_snapshot(cls, snapshot, states, alphabet):
        """From a {(switch, value): probability} mapping such as a learning-history entry"""
        def row(name, values):
            return [snapshot[(name, atom(v))] for v in values]
        return cls(states, alphabet,
                   row(atom('init'), states),
                   [row(compound('tr', atom(s)), states) for s in states],
                   [row(compound('out', atom(s)), alphabet) for s in states])

    def to_text(self):
        lines = [f"states {' '.join(self.states)}",
                 f"alphabet {' '.join(self.alphabet)}",
                 "init " + " ".join(repr(float(p)) for p in self.initial)]
        for i, s in enumerate(self.states):
            lines.append(f"trans {s} " + " ".join(repr(float(p)) for p in self.transition[i]))
        for i, s in enumerate(self.states):
            lines.append(f"emit {s} " + " ".join(repr(float(p)) for p in self.emission[i]))
        return "\n".join(lines) + "\n"


def parse_hmm(text):
    """Read the line format written by HmmSpec.to_text"""
    fields = {'trans': {}, 'emit': {}}
    for number, line in enumerate(text.splitlines(), 1):
        words = line.split('#', 1)[0].split()
        if not words:
            continue
        key = words[0]
        try:
            if key in ('states', 'alphabet'):
                fields[key] = tuple(words[1:])
            elif key == 'init':
                fields[key] = [float(w) for w in words[1:]]
            elif key in ('trans', 'emit'):
                fields[key][words[1]] = [float(w) for w in words[2:]]
            else:
                raise ValueError(f"unknown keyword {key}")
        except (ValueError, IndexError) as e:
            raise ValueError(f"Bad HMM line {number}: {line.strip()} ({e})")
    states = fields.get('states')
    if not states or 'alphabet' not in fields or 'init' not in fields:
        raise ValueError("HMM text needs states, alphabet and init lines")
    try:
        transition = [fields['trans'][s] for s in states]
        emission = [fields['emit'][s] for s in states]
    except KeyError as e:
        raise ValueError(f"Missing trans or emit row for state {e}")
    return HmmSpec(states, fields['alphabet'], fields['init'], transition, emission)


def forward(h, obs):
    L = len(obs)
    alpha = np.zeros((L, h.n_states))
    alpha[0] = h.initial * h.emission[:, obs[0]]
    for t in range(1, L):
        alpha[t] = (alpha[t - 1] @ h.transition) * h.emission[:, obs[t]]
    return alpha, float(alpha[-1].sum())


def backward(h, obs):
    L = len(obs)
    beta = np.ones((L, h.n_states))
    for t in range(L - 2, -1, -1):
        beta[t] = h.transition @ (h.emission[:, obs[t + 1]] * beta[t + 1])
    return beta


def _normalize_rows(counts, old):
    updated = old.copy()
    totals = counts.sum(axis=-1)
    for i in np.ndindex(totals.shape):
        if totals[i] > 0:
            updated[i] = counts[i] / totals[i]
    return updated


def baum_welch_step(h, data):
    """
    One Baum-Welch iteration over (string, count) pairs

    The transition out of the last position is counted as well, since the
    encoded program draws it before the end test. Rows with no expected
    visits keep their old values.

    Returns:
        (updated HmmSpec, log-likelihood before the update)
    """
    n, m = h.n_states, len(h.alphabet)
    init_counts = np.zeros(n)
    trans_counts = np.zeros((n, n))
    emit_counts = np.zeros((n, m))
    loglik = 0.0
    for string, count in data:
        obs = h.symbol_indices(string)
        if not obs:
            raise ValueError("Empty strings are not supported")
        alpha, p = forward(h, obs)
        if p <= 0.0:
            raise ZeroProbabilityError(f"String {' '.join(string)} has probability 0")
        beta = backward(h, obs)
        loglik += count * np.log(p)
        gamma = alpha * beta / p
        init_counts += count * gamma[0]
        for t in range(len(obs) - 1):
            xi = alpha[t][:, None] * h.transition * (h.emission[:, obs[t + 1]] * beta[t + 1])[None, :] / p
            trans_counts += count * xi
        trans_counts += count * gamma[-1][:, None] * h.transition
        for t, o in enumerate(obs):
            emit_counts[:, o] += count * gamma[t]
    updated = HmmSpec(h.states, h.alphabet,
                      _normalize_rows(init_counts, h.initial),
                      _normalize_rows(trans_counts, h.transition),
                      _normalize_rows(emit_counts, h.emission))
    return updated, float(loglik)


def hmm_program_text(h, length):
    """Tabled HMM program over strings of a fixed length"""
    states = ",".join(h.states)
    symbols = ",".join(format_term(atom(c)) for c in h.alphabet)
    return (
        f"values(init,[{states}]).\n"
        f"values(tr(_),[{states}]).\n"
        f"values(out(_),[{symbols}]).\n"
        ":- table hmm/1, hmm/3.\n"
        "hmm(Cs) :- msw(init,once,S), hmm(1,S,Cs).\n"
        f"hmm(T,S,[C|Cs]) :- T =< {length}, msw(out(S),T,C), msw(tr(S),T,Next), "
        "T1 is T + 1, hmm(T1,Next,Cs).\n"
        f"hmm(T,_,[]) :- T > {length}.\n"
    )


def hmm_program(h, length):
    """Encoded program with h's rows as its parameters"""
    program = parse_program(hmm_program_text(h, length))
    h.apply_to(program.params)
    return program


def hmm_goal(string):
    return compound('hmm', make_list(atom(c) for c in string))


def hmm_observations(data):
    """ObservationSet from strings or (string, count) pairs"""
    entries = []
    for item in data:
        string, count = item if isinstance(item, tuple) and len(item) == 2 \
            and isinstance(item[1], int) else (item, 1)
        entries.append((hmm_goal(string), count))
    return ObservationSet(tuple(entries))


def count_strings(strings):
    """Distinct strings with counts, first-occurrence order"""
    counts = {}
    for s in strings:
        counts[tuple(s)] = counts.get(tuple(s), 0) + 1
    return list(counts.items())
