"""
CNF grammars: an Inside-Outside reference and logic-program encoders

Charts are numpy arrays indexed [start, end, nonterminal] over half-open
spans. The first nonterminal is the start symbol.
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

STYLES = ('threaded', 'span')


@dataclass
class CnfGrammar:
    nonterminals: tuple
    terminals: tuple
    binary: np.ndarray  # (N, N, N): P(i -> j k)
    lexical: np.ndarray  # (N, M): P(i -> w)

    def __post_init__(self):
        self.nonterminals = tuple(self.nonterminals)
        self.terminals = tuple(self.terminals)
        self.binary = np.asarray(self.binary, dtype=float)
        self.lexical = np.asarray(self.lexical, dtype=float)
        n, m = len(self.nonterminals), len(self.terminals)
        if n == 0 or m == 0:
            raise ValueError("A grammar needs at least one nonterminal and one terminal")
        if len(set(self.nonterminals) | set(self.terminals)) != n + m:
            raise ValueError("Nonterminal and terminal names must be distinct")
        if self.binary.shape != (n, n, n) or self.lexical.shape != (n, m):
            raise ValueError(f"Rule arrays do not match {n} nonterminals and {m} terminals")
        if np.any(self.binary < 0) or np.any(self.lexical < 0):
            raise ValueError("Rule probabilities must be nonnegative")
        sums = self.binary.sum(axis=(1, 2)) + self.lexical.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > Config.SUM_TOLERANCE * 10):
            raise ValueError(f"Rule probabilities per nonterminal must sum to 1, got {sums.tolist()}")

    @property
    def start(self):
        return self.nonterminals[0]

    @property
    def size(self):
        return len(self.nonterminals)

    @classmethod
    def from_rows(cls, nonterminals, terminals, rows):
        """Build from per-nonterminal rows laid out as in rule_values()"""
        n, m = len(nonterminals), len(terminals)
        rows = np.asarray(rows, dtype=float).reshape(n, n * n + m)
        return cls(nonterminals, terminals,
                   rows[:, :n * n].reshape(n, n, n), rows[:, n * n:])

    @classmethod
    def uniform(cls, nonterminals, terminals):
        n, m = len(nonterminals), len(terminals)
        return cls.from_rows(nonterminals, terminals, np.full((n, n * n + m), 1.0 / (n * n + m)))

    @classmethod
    def random(cls, nonterminals, terminals, seed=None):
        """Every binary and lexical rule present with a random positive probability"""
        rng = np.random.default_rng(seed)
        n, m = len(nonterminals), len(terminals)
        raw = 1.0 - rng.random((n, n * n + m))
        return cls.from_rows(nonterminals, terminals, raw / raw.sum(axis=1, keepdims=True))

    def rows(self):
        n = self.size
        return np.concatenate([self.binary.reshape(n, n * n), self.lexical], axis=1)

    def rule_values(self):
        """Switch values in row order: [j,k] pairs first, then terminals"""
        pairs = [make_list([atom(j), atom(k)]) for j in self.nonterminals for k in self.nonterminals]
        return pairs + [atom(w) for w in self.terminals]

    def apply_to(self, params):
        for i, row in zip(self.nonterminals, self.rows()):
            params.set_row(atom(i), row)
        return params

    @classmethod
    def from_snapshot(cls, snapshot, nonterminals, terminals):
        template = cls.uniform(nonterminals, terminals)
        values = template.rule_values()
        rows = [[snapshot[(atom(i), v)] for v in values] for i in nonterminals]
        return cls.from_rows(nonterminals, terminals, rows)

    def to_text(self):
        lines = [f"nonterminals {' '.join(self.nonterminals)}",
                 f"terminals {' '.join(self.terminals)}"]
        for a, i in enumerate(self.nonterminals):
            for b, j in enumerate(self.nonterminals):
                for c, k in enumerate(self.nonterminals):
                    if self.binary[a, b, c] > 0:
                        lines.append(f"rule {i} -> {j} {k} {float(self.binary[a, b, c])!r}")
            for d, w in enumerate(self.terminals):
                if self.lexical[a, d] > 0:
                    lines.append(f"rule {i} -> {w} {float(self.lexical[a, d])!r}")
        return "\n".join(lines) + "\n"


def parse_grammar(text):
    """Read the line format written by CnfGrammar.to_text; absent rules get 0"""
    nonterminals = terminals = None
    rules = []
    for number, line in enumerate(text.splitlines(), 1):
        words = line.split('#', 1)[0].split()
        if not words:
            continue
        if words[0] == 'nonterminals':
            nonterminals = tuple(words[1:])
        elif words[0] == 'terminals':
            terminals = tuple(words[1:])
        elif words[0] == 'rule' and len(words) in (5, 6) and words[2] == '->':
            rules.append((number, words[1], tuple(words[3:-1]), words[-1]))
        else:
            raise ValueError(f"Bad grammar line {number}: {line.strip()}")
    if not nonterminals or not terminals:
        raise ValueError("Grammar text needs nonterminals and terminals lines")
    n, m = len(nonterminals), len(terminals)
    binary = np.zeros((n, n, n))
    lexical = np.zeros((n, m))
    try:
        for number, lhs, rhs, p in rules:
            i = nonterminals.index(lhs)
            if len(rhs) == 2:
                binary[i, nonterminals.index(rhs[0]), nonterminals.index(rhs[1])] = float(p)
            else:
                lexical[i, terminals.index(rhs[0])] = float(p)
    except ValueError as e:
        raise ValueError(f"Bad rule on line {number}: {e}")
    return CnfGrammar(nonterminals, terminals, binary, lexical)


def _word_indices(g, sentence):
    try:
        return [g.terminals.index(w) for w in sentence]
    except ValueError:
        raise ValueError(f"Sentence {' '.join(sentence)} uses words outside {g.terminals}")


def inside_chart(g, words):
    L = len(words)
    e = np.zeros((L + 1, L + 1, g.size))
    for d, w in enumerate(words):
        e[d, d + 1] = g.lexical[:, w]
    for length in range(2, L + 1):
        for s in range(0, L - length + 1):
            t = s + length
            for r in range(s + 1, t):
                e[s, t] += np.einsum('ijk,j,k->i', g.binary, e[s, r], e[r, t])
    return e


def outside_chart(g, words, e):
    L = len(words)
    f = np.zeros((L + 1, L + 1, g.size))
    f[0, L, 0] = 1.0
    for length in range(L, 1, -1):
        for s in range(0, L - length + 1):
            t = s + length
            for r in range(s + 1, t):
                f[s, r] += np.einsum('i,ijk,k->j', f[s, t], g.binary, e[r, t])
                f[r, t] += np.einsum('i,ijk,j->k', f[s, t], g.binary, e[s, r])
    return f


def sentence_probability(g, sentence):
    words = _word_indices(g, sentence)
    if not words:
        return 0.0
    return float(inside_chart(g, words)[0, len(words), 0])


def inside_outside_step(g, data):
    """
    One Inside-Outside iteration over (sentence, count) pairs

    Returns:
        (updated CnfGrammar, log-likelihood before the update)
    """
    binary_counts = np.zeros_like(g.binary)
    lexical_counts = np.zeros_like(g.lexical)
    loglik = 0.0
    for sentence, count in data:
        words = _word_indices(g, sentence)
        if not words:
            raise ValueError("Empty sentences are not supported")
        L = len(words)
        e = inside_chart(g, words)
        p = e[0, L, 0]
        if p <= 0.0:
            raise ZeroProbabilityError(f"Sentence {' '.join(sentence)} has no parse")
        f = outside_chart(g, words, e)
        loglik += count * np.log(p)
        weight = count / p
        for length in range(2, L + 1):
            for s in range(0, L - length + 1):
                t = s + length
                for r in range(s + 1, t):
                    binary_counts += weight * np.einsum('i,ijk,j,k->ijk', f[s, t], g.binary, e[s, r], e[r, t])
        for d, w in enumerate(words):
            lexical_counts[:, w] += weight * f[d, d + 1] * g.lexical[:, w]

    totals = binary_counts.sum(axis=(1, 2)) + lexical_counts.sum(axis=1)
    binary = g.binary.copy()
    lexical = g.lexical.copy()
    for i in range(g.size):
        if totals[i] > 0:
            binary[i] = binary_counts[i] / totals[i]
            lexical[i] = lexical_counts[i] / totals[i]
    return CnfGrammar(g.nonterminals, g.terminals, binary, lexical), float(loglik)


def _values_lines(g):
    values = ",".join(format_term(v, 999) for v in g.rule_values())
    return "".join(f"values({i},[{values}]).\n" for i in g.nonterminals)


def pcfg_program_text(g, style='threaded'):
    """
    Program for g with a pcfg/1 top predicate

    threaded: each node's trial-id is its preorder position, computed before
    the call so table atoms stay ground. A bound sentence is parsed by the
    tabled q/5; an unbound one is generated by g/7, which threads the next
    free trial-id and a difference list and checks spans last, so sampled
    explanations are explanations of the parse.
    span: trial-ids are the spans themselves. Spans are only known once a
    sentence is given, so this style parses but cannot generate.
    """
    if style == 'threaded':
        return (
            _values_lines(g)
            + ":- table pcfg/1, q/5.\n"
            f"pcfg(Ws) :- nonvar(Ws), length(Ws,D), q({g.start},0,D,0,Ws).\n"
            f"pcfg(Ws) :- var(Ws), g({g.start},0,D,0,_,Ws,[]), length(Ws,D).\n"
            "q(I,D0,D2,C0,Ws) :- between(D0,D1,D2), msw(I,C0,[J,K]), C1 is C0 + 1, "
            "q(J,D0,D1,C1,Ws), C2 is C0 + 2 * (D1 - D0), q(K,D1,D2,C2,Ws).\n"
            "q(I,D0,D2,C0,Ws) :- D2 is D0 + 1, word(D0,Ws,W), msw(I,C0,W).\n"
            "word(0,[W|_],W).\n"
            "word(D,[_|Ws],W) :- D > 0, D1 is D - 1, word(D1,Ws,W).\n"
            "g(I,D0,D2,C0,C2,L0,L2) :- msw(I,C0,[J,K]), C1 is C0 + 1, "
            "g(J,D0,D1,C1,C3,L0,L1), g(K,D1,D2,C3,C2,L1,L2), between(D0,D1,D2).\n"
            "g(I,D0,D2,C0,C2,[W|L],L) :- msw(I,C0,W), D2 is D0 + 1, C2 is C0 + 1.\n"
        )
    if style == 'span':
        return (
            _values_lines(g)
            + ":- table pcfg/1, q/4.\n"
            f"pcfg(Ws) :- length(Ws,D), q({g.start},0,D,Ws).\n"
            "q(I,D0,D2,Ws) :- between(D0,D1,D2), msw(I,[D0,D2],[J,K]), "
            "q(J,D0,D1,Ws), q(K,D1,D2,Ws).\n"
            "q(I,D0,D2,Ws) :- D2 is D0 + 1, word(D0,Ws,W), msw(I,D0,W).\n"
            "word(0,[W|_],W).\n"
            "word(D,[_|Ws],W) :- D > 0, D1 is D - 1, word(D1,Ws,W).\n"
        )
    raise ValueError(f"Invalid style: {style}. Must be one of: {', '.join(STYLES)}")


def pcfg_program(g, style='threaded'):
    program = parse_program(pcfg_program_text(g, style))
    g.apply_to(program.params)
    return program


def pcfg_goal(sentence):
    return compound('pcfg', make_list(atom(w) for w in sentence))


def pcfg_observations(data):
    """ObservationSet from (sentence, count) pairs"""
    return ObservationSet(tuple((pcfg_goal(s), c) for s, c in data))


def sample_sentences(g, count, max_length, seed=None):
    """
    Sentences drawn top-down from g, keeping those of length 1..max_length

    Derivations that grow past max_length words are abandoned and redrawn.
    """
    rng = np.random.default_rng(seed)
    n = g.size
    rows = g.rows()
    sentences = []
    attempts = 0
    while len(sentences) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ValueError(f"Could not draw {count} sentences of length <= {max_length}")
        words = []
        pending = [0]
        while pending and len(words) + len(pending) <= max_length:
            i = pending.pop()
            choice = rng.choice(rows.shape[1], p=rows[i])
            if choice < n * n:
                pending.extend([choice % n, choice // n])
            else:
                words.append(g.terminals[choice - n * n])
        if not pending:
            sentences.append(tuple(words))
    return sentences
