"""
Switch declarations and the parameter store

A declaration pattern such as tr(_) covers every ground switch name that it
matches. Each distinct ground name owns its own probability row; rows for
names matching one pattern start from the same initial vector.
"""
import os
import sys
from dataclasses import dataclass

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config
from core.errors import DeclarationError, UnknownSwitchError, ProgramSyntaxError
from core.reader import TermReader
from core.terms import is_ground, unify, format_term, term_sort_key
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class SwitchDeclaration:
    """values(Pattern, [v1, ..., vk])"""

    pattern: object
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise DeclarationError(
                f"Empty value set for switch {format_term(self.pattern)}")
        if len(set(self.values)) != len(self.values):
            raise DeclarationError(
                f"Duplicate values in declaration for {format_term(self.pattern)}")
        for value in self.values:
            if not is_ground(value):
                raise DeclarationError(
                    f"Non-ground value {format_term(value)} for {format_term(self.pattern)}")

    def matches(self, name):
        return unify(self.pattern, name) is not None

    def __str__(self):
        values = ",".join(format_term(v, 999) for v in self.values)
        return f"values({format_term(self.pattern, 999)},[{values}])"


def find_declaration(declarations, name):
    """The unique declaration whose pattern matches a ground switch name"""
    found = [d for d in declarations if d.matches(name)]
    if not found:
        raise UnknownSwitchError(f"No values declaration matches switch {format_term(name)}")
    if len(found) > 1:
        raise DeclarationError(
            f"Switch {format_term(name)} matches {len(found)} declarations")
    return found[0]


def normalized(vector):
    """Scale to sum 1 and recompute the last entry as 1 - sum(others)"""
    vector = np.asarray(vector, dtype=float)
    total = vector.sum()
    if total <= 0:
        raise DeclarationError("Cannot normalize a row with zero total mass")
    result = vector / total
    if len(result) > 1:
        result[-1] = max(0.0, 1.0 - result[:-1].sum())
    else:
        result[0] = 1.0
    return result


class ParameterStore:
    """θ rows keyed by ground switch name"""

    def __init__(self, declarations, mode=None, seed=None):
        self.declarations = tuple(declarations)
        self.mode = (mode or Config.DEFAULT_INIT_MODE).lower()
        if not Config.is_valid_init_mode(self.mode):
            raise ValueError(
                f"Invalid init mode: {mode}. Must be one of: {', '.join(Config.INIT_MODES)}")
        self.seed = seed
        self._rows = {}
        self._decl_cache = {}
        self._defaults = self._initial_vectors()
        for decl in self.declarations:
            if is_ground(decl.pattern):
                self.row(decl.pattern)

    def _initial_vectors(self):
        defaults = []
        rng = np.random.default_rng(self.seed) if self.mode == 'random' else None
        for decl in self.declarations:
            k = len(decl.values)
            if rng is None:
                defaults.append(normalized(np.ones(k)))
            else:
                # 1 - U(0,1] keeps every draw strictly positive
                defaults.append(normalized(1.0 - rng.random(k)))
        return defaults

    def declaration_for(self, name):
        decl = self._decl_cache.get(name)
        if decl is None:
            decl = find_declaration(self.declarations, name)
            self._decl_cache[name] = decl
        return decl

    def values(self, name):
        return self.declaration_for(name).values

    def row(self, name):
        """Probability row of a ground switch name, registered on first use"""
        row = self._rows.get(name)
        if row is None:
            if not is_ground(name):
                raise UnknownSwitchError(f"Switch name {format_term(name)} is not ground")
            decl = self.declaration_for(name)
            row = self._defaults[self.declarations.index(decl)].copy()
            self._rows[name] = row
        return row

    def prob(self, name, value):
        values = self.values(name)
        try:
            return float(self.row(name)[values.index(value)])
        except ValueError:
            raise UnknownSwitchError(
                f"{format_term(value)} is not a value of switch {format_term(name)}")

    def set_row(self, name, probabilities):
        """Assign a row as given; sum checks are left to validation"""
        values = self.values(name)
        row = np.asarray(probabilities, dtype=float)
        if row.shape != (len(values),):
            raise DeclarationError(
                f"Switch {format_term(name)} has {len(values)} values, got {row.shape[0]} probabilities")
        self._rows[name] = row.copy()

    def set_distribution(self, name, mapping):
        """Assign a row from a value -> probability mapping; missing values get 0"""
        values = self.values(name)
        unknown = [v for v in mapping if v not in values]
        if unknown:
            raise DeclarationError(
                f"{format_term(unknown[0])} is not a value of switch {format_term(name)}")
        self.set_row(name, [mapping.get(v, 0.0) for v in values])

    def names(self):
        return sorted(self._rows, key=term_sort_key)

    def items(self):
        """(name, value, probability) triples in canonical order"""
        for name in self.names():
            for value, p in zip(self.values(name), self._rows[name]):
                yield name, value, float(p)

    def snapshot(self):
        return {(name, value): p for name, value, p in self.items()}

    def copy(self):
        clone = ParameterStore.__new__(ParameterStore)
        clone.declarations = self.declarations
        clone.mode = self.mode
        clone.seed = self.seed
        clone._decl_cache = dict(self._decl_cache)
        clone._defaults = self._defaults
        clone._rows = {name: row.copy() for name, row in self._rows.items()}
        return clone

    def row_violations(self, tolerance=None):
        """Names whose row is outside [0,1] or does not sum to 1"""
        tolerance = Config.SUM_TOLERANCE if tolerance is None else tolerance
        bad = []
        for name in self.names():
            row = self._rows[name]
            if np.any(row < 0) or np.any(row > 1) or abs(row.sum() - 1.0) > tolerance:
                bad.append((name, float(row.sum())))
        return bad

    def __len__(self):
        return len(self._rows)


def init_parameters(program, mode='uniform', seed=None):
    """Fresh store for a program: uniform rows or seeded random rows"""
    store = ParameterStore(program.switch_decls, mode=mode, seed=seed)
    logger.debug(f"Initialized {len(program.switch_decls)} switch declarations ({store.mode})")
    return store


def load_parameters(text, store):
    """
    Read `param <switch> <value> <probability>` lines into a store

    Values not listed get probability 0; the last value of each touched row is
    recomputed as 1 - sum(others).
    """
    rows = {}
    order = []
    reader = TermReader(text)
    while not reader.at_eof():
        token = reader.advance()
        if token.kind != 'atom' or token.value != 'param':
            reader.error("expected 'param'", token)
        reader.reset_variables()
        name = reader.read_term(999)
        value = reader.read_term(999)
        probability = reader.read_number()
        if reader.peek().kind == 'end':
            reader.advance()
        if not is_ground(name) or not is_ground(value):
            raise ProgramSyntaxError(
                f"Parameter line for {format_term(name)} is not ground", token.line, token.column)
        if not 0.0 <= probability <= 1.0:
            raise DeclarationError(
                f"Probability {probability} for {format_term(name)} {format_term(value)} outside [0,1]")
        if name not in rows:
            rows[name] = {}
            order.append(name)
        rows[name][value] = probability

    for name in order:
        values = store.values(name)
        mapping = rows[name]
        others = sum(mapping.get(v, 0.0) for v in values[:-1])
        if others > 1.0 + Config.SUM_TOLERANCE:
            raise DeclarationError(
                f"Probabilities for switch {format_term(name)} sum to {others} > 1")
        mapping = dict(mapping)
        mapping[values[-1]] = max(0.0, 1.0 - others)
        store.set_distribution(name, mapping)
    logger.info(f"Loaded parameters for {len(order)} switches")
    return store


def format_parameters(store):
    lines = [f"param {format_term(name, 999)} {format_term(value, 999)} {p!r}"
             for name, value, p in store.items()]
    return "\n".join(lines) + ("\n" if lines else "")
