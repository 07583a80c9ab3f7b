"""
Parameterized logic programs: clauses, declarations, observations, validation
"""
import os
import sys
from dataclasses import dataclass, field

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from core.errors import ProgramSyntaxError, DeclarationError, UnknownSwitchError
from core.parameters import SwitchDeclaration, ParameterStore, find_declaration
from core.reader import TermReader, conjuncts
from core.terms import (Var, Int, Compound, is_ground, list_items, unify,
                        rename_term, format_term)
from utils.logger import setup_logger

logger = setup_logger(__name__)

SWITCH_KEY = ('msw', 3)
BUILTINS = frozenset([
    ('is', 2), ('<', 2), ('>', 2), ('=<', 2), ('>=', 2), ('=:=', 2), ('=\\=', 2),
    ('=', 2), ('\\=', 2), ('between', 3), ('length', 2), ('true', 0),
    ('var', 1), ('nonvar', 1),
])
CONTROL = frozenset([(',', 2), (';', 2)])


@dataclass(frozen=True)
class Clause:
    head: Compound
    body: tuple = ()

    @property
    def key(self):
        return self.head.key

    @property
    def is_ground(self):
        return is_ground(self.head) and all(is_ground(g) for g in self.body)

    def __str__(self):
        if not self.body:
            return f"{format_term(self.head)}."
        body = ", ".join(format_term(g, 999) for g in self.body)
        return f"{format_term(self.head)} :- {body}."


@dataclass(frozen=True)
class Program:
    rules: tuple = ()
    switch_decls: tuple = ()
    table_preds: frozenset = frozenset()
    params: ParameterStore = field(default=None, compare=False)
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for clause in self.rules:
            index.setdefault(clause.key, []).append(clause)
        object.__setattr__(self, '_index', {k: tuple(v) for k, v in index.items()})
        if self.params is None:
            object.__setattr__(self, 'params', ParameterStore(self.switch_decls))

    def clauses_for(self, key):
        return self._index.get(key, ())

    def defines(self, key):
        return key in self._index

    @property
    def predicates(self):
        return set(self._index)

    def is_table(self, key):
        return key in self.table_preds

    def declaration_for(self, name):
        return self.params.declaration_for(name)

    def with_params(self, params):
        return Program(self.rules, self.switch_decls, self.table_preds, params)

    def to_text(self):
        """Printed form that parses back to an identical program"""
        lines = [f"{decl}." for decl in self.switch_decls]
        if self.table_preds:
            specs = ", ".join(f"{format_term(Compound(name))}/{arity}"
                              for name, arity in sorted(self.table_preds))
            lines.append(f":- table {specs}.")
        lines.extend(str(clause) for clause in self.rules)
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ObservationSet:
    entries: tuple = ()  # (goal, count) pairs

    @property
    def total(self):
        return sum(count for _, count in self.entries)

    @property
    def goals(self):
        return [goal for goal, _ in self.entries]

    def grouped(self):
        """Distinct goals with summed counts, first-occurrence order"""
        counts = {}
        for goal, count in self.entries:
            counts[goal] = counts.get(goal, 0) + count
        return list(counts.items())

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _table_specs(term, token):
    specs = []
    for spec in conjuncts(term):
        if (isinstance(spec, Compound) and spec.functor == '/' and spec.arity == 2
                and isinstance(spec.args[0], Compound) and not spec.args[0].args
                and isinstance(spec.args[1], Int)):
            specs.append((spec.args[0].functor, spec.args[1].value))
        else:
            raise ProgramSyntaxError(f"bad table specification {format_term(spec)}",
                                     token.line, token.column)
    return specs


def _switch_declaration(term, token):
    pattern, values = term.args
    items = list_items(values)
    if items is None:
        raise ProgramSyntaxError("values/2 expects a list of values", token.line, token.column)
    return SwitchDeclaration(pattern, tuple(items))


def parse_program(text):
    """
    Parse program text into a Program

    Raises:
        ProgramSyntaxError: malformed text or a clause head that is msw or a built-in
        DeclarationError: overlapping or malformed values declarations
    """
    reader = TermReader(text)
    rules = []
    decls = []
    tables = set()
    while not reader.at_eof():
        token = reader.peek()
        term = reader.read_clause_term()
        if isinstance(term, Compound) and term.key == (':-', 1):
            directive = term.args[0]
            if isinstance(directive, Compound) and directive.key == ('table', 1):
                tables.update(_table_specs(directive.args[0], token))
            elif isinstance(directive, Compound) and directive.key == ('values', 2):
                decls.append(_switch_declaration(directive, token))
            else:
                raise ProgramSyntaxError(f"unknown directive {format_term(directive)}",
                                         token.line, token.column)
            continue
        if isinstance(term, Compound) and term.key == ('values', 2):
            decls.append(_switch_declaration(term, token))
            continue
        if isinstance(term, Compound) and term.key == (':-', 2):
            head, body = term.args[0], conjuncts(term.args[1])
        else:
            head, body = term, ()
        if not isinstance(head, Compound):
            raise ProgramSyntaxError(f"clause head {format_term(head)} is not an atom",
                                     token.line, token.column)
        if head.key == SWITCH_KEY or head.key in BUILTINS or head.key in CONTROL:
            raise ProgramSyntaxError(f"clause head {head.functor}/{head.arity} is reserved",
                                     token.line, token.column)
        for goal in body:
            if isinstance(goal, Int):
                raise ProgramSyntaxError(f"integer {goal.value} used as a goal",
                                         token.line, token.column)
        rules.append(Clause(head, body))

    for i, first in enumerate(decls):
        for second in decls[i + 1:]:
            apart = rename_term(second.pattern, -1, {})
            if unify(first.pattern, apart) is not None:
                raise DeclarationError(
                    f"Overlapping values declarations for {format_term(first.pattern)} "
                    f"and {format_term(second.pattern)}")

    program = Program(tuple(rules), tuple(decls), frozenset(tables))
    logger.debug(f"Parsed program: {len(rules)} rules, {len(decls)} switch declarations, "
                 f"{len(tables)} table predicates")
    return program


def parse_observations(text):
    """Read `[count] <ground atom>.` entries"""
    reader = TermReader(text)
    entries = []
    while not reader.at_eof():
        token = reader.peek()
        count = 1
        if token.kind == 'int':
            reader.advance()
            count = token.value
        elif (token.kind == 'atom' and token.value == '-' and reader.peek(1).kind == 'int'):
            reader.advance()
            count = -reader.advance().value
        goal = reader.read_clause_term()
        if count < 1:
            raise ProgramSyntaxError(f"non-positive count {count}", token.line, token.column)
        if not isinstance(goal, Compound):
            raise ProgramSyntaxError(f"observation {format_term(goal)} is not an atom",
                                     token.line, token.column)
        if not is_ground(goal):
            raise ProgramSyntaxError(f"observation {format_term(goal)} is not ground",
                                     token.line, token.column)
        entries.append((goal, count))
    return ObservationSet(tuple(entries))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error or warning
    code: str
    message: str

    def __str__(self):
        return f"{self.severity} {self.code} {self.message}"


class DiagnosticReport(list):
    """List of diagnostics with severity helpers"""

    @property
    def errors(self):
        return [d for d in self if d.severity == 'error']

    @property
    def warnings(self):
        return [d for d in self if d.severity == 'warning']

    @property
    def ok(self):
        return not self.errors


def body_goals(goal):
    """Goals inside control constructs, flattened"""
    if isinstance(goal, Compound) and goal.key in CONTROL:
        for arg in goal.args:
            yield from body_goals(arg)
    else:
        yield goal


def validate(program, params=None):
    """Static checks; returns a DiagnosticReport and never mutates the program"""
    params = program.params if params is None else params
    report = DiagnosticReport()
    reported = set()

    def add(severity, code, message):
        if (code, message) not in reported:
            reported.add((code, message))
            report.append(Diagnostic(severity, code, message))

    for clause in program.rules:
        for top in clause.body:
            for goal in body_goals(top):
                if isinstance(goal, Var):
                    add('warning', 'variable-goal',
                        f"variable goal in clause for {clause.head.functor}/{clause.head.arity}")
                    continue
                key = goal.key
                if key == SWITCH_KEY:
                    _check_switch(program, goal, add)
                elif key in BUILTINS or key in CONTROL:
                    continue
                elif not program.defines(key):
                    add('error', 'undefined-predicate',
                        f"{key[0]}/{key[1]} is called but not defined")

    for key in sorted(program.table_preds):
        if not program.defines(key):
            add('error', 'table-undefined', f"table predicate {key[0]}/{key[1]} has no clauses")

    for name, total in params.row_violations():
        add('error', 'non-normalized',
            f"parameters of switch {format_term(name)} sum to {total!r}")
    return report


def _check_switch(program, goal, add):
    name = goal.args[0]
    if is_ground(name):
        try:
            find_declaration(program.switch_decls, name)
        except (UnknownSwitchError, DeclarationError):
            add('error', 'unmatched-switch',
                f"switch {format_term(name)} matches no single values declaration")
    elif not any(unify(d.pattern, name) is not None for d in program.switch_decls):
        add('warning', 'unmatched-switch',
            f"switch pattern {format_term(name)} can match no values declaration")
