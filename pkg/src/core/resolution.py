"""
Depth-first SLD resolution shared by the sampler and the explainer

The engine keeps an explicit stack of choice-point iterators, so deep
derivations do not consume Python stack frames. Subclasses decide how switch
calls and table calls are resolved.
"""
import os
import sys
from dataclasses import dataclass

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config
from core.errors import (InstantiationError, UndefinedPredicateError,
                         ResourceLimitError, ModelError, EvaluationError)
from core.program import SWITCH_KEY, BUILTINS
from core.reader import conjuncts
from core.terms import (Var, Int, Compound, NIL, CONS, EMPTY, ScopeCounter,
                        unify, apply_substitution, is_ground, fresh_rename,
                        format_term, term_sort_key)


@dataclass(frozen=True)
class SwitchInstance:
    """Ground switch instance msw(name, trial, value)"""

    name: object
    trial: object
    value: object

    @property
    def trial_key(self):
        return (self.name, self.trial)

    def sort_key(self):
        return (term_sort_key(self.name), term_sort_key(self.trial), term_sort_key(self.value))

    def as_term(self):
        return Compound('msw', (self.name, self.trial, self.value))

    def __str__(self):
        return format_term(self.as_term())


@dataclass(frozen=True)
class Branch:
    """One state of the search: pending goals plus what has been proved so far"""

    goals: tuple
    subst: object
    nodes: tuple = ()
    trials: tuple = ()  # ((name, trial), value) pairs made along this branch

    def trial_value(self, key):
        for known, value in self.trials:
            if known == key:
                return value
        return None


def node_sort_key(node):
    if isinstance(node, SwitchInstance):
        return (0,) + node.sort_key()
    return (1, term_sort_key(node))


class Resolver:
    """SLD resolution with left-to-right goals and source clause order"""

    def __init__(self, program, max_steps=None):
        self.program = program
        self.max_steps = Config.MAX_RESOLUTION_STEPS if max_steps is None else max_steps
        self.steps = 0
        self.scopes = ScopeCounter()

    def solve(self, goals, subst=EMPTY):
        """All solution branches for a goal tuple, lazily"""
        return self.run(iter((Branch(tuple(goals), subst),)))

    def run(self, alternatives):
        stack = [alternatives]
        while stack:
            branch = next(stack[-1], None)
            if branch is None:
                stack.pop()
                continue
            if not branch.goals:
                yield branch
                continue
            self.steps += 1
            if self.steps > self.max_steps:
                raise ResourceLimitError(
                    f"Resolution exceeded {self.max_steps} steps; the program may not terminate")
            stack.append(self.step(branch))

    def step(self, branch):
        goal = branch.subst.walk(branch.goals[0])
        rest = branch.goals[1:]
        if isinstance(goal, Var):
            raise InstantiationError("Unbound variable called as a goal")
        if isinstance(goal, Int):
            raise ModelError(f"Integer {goal.value} called as a goal")
        key = goal.key
        if key == (',', 2):
            return iter((Branch(conjuncts(goal) + rest, branch.subst, branch.nodes, branch.trials),))
        if key == (';', 2):
            return self._disjunction(goal, rest, branch)
        if key == SWITCH_KEY:
            return self.call_switch(goal, rest, branch)
        if key in BUILTINS:
            return self._builtin(goal, rest, branch)
        return self.call_user(goal, rest, branch)

    def _disjunction(self, goal, rest, branch):
        term = goal
        while isinstance(term, Compound) and term.key == (';', 2):
            yield Branch(conjuncts(term.args[0]) + rest, branch.subst, branch.nodes, branch.trials)
            term = branch.subst.walk(term.args[1])
        yield Branch(conjuncts(term) + rest, branch.subst, branch.nodes, branch.trials)

    def call_user(self, goal, rest, branch):
        clauses = self.program.clauses_for(goal.key)
        if not clauses and not self.program.defines(goal.key):
            raise UndefinedPredicateError(
                f"Undefined predicate {goal.functor}/{goal.arity} called as {format_term(apply_substitution(goal, branch.subst))}")
        return self._resolve_clauses(goal, rest, branch, clauses)

    def _resolve_clauses(self, goal, rest, branch, clauses):
        for clause in clauses:
            if not _may_match(clause.head, goal, branch.subst):
                continue
            renamed = fresh_rename(clause, self.scopes)
            s = unify(renamed.head, goal, branch.subst)
            if s is not None:
                yield Branch(renamed.body + rest, s, branch.nodes, branch.trials)

    def switch_arguments(self, goal, subst):
        """Ground switch name and trial of an msw/3 goal plus its declared values"""
        name = apply_substitution(goal.args[0], subst)
        trial = apply_substitution(goal.args[1], subst)
        if not is_ground(name) or not is_ground(trial):
            raise InstantiationError(
                f"msw/3 called with non-ground switch or trial: {format_term(apply_substitution(goal, subst))}")
        return name, trial, self.program.declaration_for(name).values

    def call_switch(self, goal, rest, branch):
        """Branch over every declared value, keeping one value per (name, trial)"""
        name, trial, values = self.switch_arguments(goal, branch.subst)
        key = (name, trial)
        known = branch.trial_value(key)
        if known is not None:
            s = unify(goal.args[2], known, branch.subst)
            if s is not None:
                yield Branch(rest, s, branch.nodes, branch.trials)
            return
        for value in values:
            s = unify(goal.args[2], value, branch.subst)
            if s is None:
                continue
            yield Branch(rest, s, branch.nodes + (SwitchInstance(name, trial, value),),
                         branch.trials + ((key, value),))

    # built-ins

    def _builtin(self, goal, rest, branch):
        handler = _BUILTIN_HANDLERS[goal.key]
        for s in handler(self, goal.args, branch.subst):
            yield Branch(rest, s, branch.nodes, branch.trials)

    def fresh_var(self, name='_L'):
        return Var(name, self.scopes.next())


def _may_match(head, goal, subst):
    """Cheap principal-functor filter before renaming a clause"""
    for h, g in zip(head.args, goal.args):
        if isinstance(h, Var):
            continue
        g = subst.walk(g)
        if isinstance(g, Var):
            continue
        if isinstance(h, Int) or isinstance(g, Int):
            if h != g:
                return False
        elif h.functor != g.functor or len(h.args) != len(g.args):
            return False
    return True


def evaluate(term, subst):
    """Integer value of an arithmetic expression"""
    term = subst.walk(term)
    if isinstance(term, Int):
        return term.value
    if isinstance(term, Var):
        raise InstantiationError("Arithmetic on an unbound variable")
    if term.arity == 1 and term.functor == '-':
        return -evaluate(term.args[0], subst)
    if term.arity == 2:
        a = evaluate(term.args[0], subst)
        b = evaluate(term.args[1], subst)
        op = term.functor
        if op == '+':
            return a + b
        if op == '-':
            return a - b
        if op == '*':
            return a * b
        if op in ('//', 'mod'):
            if b == 0:
                raise EvaluationError(f"Division by zero in {format_term(apply_substitution(term, subst))}")
            if op == 'mod':
                return a % b
            quotient = abs(a) // abs(b)
            return quotient if (a >= 0) == (b >= 0) else -quotient
    raise EvaluationError(f"Not an arithmetic expression: {format_term(apply_substitution(term, subst))}")


def _is(engine, args, s):
    result = unify(args[0], Int(evaluate(args[1], s)), s)
    if result is not None:
        yield result


def _comparison(test):
    def handler(engine, args, s):
        if test(evaluate(args[0], s), evaluate(args[1], s)):
            yield s
    return handler


def _unify(engine, args, s):
    result = unify(args[0], args[1], s)
    if result is not None:
        yield result


def _not_unify(engine, args, s):
    left = apply_substitution(args[0], s)
    right = apply_substitution(args[1], s)
    if not is_ground(left) or not is_ground(right):
        raise InstantiationError(r"\=/2 requires ground arguments")
    if left != right:
        yield s


def _between(engine, args, s):
    """between(Low, X, High): integers strictly between Low and High"""
    low = evaluate(args[0], s)
    high = evaluate(args[2], s)
    x = s.walk(args[1])
    if isinstance(x, Int):
        if low < x.value < high:
            yield s
        return
    if not isinstance(x, Var):
        return
    for value in range(low + 1, high):
        yield s.bind(x, Int(value))


def _length(engine, args, s):
    items = 0
    term = s.walk(args[0])
    while isinstance(term, Compound) and term.functor == CONS and term.arity == 2:
        items += 1
        term = s.walk(term.args[1])
    if term == NIL:
        result = unify(args[1], Int(items), s)
        if result is not None:
            yield result
        return
    if not isinstance(term, Var):
        return
    size = s.walk(args[1])
    if not isinstance(size, Int):
        raise InstantiationError("length/2 needs a proper list or an integer length")
    if size.value < items:
        return
    tail = NIL
    for _ in range(size.value - items):
        tail = Compound(CONS, (engine.fresh_var(), tail))
    result = unify(term, tail, s)
    if result is not None:
        yield result


def _true(engine, args, s):
    yield s


def _var(engine, args, s):
    if isinstance(s.walk(args[0]), Var):
        yield s


def _nonvar(engine, args, s):
    if not isinstance(s.walk(args[0]), Var):
        yield s


_BUILTIN_HANDLERS = {
    ('is', 2): _is,
    ('<', 2): _comparison(lambda a, b: a < b),
    ('>', 2): _comparison(lambda a, b: a > b),
    ('=<', 2): _comparison(lambda a, b: a <= b),
    ('>=', 2): _comparison(lambda a, b: a >= b),
    ('=:=', 2): _comparison(lambda a, b: a == b),
    ('=\\=', 2): _comparison(lambda a, b: a != b),
    ('=', 2): _unify,
    ('\\=', 2): _not_unify,
    ('between', 3): _between,
    ('length', 2): _length,
    ('true', 0): _true,
    ('var', 1): _var,
    ('nonvar', 1): _nonvar,
}
