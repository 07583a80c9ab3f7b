"""
First-order terms, substitutions and unification

Terms are immutable values: variables (name plus scope id), integers and
compounds. Constants are compounds with no arguments and lists use the usual
'.'/2 and '[]' encoding. Substitutions are triangular binding maps; applying a
substitution resolves bindings fully, so application is idempotent.
"""
import itertools
import re
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Var:
    name: str
    scope: int = 0

    def __str__(self):
        return format_term(self)


@dataclass(frozen=True)
class Int:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple = ()

    @property
    def arity(self):
        return len(self.args)

    @property
    def key(self):
        """Predicate indicator (functor, arity)"""
        return (self.functor, len(self.args))

    def __str__(self):
        return format_term(self)


NIL = Compound('[]')
CONS = '.'


def atom(name):
    return Compound(name)


def compound(functor, *args):
    return Compound(functor, tuple(args))


def make_list(items, tail=NIL):
    """Build a '.'/2 list from a Python sequence"""
    result = tail
    for item in reversed(list(items)):
        result = Compound(CONS, (item, result))
    return result


def list_items(term):
    """Return the elements of a proper list, or None if term is not one"""
    items = []
    while isinstance(term, Compound) and term.functor == CONS and term.arity == 2:
        items.append(term.args[0])
        term = term.args[1]
    if term == NIL:
        return items
    return None


def is_ground(term):
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            return False
        if isinstance(t, Compound):
            stack.extend(t.args)
    return True


def term_variables(term):
    """Variables of a term in depth-first left-to-right order, no repeats"""
    seen = []
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            if t not in seen:
                seen.append(t)
        elif isinstance(t, Compound):
            stack.extend(reversed(t.args))
    return seen


class Substitution:
    """Immutable triangular substitution"""

    __slots__ = ('_bindings',)

    def __init__(self, bindings=None):
        self._bindings = dict(bindings) if bindings else {}

    def __len__(self):
        return len(self._bindings)

    def __contains__(self, var):
        return var in self._bindings

    def __iter__(self):
        return iter(self._bindings)

    def __repr__(self):
        inner = ", ".join(f"{format_term(k)}↦{format_term(apply_substitution(k, self))}"
                          for k in self._bindings)
        return "{" + inner + "}"

    def lookup(self, var):
        return self._bindings.get(var)

    def bind(self, var, term):
        """Return a new substitution extended with var ↦ term"""
        bindings = dict(self._bindings)
        bindings[var] = term
        result = Substitution.__new__(Substitution)
        result._bindings = bindings
        return result

    def walk(self, term):
        """Dereference a variable chain at the top level only"""
        while isinstance(term, Var):
            bound = self._bindings.get(term)
            if bound is None:
                return term
            term = bound
        return term

    def as_dict(self):
        """Fully resolved bindings"""
        return {var: apply_substitution(var, self) for var in self._bindings}


EMPTY = Substitution()


def apply_substitution(term, s):
    """Replace every bound variable in term, preserving unbound ones"""
    if not len(s):
        return term
    term = s.walk(term)
    if isinstance(term, Compound) and term.args:
        args = tuple(apply_substitution(a, s) for a in term.args)
        if args != term.args:
            return Compound(term.functor, args)
    return term


def occurs_in(var, term, s):
    stack = [term]
    while stack:
        t = s.walk(stack.pop())
        if t == var:
            return True
        if isinstance(t, Compound):
            stack.extend(t.args)
    return False


def unify(t1, t2, s=EMPTY):
    """
    Most general unifier of t1 and t2 extending s, with occurs check

    Returns:
        The extended Substitution, or None when no unifier exists
    """
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a = s.walk(a)
        b = s.walk(b)
        if a == b:
            continue
        if isinstance(a, Var):
            if occurs_in(a, b, s):
                return None
            s = s.bind(a, b)
        elif isinstance(b, Var):
            if occurs_in(b, a, s):
                return None
            s = s.bind(b, a)
        elif isinstance(a, Compound) and isinstance(b, Compound):
            if a.functor != b.functor or len(a.args) != len(b.args):
                return None
            stack.extend(zip(a.args, b.args))
        else:
            return None
    return s


class ScopeCounter:
    """Monotone source of scope ids; one per search"""

    def __init__(self, start=1):
        self._counter = itertools.count(start)

    def next(self):
        return next(self._counter)


def rename_term(term, scope, mapping):
    if isinstance(term, Var):
        renamed = mapping.get(term)
        if renamed is None:
            renamed = Var(term.name, scope)
            mapping[term] = renamed
        return renamed
    if isinstance(term, Compound) and term.args:
        return Compound(term.functor, tuple(rename_term(a, scope, mapping) for a in term.args))
    return term


def fresh_rename(clause, counter):
    """Variant of a clause whose variables carry a fresh scope id"""
    if clause.is_ground:
        return clause
    scope = counter.next()
    mapping = {}
    head = rename_term(clause.head, scope, mapping)
    body = tuple(rename_term(goal, scope, mapping) for goal in clause.body)
    return replace(clause, head=head, body=body)


def term_sort_key(term):
    """Standard order of terms: variables < integers < compounds"""
    if isinstance(term, Var):
        return (0, term.name, term.scope)
    if isinstance(term, Int):
        return (1, term.value)
    return (2, len(term.args), term.functor, tuple(term_sort_key(a) for a in term.args))


# Operator table shared by the reader and the printer: name -> (priority, type)
INFIX_OPERATORS = {
    ':-': (1200, 'xfx'),
    ';': (1100, 'xfy'),
    ',': (1000, 'xfy'),
    '=': (700, 'xfx'),
    '\\=': (700, 'xfx'),
    'is': (700, 'xfx'),
    '<': (700, 'xfx'),
    '>': (700, 'xfx'),
    '=<': (700, 'xfx'),
    '>=': (700, 'xfx'),
    '=:=': (700, 'xfx'),
    '=\\=': (700, 'xfx'),
    '+': (500, 'yfx'),
    '-': (500, 'yfx'),
    '*': (400, 'yfx'),
    '/': (400, 'yfx'),
    '//': (400, 'yfx'),
    'mod': (400, 'yfx'),
}
PREFIX_OPERATORS = {
    ':-': (1200, 'fx'),
    'table': (1150, 'fx'),
    '-': (200, 'fy'),
}

_PLAIN_ATOM = re.compile(r'^[a-z][a-zA-Z0-9_]*$')


def format_atom(name):
    # operator names are quoted so they always read back as plain atoms
    if name == '[]' or (_PLAIN_ATOM.match(name) and name not in ('is', 'mod')):
        return name
    escaped = name.replace('\\', '\\\\').replace("'", "\\'").replace('\n', '\\n')
    return f"'{escaped}'"


def format_term(term, max_priority=1200):
    """Render a term in re-readable concrete syntax"""
    if isinstance(term, Var):
        return term.name if term.scope == 0 else f"{term.name}_{term.scope}"
    if isinstance(term, Int):
        return str(term.value)
    if term.functor == CONS and term.arity == 2:
        return _format_list(term)
    if not term.args:
        return format_atom(term.functor)
    if term.arity == 2 and term.functor in INFIX_OPERATORS:
        priority, kind = INFIX_OPERATORS[term.functor]
        left_max = priority if kind == 'yfx' else priority - 1
        right_max = priority if kind == 'xfy' else priority - 1
        left = format_term(term.args[0], left_max)
        right = format_term(term.args[1], right_max)
        if term.functor == ',':
            text = f"{left}, {right}"
        else:
            text = f"{left} {term.functor} {right}"
        return f"({text})" if priority > max_priority else text
    args = ",".join(format_term(a, 999) for a in term.args)
    return f"{format_atom(term.functor)}({args})"


def _format_list(term):
    items = []
    while isinstance(term, Compound) and term.functor == CONS and term.arity == 2:
        items.append(format_term(term.args[0], 999))
        term = term.args[1]
    if term == NIL:
        return "[" + ",".join(items) + "]"
    return "[" + ",".join(items) + "|" + format_term(term, 999) + "]"
