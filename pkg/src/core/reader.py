"""
Concrete syntax reader: tokenizer and operator-precedence term parser

Reads clauses, directives, observation lines and parameter lines. Floats are
tokenized so parameter files can be read, but they are rejected inside
object-language terms.
"""
from dataclasses import dataclass

from core.errors import ProgramSyntaxError
from core.terms import (Var, Int, Compound, NIL, CONS, INFIX_OPERATORS,
                        PREFIX_OPERATORS)

SYMBOL_CHARS = set('+-*/\\^<>=~:.?@#&$')
SOLO_CHARS = set('!;')
PUNCTUATION = set('()[]|,')


@dataclass(frozen=True)
class Token:
    kind: str  # atom, qatom, var, int, float, punct, end, eof
    value: object
    line: int
    column: int
    layout_before: bool


def tokenize(text):
    """Split text into tokens with line/column positions"""
    tokens = []
    i = 0
    line = 1
    line_start = 0
    n = len(text)
    layout = True

    def error(message, pos):
        raise ProgramSyntaxError(message, line, pos - line_start + 1)

    while i < n:
        ch = text[i]
        if ch == '\n':
            line += 1
            line_start = i + 1
            i += 1
            layout = True
            continue
        if ch.isspace():
            i += 1
            layout = True
            continue
        if ch == '%':
            while i < n and text[i] != '\n':
                i += 1
            layout = True
            continue
        if ch == '/' and i + 1 < n and text[i + 1] == '*':
            end = text.find('*/', i + 2)
            if end < 0:
                error("unterminated block comment", i)
            line += text.count('\n', i, end)
            if '\n' in text[i:end]:
                line_start = text.rfind('\n', i, end) + 1
            i = end + 2
            layout = True
            continue

        start = i
        column = i - line_start + 1
        if ch.isdigit():
            while i < n and text[i].isdigit():
                i += 1
            kind = 'int'
            if i + 1 < n and text[i] == '.' and text[i + 1].isdigit():
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
                kind = 'float'
            if i < n and text[i] in 'eE':
                j = i + 1
                if j < n and text[j] in '+-':
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
                    kind = 'float'
            literal = text[start:i]
            value = int(literal) if kind == 'int' else float(literal)
            tokens.append(Token(kind, value, line, column, layout))
        elif ch == '_' or ch.isalpha():
            while i < n and (text[i] == '_' or text[i].isalnum()):
                i += 1
            name = text[start:i]
            kind = 'var' if (ch == '_' or ch.isupper()) else 'atom'
            tokens.append(Token(kind, name, line, column, layout))
        elif ch == "'":
            i += 1
            chars = []
            while True:
                if i >= n:
                    error("unterminated quoted atom", start)
                c = text[i]
                if c == "'":
                    if i + 1 < n and text[i + 1] == "'":
                        chars.append("'")
                        i += 2
                        continue
                    i += 1
                    break
                if c == '\\' and i + 1 < n:
                    nxt = text[i + 1]
                    chars.append({'n': '\n', 't': '\t'}.get(nxt, nxt))
                    i += 2
                    continue
                if c == '\n':
                    error("newline in quoted atom", i)
                chars.append(c)
                i += 1
            tokens.append(Token('qatom', ''.join(chars), line, column, layout))
        elif ch in PUNCTUATION:
            i += 1
            tokens.append(Token('punct', ch, line, column, layout))
        elif ch in SOLO_CHARS:
            i += 1
            tokens.append(Token('atom', ch, line, column, layout))
        elif ch in SYMBOL_CHARS:
            while i < n and text[i] in SYMBOL_CHARS:
                i += 1
            name = text[start:i]
            if name == '.' and (i >= n or text[i].isspace() or text[i] == '%'):
                tokens.append(Token('end', '.', line, column, layout))
            else:
                tokens.append(Token('atom', name, line, column, layout))
        else:
            error(f"unexpected character {ch!r}", i)
        layout = False

    tokens.append(Token('eof', None, line, n - line_start + 1, True))
    return tokens


class TermReader:
    """Recursive-descent reader over a token list"""

    def __init__(self, text):
        self.tokens = tokenize(text)
        self.pos = 0
        self.var_map = {}
        self._anonymous = 0

    # token helpers

    def peek(self, offset=0):
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self):
        token = self.tokens[self.pos]
        if token.kind != 'eof':
            self.pos += 1
        return token

    def at_eof(self):
        return self.peek().kind == 'eof'

    def error(self, message, token=None):
        token = token or self.peek()
        raise ProgramSyntaxError(message, token.line, token.column)

    def expect_punct(self, char):
        token = self.advance()
        if token.kind != 'punct' or token.value != char:
            self.error(f"expected '{char}'", token)
        return token

    def expect_end(self):
        token = self.advance()
        if token.kind != 'end':
            self.error("expected '.' at end of clause", token)

    def reset_variables(self):
        self.var_map = {}

    # numbers outside the object language

    def read_number(self):
        token = self.advance()
        sign = 1
        if token.kind == 'atom' and token.value == '-':
            sign = -1
            token = self.advance()
        if token.kind not in ('int', 'float'):
            self.error("expected a number", token)
        return sign * float(token.value)

    # terms

    def read_term(self, max_priority=1200):
        left, left_priority = self._read_primary(max_priority)
        return self._read_infix(left, left_priority, max_priority)

    def read_clause_term(self):
        """Read one term terminated by '.'"""
        self.reset_variables()
        term = self.read_term(1200)
        self.expect_end()
        return term

    def _make_var(self, name):
        if name == '_':
            self._anonymous += 1
            return Var(f"_G{self._anonymous}")
        var = self.var_map.get(name)
        if var is None:
            var = Var(name)
            self.var_map[name] = var
        return var

    def _starts_term(self, token):
        if token.kind in ('var', 'int', 'float', 'qatom'):
            return True
        if token.kind == 'punct':
            return token.value in '(['
        if token.kind == 'atom':
            return token.value not in INFIX_OPERATORS or token.value in PREFIX_OPERATORS
        return False

    def _read_primary(self, max_priority):
        token = self.advance()
        if token.kind == 'int':
            return Int(token.value), 0
        if token.kind == 'float':
            self.error("floating-point numbers are not terms", token)
        if token.kind == 'var':
            return self._make_var(token.value), 0
        if token.kind == 'punct':
            if token.value == '(':
                term = self.read_term(1200)
                self.expect_punct(')')
                return term, 0
            if token.value == '[':
                return self._read_list(), 0
            self.error(f"unexpected '{token.value}'", token)
        if token.kind in ('atom', 'qatom'):
            name = token.value
            nxt = self.peek()
            if nxt.kind == 'punct' and nxt.value == '(' and not nxt.layout_before:
                self.advance()
                args = [self.read_term(999)]
                while self.peek().kind == 'punct' and self.peek().value == ',':
                    self.advance()
                    args.append(self.read_term(999))
                self.expect_punct(')')
                return Compound(name, tuple(args)), 0
            if token.kind == 'atom':
                if name == '-' and nxt.kind == 'int' and not nxt.layout_before:
                    self.advance()
                    return Int(-nxt.value), 0
                if name in PREFIX_OPERATORS and self._starts_term(nxt):
                    priority, kind = PREFIX_OPERATORS[name]
                    if priority > max_priority:
                        priority = 999
                    arg_max = priority if kind == 'fy' else priority - 1
                    operand = self.read_term(arg_max)
                    return Compound(name, (operand,)), priority
                if name in INFIX_OPERATORS:
                    priority = INFIX_OPERATORS[name][0]
                    return Compound(name), priority if priority <= max_priority else 0
            return Compound(name), 0
        if token.kind == 'end':
            self.error("unexpected end of clause", token)
        self.error("unexpected end of input", token)

    def _read_infix(self, left, left_priority, max_priority):
        while True:
            token = self.peek()
            if token.kind == 'atom':
                name = token.value
            elif token.kind == 'punct' and token.value == ',':
                name = ','
            else:
                return left
            if name not in INFIX_OPERATORS:
                return left
            priority, kind = INFIX_OPERATORS[name]
            if priority > max_priority:
                return left
            left_max = priority if kind == 'yfx' else priority - 1
            if left_priority > left_max:
                return left
            self.advance()
            right_max = priority if kind == 'xfy' else priority - 1
            right = self.read_term(right_max)
            left = Compound(name, (left, right))
            left_priority = priority

    def _read_list(self):
        if self.peek().kind == 'punct' and self.peek().value == ']':
            self.advance()
            return NIL
        items = [self.read_term(999)]
        while self.peek().kind == 'punct' and self.peek().value == ',':
            self.advance()
            items.append(self.read_term(999))
        tail = NIL
        if self.peek().kind == 'punct' and self.peek().value == '|':
            self.advance()
            tail = self.read_term(999)
        self.expect_punct(']')
        result = tail
        for item in reversed(items):
            result = Compound(CONS, (item, result))
        return result


def parse_term(text):
    """Read a single term; a trailing '.' is optional"""
    reader = TermReader(text)
    if reader.at_eof():
        reader.error("empty term")
    term = reader.read_term(1200)
    if reader.peek().kind == 'end':
        reader.advance()
    if not reader.at_eof():
        reader.error("unexpected text after term")
    return term


def conjuncts(term):
    """Flatten a ','/2 chain into a tuple of goals"""
    goals = []
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Compound) and t.functor == ',' and t.arity == 2:
            stack.append(t.args[1])
            stack.append(t.args[0])
        else:
            goals.append(t)
    return tuple(goals)
