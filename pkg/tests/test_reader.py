"""
Unit tests for the tokenizer and term reader
"""
import pytest
from core.errors import ProgramSyntaxError
from core.reader import tokenize, parse_term, conjuncts, TermReader
from core.terms import Var, Int, Compound, atom, compound, make_list


class TestTokenizer:
    """Test tokenize"""

    def test_token_kinds(self):
        """Test basic token classification"""
        kinds = [t.kind for t in tokenize("foo(X, 12, 'Q a') .")]
        assert kinds == ['atom', 'punct', 'var', 'punct', 'int', 'punct', 'qatom', 'punct', 'end', 'eof']

    def test_comments_skipped(self):
        """Test line and block comments"""
        tokens = tokenize("% line\n/* block\n comment */ a.")
        assert tokens[0].value == 'a'
        assert tokens[0].line == 3

    def test_float_token(self):
        """Test floats are recognized for parameter files"""
        token = tokenize("0.25")[0]
        assert token.kind == 'float'
        assert token.value == 0.25

    def test_end_requires_layout(self):
        """Test '.' followed by a character is not an end token"""
        kinds = [t.kind for t in tokenize("a =.. b.")]
        assert kinds.count('end') == 1

    def test_unterminated_quote(self):
        """Test error position on an unterminated quoted atom"""
        with pytest.raises(ProgramSyntaxError, match="unterminated quoted atom"):
            tokenize("f('abc")

    def test_unexpected_character(self):
        """Test unknown characters are rejected"""
        with pytest.raises(ProgramSyntaxError, match="line 2"):
            tokenize("a.\n\"b\".")


class TestParseTerm:
    """Test the operator-precedence reader"""

    def test_compound_and_list(self):
        """Test nested terms and lists"""
        term = parse_term("f(a, [b, c|T], 3)")
        assert term == compound('f', atom('a'), make_list([atom('b'), atom('c')], tail=Var('T')), Int(3))

    def test_arithmetic_precedence(self):
        """Test * binds tighter than + and + is left-associative"""
        term = parse_term("1 + 2 * 3 - 4")
        assert term == compound('-', compound('+', Int(1), compound('*', Int(2), Int(3))), Int(4))

    def test_negative_integer(self):
        """Test a minus sign directly before a digit makes a negative integer"""
        assert parse_term("-7") == Int(-7)
        assert parse_term("- 7") == compound('-', Int(7))

    def test_clause_and_disjunction(self):
        """Test that ',' binds tighter than ';' and both below ':-'"""
        term = parse_term("h :- a, b ; c")
        assert term.key == (':-', 2)
        body = term.args[1]
        assert body.key == (';', 2)
        assert body.args[0] == compound(',', atom('a'), atom('b'))

    def test_table_directive(self):
        """Test the table prefix operator"""
        term = parse_term(":- table hmm/1, hmm/3.")
        assert term.key == (':-', 1)
        directive = term.args[0]
        assert directive.key == ('table', 1)
        assert conjuncts(directive.args[0]) == (
            compound('/', atom('hmm'), Int(1)), compound('/', atom('hmm'), Int(3)))

    def test_comparison_operators(self):
        """Test comparison operators read as binary terms"""
        assert parse_term("T =< 3") == compound('=<', Var('T'), Int(3))
        assert parse_term("X \\= Y").functor == '\\='

    def test_shared_variables(self):
        """Test repeated variable names denote one variable"""
        term = parse_term("p(X, X, _, _)")
        assert term.args[0] is term.args[1] or term.args[0] == term.args[1]
        assert term.args[2] != term.args[3]

    def test_float_in_term_rejected(self):
        """Test floats are not object-language terms"""
        with pytest.raises(ProgramSyntaxError, match="floating-point"):
            parse_term("p(0.5)")

    def test_trailing_text_rejected(self):
        """Test text after a complete term is an error"""
        with pytest.raises(ProgramSyntaxError, match="unexpected text"):
            parse_term("a. b")

    def test_unbalanced_parenthesis(self):
        """Test a missing ')' is reported"""
        with pytest.raises(ProgramSyntaxError, match="expected '\\)'"):
            parse_term("f(a, b")

    def test_empty_input(self):
        """Test empty goal text"""
        with pytest.raises(ProgramSyntaxError, match="empty term"):
            parse_term("   ")


class TestTermReader:
    """Test clause-at-a-time reading"""

    def test_variables_reset_per_clause(self):
        """Test that X in two clauses are different readers' maps"""
        reader = TermReader("p(X). q(X).")
        first = reader.read_clause_term()
        second = reader.read_clause_term()
        assert first.args[0] == second.args[0]  # same name, scope 0
        assert reader.at_eof()

    def test_missing_period(self):
        """Test clauses must end with '.'"""
        reader = TermReader("p(a) q(b).")
        with pytest.raises(ProgramSyntaxError, match="expected '.'"):
            reader.read_clause_term()

    def test_read_number(self):
        """Test signed numbers for parameter lines"""
        reader = TermReader("- 0.5 3")
        assert reader.read_number() == -0.5
        assert reader.read_number() == 3.0
