"""
Unit tests for SLD resolution and built-ins
"""
import pytest
from core.errors import InstantiationError, EvaluationError, ResourceLimitError
from core.program import parse_program
from core.reader import parse_term
from core.resolution import Resolver
from core.terms import Int, apply_substitution, list_items, term_variables


def answers(text, goal, var='X'):
    """Bindings of one variable over all solutions, in order"""
    program = parse_program(text)
    resolver = Resolver(program)
    query = parse_term(goal)
    target = [v for v in term_variables(query) if v.name == var][0]
    return [apply_substitution(target, b.subst) for b in resolver.solve((query,))]


LISTS = """
app([],L,L).
app([H|T],L,[H|R]) :- app(T,L,R).
"""


class TestResolver:
    """Test the depth-first engine"""

    def test_clause_order(self):
        """Test solutions come in source clause order"""
        result = answers("p(1).\np(2).\np(3).", "p(X)")
        assert result == [Int(1), Int(2), Int(3)]

    def test_recursion(self):
        """Test list append enumerates splits"""
        result = answers(LISTS, "app(X, Y, [a,b])")
        assert len(result) == 3
        assert list_items(result[0]) == []

    def test_disjunction(self):
        """Test both branches of ';' are explored"""
        result = answers("p(X) :- (X = 1 ; X = 2).", "p(X)")
        assert result == [Int(1), Int(2)]

    def test_deep_recursion_uses_no_stack(self):
        """Test a long chain resolves without exhausting Python recursion"""
        text = "count(N,N).\ncount(I,N) :- I < N, J is I + 1, count(J,N)."
        program = parse_program(text)
        solutions = list(Resolver(program).solve((parse_term("count(0, 2000)"),)))
        assert len(solutions) == 1

    def test_step_bound(self):
        """Test non-terminating programs hit the step bound"""
        program = parse_program("loop :- loop.")
        with pytest.raises(ResourceLimitError, match="may not terminate"):
            list(Resolver(program, max_steps=100).solve((parse_term("loop"),)))


class TestBuiltins:
    """Test arithmetic and term built-ins"""

    def test_is(self):
        """Test integer arithmetic"""
        assert answers("", "X is 7 // 2 + 3 * 2 - 10 mod 4") == [Int(7)]
        assert answers("", "X is -7 // 2") == [Int(-3)]

    def test_comparisons(self):
        """Test comparison built-ins succeed or fail"""
        assert answers("p(X) :- X = 1, 1 < 2, 2 >= 2, 3 =< 4, 5 =:= 5, 5 =\\= 6.", "p(X)") == [Int(1)]
        assert answers("p(X) :- X = 1, 2 < 1.", "p(X)") == []

    def test_unbound_arithmetic(self):
        """Test arithmetic on unbound variables"""
        with pytest.raises(InstantiationError):
            answers("", "X is Y + 1")

    def test_division_by_zero(self):
        """Test division by zero"""
        with pytest.raises(EvaluationError, match="Division by zero"):
            answers("", "X is 1 // 0")

    def test_not_an_expression(self):
        """Test arithmetic on atoms"""
        with pytest.raises(EvaluationError, match="Not an arithmetic expression"):
            answers("", "X is foo + 1")

    def test_between_enumerates_strictly(self):
        """Test between(L, X, H) gives L < X < H"""
        assert answers("", "between(0, X, 4)") == [Int(1), Int(2), Int(3)]
        assert answers("p(X) :- X = 2, between(1, 2, 3).", "p(X)") == [Int(2)]
        assert answers("p(X) :- X = 2, between(2, 2, 3).", "p(X)") == []

    def test_length(self):
        """Test length/2 on proper and open lists"""
        assert answers("", "length([a,b,c], X)") == [Int(3)]
        result = answers("", "length(X, 2)")
        assert len(list_items(result[0])) == 2

    def test_length_needs_a_bound(self):
        """Test length/2 with both arguments unbound"""
        with pytest.raises(InstantiationError, match="length/2"):
            answers("", "length(X, N)")

    def test_not_unify_requires_ground(self):
        """Test \\= on ground and non-ground arguments"""
        assert answers("p(X) :- X = a, a \\= b.", "p(X)") != []
        with pytest.raises(InstantiationError):
            answers("", "X \\= b")

    def test_unify_builtin(self):
        """Test =/2 binds"""
        assert answers("", "f(X, b) = f(a, Y)") != []

    def test_var_and_nonvar(self):
        """Test var/1 and nonvar/1 select clauses by binding state"""
        text = "mode(X, open) :- var(X).\nmode(X, bound) :- nonvar(X).\n"
        assert answers(text, "mode(_, X)") == [parse_term("open")]
        assert answers(text, "mode(f(_), X)") == [parse_term("bound")]
        assert answers("p(X) :- X = a, var(X).", "p(X)") == []
