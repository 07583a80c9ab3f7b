"""
Unit tests for the HMM reference and its program encoding
"""
import numpy as np
import pytest
from core.em import LearnConfig, learn_gEM, goal_probability
from oracles.hmm import (HmmSpec, parse_hmm, forward, baum_welch_step, hmm_program,
                         hmm_goal, hmm_observations, count_strings)


def assert_same_hmm(left, right, tol):
    assert np.allclose(left.initial, right.initial, atol=tol, rtol=0)
    assert np.allclose(left.transition, right.transition, atol=tol, rtol=0)
    assert np.allclose(left.emission, right.emission, atol=tol, rtol=0)


class TestHmmSpec:
    """Test HmmSpec construction and text format"""

    def test_uniform(self):
        """Test uniform rows"""
        h = HmmSpec.uniform(3, ('a', 'b'))
        assert h.states == ('s0', 's1', 's2')
        assert h.transition[1, 2] == pytest.approx(1 / 3)
        assert h.emission[0, 1] == 0.5

    def test_random_positive(self):
        """Test random rows are positive and reproducible"""
        first = HmmSpec.random(3, ('a', 'b'), seed=4)
        second = HmmSpec.random(3, ('a', 'b'), seed=4)
        assert np.all(first.transition > 0)
        assert_same_hmm(first, second, 0.0)

    def test_text_format(self):
        """Test to_text output reads back through parse_hmm"""
        h = HmmSpec.random(2, ('a', 'b', 'c'), seed=1)
        text = h.to_text()
        assert text.startswith("states s0 s1\nalphabet a b c\ninit ")
        assert_same_hmm(parse_hmm(text), h, 0.0)

    def test_parse_with_comments(self):
        """Test comments and blank lines are skipped"""
        h = parse_hmm("# two states\nstates x y\nalphabet a\n\ninit 1.0 0.0\n"
                      "trans x 0.5 0.5\ntrans y 0.0 1.0\nemit x 1.0\nemit y 1.0\n")
        assert h.states == ('x', 'y')
        assert h.transition[1].tolist() == [0.0, 1.0]

    @pytest.mark.parametrize("text, message", [
        ("states s0\nalphabet a\n", "needs states, alphabet and init"),
        ("states s0\nalphabet a\ninit 1.0\nemit s0 1.0\n", "Missing trans or emit"),
        ("states s0\nalphabet a\ninit one\n", "Bad HMM line 3"),
        ("states s0\nalphabet a\nstart s0\n", "unknown keyword start"),
    ])
    def test_parse_errors(self, text, message):
        """Test malformed HMM text"""
        with pytest.raises(ValueError, match=message):
            parse_hmm(text)

    def test_shape_mismatch(self):
        """Test arrays must match the state and symbol counts"""
        with pytest.raises(ValueError, match="Array shapes"):
            HmmSpec(('s0', 's1'), ('a',), [0.5, 0.5], [[1.0]], [[1.0], [1.0]])

    def test_rows_must_sum_to_one(self):
        """Test unnormalized rows are rejected"""
        with pytest.raises(ValueError, match="rows must sum to 1"):
            HmmSpec(('s0',), ('a', 'b'), [1.0], [[1.0]], [[0.6, 0.6]])

    def test_unknown_symbol(self):
        """Test strings with symbols outside the alphabet"""
        with pytest.raises(ValueError, match="uses symbols outside"):
            HmmSpec.uniform(2, ('a', 'b')).string_probability('abc')


class TestForward:
    """Test the forward pass against the encoded program"""

    def test_uniform_string(self):
        """Test every string of length L has probability 2^-L with two symbols"""
        h = HmmSpec.uniform(2, ('a', 'b'))
        assert h.string_probability('abba') == pytest.approx(0.0625, abs=1e-15)

    def test_forward_matches_goal_probability(self):
        """Test forward probabilities equal the inside probability of the encoded goal"""
        h = HmmSpec.random(3, ('a', 'b'), seed=2)
        program = hmm_program(h, 6)
        for string in h.sample_strings(6, 10, seed=3):
            _, p = forward(h, h.symbol_indices(string))
            assert goal_probability(program, hmm_goal(string)) == pytest.approx(p, rel=1e-12)

    def test_string_probabilities_sum_to_one(self):
        """Test all strings of one length carry the whole mass"""
        h = HmmSpec.random(2, ('a', 'b'), seed=5)
        total = sum(h.string_probability(f"{i:04b}".replace('0', 'a').replace('1', 'b'))
                    for i in range(16))
        assert total == pytest.approx(1.0, abs=1e-12)


class TestBaumWelch:
    """Test baum_welch_step and its agreement with graphical EM"""

    def test_likelihood_increases(self):
        """Test Baum-Welch never decreases the log-likelihood"""
        h = HmmSpec.random(2, ('a', 'b'), seed=0)
        data = count_strings(h.sample_strings(8, 30, seed=1))
        current = HmmSpec.random(2, ('a', 'b'), seed=9)
        previous = -np.inf
        for _ in range(15):
            current, loglik = baum_welch_step(current, data)
            assert loglik >= previous - 1e-9
            previous = loglik

    def test_empty_string(self):
        """Test zero-length strings are rejected"""
        with pytest.raises(ValueError, match="Empty strings"):
            baum_welch_step(HmmSpec.uniform(2, ('a',)), [((), 1)])

    def test_count_strings(self):
        """Test duplicates are grouped in first-occurrence order"""
        assert count_strings(['ab', 'ba', 'ab']) == [(('a', 'b'), 2), (('b', 'a'), 1)]

    @pytest.mark.oracle
    @pytest.mark.parametrize("n_states", [2, 3, 4])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_graphical_em(self, n_states, seed):
        """Test every gEM iterate equals the Baum-Welch iterate"""
        truth = HmmSpec.random(n_states, ('a', 'b'), seed=100 + seed)
        strings = truth.sample_strings(10, 20, seed=200 + seed)
        data = count_strings(strings)
        start = HmmSpec.random(n_states, ('a', 'b'), seed=300 + seed)

        program = hmm_program(start, 10)
        cfg = LearnConfig(epsilon=1e-12, max_iterations=10, record_history=True)
        result = learn_gEM(program, hmm_observations(data), cfg, params=program.params)
        assert len(result.history) >= 6

        reference = start
        for m in range(1, len(result.history)):
            reference, loglik = baum_welch_step(reference, data)
            assert result.trace[m - 1] == pytest.approx(loglik, abs=1e-9)
            learned = HmmSpec.from_snapshot(result.history[m], start.states, start.alphabet)
            assert_same_hmm(learned, reference, 1e-9)

    def test_from_params(self):
        """Test rows read back out of a program's parameter store"""
        h = HmmSpec.random(2, ('a', 'b'), seed=6)
        program = hmm_program(h, 3)
        assert_same_hmm(HmmSpec.from_params(program.params, h.states, h.alphabet), h, 0.0)
