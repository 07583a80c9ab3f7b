"""
Unit tests for inside/outside probabilities, graphical EM and Viterbi
"""
import math

import numpy as np
import pytest
from core.em import (LearnConfig, ParameterIndex, inside_probs, expectations, goal_probability,
                     learn_gEM, learn_naive, learn, expected_counts, log_likelihood,
                     viterbi, viterbi_goal, format_expected_counts, GraphicalEM)
from core.errors import ZeroProbabilityError, EmptySupportError
from core.explainer import explain, flatten, enumerate_explanations_exhaustive
from core.program import parse_observations, parse_program
from core.resolution import SwitchInstance
from core.terms import Int, atom, compound
from oracles.hmm import HmmSpec, hmm_program, hmm_goal


def key(name, value):
    return (atom(name), atom(value))


def gene_row(params, a, b, o):
    params.set_row(atom('gene'), [a, b, o])


class TestLearnConfig:
    """Test LearnConfig validation"""

    def test_defaults(self):
        """Test default stopping rule"""
        cfg = LearnConfig()
        assert cfg.epsilon == 1e-6
        assert cfg.max_iterations == 1000
        assert cfg.init_mode == 'uniform'

    @pytest.mark.parametrize("kwargs, message", [
        ({'epsilon': 0}, "Invalid epsilon"),
        ({'max_iterations': 0}, "Invalid max iterations"),
        ({'init_mode': 'zeros'}, "Invalid init mode"),
        ({'jobs': 0}, "Invalid jobs"),
    ])
    def test_invalid(self, kwargs, message):
        """Test invalid settings are rejected"""
        with pytest.raises(ValueError, match=message):
            LearnConfig(**kwargs)


class TestInsideOutside:
    """Test inside and outside passes on the f/g/h program"""

    def test_inside_values(self, dbp_program):
        """Test β(h)=0.5, β(g)=0.7, β(f)=0.7"""
        graph = explain(dbp_program, atom('f'))
        inside = inside_probs(graph, dbp_program.params)
        assert inside[(0, atom('h'))] == pytest.approx(0.5, abs=1e-12)
        assert inside[(0, atom('g'))] == pytest.approx(0.7, abs=1e-12)
        assert inside[(0, atom('f'))] == pytest.approx(0.7, abs=1e-12)
        assert inside.goal_probability() == pytest.approx(0.12 + 0.09 + 0.28 + 0.21, abs=1e-12)

    def test_outside_values(self, dbp_program):
        """Test α(f,g)=1.0, α(f,h)=0.6 and μ(f,m)=0.3"""
        graph = explain(dbp_program, atom('f'))
        inside = inside_probs(graph, dbp_program.params)
        outside, counts = expectations(graph, dbp_program.params, inside)
        assert outside[(0, atom('f'))] == 1.0
        assert outside[(0, atom('g'))] == pytest.approx(1.0, abs=1e-12)
        assert outside[(0, atom('h'))] == pytest.approx(0.6, abs=1e-12)
        assert counts.per_goal[0][key('s_m', 'm')] == pytest.approx(0.3, abs=1e-12)
        assert counts[key('s_m', 'm')] == pytest.approx(3 / 7, abs=1e-12)

    def test_expected_counts_match_naive_sum(self, dbp_program):
        """Test η for s_m=m equals the explicit sum over four explanations"""
        obs = parse_observations("f.")
        for method in ('gem', 'naive'):
            eta = expected_counts(dbp_program, obs, method=method)
            assert eta[key('s_m', 'm')] == pytest.approx((0.09 + 0.21) / 0.7, abs=1e-12)
            assert eta[key('s_ab', 'b')] == pytest.approx(0.7 * 0.7 / 0.7, abs=1e-12)

    def test_uniform_hmm_string(self):
        """Test a length-3 string under all-0.5 parameters has probability 1/8"""
        program = hmm_program(HmmSpec.uniform(2, ('a', 'b')), 3)
        assert goal_probability(program, hmm_goal('aba')) == pytest.approx(0.125, abs=1e-12)

    def test_several_graphs(self, blood_program):
        """Test inside tables for a list of graphs"""
        graphs = [explain(blood_program, compound('btype', atom(t))) for t in ('a', 'ab')]
        inside = inside_probs(graphs, blood_program.params)
        assert inside.goal_probability(0) == pytest.approx(0.25 + 0.15 + 0.15, abs=1e-12)
        assert inside.goal_probability(1) == pytest.approx(0.2, abs=1e-12)


class TestGoalProbability:
    """Test goal_probability against closed forms and the exhaustive search"""

    def test_blood_closed_form(self, blood_program):
        """Test P(btype(a)) = θa² + 2θaθo at random parameter points"""
        rng = np.random.default_rng(0)
        goal = compound('btype', atom('a'))
        for a, b, o in rng.dirichlet([1.0, 1.0, 1.0], size=100):
            gene_row(blood_program.params, a, b, o)
            assert goal_probability(blood_program, goal) == pytest.approx(a * a + 2 * a * o, abs=1e-12)

    def test_blood_ab(self, blood_program):
        """Test P(btype(ab)) = 2θaθb"""
        assert goal_probability(blood_program, compound('btype', atom('ab'))) == pytest.approx(0.2, abs=1e-12)

    def test_matches_exhaustive_sum(self, bundled):
        """Test the inside probability equals the sum over all explanations"""
        _, program, observations = bundled
        for goal in observations.goals:
            brute = sum(e.probability(program.params)
                        for e in enumerate_explanations_exhaustive(program, goal))
            assert goal_probability(program, goal) == pytest.approx(brute, abs=1e-12)

    def test_unprovable_goal(self, coin_program):
        """Test a goal with no explanation has probability 0"""
        assert goal_probability(coin_program, compound('coin', atom('edge'))) == 0.0

    def test_log_likelihood(self, dbp_program):
        """Test the log-likelihood of one observation of f"""
        assert log_likelihood(dbp_program, parse_observations("2 f.")) == pytest.approx(2 * math.log(0.7))


class TestParameterIndex:
    """Test flat parameter positions"""

    def test_positions_follow_store_order(self, blood_program):
        """Test each (switch, value) gets one position"""
        index = ParameterIndex(blood_program.params)
        assert index.size == 3
        assert index[SwitchInstance(atom('gene'), atom('father'), atom('o'))] == 2
        theta = index.vector(blood_program.params)
        assert theta.tolist() == pytest.approx([0.5, 0.2, 0.3], abs=1e-15)

    def test_write_back(self, blood_program):
        """Test a vector is copied into the store"""
        index = ParameterIndex(blood_program.params)
        index.write_back(np.array([0.1, 0.1, 0.8]), blood_program.params)
        assert blood_program.params.prob(atom('gene'), atom('o')) == 0.8


class TestLearning:
    """Test learn_gEM and learn_naive"""

    def test_coin_relative_frequency(self, coin_program, bundled_observations):
        """Test three heads and one tails give (0.75, 0.25) after one update"""
        result = learn_gEM(coin_program, bundled_observations('coin'), LearnConfig(record_history=True))
        assert result.history[1][key('c', 'heads')] == pytest.approx(0.75, abs=1e-15)
        assert result.params.prob(atom('c'), atom('heads')) == pytest.approx(0.75, abs=1e-15)
        assert result.params.prob(atom('c'), atom('tails')) == pytest.approx(0.25, abs=1e-15)
        assert result.converged
        assert result.iterations == 2
        assert result.trace[0] == pytest.approx(4 * math.log(0.5))

    def test_naive_coin(self, coin_program, bundled_observations):
        """Test the naive learner reaches the same estimate"""
        result = learn_naive(coin_program, bundled_observations('coin'))
        assert result.params.prob(atom('c'), atom('heads')) == pytest.approx(0.75, abs=1e-15)
        assert result.method == 'naive'

    def test_input_parameters_untouched(self, blood_program, bundled_observations):
        """Test learning works on a copy of the given parameters"""
        before = blood_program.params.snapshot()
        learn_gEM(blood_program, bundled_observations('blood'), params=blood_program.params)
        assert blood_program.params.snapshot() == before

    def test_gem_equals_naive(self, bundled):
        """Test parameter trajectories agree over twenty single-iteration steps"""
        _, program, observations = bundled
        cfg = LearnConfig(epsilon=1e-300, max_iterations=1)
        gem_params = naive_params = program.params
        for _ in range(20):
            gem = learn_gEM(program, observations, cfg, params=gem_params)
            naive = learn_naive(program, observations, cfg, params=naive_params)
            assert gem.iterations == naive.iterations == 1
            assert len(gem.trace) == len(naive.trace) == 2
            assert naive.trace == pytest.approx(gem.trace, abs=1e-9)
            expected = gem.params.snapshot()
            for k, value in naive.params.snapshot().items():
                assert value == pytest.approx(expected[k], abs=1e-9)
            for k, value in gem.expected_counts.items():
                assert naive.expected_counts[k] == pytest.approx(value, rel=1e-9, abs=1e-9)
            gem_params, naive_params = gem.params, naive.params

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(5))
    def test_monotone_likelihood(self, bundled, seed):
        """Test λ never decreases from random starting points"""
        _, program, observations = bundled
        result = learn_gEM(program, observations, LearnConfig(init_mode='random', seed=seed))
        for previous, current in zip(result.trace, result.trace[1:]):
            assert current >= previous - 1e-9
        assert result.params.row_violations() == []

    def test_simplex_after_each_update(self, hmm_program_bundled, bundled_observations):
        """Test every recorded θ row sums to one"""
        result = learn_gEM(hmm_program_bundled, bundled_observations('hmm'),
                           LearnConfig(max_iterations=10, record_history=True),
                           params=hmm_program_bundled.params)
        for snapshot in result.history:
            rows = {}
            for (name, _), p in snapshot.items():
                assert 0.0 <= p <= 1.0
                rows[name] = rows.get(name, 0.0) + p
            for total in rows.values():
                assert total == pytest.approx(1.0, abs=1e-12)

    def test_blood_grid_optimum(self, blood_program, bundled_observations):
        """Test the learned maximum against a 0.01-step grid search"""
        observations = bundled_observations('blood')
        best = max(learn_gEM(blood_program, observations,
                             LearnConfig(init_mode='random', seed=s)).log_likelihood
                   for s in range(10))
        grid = np.arange(1, 100) / 100.0
        a, o = np.meshgrid(grid, grid)
        b = 1.0 - a - o
        valid = b > 1e-9
        a, o, b = a[valid], o[valid], b[valid]
        objective = np.log((a * a + 2 * a * o) * o * o * 2 * a * b)
        assert best == pytest.approx(float(objective.max()), abs=1e-3)

    def test_zero_probability_observation(self, coin_program):
        """Test an observation impossible under the start parameters"""
        coin_program.params.set_row(atom('c'), [1.0, 0.0])
        with pytest.raises(ZeroProbabilityError, match="coin\\(tails\\)"):
            learn_gEM(coin_program, parse_observations("coin(tails)."), params=coin_program.params)

    def test_unused_value_gets_zero(self, blood_program):
        """Test a value absent from every explanation drops to 0"""
        obs = parse_observations("btype(a).")
        result = learn_gEM(blood_program, obs, LearnConfig(max_iterations=3), params=blood_program.params)
        assert result.params.prob(atom('gene'), atom('b')) == 0.0

    def test_frozen_rows(self):
        """Test switches with zero expected count keep their values"""
        program = parse_program("values(c,[a,b]).\nvalues(d,[a,b]).\np :- msw(c,1,a).\np :- msw(c,1,b).")
        program.params.set_row(atom('d'), [0.9, 0.1])
        result = learn_gEM(program, parse_observations("p."), params=program.params)
        assert result.params.prob(atom('d'), atom('a')) == pytest.approx(0.9, abs=1e-15)
        assert result.params.prob(atom('c'), atom('a')) == pytest.approx(0.5)

    def test_max_iterations(self, hmm_program_bundled, bundled_observations):
        """Test the iteration bound stops without convergence"""
        result = learn_gEM(hmm_program_bundled, bundled_observations('hmm'),
                           LearnConfig(max_iterations=1, init_mode='random', seed=1))
        assert result.iterations == 1
        assert not result.converged
        assert len(result.trace) == 2

    def test_progress_callback(self, coin_program, bundled_observations, mocker):
        """Test progress is reported for λ(0) and each update"""
        progress = mocker.Mock()
        result = learn(coin_program, bundled_observations('coin'), LearnConfig(progress=progress))
        assert [c.args[0] for c in progress.call_args_list] == [0, 1, 2]
        progress.assert_any_call(0, result.trace[0])
        progress.assert_called_with(2, result.trace[-1])

    def test_parallel_jobs_identical(self, hmm_program_bundled, bundled_observations):
        """Test a thread pool gives the same trace as a single worker"""
        observations = bundled_observations('hmm')
        single = learn_gEM(hmm_program_bundled, observations, LearnConfig(max_iterations=5))
        pooled = learn_gEM(hmm_program_bundled, observations, LearnConfig(max_iterations=5, jobs=3))
        assert pooled.trace == single.trace

    def test_unknown_method(self, coin_program, bundled_observations):
        """Test method names are validated"""
        with pytest.raises(ValueError, match="Invalid method"):
            learn(coin_program, bundled_observations('coin'), method='vb')

    def test_support_size(self, dbp_program):
        """Test the estimator reports total graph size"""
        estimator = GraphicalEM(dbp_program, [atom('f')], [1], dbp_program.params.copy())
        assert estimator.support_size() == 11

    def test_format_expected_counts(self, dbp_program):
        """Test printed expected counts"""
        lines = format_expected_counts(expected_counts(dbp_program, parse_observations("f.")))
        assert lines[0].startswith("eta s_ab a ")
        assert any(line.startswith("eta s_m m 0.428571428571") for line in lines)


class TestViterbi:
    """Test the most likely explanation"""

    def test_blood_father_mother_a(self, blood_program):
        """Test btype(a) at (0.5, 0.2, 0.3) picks a/a with 0.25"""
        explanation, p = viterbi_goal(blood_program, compound('btype', atom('a')))
        assert str(explanation) == "{msw(gene,father,a), msw(gene,mother,a)}"
        assert p == pytest.approx(0.25, abs=1e-15)

    def test_uniform_hmm_tie(self):
        """Test all paths tie at 0.5^7 and the first stored one wins"""
        program = hmm_program(HmmSpec.uniform(2, ('a', 'b')), 3)
        explanation, p = viterbi_goal(program, hmm_goal('aba'))
        assert p == pytest.approx(0.5 ** 7, abs=1e-15)
        assert len(explanation) == 7
        assert all(i.value != atom('s1') for i in explanation)

    def test_matches_flatten_maximum(self, bundled):
        """Test the Viterbi probability equals the best flattened explanation"""
        _, program, observations = bundled
        for goal in observations.goals:
            graph = explain(program, goal)
            explanation, p = viterbi(graph, program.params)
            brute = max(e.probability(program.params) for e in flatten(graph))
            assert p == pytest.approx(brute, rel=1e-12)
            assert explanation in flatten(graph)

    def test_empty_support(self, coin_program):
        """Test goals with no explanation"""
        with pytest.raises(EmptySupportError, match="no explanation"):
            viterbi_goal(coin_program, compound('coin', atom('edge')))

    def test_hmm_path_matches_brute_force(self, hmm_program_bundled):
        """Test the bundled HMM picks the single most likely state path"""
        goal = hmm_goal('abb')
        explanation, p = viterbi_goal(hmm_program_bundled, goal)
        explanations = enumerate_explanations_exhaustive(hmm_program_bundled, goal)
        best = max(explanations, key=lambda e: e.probability(hmm_program_bundled.params))
        assert explanation == best
        assert Int(3) in {i.trial for i in explanation}
