"""
Speed measurements for graphical EM

Times one graphical-EM iteration against one Inside-Outside iteration on
random grammars as sentence length grows, and fits the growth curves.
"""
import os
import statistics
import sys
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from core.em import GraphicalEM
from oracles.pcfg import CnfGrammar, pcfg_program, pcfg_goal, inside_outside_step
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class BenchmarkPoint:
    length: int
    graph_size: int
    gem_seconds: float
    oracle_seconds: float


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    r_squared: float


def time_call(fn, repeats=3):
    """Median wall time of fn() over repeats calls"""
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def fit_linear(xs, ys):
    result = stats.linregress(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    return Fit(float(result.slope), float(result.intercept), float(result.rvalue ** 2))


def fit_power_law(xs, ys):
    """Linear fit in log-log space; the slope is the exponent"""
    return fit_linear(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)))


def gem_iteration(estimator, theta, states):
    """One E-step, M-step and inside pass, as in the learning loop"""
    eta = estimator.expected_counts(theta, states)
    updated = estimator.maximize(theta, eta)
    return estimator.inside(updated)


def random_sentences(terminals, length, count, rng):
    return [tuple(str(w) for w in rng.choice(terminals, size=length)) for _ in range(count)]


def run_length_benchmark(nonterminals=('s', 'x', 'y'), terminals=('a', 'b'),
                         lengths=(4, 6, 8), sentences=3, seed=0, style='span', repeats=3):
    """
    Per-length timings for gEM and Inside-Outside on one random grammar

    Every binary and lexical rule is present, so any string of terminals parses.
    """
    rng = np.random.default_rng(seed)
    grammar = CnfGrammar.random(nonterminals, terminals, seed=seed)
    program = pcfg_program(grammar, style)
    points = []
    for length in lengths:
        corpus = random_sentences(list(terminals), length, sentences, rng)
        goals = [pcfg_goal(s) for s in corpus]
        params = program.params.copy()
        estimator = GraphicalEM(program, goals, [1] * len(goals), params)
        theta = estimator.index.vector(params)
        states, _ = estimator.inside(theta)
        gem_seconds = time_call(lambda: gem_iteration(estimator, theta, states), repeats)
        data = [(s, 1) for s in corpus]
        oracle_seconds = time_call(lambda: inside_outside_step(grammar, data), repeats)
        point = BenchmarkPoint(length, estimator.support_size(), gem_seconds, oracle_seconds)
        logger.info(f"Length {length}: size {point.graph_size}, gEM {gem_seconds:.4f}s, "
                    f"Inside-Outside {oracle_seconds:.4f}s")
        points.append(point)
    return points


def plot_benchmark(points, path):
    """Time per iteration against sentence length, log scale"""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    lengths = [p.length for p in points]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lengths, [p.gem_seconds for p in points], marker='o', label='graphical EM')
    ax.plot(lengths, [p.oracle_seconds for p in points], marker='s', label='Inside-Outside')
    ax.set_yscale('log')
    ax.set_xlabel('sentence length')
    ax.set_ylabel('seconds per iteration')
    ax.legend()
    plt.tight_layout()
    plt.savefig(path, dpi=150, bbox_inches='tight')
    plt.close(fig)
    logger.info(f"Saved benchmark plot to {path}")
    return path
