"""
Sampling execution: a program run as a stochastic generator

Each (switch, trial) pair is drawn at most once per run. Backtracking may
revisit clause choices but never retracts a draw.
"""
import os
import sys
from dataclasses import dataclass

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from core.errors import UniquenessViolationError, InstantiationError
from core.explainer import Explanation
from core.resolution import Resolver, Branch, SwitchInstance
from core.terms import unify, apply_substitution, is_ground, format_term
from utils.logger import setup_logger

logger = setup_logger(__name__)


class SampleRun:
    """Random state and trial memo of one sampling run"""

    def __init__(self, params, rng):
        self.params = params
        self.rng = rng
        self.memo = {}
        self.drawn = []

    def sample_switch(self, name, trial, value, subst):
        """
        Draw (or recall) the value of switch `name` at `trial` and unify it with `value`

        Returns:
            The extended substitution, or None when value disagrees with the draw
        """
        if not is_ground(name) or not is_ground(trial):
            raise InstantiationError(
                f"msw/3 called with non-ground switch or trial: msw({format_term(name)},{format_term(trial)},_)")
        key = (name, trial)
        drawn = self.memo.get(key)
        if drawn is None:
            values = self.params.values(name)
            cumulative = np.cumsum(self.params.row(name))
            index = int(np.searchsorted(cumulative, self.rng.random() * cumulative[-1], side='right'))
            drawn = values[min(index, len(values) - 1)]
            self.memo[key] = drawn
            self.drawn.append(SwitchInstance(name, trial, drawn))
        return unify(value, drawn, subst)


class SamplingResolver(Resolver):
    def __init__(self, program, run, max_steps=None):
        super().__init__(program, max_steps)
        self.run_state = run

    def call_switch(self, goal, rest, branch):
        name = apply_substitution(goal.args[0], branch.subst)
        trial = apply_substitution(goal.args[1], branch.subst)
        key = (name, trial)
        fresh = key not in self.run_state.memo
        s = self.run_state.sample_switch(name, trial, goal.args[2], branch.subst)
        if s is not None:
            nodes = branch.nodes
            if branch.trial_value(key) is None:
                nodes = nodes + (SwitchInstance(name, trial, self.run_state.memo[key]),)
            yield Branch(rest, s, nodes, branch.trials + ((key, self.run_state.memo[key]),))
        elif fresh:
            logger.debug(f"Draw for {format_term(name)} at {format_term(trial)} rejected")


@dataclass(frozen=True)
class Sample:
    goal: object
    explanation: Explanation

    def __str__(self):
        return f"{format_term(self.goal)} <- {self.explanation}"


def sample_goal(program, goal, seed=None, params=None, rng=None, max_steps=None):
    """
    Draw one instance of goal from the program distribution

    Returns:
        Sample with the instantiated goal and its explanation, or None when the
        goal fails before any switch is drawn

    Raises:
        UniquenessViolationError: every clause failed after switch draws
        ResourceLimitError: depth bound exceeded
    """
    params = program.params if params is None else params
    rng = np.random.default_rng(seed) if rng is None else rng
    run = SampleRun(params, rng)
    resolver = SamplingResolver(program, run, max_steps)
    for branch in resolver.solve((goal,)):
        instance = apply_substitution(goal, branch.subst)
        explanation = Explanation(n for n in branch.nodes if isinstance(n, SwitchInstance))
        return Sample(instance, explanation)
    if run.drawn:
        draws = ", ".join(str(d) for d in run.drawn)
        raise UniquenessViolationError(
            f"Sampling {format_term(goal)} failed after drawing {draws}")
    return None


def sample_goals(program, goal, count, seed=None, params=None, max_steps=None):
    """count independent samples from one seeded generator"""
    rng = np.random.default_rng(seed)
    samples = [sample_goal(program, goal, params=params, rng=rng, max_steps=max_steps)
               for _ in range(count)]
    logger.info(f"Drew {count} samples of {format_term(goal)}")
    return samples
