"""The environment as the learners see it: a sampler, never a table.

Learning code only gets the initial state, the action count, and ways to draw
transitions. Every transition drawn through a ``Simulator`` is counted once in
``steps``; that count is the sample complexity reported by the harness.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .mdp import CohortResult, TabularMdp, simulate_cohort

STREAMS = ("navigation", "evaluation", "explore", "rtest", "misc")


class BudgetExceeded(RuntimeError):
    pass


class NavigationError(RuntimeError):
    """A navigation rollout overran its safety cap."""


class Simulator:
    def __init__(self, mdp: TabularMdp, budget: int | None = None):
        self._mdp = mdp
        self._succ = mdp._succ
        self._cum = mdp._cum
        self.initial_state = mdp.initial_state
        self.num_actions = mdp.num_actions
        self.budget = budget
        self.steps = 0

    def _charge(self, n: int) -> None:
        self.steps += n
        if self.budget is not None and self.steps > self.budget:
            raise BudgetExceeded(f"sample budget of {self.budget} environment steps exhausted")

    def step(self, s: int, a: int, rng: np.random.Generator) -> int:
        self._charge(1)
        k = s * self.num_actions + a
        return self._succ[k][bisect_right(self._cum[k], rng.random())]

    def sample_many(self, s: int, a: int, k: int, rng: np.random.Generator) -> dict[int, int]:
        """``k`` independent draws from ``P(.|s,a)`` as a histogram."""
        if k <= 0:
            return {}
        self._charge(k)
        succ, probs = self._mdp.successors(s, a)
        counts = rng.multinomial(k, probs) if succ.size > 1 else np.array([k])
        return {int(t): int(c) for t, c in zip(succ, counts) if c}

    def cohort(
        self, pi, start: int, stop: Iterable[int], k: int, max_steps: int, rng: np.random.Generator
    ) -> CohortResult:
        """``k`` independent rollouts of ``pi`` from ``start``, stopped at ``stop``."""
        res = simulate_cohort(self._mdp, pi, start, stop, k, max_steps, rng)
        self._charge(res.steps)
        return res

    def tables(self):
        """``(succ, cum, charge)`` for inlined sampling: the next state of pair
        ``k = s * A + a`` is ``succ[k][bisect_right(cum[k], u)]`` for uniform
        ``u``; the caller must ``charge(n)`` for every ``n`` steps drawn."""
        return self._succ, self._cum, self._charge


@dataclass
class RngStreams:
    """Named, independent generators derived from one master seed."""

    navigation: np.random.Generator
    evaluation: np.random.Generator
    explore: np.random.Generator
    rtest: np.random.Generator
    misc: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        children = np.random.SeedSequence(seed).spawn(len(STREAMS))
        return cls(*(np.random.default_rng(c) for c in children))
