"""Sampling subroutines shared by the learners.

Navigation and reachability-test rollouts are not recorded in any counter, so
they run as cohorts (see ``Simulator.cohort``). Only the ``(x, a)`` draws in
``explore`` feed a ``VisitCounter``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .config import PAPER, Constants
from .mdp import TabularMdp, simulate_cohort
from .sampler import NavigationError, RngStreams, Simulator
from .visgo import VisitCounter

N_DEV_MAX = 2**60


def _dev_bound(n: int, L0: float, delta: float) -> float:
    return 8.0 / math.sqrt(n) * math.log(8.0 * n * n * L0 / delta) ** 2


def n_dev(L0: float, eps: float, delta: float) -> int:
    """Smallest ``n`` with ``(8/sqrt(n)) ln^2(8 n^2 L0 / delta) <= eps``.

    The left side only increases for n < 20, where it is still far above any
    eps < 1, so doubling followed by bisection lands on the first crossing.
    """
    if L0 < 1 or not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError("need L0 >= 1, eps in (0,1), delta in (0,1)")
    hi = 1
    while _dev_bound(hi, L0, delta) > eps:
        hi *= 2
        if hi > N_DEV_MAX:
            raise OverflowError("n_dev exceeds 2**60")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _dev_bound(mid, L0, delta) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def n_zero(z0: float, z0_prime: float, delta0: float, delta: float, L: float, c: float = 4.0) -> int:
    """Sample floor per pair so that VISGO's greedy policy is within 2x of its value."""
    if z0 <= 0:
        return 0
    return math.ceil(c * L * L * z0 * math.log(z0_prime / (delta0 * delta)))


def n_one(x: float, delta0: float, delta: float, L: float, c: float = 4.0) -> int:
    """Fresh-sample version of ``n_zero``."""
    if x <= 0:
        return 0
    return math.ceil(c * L * L * x * math.log(x / (delta0 * delta)))


def navigate(sim: Simulator, pi, x: int, k: int, cap: int, rng: np.random.Generator) -> None:
    """Reset ``k`` times and drive each run to ``x`` with ``pi``."""
    if k <= 0 or x == sim.initial_state:
        return
    res = sim.cohort(pi, sim.initial_state, (x,), k, cap, rng)
    if res.unfinished:
        raise NavigationError(
            f"{res.unfinished}/{k} navigation runs to state {x} exceeded the {cap}-step cap"
        )


def explore(
    sim: Simulator,
    X: Iterable[int],
    policies: Mapping[int, object],
    counter: VisitCounter,
    n_bar: float,
    L: float,
    rngs: RngStreams,
    constants: Constants = PAPER,
) -> tuple[VisitCounter, set[int]]:
    """Bring ``n(x, a)`` up to ``n_bar`` for every ``(x, a)`` in ``X x A``.

    Returns the counter (updated in place) and the observed next states
    outside ``X``.
    """
    xs = sorted(set(X))
    xset = set(xs)
    target = math.ceil(n_bar)
    cap = constants.nav_cap(L)
    found: set[int] = set()
    for x in xs:
        for a in range(sim.num_actions):
            k = target - counter.count(x, a)
            if k <= 0:
                continue
            navigate(sim, policies[x], x, k, cap, rngs.navigation)
            counts = sim.sample_many(x, a, k, rngs.explore)
            counter.add_counts(x, a, counts)
            found.update(t for t in counts if t not in xset)
    return counter, found


def rtest_trials(x_size: int, delta: float, constants: Constants = PAPER) -> int:
    return math.ceil(constants.rtest_base * math.log(2.0 * x_size / delta))


def rtest(
    sim: Simulator,
    X: Iterable[int],
    reach_policies: Mapping[int, object],
    test_policy,
    g: int,
    delta: float,
    L: float,
    rngs: RngStreams,
    constants: Constants = PAPER,
) -> bool:
    """Monte-Carlo check that ``test_policy`` reaches ``g`` from every state of ``X``."""
    xs = sorted(set(X))
    if not xs:
        return True
    n = rtest_trials(len(xs), delta, constants)
    horizon = math.ceil(constants.rtest_horizon * L)
    cap = constants.nav_cap(L)
    for s in xs:
        navigate(sim, reach_policies[s], s, n, cap, rngs.navigation)
        res = sim.cohort(test_policy, s, (g,), n, horizon, rngs.rtest)
        if res.finished / n < constants.rtest_threshold:
            return False
    return True


@dataclass
class HittingTimeEstimate:
    tau_hat: float
    lengths: np.ndarray  # lengths[t] = number of episodes of length t
    capped: int
    n_episodes: int

    def mean_of_finished(self) -> float:
        done = self.lengths.sum()
        return float((np.arange(self.lengths.size) * self.lengths).sum() / done) if done else math.nan


def estimate_hitting_time(
    mdp: TabularMdp, pi, g: int, n_episodes: int, step_cap: int, rng: np.random.Generator
) -> HittingTimeEstimate:
    """Empirical mean episode length from s0 under ``pi`` (unit cost per step).

    Episodes that hit ``step_cap`` count ``step_cap`` steps and are reported
    in ``capped``.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be positive")
    res = simulate_cohort(mdp, pi, mdp.initial_state, (g,), n_episodes, step_cap, rng)
    return HittingTimeEstimate(res.steps / n_episodes, res.arrivals, res.unfinished, n_episodes)
