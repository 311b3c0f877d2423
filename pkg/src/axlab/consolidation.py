"""Policy consolidation (multiplicative-optimal policies) and the full LAE pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .config import PAPER, Constants
from .discovery import DiscoveryResult, RoundLog, _check_args, evaluate_candidate, lasd, lasd_plus
from .explore import explore, n_one
from .mdp import PolicyTable
from .sampler import RngStreams, Simulator
from .visgo import VisitCounter, random_restricted_policy, visgo


@dataclass
class ConsolidationState:
    target: frozenset[int]
    remaining: set[int]
    accepted: dict[int, PolicyTable] = field(default_factory=dict)
    values: dict[int, float] = field(default_factory=dict)
    counter: VisitCounter | None = None
    round: int = 0

    def check(self) -> None:
        if set(self.accepted) & self.remaining:
            raise AssertionError("accepted goal still pending")
        if set(self.accepted) | self.remaining != set(self.target):
            raise AssertionError("accepted and pending goals do not cover the target set")


@dataclass
class ConsolidationResult:
    policies: dict[int, PolicyTable]
    values: dict[int, float]
    log: RoundLog
    samples: int


def policy_consolidation(
    sim: Simulator,
    L: float,
    eps: float,
    delta: float,
    T: Iterable[int],
    initial_policies: Mapping[int, PolicyTable],
    rngs: RngStreams,
    constants: Constants = PAPER,
    log: RoundLog | None = None,
) -> ConsolidationResult:
    """Re-plan every goal in ``T`` with policies restricted on ``T`` minus the goal.

    The skip check watches pairs whose state lies in ``T``.
    """
    _check_args(L, eps, delta)
    T = frozenset(T)
    if not T:
        raise ValueError("target set must be nonempty")
    missing = T - set(initial_policies) - {sim.initial_state}
    if missing:
        raise ValueError(f"no initial policy for {sorted(missing)}")
    A, s0 = sim.num_actions, sim.initial_state
    log = log or RoundLog("pc", sim)
    nav = dict(initial_policies)
    nav.setdefault(s0, PolicyTable.reset_everywhere())
    st = ConsolidationState(T, set(T), counter=VisitCounter(A))
    d = delta / len(T)

    explore(sim, T, nav, st.counter, n_one(len(T) - 1, d, d, L, constants.c_n1), L, rngs, constants)
    log.add("warmup", K=T, U=st.remaining)

    while st.remaining:
        st.round += 1
        r = st.round
        g = min(st.remaining)
        eps_vi = 1.0 / max(16, st.counter.total)
        X = T - {g}
        out = visgo(X, g, eps_vi, st.counter, d, L, s0, c1=constants.c1, c2=constants.c2,
                    max_sweeps=constants.visgo_max_sweeps)
        if out.diverged:
            pi = random_restricted_policy(X, A, rngs.misc)
        else:
            pi = out.pi
        v = out.value(s0)
        bound = v * (1 + eps / 2)
        lam = constants.eval_episodes(L, eps, delta / (2 * r * r))
        res = evaluate_candidate(sim, st.counter, T, g, pi, lam, lambda tau: tau > bound, rngs.evaluation)
        if res.kind == "success":
            st.remaining.discard(g)
            st.accepted[g] = pi
            st.values[g] = v
        log.add(res.kind, round=r, goal=g, tau_hat=res.tau_hat,
                v_opt_s0=v if math.isfinite(v) else None, K=T, U=st.remaining)
        st.check()
    return ConsolidationResult(dict(sorted(st.accepted.items())), st.values, log, sim.steps)


@dataclass
class LaeResult:
    K: frozenset[int]
    policies: dict[int, PolicyTable]
    discovery: DiscoveryResult
    consolidation: ConsolidationResult


def lae(
    sim: Simulator,
    L: float,
    eps: float,
    delta: float,
    rngs: RngStreams,
    constants: Constants = PAPER,
    use_lasd: bool = False,
    num_states: int | None = None,
) -> LaeResult:
    """Discovery (LASD+ by default, LASD if ``use_lasd``) followed by consolidation."""
    if use_lasd:
        if num_states is None:
            raise ValueError("LASD needs num_states")
        disc = lasd(sim, L, eps, delta, num_states, rngs, constants, algo="lae")
    else:
        disc = lasd_plus(sim, L, eps, delta, rngs, constants, algo="lae")
    pc = policy_consolidation(sim, L, eps, delta, disc.K, disc.policies, rngs, constants,
                              log=RoundLog("pc", sim))
    return LaeResult(disc.K, pc.policies, disc, pc)
