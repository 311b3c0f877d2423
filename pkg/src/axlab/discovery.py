"""State discovery: LASD and LASD+.

Both learners see the environment only through a ``Simulator``. LASD needs
the number of states for its confidence levels and gets it as an argument;
LASD+ never receives it.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .config import PAPER, Constants
from .explore import explore, n_one, n_zero, rtest
from .mdp import RESET, PolicyTable
from .sampler import RngStreams, Simulator
from .visgo import VisgoOutput, VisitCounter, visgo_many

ROUND_KINDS = ("success", "skip", "failure", "expansion", "terminate", "rtest_fail", "warmup")
LOG_COLUMNS = (
    "algo",
    "trial",
    "round",
    "kind",
    "goal",
    "tau_hat",
    "v_opt_s0",
    "k_size",
    "k_prime_size",
    "u_size",
    "z",
    "n_min",
    "samples_used",
    "cumulative_samples",
    "k_set",
)

# evaluation steps between budget checks
_CHARGE_EVERY = 1 << 16


class InvariantError(AssertionError):
    pass


@dataclass
class RoundOutcome:
    kind: str
    goal: int | None = None
    tau_hat: float | None = None
    samples_used: int = 0
    episodes: int = 0


@dataclass
class RoundRecord:
    algo: str
    trial: int
    round: int
    kind: str
    goal: int | None
    tau_hat: float | None
    v_opt_s0: float | None
    k_size: int
    k_prime_size: int
    u_size: int
    z: int | None
    n_min: int | None
    samples_used: int
    cumulative_samples: int
    k_set: tuple[int, ...]

    def row(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        vals = [getattr(self, c) for c in LOG_COLUMNS[:-1]]
        return [fmt(v) for v in vals] + [" ".join(map(str, self.k_set))]


class RoundLog:
    """Append-only round log with sample accounting against a simulator."""

    def __init__(self, algo: str, sim: Simulator):
        self.algo = algo
        self.sim = sim
        self.records: list[RoundRecord] = []
        self._mark = sim.steps

    def add(self, kind: str, *, trial=1, round=0, goal=None, tau_hat=None, v_opt_s0=None,
            K=(), K_prime=(), U=(), z=None, n_min=None) -> RoundRecord:
        if kind not in ROUND_KINDS:
            raise ValueError(f"unknown round kind {kind!r}")
        now = self.sim.steps
        rec = RoundRecord(
            self.algo, trial, round, kind, goal,
            None if tau_hat is None else float(tau_hat),
            None if v_opt_s0 is None else float(v_opt_s0),
            len(K), len(K_prime), len(U), z, n_min,
            now - self._mark, now, tuple(sorted(K)),
        )
        self._mark = now
        self.records.append(rec)
        return rec

    def kinds(self) -> list[str]:
        return [r.kind for r in self.records]

    def write_csv(self, path: str | Path, append: bool = False) -> None:
        path = Path(path)
        new = not append or not path.exists()
        with path.open("a" if append else "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(LOG_COLUMNS)
            for rec in self.records:
                w.writerow(rec.row())


@dataclass
class DiscoveryState:
    s0: int
    num_actions: int
    K: set[int] = field(default_factory=set)
    K_prime: set[int] = field(default_factory=set)
    U: set[int] = field(default_factory=set)
    policies: dict[int, PolicyTable] = field(default_factory=dict)
    values: dict[int, float] = field(default_factory=dict)
    counter: VisitCounter | None = None
    round: int = 0
    trial: int = 1
    z: int | None = None
    n_min: int | None = None

    @classmethod
    def fresh(cls, s0: int, num_actions: int, **kw) -> "DiscoveryState":
        st = cls(s0, num_actions, counter=VisitCounter(num_actions), **kw)
        st.K_prime = {s0}
        # s0 is reached by resetting, so its navigation policy is immaterial
        st.policies[s0] = PolicyTable.reset_everywhere()
        st.values[s0] = 0.0
        return st

    def check(self) -> None:
        if self.K & self.K_prime:
            raise InvariantError("K and K' overlap")
        if self.U & (self.K | self.K_prime):
            raise InvariantError("U overlaps K or K'")
        missing = (self.K | self.K_prime) - set(self.policies)
        if missing:
            raise InvariantError(f"no policy stored for {sorted(missing)}")
        if self.z is not None and (self.z < 2 or self.z & (self.z - 1)):
            raise InvariantError(f"z={self.z} is not a power of two")


@dataclass
class DiscoveryResult:
    K: frozenset[int]
    policies: dict[int, PolicyTable]
    values: dict[int, float]
    log: RoundLog
    samples: int
    trials: int = 1
    touched: frozenset[int] = frozenset()


def evaluate_candidate(
    sim: Simulator,
    counter: VisitCounter,
    skip_set: Iterable[int],
    g: int,
    pi: PolicyTable,
    n_episodes: int,
    fails: Callable[[float], bool],
    rng: np.random.Generator,
) -> RoundOutcome:
    """Policy-evaluation round shared by LASD, LASD+ and PC.

    Runs up to ``n_episodes`` episodes from s0 under ``pi`` toward ``g``,
    recording every step in ``counter``. Returns ``skip`` the moment the total
    count or the count of a visited pair in ``skip_set`` hits a power of two,
    ``failure`` as soon as ``fails(tau_hat)`` holds after an episode, and
    ``success`` otherwise.
    """
    s0 = sim.initial_state
    if g == s0:
        return RoundOutcome("success", g, 0.0, 0, n_episodes)
    succ_tab, cum_tab, charge = sim.tables()
    # uniform draws come in growing blocks: most failure rounds are short
    block = 64
    buf = rng.random(block).tolist()
    bi = 0
    A = counter.num_actions
    n, nn = counter.n, counter.nn
    act = pi.action_of
    kset = frozenset(skip_set)
    lam = float(n_episodes)
    total = counter.total
    acc = 0  # steps counted toward tau_hat
    used = 0
    pending = 0
    kind = "success"
    j = 0
    try:
        while j < n_episodes:
            j += 1
            s = s0
            while s != g:
                a = act.get(s, RESET)
                key = s * A + a
                if bi == block:
                    block = min(2 * block, 8192)
                    buf = rng.random(block).tolist()
                    bi = 0
                t = succ_tab[key][bisect_right(cum_tab[key], buf[bi])]
                bi += 1
                c = n.get(key, 0) + 1
                n[key] = c
                row = nn.get(key)
                if row is None:
                    nn[key] = {t: 1}
                else:
                    row[t] = row.get(t, 0) + 1
                total += 1
                used += 1
                pending += 1
                if pending == _CHARGE_EVERY:
                    counter.total = total
                    charge(pending)
                    pending = 0
                if total & (total - 1) == 0 or (c & (c - 1) == 0 and s in kset):
                    kind = "skip"
                    break
                acc += 1
                s = t
            if kind == "skip":
                break
            if fails(acc / lam):
                kind = "failure"
                break
    finally:
        counter.total = total
        if pending:
            charge(pending)
    return RoundOutcome(kind, g, acc / lam, used, j)


def _select_goal(outs: dict[int, VisgoOutput], s0: int) -> tuple[int | None, float]:
    best, best_v = None, math.inf
    for g in sorted(outs):
        v = outs[g].value(s0)
        if v < best_v:
            best, best_v = g, v
    return best, best_v


def _solve_goals(st: DiscoveryState, eps_vi: float, delta_v: float, L: float, c: Constants):
    return visgo_many(
        st.K, st.U - st.K, eps_vi, st.counter, delta_v, L, st.s0,
        c1=c.c1, c2=c.c2, max_sweeps=c.visgo_max_sweeps,
    )


def lasd(
    sim: Simulator,
    L: float,
    eps: float,
    delta: float,
    num_states: int,
    rngs: RngStreams,
    constants: Constants = PAPER,
    algo: str = "lasd",
    check_invariants: bool = True,
) -> DiscoveryResult:
    """Layer-aware state discovery with confidence levels that depend on S."""
    _check_args(L, eps, delta)
    A, s0, S = sim.num_actions, sim.initial_state, num_states
    st = DiscoveryState.fresh(s0, A)
    log = RoundLog(algo, sim)
    touched = {s0}
    while True:
        st.round += 1
        r = st.round
        counter = st.counter
        eps_vi = 1.0 / max(16, counter.total)
        delta_v = delta / (4 * r * r * S * S)
        outs = _solve_goals(st, eps_vi, delta_v, L, constants)
        g, v = _select_goal(outs, s0)
        if g is None or v > L:
            if not st.K_prime:
                log.add("terminate", round=r, v_opt_s0=_finite(v), K=st.K, K_prime=st.K_prime, U=st.U,
                        n_min=st.n_min)
                break
            st.K |= st.K_prime
            st.K_prime = set()
            _, found = explore(
                sim, st.K, st.policies, VisitCounter(A),
                2 * L * math.log(4 * S * A * L * r * r / delta), L, rngs, constants,
            )
            st.U = found
            touched |= found
            st.n_min = n_zero(len(st.K), S, delta_v, delta_v, L, constants.c_n0)
            explore(sim, st.K, st.policies, counter, st.n_min, L, rngs, constants)
            log.add("expansion", round=r, v_opt_s0=_finite(v), K=st.K, K_prime=st.K_prime, U=st.U,
                    n_min=st.n_min)
        else:
            out = _evaluate(sim, st, g, outs[g], v, L, eps, delta / (4 * r * r), rngs, constants)
            log.add(out.kind, round=r, goal=g, tau_hat=out.tau_hat, v_opt_s0=v, K=st.K,
                    K_prime=st.K_prime, U=st.U, n_min=st.n_min)
        if check_invariants:
            st.check()
    return DiscoveryResult(frozenset(st.K), _accepted(st), dict(st.values), log, sim.steps, 1,
                           frozenset(touched | st.K))


def _evaluate(sim, st: DiscoveryState, g, out: VisgoOutput, v, L, eps, delta_eval, rngs, constants):
    lam = constants.eval_episodes(L, eps, delta_eval)
    bound = v + eps * L / 2
    res = evaluate_candidate(sim, st.counter, st.K, g, out.pi, lam, lambda tau: tau > bound, rngs.evaluation)
    if res.kind == "success":
        st.K_prime.add(g)
        st.U.discard(g)
        st.policies[g] = out.pi
        st.values[g] = v
    return res


def _accepted(st: DiscoveryState) -> dict[int, PolicyTable]:
    return {g: st.policies[g] for g in sorted(st.K)}


def _finite(v: float) -> float | None:
    return v if math.isfinite(v) else None


def _check_args(L, eps, delta):
    if L < 1:
        raise ValueError("L must be at least 1")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")


def compute_u(
    sim: Simulator,
    X: Iterable[int],
    policies: dict[int, PolicyTable],
    delta: float,
    L: float,
    rngs: RngStreams,
    constants: Constants = PAPER,
    observed: set[int] | None = None,
) -> set[int]:
    """Candidate goals for the next layer, filtered on fresh samples.

    Both counters used here are local and dropped on return. If ``observed``
    is given, the unfiltered candidates are added to it.
    """
    X = set(X)
    A = sim.num_actions
    target = 2 * L * math.log(4 * L * A * len(X) / delta)
    _, cand = explore(sim, X, policies, VisitCounter(A), target, L, rngs, constants)
    if observed is not None:
        observed |= cand
    if not cand:
        return set()
    d = delta / (4 * len(cand))
    fresh = VisitCounter(A)
    explore(sim, X, policies, fresh, n_one(len(X), d, d, L, constants.c_n1), L, rngs, constants)
    outs = visgo_many(X, cand, 1.0 / 16, fresh, d, L, sim.initial_state,
                      c1=constants.c1, c2=constants.c2, max_sweeps=constants.visgo_max_sweeps)
    return {g for g, o in outs.items() if o.value(sim.initial_state) <= L}


def lasd_plus(
    sim: Simulator,
    L: float,
    eps: float,
    delta: float,
    rngs: RngStreams,
    constants: Constants = PAPER,
    algo: str = "lasd+",
    check_invariants: bool = True,
) -> DiscoveryResult:
    """LASD with size-free confidence levels: trials with a doubling size guess."""
    _check_args(L, eps, delta)
    A, s0 = sim.num_actions, sim.initial_state
    log = RoundLog(algo, sim)
    touched = {s0}
    tau, z = 1, 2
    while True:
        st = DiscoveryState.fresh(s0, A, trial=tau, z=z, n_min=1)
        restart = False
        while True:
            st.round += 1
            r = st.round
            size = len(st.K | st.K_prime)
            if size >= z:
                z = 2 * size
                tau += 1
                restart = True
                break
            counter = st.counter
            eps_vi = 1.0 / max(16, counter.total)
            delta_v = delta / (4 * tau * tau * z**4 * A * L)
            outs = _solve_goals(st, eps_vi, delta_v, L, constants)
            g, v = _select_goal(outs, s0)
            common = dict(trial=tau, round=r, z=z)
            if g is None or v > L:
                if not st.K_prime:
                    log.add("terminate", v_opt_s0=_finite(v), K=st.K, K_prime=st.K_prime, U=st.U,
                            n_min=st.n_min, **common)
                    break
                st.K |= st.K_prime
                st.K_prime = set()
                touched |= st.K
                st.U = compute_u(sim, st.K, st.policies, delta / (4 * tau * tau * r * r), L, rngs,
                                 constants, observed=touched)
                log.add("expansion", v_opt_s0=_finite(v), K=st.K, K_prime=st.K_prime, U=st.U,
                        n_min=st.n_min, **common)
            elif not rtest(sim, st.K, st.policies, outs[g].pi, g, delta / (4 * (tau * r) ** 2), L,
                           rngs, constants):
                st.n_min *= 2
                explore(sim, st.K, st.policies, counter, st.n_min, L, rngs, constants)
                log.add("rtest_fail", goal=g, v_opt_s0=v, K=st.K, K_prime=st.K_prime, U=st.U,
                        n_min=st.n_min, **common)
            else:
                out = _evaluate(sim, st, g, outs[g], v, L, eps, delta / (2 * r * r), rngs, constants)
                log.add(out.kind, goal=g, tau_hat=out.tau_hat, v_opt_s0=v, K=st.K, K_prime=st.K_prime,
                        U=st.U, n_min=st.n_min, **common)
            if check_invariants:
                st.check()
        if not restart:
            break
    return DiscoveryResult(frozenset(st.K), _accepted(st), dict(st.values), log, sim.steps, tau,
                           frozenset(touched | st.K))


__all__ = [
    "DiscoveryResult",
    "DiscoveryState",
    "InvariantError",
    "LOG_COLUMNS",
    "ROUND_KINDS",
    "RoundLog",
    "RoundOutcome",
    "RoundRecord",
    "compute_u",
    "evaluate_candidate",
    "lasd",
    "lasd_plus",
]
