"""Optimistic value iteration for goal reaching from visit counts.

``visgo_many`` runs the iteration for several goals at once over the same
restriction set; each goal keeps its own stopping and divergence state, so
the result per goal matches a separate ``visgo`` call up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .mdp import RESET, PolicyTable

C1 = 3.0
C2 = 512.0


class VisgoIterationError(RuntimeError):
    pass


class VisitCounter:
    """Monotone counts ``n(s,a)`` and ``n(s,a,s')``.

    Pairs are keyed by ``s * num_actions + a`` internally.
    """

    __slots__ = ("num_actions", "n", "nn", "total")

    def __init__(self, num_actions: int):
        self.num_actions = num_actions
        self.n: dict[int, int] = {}
        self.nn: dict[int, dict[int, int]] = {}
        self.total = 0

    def add(self, s: int, a: int, t: int, k: int = 1) -> int:
        key = s * self.num_actions + a
        c = self.n.get(key, 0) + k
        self.n[key] = c
        row = self.nn.get(key)
        if row is None:
            self.nn[key] = {t: k}
        else:
            row[t] = row.get(t, 0) + k
        self.total += k
        return c

    def add_counts(self, s: int, a: int, counts: dict[int, int]) -> None:
        for t, k in counts.items():
            self.add(s, a, t, k)

    def count(self, s: int, a: int) -> int:
        return self.n.get(s * self.num_actions + a, 0)

    def n_plus(self, s: int, a: int) -> int:
        return max(self.count(s, a), 1)

    def next_counts(self, s: int, a: int) -> dict[int, int]:
        return dict(self.nn.get(s * self.num_actions + a, {}))

    def p_hat(self, s: int, a: int) -> dict[int, float]:
        n = self.n_plus(s, a)
        return {t: c / n for t, c in self.next_counts(s, a).items()}

    def copy(self) -> "VisitCounter":
        out = VisitCounter(self.num_actions)
        out.n = dict(self.n)
        out.nn = {k: dict(v) for k, v in self.nn.items()}
        out.total = self.total
        return out

    def states(self) -> set[int]:
        return {k // self.num_actions for k in self.n}


@dataclass
class VisgoOutput:
    """Result for one goal.

    ``V`` covers ``X``; every state outside ``X`` other than the goal shares
    ``outside_value``. A diverged run carries no values (``V`` is None).
    """

    goal: int
    X: frozenset[int]
    Q: dict[int, np.ndarray] | None
    V: dict[int, float] | None
    outside_value: float | None
    pi: PolicyTable
    diverged: bool
    sweeps: int
    trace: list[float] | None = None

    def value(self, s: int) -> float:
        if self.diverged:
            return math.inf
        if s == self.goal:
            return 0.0
        if s in self.V:
            return self.V[s]
        return self.outside_value

    @property
    def sup(self) -> float:
        if self.diverged:
            return math.inf
        return max([self.outside_value, *self.V.values()])


def _iota(x_size: int, num_actions: int, n: np.ndarray, delta: float) -> np.ndarray:
    # n(s,a)=0 and |X|=0 would make the log undefined; use n+ and max(|X|,1)
    return np.log(2.0 * max(x_size, 1) * num_actions * np.maximum(n, 1) / delta)


def visgo_many(
    X: Iterable[int],
    goals: Iterable[int],
    eps_vi: float,
    counter: VisitCounter,
    delta: float,
    L: float,
    initial_state: int,
    c1: float = C1,
    c2: float = C2,
    max_sweeps: int = 10**6,
    trace: bool = False,
    check_monotone: bool = False,
) -> dict[int, VisgoOutput]:
    if eps_vi <= 0:
        raise ValueError("eps_vi must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    xs = sorted(set(X))
    goals = sorted(set(goals))
    xset = frozenset(xs)
    if xset.intersection(goals):
        raise ValueError("goals must lie outside X")
    if not goals:
        return {}
    A = counter.num_actions
    m, G = len(xs), len(goals)
    s0 = initial_state

    # empirical kernel over columns: X first, then observed outside states
    outside = sorted(
        {t for x in xs for a in range(A) for t in counter.nn.get(x * A + a, {})} - xset
    )
    col = {s: i for i, s in enumerate(xs)}
    for j, s in enumerate(outside):
        col[s] = m + j
    ncols = m + len(outside)
    Phat = np.zeros((m * A, ncols))
    n = np.zeros(m * A)
    for i, x in enumerate(xs):
        for a in range(A):
            key = x * A + a
            c = counter.n.get(key, 0)
            n[i * A + a] = c
            if c:
                for t, k in counter.nn[key].items():
                    Phat[i * A + a, col[t]] = k / c
    nplus = np.maximum(n, 1.0)
    iota = _iota(m, A, n, delta)
    shrink = n / (n + 1.0)
    bonus_floor = c2 * L * iota / nplus
    var_scale = c1 * c1 * iota / nplus
    PhatT = Phat.T

    # per-goal column layout: goal column forced to zero
    goal_mask = np.ones((G, ncols - m))
    for gi, g in enumerate(goals):
        if g in col:
            goal_mask[gi, col[g] - m] = 0.0
    s0_in_x = col.get(s0, -1) if s0 in xset else -1

    vX = np.zeros((G, m))
    vout = np.zeros(G)
    active = np.ones(G, dtype=bool)
    diverged = np.zeros(G, dtype=bool)
    sweeps = np.zeros(G, dtype=np.int64)
    Qlast = np.zeros((G, m, A))
    traces: list[list[float]] = [[] for _ in goals]
    goal_is_s0 = np.array([g == s0 for g in goals])
    limit = 2.0 * L

    i = 0
    while active.any():
        if i >= max_sweeps:
            raise VisgoIterationError(f"VISGO did not converge within {max_sweeps} sweeps")
        i += 1
        idx = np.flatnonzero(active)
        vx, vo = vX[idx], vout[idx]
        V = np.concatenate([vx, vo[:, None] * goal_mask[idx]], axis=1)
        PV = V @ PhatT
        PV2 = (V * V) @ PhatT
        var = np.maximum(PV2 - PV * PV, 0.0)
        b = np.maximum(np.sqrt(var * var_scale), bonus_floor)
        Q = np.maximum(0.0, 1.0 + shrink * PV - b).reshape(len(idx), m, A)
        new_vx = Q.min(axis=2) if m else np.zeros((len(idx), 0))
        if s0_in_x >= 0:
            v_s0 = vx[:, s0_in_x]
        else:
            v_s0 = np.where(goal_is_s0[idx], 0.0, vo)
        new_vo = 1.0 + v_s0
        if check_monotone and (
            (new_vx < vx - 1e-12).any() or (new_vo < vo - 1e-12).any()
        ):
            raise AssertionError("VISGO iterates decreased")
        diff = np.abs(new_vo - vo)
        if m:
            diff = np.maximum(diff, np.abs(new_vx - vx).max(axis=1))
        norm = new_vo if not m else np.maximum(new_vo, new_vx.max(axis=1))
        vX[idx], vout[idx], Qlast[idx] = new_vx, new_vo, Q
        sweeps[idx] = i
        if trace:
            for j, gi in enumerate(idx):
                traces[gi].append(float(diff[j]))
        # the bound is checked only before a further sweep, so a converged
        # iterate is returned as is
        done = diff <= eps_vi
        blown = ~done & (norm > limit)
        diverged[idx[blown]] = True
        active[idx[blown | done]] = False

    out: dict[int, VisgoOutput] = {}
    for gi, g in enumerate(goals):
        tr = traces[gi] if trace else None
        if diverged[gi]:
            out[g] = VisgoOutput(g, xset, None, None, None, PolicyTable({}, xset), True, int(sweeps[gi]), tr)
            continue
        Qg = Qlast[gi]
        # np.argmin returns the first minimiser, i.e. the lowest action index
        acts = {x: int(np.argmin(Qg[k])) for k, x in enumerate(xs)}
        out[g] = VisgoOutput(
            g,
            xset,
            {x: Qg[k].copy() for k, x in enumerate(xs)},
            {x: float(vX[gi, k]) for k, x in enumerate(xs)},
            float(vout[gi]),
            PolicyTable(acts, xset),
            False,
            int(sweeps[gi]),
            tr,
        )
    return out


def visgo(
    X: Iterable[int],
    g: int,
    eps_vi: float,
    counter: VisitCounter,
    delta: float,
    L: float,
    initial_state: int,
    **kwargs,
) -> VisgoOutput:
    return visgo_many(X, [g], eps_vi, counter, delta, L, initial_state, **kwargs)[g]


def random_restricted_policy(X: Iterable[int], num_actions: int, rng: np.random.Generator) -> PolicyTable:
    """The fallback policy paired with a diverged VISGO result."""
    xs = sorted(set(X))
    acts = rng.integers(0, num_actions, size=len(xs)) if xs else []
    return PolicyTable({x: int(a) for x, a in zip(xs, acts)}, frozenset(xs))


__all__ = [
    "C1",
    "C2",
    "RESET",
    "VisgoIterationError",
    "VisgoOutput",
    "VisitCounter",
    "random_restricted_policy",
    "visgo",
    "visgo_many",
]
