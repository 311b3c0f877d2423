"""Reward-free tabular MDPs with a RESET action.

Action 0 is always RESET and moves every state back to the initial state.
Everything exact in this module (policy evaluation, restricted optimal values)
works on the dense transition tensor and is meant for desk-scale problems.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

RESET = 0
PROB_ATOL = 1e-9


class MdpValidationError(ValueError):
    pass


class TabularMdp:
    """Immutable reward-free MDP ``(S, A, s0, P)``.

    ``transitions`` maps ``(s, a)`` to a ``{next_state: prob}`` mapping. Every
    pair must be present. Zero-probability entries are dropped.
    """

    def __init__(
        self,
        num_states: int,
        num_actions: int,
        initial_state: int,
        transitions: Mapping[tuple[int, int], Mapping[int, float]],
    ):
        if num_states < 1 or num_actions < 1:
            raise MdpValidationError("num_states and num_actions must be positive")
        if not 0 <= initial_state < num_states:
            raise MdpValidationError(f"initial_state {initial_state} out of range")
        self.num_states = int(num_states)
        self.num_actions = int(num_actions)
        self.initial_state = int(initial_state)

        rows: list[tuple[np.ndarray, np.ndarray]] = []
        cum: list[list[float]] = []
        succ_lists: list[list[int]] = []
        for s in range(num_states):
            for a in range(num_actions):
                if (s, a) not in transitions:
                    raise MdpValidationError(f"missing transition entry for (s={s}, a={a})")
                dist = transitions[(s, a)]
                items = sorted((int(t), float(p)) for t, p in dist.items() if p != 0.0)
                if not items:
                    raise MdpValidationError(f"empty distribution for (s={s}, a={a})")
                for t, p in items:
                    if not 0 <= t < num_states:
                        raise MdpValidationError(f"next state {t} out of range at (s={s}, a={a})")
                    if p < 0 or not math.isfinite(p):
                        raise MdpValidationError(f"invalid probability {p} at (s={s}, a={a})")
                total = sum(p for _, p in items)
                if abs(total - 1.0) > PROB_ATOL:
                    raise MdpValidationError(f"distribution at (s={s}, a={a}) sums to {total}")
                if a == RESET and (len(items) != 1 or items[0][0] != initial_state):
                    raise MdpValidationError(
                        f"RESET at state {s} must move to s0={initial_state} with probability 1"
                    )
                succ = np.array([t for t, _ in items], dtype=np.int64)
                probs = np.array([p for _, p in items], dtype=float)
                probs /= probs.sum()
                rows.append((succ, probs))
                c = np.cumsum(probs).tolist()
                c[-1] = 1.0
                cum.append(c[:-1])
                succ_lists.append(succ.tolist())
        self._rows = tuple(rows)
        # bisect tables for the scalar sampler: succ[bisect_right(cum, u)]
        self._cum = tuple(cum)
        self._succ = tuple(succ_lists)
        self._dense: np.ndarray | None = None

    # ------------------------------------------------------------------ access
    def successors(self, s: int, a: int) -> tuple[np.ndarray, np.ndarray]:
        return self._rows[s * self.num_actions + a]

    def prob(self, s: int, a: int, t: int) -> float:
        succ, probs = self.successors(s, a)
        hit = np.flatnonzero(succ == t)
        return float(probs[hit[0]]) if hit.size else 0.0

    def dense(self) -> np.ndarray:
        """Transition tensor of shape ``(S, A, S)`` (cached, read-only)."""
        if self._dense is None:
            P = np.zeros((self.num_states, self.num_actions, self.num_states))
            for s in range(self.num_states):
                for a in range(self.num_actions):
                    succ, probs = self.successors(s, a)
                    P[s, a, succ] = probs
            P.setflags(write=False)
            self._dense = P
        return self._dense

    def transitions(self) -> dict[tuple[int, int], dict[int, float]]:
        return {
            (s, a): dict(zip(*(x.tolist() for x in self.successors(s, a))))
            for s in range(self.num_states)
            for a in range(self.num_actions)
        }

    @classmethod
    def from_dense(cls, P: np.ndarray, initial_state: int = 0) -> "TabularMdp":
        P = np.asarray(P, dtype=float)
        S, A, _ = P.shape
        trans = {
            (s, a): {int(t): float(P[s, a, t]) for t in np.flatnonzero(P[s, a])}
            for s in range(S)
            for a in range(A)
        }
        return cls(S, A, initial_state, trans)

    # ------------------------------------------------------------------- json
    def to_json_dict(self) -> dict:
        entries = []
        for s in range(self.num_states):
            for a in range(self.num_actions):
                succ, probs = self.successors(s, a)
                entries.append([s, a, [[int(t), float(p)] for t, p in zip(succ, probs)]])
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "initial_state": self.initial_state,
            "transitions": entries,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "TabularMdp":
        try:
            n, m, s0 = int(data["num_states"]), int(data["num_actions"]), int(data["initial_state"])
            trans: dict[tuple[int, int], dict[int, float]] = {}
            for s, a, dist in data["transitions"]:
                key = (int(s), int(a))
                if key in trans:
                    raise MdpValidationError(f"duplicate entry for {key}")
                row: dict[int, float] = {}
                for t, p in dist:
                    row[int(t)] = row.get(int(t), 0.0) + float(p)
                trans[key] = row
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MdpValidationError):
                raise
            raise MdpValidationError(f"malformed MDP document: {exc}") from exc
        return cls(n, m, s0, trans)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TabularMdp):
            return NotImplemented
        return self.to_json_dict() == other.to_json_dict()

    def __repr__(self) -> str:
        return f"TabularMdp(S={self.num_states}, A={self.num_actions}, s0={self.initial_state})"


def load_mdp(path: str | Path) -> TabularMdp:
    return TabularMdp.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PolicyTable:
    """Deterministic stationary policy; RESET wherever it is not defined.

    With ``restriction`` set, the policy is restricted on that set: any state
    outside it plays RESET regardless of ``action_of``.
    """

    action_of: Mapping[int, int] = field(default_factory=dict)
    restriction: frozenset[int] | None = None

    def __post_init__(self):
        if self.restriction is not None:
            restr = frozenset(self.restriction)
            object.__setattr__(self, "restriction", restr)
            cleaned = {s: a for s, a in self.action_of.items() if s in restr}
        else:
            cleaned = dict(self.action_of)
        object.__setattr__(self, "action_of", cleaned)

    def __call__(self, s: int) -> int:
        return self.action_of.get(s, RESET)

    def is_restricted_on(self, X: Iterable[int]) -> bool:
        X = set(X)
        return all(a == RESET for s, a in self.action_of.items() if s not in X)

    def to_json_dict(self) -> dict:
        return {
            "action_of": {str(s): a for s, a in sorted(self.action_of.items())},
            "restriction": None if self.restriction is None else sorted(self.restriction),
        }

    @classmethod
    def reset_everywhere(cls) -> "PolicyTable":
        return cls({}, frozenset())


@dataclass(frozen=True)
class GoalValueFn:
    goal: int
    restriction: frozenset[int] | None
    values: np.ndarray

    def __getitem__(self, s: int) -> float:
        return float(self.values[s])

    @property
    def sup(self) -> float:
        return float(np.max(self.values))


@dataclass
class Trajectory:
    start: int
    steps: list[tuple[int, int, int]]
    reached: bool

    @property
    def num_steps(self) -> int:
        return len(self.steps)


# ---------------------------------------------------------------- exact values
def _allowed_actions(mdp: TabularMdp, X: Iterable[int] | None) -> np.ndarray:
    allowed = np.zeros((mdp.num_states, mdp.num_actions), dtype=bool)
    if X is None:
        allowed[:] = True
    else:
        allowed[:, RESET] = True
        for s in X:
            allowed[s, :] = True
    return allowed


def _almost_sure_region(support: np.ndarray, allowed: np.ndarray, g: int):
    """States from which ``g`` is reached with probability one.

    Returns ``(W, safe, dist)``: the region, the actions whose support stays
    inside it, and a BFS distance to ``g`` through safe actions.
    """
    S = support.shape[0]
    W = np.ones(S, dtype=bool)
    while True:
        safe = allowed & ~(support & ~W[None, None, :]).any(axis=2)
        dist = np.full(S, -1, dtype=np.int64)
        dist[g] = 0
        reached = np.zeros(S, dtype=bool)
        reached[g] = True
        level = 0
        while True:
            level += 1
            step = (safe & (support & reached[None, None, :]).any(axis=2)).any(axis=1)
            new = step & ~reached & W
            if not new.any():
                break
            dist[new] = level
            reached |= new
        if (reached == W).all():
            return W, safe, dist
        W = reached


def evaluate_policy(mdp: TabularMdp, pi, g: int, horizon: float = 1e6) -> GoalValueFn:
    """Exact expected hitting time of ``g`` under ``pi`` from every state."""
    S = mdp.num_states
    P = mdp.dense()
    acts = np.array([pi(s) for s in range(S)], dtype=np.int64)
    Ppi = P[np.arange(S), acts]
    allowed = np.zeros((S, 1), dtype=bool)
    allowed[:] = True
    W, _, _ = _almost_sure_region((Ppi > 0)[:, None, :], allowed, g)
    values = np.full(S, math.inf)
    values[g] = 0.0
    free = np.flatnonzero(W & (np.arange(S) != g))
    if free.size:
        M = np.eye(free.size) - Ppi[np.ix_(free, free)]
        values[free] = np.linalg.solve(M, np.ones(free.size))
    values[values > horizon] = math.inf
    restriction = getattr(pi, "restriction", None)
    return GoalValueFn(g, restriction, values)


def optimal_restricted_values(
    mdp: TabularMdp,
    X: Iterable[int] | None,
    g: int,
    tol: float = 1e-10,
    max_iter: int = 10**6,
    horizon: float = 1e6,
) -> tuple[GoalValueFn, PolicyTable]:
    """Minimum hitting time of ``g`` over policies restricted on ``X``.

    States outside ``X`` are forced to RESET. Solved by policy iteration with
    exact linear solves, started from a proper policy read off the
    almost-sure-reachability BFS. ``X=None`` means unrestricted.
    """
    S = mdp.num_states
    P = mdp.dense()
    support = P > 0
    Xset = None if X is None else frozenset(int(s) for s in X)
    allowed = _allowed_actions(mdp, Xset)
    W, safe, dist = _almost_sure_region(support, allowed, g)

    values = np.full(S, math.inf)
    values[g] = 0.0
    actions = np.zeros(S, dtype=np.int64)
    free = np.flatnonzero(W & (np.arange(S) != g))

    if free.size:
        # initial proper policy: a safe action that can step closer to g
        for s in free:
            closer = support[s][:, dist >= 0] & (dist[dist >= 0] < dist[s])[None, :]
            cand = np.flatnonzero(safe[s] & closer.any(axis=1))
            actions[s] = cand[0]
        Qmask = np.where(safe[free], 0.0, math.inf)
        Pf = P[free][:, :, free]
        for _ in range(max_iter):
            Ppi = Pf[np.arange(free.size), actions[free]]
            v = np.linalg.solve(np.eye(free.size) - Ppi, np.ones(free.size))
            Q = 1.0 + Pf @ v + Qmask
            best = Q.min(axis=1)
            cur = Q[np.arange(free.size), actions[free]]
            improve = cur > best + tol * max(1.0, float(best.max()))
            if not improve.any():
                break
            rows = np.flatnonzero(improve)
            actions[free[rows]] = np.argmin(Q[rows], axis=1)
        else:  # pragma: no cover - policy iteration terminates in finitely many steps
            raise RuntimeError("policy iteration did not converge")
        values[free] = v
        # lowest-index action among (numerical) ties
        tie = Q <= best[:, None] + 1e-9 * np.maximum(1.0, best[:, None])
        actions[free] = np.argmax(tie, axis=1)

    values[values > horizon] = math.inf
    if Xset is None:
        policy = PolicyTable({int(s): int(actions[s]) for s in range(S)}, None)
    else:
        policy = PolicyTable(
            {int(s): int(actions[s]) for s in Xset if math.isfinite(values[s])}, Xset
        )
    return GoalValueFn(g, Xset, values), policy


def bellman_residual(mdp: TabularMdp, X: Iterable[int], g: int, values: np.ndarray) -> np.ndarray:
    """``|V(s) - min_a (1 + P_{s,a} V)|`` on the finite states of ``X``."""
    P = mdp.dense()
    out = np.zeros(mdp.num_states)
    fin = np.isfinite(values)
    v = np.where(fin, values, 0.0)
    for s in X:
        if s == g or not fin[s]:
            continue
        ok = ~(P[s][:, ~fin] > 0).any(axis=1)
        q = 1.0 + P[s][ok] @ v
        out[s] = abs(values[s] - q.min())
    return out


# -------------------------------------------------------------------- sampling
def sample_transition(mdp: TabularMdp, s: int, a: int, rng: np.random.Generator) -> int:
    k = s * mdp.num_actions + a
    return mdp._succ[k][bisect_right(mdp._cum[k], rng.random())]


def rollout(mdp: TabularMdp, pi, g: int, cap: int, rng: np.random.Generator) -> Trajectory:
    """Follow ``pi`` from s0 until ``g`` is hit or ``cap`` steps elapse."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    s = mdp.initial_state
    steps: list[tuple[int, int, int]] = []
    while s != g and len(steps) < cap:
        a = pi(s)
        t = sample_transition(mdp, s, a, rng)
        steps.append((s, a, t))
        s = t
    return Trajectory(mdp.initial_state, steps, s == g)


@dataclass
class CohortResult:
    """Aggregate outcome of ``k`` independent walkers.

    ``arrivals[t]`` counts walkers that hit a stop state after exactly ``t``
    steps; ``unfinished`` walkers were still running at ``max_steps``.
    """

    arrivals: np.ndarray
    unfinished: int
    steps: int
    stopped_at: dict[int, int]

    @property
    def finished(self) -> int:
        return int(self.arrivals.sum())


def simulate_cohort(
    mdp: TabularMdp,
    pi,
    start: int,
    stop: Iterable[int],
    k: int,
    max_steps: int,
    rng: np.random.Generator,
) -> CohortResult:
    """Run ``k`` iid walkers under ``pi`` from ``start`` until a stop state.

    Walkers are tracked as per-state occupation counts split multinomially at
    every step, which has the same joint law as ``k`` separate rollouts but
    costs O(max_steps * occupied states) instead of O(total steps).
    """
    stop = frozenset(stop)
    arrivals = np.zeros(max_steps + 1, dtype=np.int64)
    stopped: dict[int, int] = {}
    occ: dict[int, int] = {start: int(k)}
    total = 0
    if start in stop:
        arrivals[0] = k
        return CohortResult(arrivals, 0, 0, {start: int(k)})
    t = 0
    while occ and t < max_steps:
        t += 1
        nxt: dict[int, int] = {}
        for s, c in occ.items():
            total += c
            succ, probs = mdp.successors(s, pi(s))
            split = rng.multinomial(c, probs) if succ.size > 1 else (c,)
            for s2, c2 in zip(succ.tolist(), split):
                if c2:
                    nxt[s2] = nxt.get(s2, 0) + int(c2)
        occ = {}
        for s2, c2 in nxt.items():
            if s2 in stop:
                arrivals[t] += c2
                stopped[s2] = stopped.get(s2, 0) + c2
            else:
                occ[s2] = c2
    return CohortResult(arrivals, sum(occ.values()), total, stopped)
