"""Exact ground truth for the incrementally L-controllable set.

Everything here enumerates the full state space and is meant for checking
learner output at desk scale. Learners never import this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .mdp import PolicyTable, TabularMdp, evaluate_policy, optimal_restricted_values

MEMBER_TOL = 1e-8
AX_TOL = 1e-9
AX_MODES = ("AX_L", "AX_star", "AX_plus")


class OracleConsistencyError(RuntimeError):
    pass


class MissingPolicyError(KeyError):
    pass


def _reduced_value(mdp: TabularMdp, X: frozenset[int], g: int) -> float:
    """``V*_{X,g}(s0)`` on the quotient MDP: X, the goal, and one state standing
    for everything else (it can only RESET, so its value is shared)."""
    s0 = mdp.initial_state
    if g == s0:
        return 0.0
    if s0 not in X:
        return math.inf
    inner = sorted(X - {g})
    idx = {s: i for i, s in enumerate(inner)}
    gi, out = len(inner), len(inner) + 1
    trans = {}
    for s in inner:
        for a in range(mdp.num_actions):
            row: dict[int, float] = {}
            succ, probs = mdp.successors(s, a)
            for t, p in zip(succ.tolist(), probs.tolist()):
                k = idx.get(t, gi if t == g else out)
                row[k] = row.get(k, 0.0) + p
            trans[(idx[s], a)] = row
    for k in (gi, out):
        for a in range(mdp.num_actions):
            trans[(k, a)] = {idx[s0]: 1.0}
    red = TabularMdp(len(inner) + 2, mdp.num_actions, idx[s0], trans)
    vals, _ = optimal_restricted_values(red, range(len(inner)), gi)
    return vals[idx[s0]]


def restricted_values_at_s0(mdp: TabularMdp, X: Iterable[int]) -> dict[int, float]:
    """``V*_{X,g}(s0)`` for every goal ``g``."""
    X = frozenset(X)
    return {g: _reduced_value(mdp, X, g) for g in range(mdp.num_states)}


def t_l_operator(mdp: TabularMdp, X: Iterable[int], L: float, tol: float = MEMBER_TOL) -> frozenset[int]:
    if L < 1:
        raise ValueError("L must be at least 1")
    vals = restricted_values_at_s0(mdp, X)
    return frozenset(g for g, v in vals.items() if v <= L + tol)


@dataclass
class LayerDecomposition:
    layers: list[frozenset[int]]
    fixed_point: frozenset[int]
    J: int
    L: float

    def layer(self, j: int) -> frozenset[int]:
        """K*_j with 1-based ``j``; stays at the fixed point past ``J``."""
        if j < 1:
            raise IndexError("layers are 1-indexed")
        return self.layers[min(j, self.J) - 1]


def incrementally_controllable_set(mdp: TabularMdp, L: float, tol: float = MEMBER_TOL) -> LayerDecomposition:
    layers = [frozenset({mdp.initial_state})]
    for _ in range(mdp.num_states + 1):
        nxt = t_l_operator(mdp, layers[-1], L, tol)
        if nxt == layers[-1]:
            return LayerDecomposition(layers, nxt, len(layers), L)
        if not layers[-1] <= nxt:
            raise OracleConsistencyError("T_L iterates are not nested")
        layers.append(nxt)
    raise OracleConsistencyError("T_L iteration did not stabilise within num_states steps")


def branching_factor(mdp: TabularMdp, L: float, decomposition: LayerDecomposition | None = None) -> int:
    S_L = (decomposition or incrementally_controllable_set(mdp, L)).fixed_point
    best = 0
    for s in S_L:
        for a in range(mdp.num_actions):
            succ, _ = mdp.successors(s, a)
            best = max(best, sum(1 for t in succ.tolist() if t in S_L))
    return best


def one_step_frontier(mdp: TabularMdp, X: Iterable[int]) -> frozenset[int]:
    """``X`` together with every state reachable from it in one step."""
    X = frozenset(X)
    out = set(X)
    for s in X:
        for a in range(mdp.num_actions):
            out.update(mdp.successors(s, a)[0].tolist())
    return frozenset(out)


@dataclass
class IdentifiabilityResult:
    identifiable: bool
    witness: tuple[int, int] | None = None
    witness_value: float | None = None

    def __bool__(self) -> bool:
        return self.identifiable


def check_identifiability(mdp: TabularMdp, L: float, eps: float, tol: float = MEMBER_TOL) -> IdentifiabilityResult:
    """Every goal outside layer j must cost more than L(1+eps) from layer j-1."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    dec = incrementally_controllable_set(mdp, L, tol)
    bound = L * (1 + eps)
    for j in range(2, dec.J + 2):
        prev, cur = dec.layer(j - 1), dec.layer(j)
        vals = restricted_values_at_s0(mdp, prev)
        for g in range(mdp.num_states):
            if g not in cur and vals[g] <= bound + tol:
                return IdentifiabilityResult(False, (j, g), vals[g])
    return IdentifiabilityResult(True)


@dataclass
class AxReport:
    mode: str
    L: float
    eps: float
    controllable: frozenset[int]
    covered: bool
    values: dict[int, float] = field(default_factory=dict)
    bounds: dict[int, float] = field(default_factory=dict)
    passes: dict[int, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """Coverage of S_L^-> plus the per-goal bound on every goal of S_L^->."""
        return self.covered and all(self.passes[g] for g in self.controllable)

    @property
    def passed_all_goals(self) -> bool:
        """Same, but the bound must hold for every goal with a policy."""
        return self.covered and all(self.passes.values())

    def to_json_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else None

        return {
            "mode": self.mode,
            "covered": self.covered,
            "passed": self.passed,
            "passed_all_goals": self.passed_all_goals,
            "goals": {
                str(g): {"value": num(self.values[g]), "bound": num(self.bounds[g]), "pass": self.passes[g]}
                for g in sorted(self.values)
            },
        }


def verify_ax(
    mdp: TabularMdp,
    L: float,
    eps: float,
    K: Iterable[int],
    policies: Mapping[int, PolicyTable],
    mode: str,
    decomposition: LayerDecomposition | None = None,
) -> AxReport:
    if mode not in AX_MODES:
        raise ValueError(f"mode must be one of {AX_MODES}")
    K = frozenset(K)
    s0 = mdp.initial_state
    for g in sorted(K):
        if g not in policies and g != s0:
            raise MissingPolicyError(f"no policy for goal {g}")
    dec = decomposition or incrementally_controllable_set(mdp, L)
    S_L = dec.fixed_point
    rep = AxReport(mode, L, eps, S_L, S_L <= K)
    for g in sorted(K | S_L):
        pi = policies.get(g, PolicyTable.reset_everywhere())
        v = 0.0 if g == s0 else evaluate_policy(mdp, pi, g)[s0]
        if mode == "AX_L":
            bound = L * (1 + eps)
        else:
            opt = optimal_restricted_values(mdp, S_L, g)[0][s0]
            bound = opt + L * eps if mode == "AX_star" else opt * (1 + eps)
        rep.values[g] = v
        rep.bounds[g] = bound
        rep.passes[g] = g in K and v <= bound + AX_TOL
    return rep


def oracle_summary(mdp: TabularMdp, L: float, eps: float | None = None) -> dict:
    """JSON-ready oracle facts: layers, S_L^->, Gamma_L, optimal values."""
    dec = incrementally_controllable_set(mdp, L)
    S_L = dec.fixed_point
    vals = restricted_values_at_s0(mdp, S_L)
    out = {
        "L": L,
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "layers": [sorted(x) for x in dec.layers],
        "J": dec.J,
        "controllable_set": sorted(S_L),
        "branching_factor": branching_factor(mdp, L, dec),
        "optimal_values": {str(g): vals[g] for g in sorted(S_L)},
    }
    if eps is not None:
        res = check_identifiability(mdp, L, eps)
        big = incrementally_controllable_set(mdp, L * (1 + eps))
        out["eps"] = eps
        out["identifiable"] = res.identifiable
        out["witness"] = list(res.witness) if res.witness else None
        out["controllable_set_eps"] = sorted(big.fixed_point)
    return out
