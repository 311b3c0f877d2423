"""Test environments. Every constructor returns a validated ``TabularMdp``."""

from __future__ import annotations

import numpy as np

from .mdp import RESET, TabularMdp

ADVANCE = 1


def make_chain(n: int) -> TabularMdp:
    """Deterministic line s0 -> s1 -> ... -> s_{n-1}; the last state loops on advance."""
    if n < 1:
        raise ValueError("chain length must be positive")
    trans = {}
    for s in range(n):
        trans[(s, RESET)] = {0: 1.0}
        trans[(s, ADVANCE)] = {min(s + 1, n - 1): 1.0}
    return TabularMdp(n, 2, 0, trans)


def make_coin(p: float = 0.5) -> TabularMdp:
    """Two states; the single move action from s0 hits s1 with probability ``p``."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    trans = {
        (0, RESET): {0: 1.0},
        (0, 1): {1: p, 0: 1 - p},
        (1, RESET): {0: 1.0},
        (1, 1): {1: 1.0},
    }
    return TabularMdp(2, 2, 0, trans)


def example_2l_size(A: int, L: int) -> int:
    return 1 + L + sum(A**i for i in range(2 * (L - 1) + 1))


def make_example_2l(A: int, L: int) -> TabularMdp:
    """Separation MDP: tiny S_{L(1+eps)}^-> but an A-ary tree inside S_{2L}^->.

    s0 moves uniformly to one of s1..sL under every non-RESET action; each
    s_i leads to the tree root s*; tree nodes have one child per branching
    action. There are ``A`` branching actions plus RESET, so ``num_actions``
    is ``A + 1``. Leaves loop on themselves.
    """
    if int(A) != A or A < 2:
        raise ValueError("A must be an integer >= 2")
    if int(L) != L or L < 2:
        raise ValueError("L must be an integer >= 2")
    A, L = int(A), int(L)
    S = example_2l_size(A, L)
    depth = 2 * (L - 1)
    root = L + 1
    trans: dict[tuple[int, int], dict[int, float]] = {}
    for s in range(S):
        trans[(s, RESET)] = {0: 1.0}
    for a in range(1, A + 1):
        trans[(0, a)] = {i: 1.0 / L for i in range(1, L + 1)}
        for i in range(1, L + 1):
            trans[(i, a)] = {root: 1.0}
    # tree nodes in BFS order: node k has children root + k*A + 1 .. root + k*A + A
    n_tree = S - root
    n_internal = sum(A**i for i in range(depth))
    for k in range(n_tree):
        s = root + k
        for a in range(1, A + 1):
            trans[(s, a)] = {root + k * A + a: 1.0} if k < n_internal else {s: 1.0}
    return TabularMdp(S, A + 1, 0, trans)


# gridworld moves: up, right, down, left
_MOVES = ((0, 1), (1, 0), (0, -1), (-1, 0))


def make_gridworld(w: int, h: int, slip: float = 0.0) -> TabularMdp:
    """``w x h`` grid, s0 at the corner (0, 0); state id = y * w + x.

    Actions 1..4 move up/right/down/left. The intended move happens with
    probability ``1 - slip``; each perpendicular move takes ``slip / 2``.
    Moves into a wall leave the agent in place.
    """
    if w < 1 or h < 1:
        raise ValueError("grid dimensions must be positive")
    if not 0 <= slip < 1:
        raise ValueError("slip must lie in [0, 1)")

    def target(x, y, m):
        dx, dy = _MOVES[m]
        nx, ny = x + dx, y + dy
        if 0 <= nx < w and 0 <= ny < h:
            return ny * w + nx
        return y * w + x

    trans = {}
    for y in range(h):
        for x in range(w):
            s = y * w + x
            trans[(s, RESET)] = {0: 1.0}
            for m in range(4):
                dist: dict[int, float] = {}
                for mm, p in ((m, 1 - slip), ((m + 1) % 4, slip / 2), ((m + 3) % 4, slip / 2)):
                    if p > 0:
                        t = target(x, y, mm)
                        dist[t] = dist.get(t, 0.0) + p
                trans[(s, m + 1)] = dist
    return TabularMdp(w * h, 5, 0, trans)


def make_random_mdp(S: int, A: int, out_degree: int, seed: int) -> TabularMdp:
    """Random sparse kernels: each non-RESET pair picks ``out_degree`` distinct
    successors with Dirichlet(1) weights."""
    if S < 1 or A < 2 or out_degree < 1:
        raise ValueError("need S >= 1, A >= 2, out_degree >= 1")
    rng = np.random.default_rng(seed)
    k = min(out_degree, S)
    trans = {}
    for s in range(S):
        trans[(s, RESET)] = {0: 1.0}
        for a in range(1, A):
            succ = rng.choice(S, size=k, replace=False)
            w = rng.dirichlet(np.ones(k))
            trans[(s, a)] = {int(t): float(p) for t, p in zip(succ, w)}
    return TabularMdp(S, A, 0, trans)


def make_sparse_core(num_states: int = 200, core: int = 5, fanout: int = 20, seed: int = 0) -> TabularMdp:
    """Large MDP whose controllable part is a short deterministic core chain.

    Actions: RESET, advance (core chain, last core state loops), jump. Jump
    from core state i lands uniformly on one of ``fanout`` private far states,
    so each far state costs on the order of ``2 * fanout`` steps to hit. Far
    and deep states wander among the non-core states at random.
    """
    n_far = core * fanout
    if num_states < core + n_far + 1:
        raise ValueError("num_states too small for the requested core and fanout")
    rng = np.random.default_rng(seed)
    outer = np.arange(core, num_states)
    deep = np.arange(core + n_far, num_states)
    trans = {}
    for s in range(num_states):
        trans[(s, RESET)] = {0: 1.0}
        if s < core:
            trans[(s, 1)] = {min(s + 1, core - 1): 1.0}
            far = range(core + s * fanout, core + (s + 1) * fanout)
            trans[(s, 2)] = {int(t): 1.0 / fanout for t in far}
        else:
            trans[(s, 1)] = {int(rng.choice(deep)): 1.0}
            picks = rng.choice(outer, size=2, replace=False)
            trans[(s, 2)] = {int(picks[0]): 0.5, int(picks[1]): 0.5}
    return TabularMdp(num_states, 3, 0, trans)


ENV_BUILDERS = {
    "chain": make_chain,
    "coin": make_coin,
    "example_2l": make_example_2l,
    "gridworld": make_gridworld,
    "random": make_random_mdp,
    "sparse_core": make_sparse_core,
}
