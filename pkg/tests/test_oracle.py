import itertools
import json
import math

import numpy as np
import pytest

from axlab.envs import make_chain, make_example_2l, make_random_mdp
from axlab.mdp import PolicyTable, TabularMdp, optimal_restricted_values
from axlab.oracle import (
    MissingPolicyError,
    branching_factor,
    check_identifiability,
    incrementally_controllable_set,
    one_step_frontier,
    oracle_summary,
    restricted_values_at_s0,
    t_l_operator,
    verify_ax,
)
from bruteforce import brute_layers


def self_loop_mdp():
    return TabularMdp(1, 2, 0, {(0, 0): {0: 1.0}, (0, 1): {0: 1.0}})


def test_t_l_self_loop():
    assert t_l_operator(self_loop_mdp(), {0}, 5) == {0}


def test_t_l_chain():
    assert t_l_operator(make_chain(3), {0}, 1) == {0, 1}


def test_t_l_contains_s0_even_from_empty():
    assert 0 in t_l_operator(make_chain(3), set(), 1)


def test_t_l_rejects_small_radius():
    with pytest.raises(ValueError):
        t_l_operator(make_chain(3), {0}, 0.5)


@pytest.mark.parametrize("seed", range(5))
def test_t_l_monotone_in_x(seed):
    m = make_random_mdp(8, 3, 2, seed)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        X = {0} | {s for s in range(8) if rng.random() < 0.4}
        Xp = X | {s for s in range(8) if rng.random() < 0.4}
        assert t_l_operator(m, X, 3) <= t_l_operator(m, Xp, 3)


@pytest.mark.parametrize("seed", range(4))
def test_reduced_values_match_full_solve(seed):
    m = make_random_mdp(7, 3, 3, seed)
    for X in [{0}, {0, 1, 2}, set(range(7)), {1, 2}]:
        vals = restricted_values_at_s0(m, X)
        for g in range(7):
            full = optimal_restricted_values(m, X, g)[0][0]
            if math.isinf(full):
                assert math.isinf(vals[g])
            else:
                assert vals[g] == pytest.approx(full, abs=1e-9)


def test_single_state_layers():
    dec = incrementally_controllable_set(self_loop_mdp(), 1)
    assert dec.layers == [{0}] and dec.J == 1


def test_chain_layers_radius_one():
    # s2 costs two steps from s0, so radius 1 stops at {s0, s1}
    dec = incrementally_controllable_set(make_chain(3), 1)
    assert dec.layers == [{0}, {0, 1}] and dec.J == 2


def test_chain_layers_radius_two():
    dec = incrementally_controllable_set(make_chain(3), 2)
    assert dec.layers == [{0}, {0, 1}, {0, 1, 2}] and dec.J == 3
    assert dec.fixed_point == {0, 1, 2}


def test_chain_full_at_n_minus_one():
    for n in range(1, 6):
        assert incrementally_controllable_set(make_chain(n), max(n - 1, 1)).fixed_point == set(range(n))


def test_layer_chain_invariants():
    for seed in range(10):
        m = make_random_mdp(8, 3, 2, seed)
        dec = incrementally_controllable_set(m, 3)
        assert dec.layers[0] == {0}
        for a, b in zip(dec.layers, dec.layers[1:]):
            assert a <= b <= dec.fixed_point
        assert t_l_operator(m, dec.fixed_point, 3) == dec.fixed_point
        assert dec.J <= len(dec.fixed_point)


def test_radius_monotone():
    for seed in range(10):
        m = make_random_mdp(7, 3, 2, seed)
        sets = [incrementally_controllable_set(m, L).fixed_point for L in (1, 2, 3, 5, 8)]
        for a, b in zip(sets, sets[1:]):
            assert a <= b


def test_example_2l_separation():
    m = make_example_2l(2, 3)
    assert incrementally_controllable_set(m, 4.5).fixed_point == {0}
    assert branching_factor(m, 4.5) == 1
    assert len(incrementally_controllable_set(m, 6).fixed_point) >= 2 ** 4


def test_branching_factor_chain_and_two_successor():
    assert branching_factor(make_chain(4), 3) == 1
    # every non-reset action from s0 splits over {s0, s1}; both controllable
    trans = {(0, 0): {0: 1.0}, (0, 1): {0: 0.5, 1: 0.5}, (1, 0): {0: 1.0}, (1, 1): {0: 0.5, 1: 0.5}}
    m = TabularMdp(2, 2, 0, trans)
    assert branching_factor(m, 3) == 2


def test_identifiability_chain():
    assert check_identifiability(make_chain(5), 3, 0.3)
    assert check_identifiability(make_chain(4), 2, 0.4)


def test_identifiability_example_2l():
    assert check_identifiability(make_example_2l(2, 3), 3, 0.5)
    assert check_identifiability(make_example_2l(3, 2, ), 2, 0.4)


def test_identifiability_witness():
    # g = s2 sits 1.5 steps from layer {s0}: L=1, eps=1 gives bound 2 >= 1.5
    trans = {
        (0, 0): {0: 1.0},
        (0, 1): {1: 1.0},
        (0, 2): {2: 2 / 3, 0: 1 / 3},
        (1, 0): {0: 1.0},
        (1, 1): {1: 1.0},
        (1, 2): {1: 1.0},
        (2, 0): {0: 1.0},
        (2, 1): {2: 1.0},
        (2, 2): {2: 1.0},
    }
    m = TabularMdp(3, 3, 0, trans)
    res = check_identifiability(m, 1, 1.0)
    assert not res
    assert res.witness == (2, 2)
    assert res.witness_value == pytest.approx(1.5)


def test_identifiability_implies_same_sets():
    for seed in range(30):
        m = make_random_mdp(6, 3, 2, seed)
        for L, eps in ((2, 0.2), (3, 0.1)):
            if check_identifiability(m, L, eps):
                a = incrementally_controllable_set(m, L).fixed_point
                b = incrementally_controllable_set(m, L * (1 + eps)).fixed_point
                assert a == b


def test_smallest_fixed_point_small():
    for seed in range(10):
        m = make_random_mdp(5, 2, 2, seed)
        S_L = incrementally_controllable_set(m, 3).fixed_point
        for r in range(6):
            for X in itertools.combinations(range(5), r):
                X = frozenset(X)
                if t_l_operator(m, X, 3) == X:
                    assert S_L <= X


@pytest.mark.parametrize("seed", range(4))
def test_layers_match_bruteforce(seed):
    m = make_random_mdp(5, 3, 2, seed)
    assert incrementally_controllable_set(m, 3).layers == brute_layers(m.dense(), 3)


def _optimal_policies(m, L):
    S_L = incrementally_controllable_set(m, L).fixed_point
    return S_L, {g: optimal_restricted_values(m, S_L, g)[1] for g in S_L}


@pytest.mark.parametrize("mode", ["AX_L", "AX_star", "AX_plus"])
def test_verify_ax_optimal_policies_pass(mode, grid33):
    S_L, pols = _optimal_policies(grid33, 6)
    rep = verify_ax(grid33, 6, 0.3, S_L, pols, mode)
    assert rep.passed and rep.passed_all_goals


def test_verify_ax_reset_policy_fails(chain3):
    pols = {g: PolicyTable.reset_everywhere() for g in range(3)}
    rep = verify_ax(chain3, 3, 0.3, {0, 1, 2}, pols, "AX_L")
    assert not rep.passed
    assert math.isinf(rep.values[1])
    assert rep.passes[0]


def test_verify_ax_coverage(chain3):
    S_L, pols = _optimal_policies(chain3, 3)
    rep = verify_ax(chain3, 3, 0.3, {0, 1}, pols, "AX_L")
    assert not rep.covered and not rep.passed


def test_verify_ax_missing_policy(chain3):
    with pytest.raises(MissingPolicyError):
        verify_ax(chain3, 3, 0.3, {0, 1}, {}, "AX_L")


def test_verify_ax_bad_mode(chain3):
    with pytest.raises(ValueError):
        verify_ax(chain3, 3, 0.3, {0}, {}, "AX_best")


def test_ax_plus_stronger_than_star_at_short_goal():
    # distance-1 goal with L = 10: multiplicative bound 1.3 < additive bound 4.0
    m = make_chain(2)
    S_L, pols = _optimal_policies(m, 10)
    plus = verify_ax(m, 10, 0.3, S_L, pols, "AX_plus")
    star = verify_ax(m, 10, 0.3, S_L, pols, "AX_star")
    assert plus.bounds[1] == pytest.approx(1.3)
    assert star.bounds[1] == pytest.approx(4.0)


def test_one_step_frontier(chain3):
    assert one_step_frontier(chain3, {0}) == {0, 1}


def test_oracle_summary_json(chain3):
    info = oracle_summary(chain3, 3, 0.3)
    json.dumps(info)
    assert info["layers"] == [[0], [0, 1], [0, 1, 2]]
    assert info["identifiable"] is True
    assert info["optimal_values"] == {"0": 0.0, "1": 1.0, "2": 2.0}
