import collections

import pytest

from axlab.config import DESK
from axlab.consolidation import ConsolidationState, lae, policy_consolidation
from axlab.discovery import LOG_COLUMNS, lasd
from axlab.envs import make_chain, make_example_2l
from axlab.mdp import PolicyTable, TabularMdp, optimal_restricted_values
from axlab.oracle import verify_ax
from axlab.sampler import RngStreams, Simulator

# a small bonus constant keeps these mechanics tests fast; the acceptance
# suite runs PC with the published constants
FAST = DESK.with_(c2=8.0)


def optimal_policies(m, T):
    return {g: optimal_restricted_values(m, T, g)[1] for g in T}


def test_state_invariants():
    st = ConsolidationState(frozenset({0, 1}), {1})
    st.accepted[0] = PolicyTable({})
    st.check()
    st.accepted[1] = PolicyTable({})
    with pytest.raises(AssertionError):
        st.check()


def test_pc_trivial_target(chain3):
    res = policy_consolidation(Simulator(chain3), 3, 0.3, 0.1, {0}, {}, RngStreams.from_seed(0), DESK)
    assert list(res.policies) == [0]
    assert res.values[0] == 0.0
    rec = res.log.records[-1]
    assert rec.kind == "success" and rec.tau_hat == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_pc_chain_multiplicative(seed, chain3):
    T = {0, 1, 2}
    res = policy_consolidation(Simulator(chain3, 10**10), 3, 0.3, 0.1, T, optimal_policies(chain3, T),
                               RngStreams.from_seed(seed), FAST)
    rep = verify_ax(chain3, 3, 0.3, T, res.policies, "AX_plus")
    assert rep.passed_all_goals
    kinds = collections.Counter(res.log.kinds())
    assert kinds["success"] == len(T) and kinds["warmup"] == 1
    goals = [r.goal for r in res.log.records if r.kind == "success"]
    assert sorted(goals) == goals and len(set(goals)) == len(goals)


def test_pc_published_constants(chain3):
    T = {0, 1, 2}
    res = policy_consolidation(Simulator(chain3, 10**10), 3, 0.3, 0.1, T, optimal_policies(chain3, T),
                               RngStreams.from_seed(0), DESK)
    assert verify_ax(chain3, 3, 0.3, T, res.policies, "AX_plus").passed_all_goals


def test_pc_short_goal_beats_additive_bound():
    m = make_chain(2)
    T = {0, 1}
    res = policy_consolidation(Simulator(m, 10**10), 10, 0.3, 0.1, T, optimal_policies(m, T),
                               RngStreams.from_seed(0), FAST)
    rep = verify_ax(m, 10, 0.3, T, res.policies, "AX_plus")
    assert rep.values[1] <= 1.3 < 1 + 10 * 0.3


def test_ax_dominance_chain(chain3):
    T = {0, 1, 2}
    res = policy_consolidation(Simulator(chain3, 10**10), 3, 0.3, 0.1, T, optimal_policies(chain3, T),
                               RngStreams.from_seed(1), FAST)
    plus = verify_ax(chain3, 3, 0.3, T, res.policies, "AX_plus")
    if plus.passed_all_goals:
        assert verify_ax(chain3, 3, 0.3, T, res.policies, "AX_star").passed_all_goals
        assert verify_ax(chain3, 3, 0.3, T, res.policies, "AX_L").passed_all_goals


def test_pc_requires_initial_policies(chain3):
    with pytest.raises(ValueError):
        policy_consolidation(Simulator(chain3), 3, 0.3, 0.1, {0, 2}, {}, RngStreams.from_seed(0))
    with pytest.raises(ValueError):
        policy_consolidation(Simulator(chain3), 3, 0.3, 0.1, set(), {}, RngStreams.from_seed(0))


def test_pc_log_schema_matches_discovery(tmp_path, chain3):
    res = policy_consolidation(Simulator(chain3, 10**10), 3, 0.3, 0.1, {0, 1}, optimal_policies(chain3, {0, 1}),
                               RngStreams.from_seed(0), FAST)
    path = tmp_path / "pc.csv"
    res.log.write_csv(path)
    assert path.read_text().splitlines()[0] == ",".join(LOG_COLUMNS)
    assert {r.algo for r in res.log.records} == {"pc"}
    assert sum(r.samples_used for r in res.log.records) == res.samples


def test_pc_after_lasd(chain3):
    disc = lasd(Simulator(chain3, 10**10), 3, 0.3, 0.1, 3, RngStreams.from_seed(0), FAST)
    res = policy_consolidation(Simulator(chain3, 10**10), 3, 0.3, 0.1, disc.K, disc.policies,
                               RngStreams.from_seed(0), FAST)
    assert set(res.policies) == set(disc.K)


@pytest.mark.parametrize("use_lasd", [False, True])
def test_lae_chain(use_lasd, chain3):
    res = lae(Simulator(chain3, 10**10), 3, 0.3, 0.1, RngStreams.from_seed(0), FAST, use_lasd=use_lasd,
              num_states=3)
    assert res.K == {0, 1, 2}
    assert verify_ax(chain3, 3, 0.3, res.K, res.policies, "AX_plus").passed_all_goals
    assert res.discovery.log.algo == "lae" and res.consolidation.log.algo == "pc"


def test_lae_single_state():
    m = TabularMdp(1, 2, 0, {(0, 0): {0: 1.0}, (0, 1): {0: 1.0}})
    res = lae(Simulator(m), 2, 0.3, 0.1, RngStreams.from_seed(0), DESK)
    assert res.K == {0} and list(res.policies) == [0]


def test_lae_example_2l():
    res = lae(Simulator(make_example_2l(2, 3), 10**10), 3, 0.5, 0.1, RngStreams.from_seed(0), DESK)
    assert res.K == {0} and list(res.policies) == [0]


def test_lae_lasd_needs_size(chain3):
    with pytest.raises(ValueError):
        lae(Simulator(chain3), 3, 0.3, 0.1, RngStreams.from_seed(0), use_lasd=True)
