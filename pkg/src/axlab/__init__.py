"""Layered autonomous exploration in reward-free tabular MDPs, with an exact oracle."""

from .config import DESK, PAPER, PRESETS, Constants
from .consolidation import lae, policy_consolidation
from .discovery import compute_u, evaluate_candidate, lasd, lasd_plus
from .explore import estimate_hitting_time, explore, n_dev, n_one, n_zero, rtest
from .mdp import (
    RESET,
    GoalValueFn,
    MdpValidationError,
    PolicyTable,
    TabularMdp,
    Trajectory,
    evaluate_policy,
    load_mdp,
    optimal_restricted_values,
    rollout,
    sample_transition,
)
from .oracle import (
    branching_factor,
    check_identifiability,
    incrementally_controllable_set,
    t_l_operator,
    verify_ax,
)
from .sampler import BudgetExceeded, NavigationError, RngStreams, Simulator
from .visgo import VisgoOutput, VisitCounter, visgo

__version__ = "0.1.0"

__all__ = [
    "branching_factor",
    "BudgetExceeded",
    "check_identifiability",
    "compute_u",
    "Constants",
    "DESK",
    "estimate_hitting_time",
    "evaluate_candidate",
    "evaluate_policy",
    "explore",
    "GoalValueFn",
    "incrementally_controllable_set",
    "lae",
    "lasd",
    "lasd_plus",
    "load_mdp",
    "MdpValidationError",
    "n_dev",
    "n_one",
    "n_zero",
    "NavigationError",
    "optimal_restricted_values",
    "PAPER",
    "policy_consolidation",
    "PolicyTable",
    "PRESETS",
    "RESET",
    "RngStreams",
    "rollout",
    "rtest",
    "sample_transition",
    "Simulator",
    "t_l_operator",
    "TabularMdp",
    "Trajectory",
    "verify_ax",
    "visgo",
    "VisgoOutput",
    "VisitCounter",
]
