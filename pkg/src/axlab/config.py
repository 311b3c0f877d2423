"""Algorithm constants.

``PAPER`` keeps every constant at its published value. Its policy-evaluation
episode count (``n_dev(32L, eps/256, .)``) is astronomically large (about 1e15
episodes at eps=0.3), so ``DESK`` keeps everything else and swaps in a light
evaluation rule, ``ceil(ln(2/delta) / (eps/4)^2)`` episodes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

EVAL_RULES = ("n_dev", "light")


@dataclass(frozen=True)
class Constants:
    # VISGO bonus
    c1: float = 3.0
    c2: float = 512.0
    # N_0 / N_1 multipliers
    c_n0: float = 4.0
    c_n1: float = 4.0
    # policy evaluation: lambda = rule(value_scale * L, eps / accuracy_divisor, delta)
    eval_rule: str = "n_dev"
    eval_value_scale: float = 32.0
    eval_accuracy_divisor: float = 256.0
    eval_const: float = 1.0
    # reachability test
    rtest_base: float = 2.0**10
    rtest_horizon: float = 8.0
    rtest_threshold: float = 7.0 / 16.0
    # navigation safety cap: ceil(nav_scale * L * ln(4 / nav_delta))
    nav_scale: float = 32.0
    nav_delta: float = 1e-9
    visgo_max_sweeps: int = 10**6

    def __post_init__(self):
        if self.eval_rule not in EVAL_RULES:
            raise ValueError(f"eval_rule must be one of {EVAL_RULES}")
        for name in ("c1", "c2", "c_n0", "c_n1", "eval_value_scale", "eval_accuracy_divisor", "eval_const"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def eval_episodes(self, L: float, eps: float, delta: float) -> int:
        """Number of evaluation episodes for one policy-evaluation round."""
        from .explore import n_dev

        acc = eps / self.eval_accuracy_divisor
        if self.eval_rule == "n_dev":
            return n_dev(self.eval_value_scale * L, acc, delta)
        return max(1, math.ceil(self.eval_const * math.log(2.0 / delta) / acc**2))

    def nav_cap(self, L: float) -> int:
        return math.ceil(self.nav_scale * L * math.log(4.0 / self.nav_delta))

    def with_(self, **changes) -> "Constants":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


PAPER = Constants()
DESK = Constants(eval_rule="light", eval_accuracy_divisor=4.0)
PRESETS = {"paper": PAPER, "desk": DESK}
