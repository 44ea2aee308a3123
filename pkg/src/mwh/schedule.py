"""Per-mini-batch mix/clean decisions: the three-stage mWh schedule and ablations.

Batch indices are global and 1-based over the whole run, so stage
boundaries and the stage-2 parity rule carry across epoch boundaries.
"""
import math
from dataclasses import dataclass
from typing import Optional

from .exceptions import ConfigError
from .rng import uniform01

STRATEGIES = (
    "baseline",
    "mixup",
    "first_half",
    "second_half",
    "refinement",
    "mwh",
    "stage_combo",
)
POLICIES = ("clean", "mixup", "mwh")

_ALIASES = {
    "none": "baseline",
    "mixup_always": "mixup",
    "firsthalfmixup": "first_half",
    "first_half_mixup": "first_half",
    "secondhalfmixup": "second_half",
    "second_half_mixup": "second_half",
    "mixup_refinement": "refinement",
    "mixupwithrefinement": "refinement",
    "stagecombo": "stage_combo",
}

# p*m like 0.29*100 lands just under an integer in binary floating point
_FLOOR_GUARD = 1e-9


def _floor(x):
    return math.floor(x + _FLOOR_GUARD)


@dataclass(frozen=True)
class ScheduleParams:
    m: int
    p: float = 0.6
    q: float = 0.9
    alpha: float = 0.2

    def __post_init__(self):
        if not (0.0 <= self.p < self.q <= 1.0):
            raise ConfigError(f"need 0 <= p < q <= 1, got p={self.p}, q={self.q}")
        if self.m < 1:
            raise ConfigError(f"total mini-batch count must be >= 1, got {self.m}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")

    @property
    def stage1_end(self):
        return _floor(self.p * self.m)

    @property
    def stage2_end(self):
        return _floor(self.q * self.m)


@dataclass(frozen=True)
class StrategySpec:
    kind: str = "mwh"
    p: float = 0.6
    q: float = 0.9
    refine_epochs: int = 25
    stage2: str = "mwh"
    stage3: str = "mwh"

    def __post_init__(self):
        kind = _ALIASES.get(self.kind.lower(), self.kind.lower())
        object.__setattr__(self, "kind", kind)
        if kind not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        for name in ("stage2", "stage3"):
            pol = getattr(self, name).lower()
            pol = "clean" if pol == "none" else pol
            if pol not in POLICIES:
                raise ConfigError(f"unknown {name} policy {pol!r}; expected one of {POLICIES}")
            object.__setattr__(self, name, pol)
        if kind in ("mwh", "stage_combo") and not (0.0 <= self.p < self.q <= 1.0):
            raise ConfigError(f"need 0 <= p < q <= 1, got p={self.p}, q={self.q}")
        if kind == "refinement" and self.refine_epochs < 0:
            raise ConfigError("refine_epochs must be >= 0")

    @property
    def staged(self):
        return self.kind in ("mwh", "stage_combo")

    def params(self, m, alpha=0.2):
        return ScheduleParams(m=m, p=self.p, q=self.q, alpha=alpha)


@dataclass(frozen=True)
class AugDecision:
    mix: bool
    stage: Optional[int] = None
    epsilon: Optional[float] = None


def stage_of(i, params):
    if not 1 <= i <= params.m:
        raise IndexError(f"batch index {i} outside 1..{params.m}")
    if i <= params.stage1_end:
        return 1
    if i <= params.stage2_end:
        return 2
    return 3


def epsilon_at(i, params):
    """Stage-3 mixing probability (m - i) / (m (1 - q)), clamped to [0, 1]."""
    if stage_of(i, params) != 3:
        raise ValueError(f"batch {i} is not in stage 3")
    eps = (params.m - i) / (params.m * (1.0 - params.q))
    return min(max(eps, 0.0), 1.0)


def _stage3_coin(i, params, stream):
    eps = epsilon_at(i, params)
    # draw even when eps == 0 so later draws keep their positions
    theta = uniform01(stream)
    return AugDecision(mix=bool(theta < eps), stage=3, epsilon=eps)


def mwh_decide(i, params, stream):
    stage = stage_of(i, params)
    if stage == 1:
        return AugDecision(True, 1)
    if stage == 2:
        return AugDecision(i % 2 == 0, 2)
    return _stage3_coin(i, params, stream)


def _policy_decide(policy, i, stage, params, stream):
    if policy == "clean":
        return AugDecision(False, stage, epsilon_at(i, params) if stage == 3 else None)
    if policy == "mixup":
        return AugDecision(True, stage, epsilon_at(i, params) if stage == 3 else None)
    if stage == 2:
        return AugDecision(i % 2 == 0, 2)
    return _stage3_coin(i, params, stream)


def strategy_decide(i, spec, m, stream):
    """Decide whether global batch ``i`` of ``m`` main-phase batches is mixed.

    For the refinement strategy indices past ``m`` are the appended clean
    batches; every other strategy requires ``1 <= i <= m``.
    """
    kind = spec.kind
    if i < 1 or (i > m and kind != "refinement"):
        raise IndexError(f"batch index {i} outside 1..{m}")
    if kind == "baseline":
        return AugDecision(False)
    if kind == "mixup":
        return AugDecision(True)
    if kind == "first_half":
        return AugDecision(i <= m // 2)
    if kind == "second_half":
        return AugDecision(i > m // 2)
    if kind == "refinement":
        return AugDecision(i <= m)
    params = spec.params(m)
    if kind == "mwh":
        return mwh_decide(i, params, stream)
    if kind == "stage_combo":
        stage = stage_of(i, params)
        if stage == 1:
            return AugDecision(True, 1)
        policy = spec.stage2 if stage == 2 else spec.stage3
        return _policy_decide(policy, i, stage, params, stream)
    raise ConfigError(f"unknown strategy {kind!r}")


def decision_trace(spec, m, stream, total=None):
    """Decisions for batches 1..total (default m) in order."""
    total = m if total is None else total
    return [strategy_decide(i, spec, m, stream) for i in range(1, total + 1)]


def stage_counts(params):
    """Closed-form occupancy: stage sizes, stage-2 mixed count, expected stage-3 mixed count."""
    a, b, m = params.stage1_end, params.stage2_end, params.m
    stage3_expected = sum(epsilon_at(i, params) for i in range(b + 1, m + 1))
    return {
        "stage1": a,
        "stage2": b - a,
        "stage3": m - b,
        "stage2_mixed": b // 2 - a // 2,
        "stage3_expected_mixed": stage3_expected,
    }
