"""Shared vocabulary: actions, labels, cost constants, events and challenge pricing."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple


class ConfigError(ValueError):
    """Raised when a configuration value violates its invariants.

    ``field`` names the offending parameter so CLI callers can report it.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class Action(enum.IntEnum):
    # integer order doubles as the deterministic tie-break
    ACCEPT = 0
    CHALLENGE = 1
    REJECT = 2


class Label(str, enum.Enum):
    LEGITIMATE = "legit"
    IMPOSTOR = "impostor"

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, Label):
            return value
        text = str(value).strip().lower()
        aliases = {
            "legit": cls.LEGITIMATE,
            "legitimate": cls.LEGITIMATE,
            "0": cls.LEGITIMATE,
            "impostor": cls.IMPOSTOR,
            "1": cls.IMPOSTOR,
        }
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown label {value!r}") from None


@dataclass(frozen=True)
class CostParameters:
    """Economic constants of the decision problem.

    Attributes:
        c_fa: loss per false accept (fraud exposure).
        c_fr: loss per false reject (opportunity cost).
        c_ch_base: base friction charged per challenge in the policy-level functional.
        lam: shadow price of one unit of privacy leakage.
    """

    c_fa: float
    c_fr: float
    c_ch_base: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        validate_costs(self)


def validate_costs(params: CostParameters) -> CostParameters:
    for name in ("c_fa", "c_fr", "c_ch_base", "lam"):
        value = getattr(params, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{name} not finite", field=name)
        if value < 0:
            raise ConfigError(f"{name} negative", field=name)
    if params.c_fa + params.c_fr <= 0:
        raise ConfigError("degenerate costs: c_fa + c_fr must be positive", field="c_fa")
    return params


@dataclass(frozen=True)
class AuthEvent:
    event_id: int
    step: int
    raw_score: float
    features: Tuple[float, ...] = ()
    truth: Optional[Label] = None
    bucket: str = "default"

    def __post_init__(self):
        if not math.isfinite(self.raw_score):
            raise ValueError(f"event {self.event_id}: raw_score not finite")


@dataclass(frozen=True)
class ChallengeModel:
    """Piecewise-constant step-up challenge pricing keyed by feature bucket.

    ``rho`` is the probability that the challenge resolves the true class
    (legitimate users pass, impostors fail). Buckets missing from the maps
    fall back to ``default_rho`` / ``default_cost``.
    """

    default_rho: float = 0.9
    default_cost: float = 1.0
    leakage_increment: float = 1.0
    rho_by_bucket: Mapping[str, float] = field(default_factory=dict)
    cost_by_bucket: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        rhos = [self.default_rho, *self.rho_by_bucket.values()]
        costs = [self.default_cost, *self.cost_by_bucket.values()]
        if any(not (0.0 <= r <= 1.0) for r in rhos):
            raise ConfigError("challenge rho must lie in [0, 1]", field="rho")
        if any(not math.isfinite(c) or c < 0 for c in costs):
            raise ConfigError("challenge cost must be finite and >= 0", field="c_ch")
        if not math.isfinite(self.leakage_increment) or self.leakage_increment < 0:
            raise ConfigError("leakage_increment must be finite and >= 0", field="leakage_increment")

    def rho(self, event: AuthEvent) -> float:
        return self.rho_by_bucket.get(event.bucket, self.default_rho)

    def cost(self, event: AuthEvent) -> float:
        return self.cost_by_bucket.get(event.bucket, self.default_cost)

    def leakage(self, event: AuthEvent) -> float:
        return self.leakage_increment


@dataclass(frozen=True)
class LossRecord:
    event_id: int
    action: Action
    realized_loss: float
    leakage_spent: float = 0.0
