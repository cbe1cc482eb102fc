"""Risk-cost decision engine for adaptive authentication."""

from .domain import Action, AuthEvent, ChallengeModel, ConfigError, CostParameters, Label, LossRecord

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AuthEvent",
    "ChallengeModel",
    "ConfigError",
    "CostParameters",
    "Label",
    "LossRecord",
]
