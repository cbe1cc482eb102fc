"""One-step Bayes action selection, the posterior-odds threshold and the step-up VoI gate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

from .domain import Action, ConfigError, CostParameters


@dataclass(frozen=True)
class ActionRisks:
    accept: float
    reject: float
    challenge: Optional[float] = None

    def __post_init__(self):
        for name in ("accept", "reject", "challenge"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or v < 0):
                raise ValueError(f"{name} risk must be finite and >= 0, got {v}")

    def as_dict(self) -> Dict[Action, float]:
        out = {Action.ACCEPT: self.accept, Action.REJECT: self.reject}
        if self.challenge is not None:
            out[Action.CHALLENGE] = self.challenge
        return out


@dataclass(frozen=True)
class SignalModel:
    """Likelihood table of a finite step-up observation ``Z``.

    Each row is ``(P(z | legitimate), P(z | impostor))`` for one outcome z.
    """

    outcomes: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        if not self.outcomes:
            raise ValueError("signal model needs at least one outcome")
        if any(pl < 0 or pi < 0 for pl, pi in self.outcomes):
            raise ValueError("signal likelihoods must be >= 0")
        legit = math.fsum(r[0] for r in self.outcomes)
        impostor = math.fsum(r[1] for r in self.outcomes)
        if abs(legit - 1) > 1e-9 or abs(impostor - 1) > 1e-9:
            raise ValueError("each signal column must sum to 1")

    @property
    def is_uninformative(self) -> bool:
        # identical columns: every posterior equals the prior
        return all(pl == pi for pl, pi in self.outcomes)


def challenge_signal(rho: float) -> SignalModel:
    """Pass/fail observation of a challenge that resolves the true class with probability ``rho``."""
    return SignalModel(((rho, 1.0 - rho), (1.0 - rho, rho)))


def action_risks(p: float, rho: float, c_ch: float, costs: CostParameters,
                 challenge_feasible: bool = True) -> ActionRisks:
    """Expected loss of each action for impostor probability ``p``.

    A challenge costs ``c_ch`` and, when it fails to resolve the class
    (probability ``1 - rho``), leaves the original error exposure in place.
    """
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    accept = p * costs.c_fa
    reject = (1.0 - p) * costs.c_fr
    challenge = None
    if challenge_feasible:
        challenge = c_ch + p * (1.0 - rho) * costs.c_fa + (1.0 - p) * (1.0 - rho) * costs.c_fr
    return ActionRisks(accept, reject, challenge)


def argmin_action(scores: Dict[Action, float]) -> Action:
    return min(scores, key=lambda a: (scores[a], int(a)))


def bayes_action(risks: ActionRisks, leakage_penalty_per_challenge: float = 0.0) -> Action:
    scores = risks.as_dict()
    if Action.CHALLENGE in scores:
        scores[Action.CHALLENGE] += leakage_penalty_per_challenge
    return argmin_action(scores)


def accept_threshold(costs: CostParameters) -> float:
    """Posterior impostor probability below which ACCEPT beats REJECT.

    >>> accept_threshold(CostParameters(c_fa=1.0, c_fr=1.0))
    0.5
    """
    total = costs.c_fa + costs.c_fr
    if total <= 0:
        raise ConfigError("degenerate costs: c_fa + c_fr must be positive", field="c_fa")
    return costs.c_fr / total


def _best_terminal_risk(p: float, costs: CostParameters) -> float:
    return min(p * costs.c_fa, (1.0 - p) * costs.c_fr)


def value_of_information(p: float, signal: SignalModel, c_ch: float, costs: CostParameters,
                         lam: float = 0.0, delta_leakage: float = 0.0) -> float:
    """Net value of observing ``signal`` before deciding between ACCEPT and REJECT.

    Returns the prior Bayes risk minus the preposterior Bayes risk, less the
    friction ``c_ch`` and the priced leakage ``lam * delta_leakage``. Positive
    values mean the step-up pays for itself.
    """
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie in (0, 1), got {p}")
    friction = c_ch + lam * delta_leakage
    if signal.is_uninformative:
        return -friction
    prior = _best_terminal_risk(p, costs)
    expected_post = 0.0
    for p_legit, p_imp in signal.outcomes:
        marginal = p * p_imp + (1.0 - p) * p_legit
        if marginal <= 0.0:
            continue
        # marginal * min(post*c_fa, (1-post)*c_fr) without dividing by the marginal
        expected_post += min(p * p_imp * costs.c_fa, (1.0 - p) * p_legit * costs.c_fr)
    return prior - expected_post - friction


def step_up_gate(voi: float) -> bool:
    return voi > 0.0
