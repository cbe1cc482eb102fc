"""Sequential risk- and privacy-aware authentication policy.

Each step calibrates the score, prices the three actions, adds a tail-risk
penalty estimated from that action's recent realized losses, enforces the
privacy budget and picks the cheapest feasible action. ``policy_update``
books the realized loss once the outcome is known and ``reoptimize`` refits
calibration on the rolling window and tracks drift.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .calibration import (
    CalibrationMap,
    apply_calibration,
    apply_calibration_many,
    drift_index,
    fit_isotonic,
    fit_platt,
    histogram,
)
from .decision import (
    ActionRisks,
    action_risks,
    argmin_action,
    challenge_signal,
    step_up_gate,
    value_of_information,
)
from .domain import Action, AuthEvent, ChallengeModel, ConfigError, CostParameters, Label, LossRecord
from .riskmetrics import LossSample, cvar_sorted, cvar_uniform
from .robust import AmbiguityKind, AmbiguitySpec, worst_case_mean

log = logging.getLogger(__name__)


class UnknownEventError(KeyError):
    pass


class ChallengeRule(str, enum.Enum):
    BAYES = "bayes"
    VOI = "voi"


class CalibrationMode(str, enum.Enum):
    WINDOWED = "windowed"
    FIXED = "fixed"


@dataclass(frozen=True)
class PolicyConfig:
    costs: CostParameters
    alpha: float = 0.99
    beta: float = 0.1
    delta: float = 0.0
    ambiguity_kind: AmbiguityKind = AmbiguityKind.TOTAL_VARIATION
    epsilon_max: Optional[float] = None
    window: int = 500
    reoptimize_every: int = 100
    challenge_rule: ChallengeRule = ChallengeRule.BAYES
    explore_rate: float = 0.0
    calibration_kind: str = "platt"
    calibration_mode: CalibrationMode = CalibrationMode.WINDOWED
    platt_ridge: float = 1e-3
    feedback_lag: int = 0
    cvar_warmup: int = 10
    drift_bins: int = 10

    def __post_init__(self):
        object.__setattr__(self, "ambiguity_kind", AmbiguityKind(self.ambiguity_kind))
        object.__setattr__(self, "challenge_rule", ChallengeRule(self.challenge_rule))
        object.__setattr__(self, "calibration_mode", CalibrationMode(self.calibration_mode))
        if not (0.0 <= self.alpha < 1.0):
            raise ConfigError("alpha must lie in [0, 1)", field="alpha")
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ConfigError("beta must be finite and >= 0", field="beta")
        if self.delta > 0:
            AmbiguitySpec(self.ambiguity_kind, self.delta)
        elif self.delta < 0 or not math.isfinite(self.delta):
            raise ConfigError("delta must be finite and >= 0", field="delta")
        if self.epsilon_max is not None and (not math.isfinite(self.epsilon_max) or self.epsilon_max < 0):
            raise ConfigError("epsilon_max must be finite and >= 0", field="epsilon_max")
        if self.window < 1:
            raise ConfigError("window must be >= 1", field="window")
        if self.reoptimize_every < 1:
            raise ConfigError("reoptimize_every must be >= 1", field="reoptimize_every")
        if not (0.0 <= self.explore_rate <= 1.0):
            raise ConfigError("explore_rate must lie in [0, 1]", field="explore_rate")
        if self.calibration_kind not in ("platt", "isotonic"):
            raise ConfigError("calibration_kind must be 'platt' or 'isotonic'", field="calibration_kind")
        if self.feedback_lag < 0:
            raise ConfigError("feedback_lag must be >= 0", field="feedback_lag")
        if self.cvar_warmup < 1 or self.drift_bins < 1:
            raise ConfigError("cvar_warmup and drift_bins must be >= 1", field="cvar_warmup")

    @property
    def lam(self) -> float:
        return self.costs.lam

    @property
    def ambiguity(self) -> Optional[AmbiguitySpec]:
        return AmbiguitySpec(self.ambiguity_kind, self.delta) if self.delta > 0 else None


@dataclass(frozen=True)
class StepDecision:
    event_id: int
    step: int
    action: Action
    risks: ActionRisks
    cvar_terms: Dict[Action, float]
    scores: Dict[Action, float]
    p: float
    raw_score: float
    challenge_cost: float
    delta_epsilon: float
    voi: Optional[float] = None
    explored: bool = False


@dataclass
class PolicyState:
    calibration: CalibrationMap
    window: int
    rng: np.random.Generator
    step: int = 0
    epsilon_spent: float = 0.0
    # spent plus budget reserved by challenges still awaiting feedback
    epsilon_committed: float = 0.0
    buffers: Dict[Action, Deque[float]] = field(default_factory=dict)
    log: List[LossRecord] = field(default_factory=list)
    pending: Dict[int, StepDecision] = field(default_factory=dict)
    labeled_window: Deque[Tuple[float, Label]] = field(default_factory=deque)
    # raw scores of the last two windows, re-mapped through the current calibration for drift
    score_window: Deque[float] = field(default_factory=deque)
    drift_history: List[Tuple[int, float]] = field(default_factory=list)
    refits: int = 0
    refit_skips: int = 0
    _cvar_cache: Dict[Action, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for a in Action:
            self.buffers.setdefault(a, deque(maxlen=self.window))
        self.labeled_window = deque(self.labeled_window, maxlen=self.window)
        self.score_window = deque(self.score_window, maxlen=2 * self.window)

    @property
    def drift(self) -> Optional[float]:
        return self.drift_history[-1][1] if self.drift_history else None


def new_state(config: PolicyConfig, calibration: CalibrationMap, seed: int = 0) -> PolicyState:
    return PolicyState(calibration=calibration, window=config.window, rng=np.random.default_rng(seed))


def _tail_term(state: PolicyState, config: PolicyConfig, action: Action) -> float:
    if config.beta == 0:
        return 0.0
    buf = state.buffers[action]
    if len(buf) < config.cvar_warmup:
        return 0.0
    cached = state._cvar_cache.get(action)
    if cached is None:
        cached = cvar_uniform(buf, config.alpha)
        state._cvar_cache[action] = cached
    return config.beta * cached


def _outcome_lotteries(p: float, rho: float, c_ch: float, costs: CostParameters):
    """Loss atoms and probabilities of each action at this event."""
    return {
        Action.ACCEPT: ([0.0, costs.c_fa], [1.0 - p, p]),
        Action.REJECT: ([0.0, costs.c_fr], [p, 1.0 - p]),
        Action.CHALLENGE: (
            [c_ch, c_ch + costs.c_fa, c_ch + costs.c_fr],
            [rho, p * (1.0 - rho), (1.0 - p) * (1.0 - rho)],
        ),
    }


def policy_step(state: PolicyState, config: PolicyConfig, event: AuthEvent,
                challenge: ChallengeModel) -> StepDecision:
    costs = config.costs
    p = apply_calibration(state.calibration, event.raw_score)
    rho = challenge.rho(event)
    c_ch = challenge.cost(event)
    d_eps = challenge.leakage(event)

    challenge_ok = True
    if config.epsilon_max is not None and state.epsilon_committed + d_eps > config.epsilon_max:
        challenge_ok = False
    voi = None
    if config.challenge_rule is ChallengeRule.VOI:
        voi = value_of_information(p, challenge_signal(rho), c_ch, costs, config.lam, d_eps)
        challenge_ok = challenge_ok and step_up_gate(voi)

    risks = action_risks(p, rho, c_ch, costs, challenge_feasible=challenge_ok)
    base = risks.as_dict()
    spec = config.ambiguity
    if spec is not None:
        lotteries = _outcome_lotteries(p, rho, c_ch, costs)
        base = {a: worst_case_mean(LossSample(*lotteries[a]), spec) for a in base}

    cvar_terms = {a: _tail_term(state, config, a) for a in base}
    scores = {a: base[a] + cvar_terms[a] for a in base}
    if Action.CHALLENGE in scores:
        scores[Action.CHALLENGE] += config.lam * d_eps

    explored = False
    if config.explore_rate > 0 and state.rng.random() < config.explore_rate:
        options = sorted(scores)
        action = options[int(state.rng.integers(len(options)))]
        explored = True
    else:
        action = argmin_action(scores)

    decision = StepDecision(
        event_id=event.event_id,
        step=event.step,
        action=action,
        risks=risks,
        cvar_terms=cvar_terms,
        scores=scores,
        p=p,
        raw_score=event.raw_score,
        challenge_cost=c_ch,
        delta_epsilon=d_eps if action is Action.CHALLENGE else 0.0,
        voi=voi,
        explored=explored,
    )
    if event.event_id in state.pending:
        raise ValueError(f"event {event.event_id} already has a pending decision")
    state.pending[event.event_id] = decision
    if action is Action.CHALLENGE:
        state.epsilon_committed += d_eps
    state.score_window.append(event.raw_score)
    return decision


def realized_loss(action: Action, label: Label, costs: CostParameters, challenge_cost: float = 0.0,
                  challenge_passed: Optional[bool] = None) -> float:
    impostor = label is Label.IMPOSTOR
    if action is Action.ACCEPT:
        return costs.c_fa if impostor else 0.0
    if action is Action.REJECT:
        return 0.0 if impostor else costs.c_fr
    if challenge_passed is None:
        raise ValueError("a challenged event needs challenge_passed")
    loss = challenge_cost
    if impostor and challenge_passed:
        loss += costs.c_fa
    if not impostor and not challenge_passed:
        loss += costs.c_fr
    return loss


def policy_update(state: PolicyState, decision: StepDecision, label: Label,
                  challenge_passed: Optional[bool], costs: CostParameters) -> PolicyState:
    """Book the realized loss of a pending decision and spend its privacy budget."""
    if state.pending.get(decision.event_id) is not decision:
        raise UnknownEventError(decision.event_id)
    label = Label.parse(label)
    loss = realized_loss(decision.action, label, costs, decision.challenge_cost, challenge_passed)
    del state.pending[decision.event_id]
    state.epsilon_spent += decision.delta_epsilon
    state.log.append(LossRecord(decision.event_id, decision.action, loss, decision.delta_epsilon))
    state.buffers[decision.action].append(loss)
    state._cvar_cache.pop(decision.action, None)
    state.labeled_window.append((decision.raw_score, label))
    state.step += 1
    return state


def reoptimize(state: PolicyState, config: PolicyConfig) -> PolicyState:
    if config.calibration_mode is CalibrationMode.WINDOWED and state.labeled_window:
        scores = [s for s, _ in state.labeled_window]
        labels = [l for _, l in state.labeled_window]
        if len(set(labels)) < 2 or len(scores) < 2:
            state.refit_skips += 1
            log.info("step %d: refit skipped, window holds a single class", state.step)
        elif config.calibration_kind == "platt":
            state.calibration = fit_platt(scores, labels, ridge=config.platt_ridge)
            state.refits += 1
        else:
            state.calibration = fit_isotonic(scores, labels)
            state.refits += 1
    w = config.window
    if len(state.score_window) == 2 * w:
        probs = apply_calibration_many(state.calibration, list(state.score_window))
        prev = histogram(probs[:w], config.drift_bins)
        cur = histogram(probs[w:], config.drift_bins)
        state.drift_history.append((state.step, drift_index(prev, cur)))
    return state


@dataclass(frozen=True)
class Objective:
    expected: float
    cvar: float
    leakage: float
    total: float


def cumulative_objective(logs: Sequence[Sequence[LossRecord]], config: PolicyConfig) -> Objective:
    """Expected total loss, CVaR of total loss and mean leakage across replications."""
    if len(logs) == 0:
        raise ValueError("cumulative objective needs at least one replication")
    sums = np.array([math.fsum(r.realized_loss for r in rep) for rep in logs])
    leak = np.array([math.fsum(r.leakage_spent for r in rep) for rep in logs])
    expected = float(sums.mean())
    cvar = cvar_sorted(LossSample(sums), config.alpha)
    leakage = float(leak.mean())
    total = expected + config.beta * cvar + config.lam * leakage
    return Objective(expected, cvar, leakage, total)
