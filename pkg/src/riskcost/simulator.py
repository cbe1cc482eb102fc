"""Synthetic authentication streams with drift and a probing adversary, driven through the policy loop."""

from __future__ import annotations

import dataclasses
import enum
import functools
import hashlib
import json
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .calibration import fit_isotonic, fit_platt
from .domain import Action, AuthEvent, ChallengeModel, ConfigError, Label, LossRecord
from .policy import (
    PolicyConfig,
    StepDecision,
    new_state,
    policy_step,
    policy_update,
    reoptimize,
)
from .riskmetrics import Rates, empirical_rates


@dataclass(frozen=True)
class GaussianScore:
    mean: float
    std: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ConfigError("score mean must be finite", field="mean")
        if not (math.isfinite(self.std) and self.std > 0):
            raise ConfigError("score std must be positive", field="std")


@dataclass(frozen=True)
class Drift:
    rate: float = 0.0
    start_step: int = 0


@dataclass(frozen=True)
class AdversaryConfig:
    """Hill-climbing prober; ``direction`` of +1/-1 moves the probe mean up/down when rejected.

    ``None`` points it at the legitimate score mean.
    """

    probe_step_size: float = 0.1
    probe_batch: int = 20
    adapt: bool = True
    direction: Optional[float] = None

    def __post_init__(self):
        if self.probe_step_size < 0 or not math.isfinite(self.probe_step_size):
            raise ConfigError("probe_step_size must be finite and >= 0", field="probe_step_size")
        if self.probe_batch < 1:
            raise ConfigError("probe_batch must be >= 1", field="probe_batch")
        if self.direction is not None and self.direction not in (-1, 1):
            raise ConfigError("direction must be +1 or -1", field="direction")


@dataclass(frozen=True)
class Scenario:
    impostor_prior: float
    legit_score: GaussianScore
    impostor_score: GaussianScore
    drift: Drift = Drift()
    adversary: Optional[AdversaryConfig] = None
    challenge: ChallengeModel = ChallengeModel()
    bucket_weights: Mapping[str, float] = field(default_factory=lambda: {"default": 1.0})
    horizon: int = 1000
    replications: int = 1
    seed: int = 0
    calibration_samples: int = 2000

    def __post_init__(self):
        if not (0.0 <= self.impostor_prior <= 1.0) or math.isnan(self.impostor_prior):
            raise ConfigError("impostor_prior must lie in [0, 1]", field="impostor_prior")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1", field="horizon")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1", field="replications")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer", field="seed")
        if self.calibration_samples < 2:
            raise ConfigError("calibration_samples must be >= 2", field="calibration_samples")
        if not self.bucket_weights or any(w < 0 for w in self.bucket_weights.values()) \
                or sum(self.bucket_weights.values()) <= 0:
            raise ConfigError("bucket_weights must be non-negative with positive total", field="bucket_weights")

    @property
    def toward_legit(self) -> float:
        return 1.0 if self.legit_score.mean >= self.impostor_score.mean else -1.0


@dataclass(frozen=True)
class AdversaryState:
    probe_mean: float
    batch: Tuple[Tuple[float, bool], ...] = ()
    batch_rates: Tuple[float, ...] = ()


def initial_adversary(scenario: Scenario) -> Optional[AdversaryState]:
    if scenario.adversary is None:
        return None
    return AdversaryState(probe_mean=scenario.impostor_score.mean)


def adversary_update(state: AdversaryState, config: AdversaryConfig, observed: Tuple[float, Action],
                     default_direction: float = 1.0) -> AdversaryState:
    """Record one impostor attempt; every ``probe_batch`` attempts move the probe mean.

    ``observed`` is the attempt's score and its effective outcome (ACCEPT for
    an accepted attempt, anything else counts as refused).
    """
    score, action = observed
    batch = state.batch + ((float(score), action is Action.ACCEPT),)
    if len(batch) < config.probe_batch:
        return dataclasses.replace(state, batch=batch)
    accepted = [s for s, ok in batch if ok]
    rate = len(accepted) / len(batch)
    mean = state.probe_mean
    if accepted:
        target = sum(accepted) / len(accepted)
        gap = target - mean
        mean += math.copysign(min(config.probe_step_size, abs(gap)), gap)
    else:
        direction = config.direction if config.direction is not None else default_direction
        mean += direction * config.probe_step_size
    return AdversaryState(probe_mean=mean, batch=(), batch_rates=state.batch_rates + (rate,))


@functools.lru_cache(maxsize=64)
def _bucket_table_cached(items):
    names = [k for k, _ in items]
    w = np.array([v for _, v in items], dtype=float)
    return names, w / w.sum()


def _bucket_table(scenario: Scenario):
    return _bucket_table_cached(tuple(sorted(scenario.bucket_weights.items())))


def generate_event(scenario: Scenario, step: int, adversary_state: Optional[AdversaryState],
                   rng: np.random.Generator, event_id: Optional[int] = None) -> AuthEvent:
    if step >= scenario.horizon:
        raise ValueError("step beyond horizon")
    impostor = bool(rng.random() < scenario.impostor_prior)
    names, probs = _bucket_table(scenario)
    k = int(rng.choice(len(names), p=probs)) if len(names) > 1 else 0
    if impostor:
        mean, std = scenario.impostor_score.mean, scenario.impostor_score.std
        adv = scenario.adversary
        if adv is not None and adv.adapt and adversary_state is not None:
            mean = adversary_state.probe_mean
    else:
        mean, std = scenario.legit_score.mean, scenario.legit_score.std
        if step >= scenario.drift.start_step:
            mean += scenario.drift.rate * (step - scenario.drift.start_step)
    score = float(rng.normal(mean, std))
    return AuthEvent(
        event_id=step if event_id is None else event_id,
        step=step,
        raw_score=score,
        features=(float(k),),
        truth=Label.IMPOSTOR if impostor else Label.LEGITIMATE,
        bucket=names[k],
    )


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def fingerprint(scenario: Scenario, config: Optional[PolicyConfig] = None) -> str:
    doc = {"scenario": _jsonable(scenario), "policy": _jsonable(config) if config else None}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class TraceSummary:
    rates: Rates
    total_loss: float
    epsilon_final: float


@dataclass
class Trace:
    replication: int
    seed: int
    fingerprint: str
    rows: List[Tuple[AuthEvent, StepDecision, LossRecord]]
    summary: TraceSummary
    drift_history: List[Tuple[int, float]] = field(default_factory=list)
    adversary_rates: Tuple[float, ...] = ()
    challenge_outcomes: Dict[int, Optional[bool]] = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    @property
    def records(self) -> List[LossRecord]:
        return [rec for _, _, rec in self.rows]

    def epsilon_path(self) -> List[float]:
        """Cumulative privacy spend after each step."""
        out, eps = [], 0.0
        for _, _, rec in self.rows:
            eps += rec.leakage_spent
            out.append(eps)
        return out


def _challenge_passed(rng: np.random.Generator, rho: float, label: Label) -> bool:
    resolved = bool(rng.random() < rho)
    return resolved if label is Label.LEGITIMATE else not resolved


def fit_initial_calibration(scenario: Scenario, config: PolicyConfig, rng: np.random.Generator):
    """Calibrate on a nominal sample: no drift, adversary at its starting point."""
    n = scenario.calibration_samples
    impostor = rng.random(n) < scenario.impostor_prior
    scores = np.where(
        impostor,
        rng.normal(scenario.impostor_score.mean, scenario.impostor_score.std, n),
        rng.normal(scenario.legit_score.mean, scenario.legit_score.std, n),
    )
    labels = [Label.IMPOSTOR if i else Label.LEGITIMATE for i in impostor]
    if impostor.all() or not impostor.any():
        raise ConfigError("calibration sample holds a single class; adjust impostor_prior or calibration_samples",
                          field="impostor_prior")
    if config.calibration_kind == "isotonic":
        return fit_isotonic(scores, labels)
    return fit_platt(scores, labels, ridge=config.platt_ridge)


def run_replication(scenario: Scenario, config: PolicyConfig, replication: int) -> Trace:
    seed = scenario.seed ^ replication
    event_ss, outcome_ss, policy_ss = np.random.SeedSequence(seed).spawn(3)
    event_rng = np.random.default_rng(event_ss)
    outcome_rng = np.random.default_rng(outcome_ss)

    calibration = fit_initial_calibration(scenario, config, event_rng)
    state = new_state(config, calibration)
    state.rng = np.random.default_rng(policy_ss)
    adversary = initial_adversary(scenario)
    challenge = scenario.challenge
    toward_legit = scenario.toward_legit

    events: Dict[int, AuthEvent] = {}
    decisions: Dict[int, StepDecision] = {}
    outcomes: Dict[int, Optional[bool]] = {}
    queue = deque()
    for t in range(scenario.horizon):
        event = generate_event(scenario, t, adversary, event_rng)
        decision = policy_step(state, config, event, challenge)
        passed = None
        if decision.action is Action.CHALLENGE:
            passed = _challenge_passed(outcome_rng, challenge.rho(event), event.truth)
        if adversary is not None and event.truth is Label.IMPOSTOR and scenario.adversary.adapt:
            got_in = decision.action is Action.ACCEPT or bool(passed)
            adversary = adversary_update(
                adversary, scenario.adversary,
                (event.raw_score, Action.ACCEPT if got_in else Action.REJECT), toward_legit)
        events[event.event_id] = event
        decisions[event.event_id] = decision
        outcomes[event.event_id] = passed
        queue.append((decision, event.truth, passed))
        if len(queue) > config.feedback_lag:
            policy_update(state, *queue.popleft(), config.costs)
        if (t + 1) % config.reoptimize_every == 0:
            reoptimize(state, config)
    while queue:
        policy_update(state, *queue.popleft(), config.costs)

    records = {rec.event_id: rec for rec in state.log}
    rows = [(events[i], decisions[i], records[i]) for i in sorted(events)]
    rates = empirical_rates((d.action, e.truth) for e, d, _ in rows)
    summary = TraceSummary(
        rates=rates,
        total_loss=math.fsum(r.realized_loss for _, _, r in rows),
        epsilon_final=state.epsilon_spent,
    )
    return Trace(
        replication=replication,
        seed=seed,
        fingerprint=fingerprint(scenario, config),
        rows=rows,
        summary=summary,
        drift_history=list(state.drift_history),
        adversary_rates=adversary.batch_rates if adversary is not None else (),
        challenge_outcomes=outcomes,
    )


def run_simulation(scenario: Scenario, config: PolicyConfig, workers: int = 1,
                   replications: Optional[int] = None) -> List[Trace]:
    """Run ``replications`` independent seeded replications; result ordered by replication index."""
    n = scenario.replications if replications is None else replications
    if n < 1:
        raise ConfigError("replications must be >= 1", field="replications")
    if workers <= 1 or n == 1:
        return [run_replication(scenario, config, r) for r in range(n)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_replication, scenario, config, r) for r in range(n)]
        return [f.result() for f in futures]
