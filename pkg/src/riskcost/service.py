"""HTTP front end for a single shared policy state.

``POST /decide`` scores one attempt, ``POST /feedback`` books its outcome and
``GET /metrics`` reports running rates, privacy spend, drift and the
cumulative objective. All mutations of the policy state are serialized.
"""

from __future__ import annotations

import hashlib
import json
import threading
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .calibration import CalibrationMap
from .config import to_document
from .domain import Action, AuthEvent, ChallengeModel, Label
from .persist import map_to_document
from .policy import (
    PolicyConfig,
    UnknownEventError,
    cumulative_objective,
    new_state,
    policy_step,
    policy_update,
    reoptimize,
)
from .riskmetrics import empirical_rates


class DecideRequest(BaseModel):
    raw_score: float = Field(allow_inf_nan=False)
    feature_bucket: str = "default"
    session_id: str


class RiskBody(BaseModel):
    accept: float
    reject: float
    challenge: Optional[float] = None


class DecideResponse(BaseModel):
    event_id: int
    action: str
    p: float
    risks: RiskBody
    voi: Optional[float] = None
    epsilon_spent: float
    policy_version: str


class FeedbackRequest(BaseModel):
    event_id: int
    label: str
    challenge_passed: Optional[bool] = None


class ServiceBusy(RuntimeError):
    pass


class DecisionService:
    def __init__(self, config: PolicyConfig, challenge: ChallengeModel, calibration: CalibrationMap,
                 seed: int = 0):
        self.config = config
        self.challenge = challenge
        self.state = new_state(config, calibration, seed)
        self._lock = threading.Lock()
        self._reoptimizing = threading.Event()
        self._next_id = 0
        self._labeled = []
        self._feedback_count = 0
        self._version = self._compute_version()

    def _compute_version(self) -> str:
        doc = {"policy": to_document(self.config), "calibration": map_to_document(self.state.calibration)}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def policy_version(self) -> str:
        return self._version

    def decide(self, raw_score: float, feature_bucket: str = "default", session_id: str = "") -> dict:
        if self._reoptimizing.is_set():
            raise ServiceBusy("policy is being re-optimized")
        with self._lock:
            event = AuthEvent(event_id=self._next_id, step=self._next_id, raw_score=raw_score,
                              bucket=feature_bucket)
            self._next_id += 1
            d = policy_step(self.state, self.config, event, self.challenge)
            return {
                "event_id": d.event_id,
                "action": d.action.name,
                "p": d.p,
                "risks": {"accept": d.risks.accept, "reject": d.risks.reject, "challenge": d.risks.challenge},
                "voi": d.voi,
                "epsilon_spent": self.state.epsilon_spent,
                "policy_version": self._version,
            }

    def feedback(self, event_id: int, label, challenge_passed: Optional[bool] = None) -> dict:
        if self._reoptimizing.is_set():
            raise ServiceBusy("policy is being re-optimized")
        label = Label.parse(label)
        with self._lock:
            decision = self.state.pending.get(event_id)
            if decision is None:
                raise UnknownEventError(event_id)
            if decision.action is Action.CHALLENGE and challenge_passed is None:
                raise ValueError("challenge_passed is required for a challenged event")
            policy_update(self.state, decision, label,
                          challenge_passed if decision.action is Action.CHALLENGE else None,
                          self.config.costs)
            self._labeled.append((decision.action, label))
            self._feedback_count += 1
            if self._feedback_count % self.config.reoptimize_every == 0:
                self._reoptimizing.set()
                try:
                    reoptimize(self.state, self.config)
                    self._version = self._compute_version()
                finally:
                    self._reoptimizing.clear()
            return {"event_id": event_id, "loss": self.state.log[-1].realized_loss,
                    "epsilon_spent": self.state.epsilon_spent}

    def metrics(self) -> dict:
        with self._lock:
            rates = empirical_rates(self._labeled)
            if self.state.log:
                obj = cumulative_objective([self.state.log], self.config)
                objective = {"expected": obj.expected, "cvar": obj.cvar, "leakage": obj.leakage, "total": obj.total}
            else:
                objective = {"expected": 0.0, "cvar": 0.0, "leakage": 0.0, "total": 0.0}
            return {
                "decisions": self._next_id,
                "feedback": self._feedback_count,
                "rates": {"far": rates.far, "frr": rates.frr, "chr": rates.chr,
                          "n_impostor": rates.n_impostor, "n_legit": rates.n_legit, "n_total": rates.n_total},
                "epsilon_spent": self.state.epsilon_spent,
                "drift_index": self.state.drift,
                "objective": objective,
                "policy_version": self._version,
            }


def create_app(service: DecisionService) -> FastAPI:
    app = FastAPI(title="riskcost decision service")

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc.errors())})

    def _guard(fn, *args):
        try:
            return fn(*args)
        except ServiceBusy as exc:
            return JSONResponse(status_code=503, content={"detail": str(exc)})
        except UnknownEventError as exc:
            return JSONResponse(status_code=409, content={"detail": f"unknown event_id {exc.args[0]}"})
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/decide", response_model=DecideResponse)
    def decide(req: DecideRequest):
        return _guard(service.decide, req.raw_score, req.feature_bucket, req.session_id)

    @app.post("/feedback")
    def feedback(req: FeedbackRequest):
        return _guard(service.feedback, req.event_id, req.label, req.challenge_passed)

    @app.get("/metrics")
    def metrics():
        return service.metrics()

    return app
