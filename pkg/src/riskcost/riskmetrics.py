"""Policy-level risk accounting: error rates, the risk functional, CVaR and cost curves."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .decision import action_risks, bayes_action
from .domain import Action, CostParameters, Label


@dataclass(frozen=True)
class Rates:
    far: float
    frr: float
    chr: float
    n_impostor: int = 0
    n_legit: int = 0
    n_total: int = 0


@dataclass(frozen=True)
class LossSample:
    """Discrete loss distribution: atoms ``values`` with probabilities ``weights``."""

    values: np.ndarray
    weights: np.ndarray

    def __init__(self, values, weights=None):
        v = np.asarray(values, dtype=float).ravel()
        if weights is None:
            w = np.full(len(v), 1.0 / len(v)) if len(v) else np.zeros(0)
        else:
            w = np.asarray(weights, dtype=float).ravel()
            if len(w) != len(v):
                raise ValueError("values and weights differ in length")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and non-negative")
            total = w.sum()
            if len(v) and abs(total - 1.0) > 1e-9:
                raise ValueError(f"weights must sum to 1, got {total}")
            if len(v):
                w = w / total
        if not np.all(np.isfinite(v)):
            raise ValueError("loss values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.values)

    def mean(self) -> float:
        return float(self.values @ self.weights)


@dataclass(frozen=True)
class CostCurvePoint:
    threshold: float
    expected_loss: float
    rates: Rates


@dataclass(frozen=True)
class CostCurve:
    points: Tuple[CostCurvePoint, ...]

    @property
    def argmin(self) -> CostCurvePoint:
        # first (lowest threshold) point on ties
        return min(self.points, key=lambda pt: pt.expected_loss)


def empirical_rates(records: Iterable[Tuple[Action, Label]]) -> Rates:
    n_imp = n_legit = n = 0
    false_acc = false_rej = challenges = 0
    for action, label in records:
        n += 1
        if label is Label.IMPOSTOR:
            n_imp += 1
            false_acc += action is Action.ACCEPT
        else:
            n_legit += 1
            false_rej += action is Action.REJECT
        challenges += action is Action.CHALLENGE
    return Rates(
        far=false_acc / n_imp if n_imp else 0.0,
        frr=false_rej / n_legit if n_legit else 0.0,
        chr=challenges / n if n else 0.0,
        n_impostor=n_imp,
        n_legit=n_legit,
        n_total=n,
    )


def risk_functional(rates: Rates, costs: CostParameters, leakage: float = 0.0) -> float:
    return (costs.c_fa * rates.far + costs.c_fr * rates.frr
            + costs.c_ch_base * rates.chr + costs.lam * leakage)


def _as_sample(sample) -> LossSample:
    return sample if isinstance(sample, LossSample) else LossSample(sample)


def _check_alpha(alpha: float):
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")


def _tail_takes(sample: LossSample, alpha: float):
    """Descending order and the probability mass each atom contributes to the worst ``1 - alpha``."""
    order = np.argsort(-sample.values, kind="stable")
    w = sample.weights[order]
    before = np.concatenate(([0.0], np.cumsum(w)[:-1]))
    take = np.clip((1.0 - alpha) - before, 0.0, w)
    return order, take


def cvar_sorted(sample, alpha: float) -> float:
    """Mean of the worst ``1 - alpha`` probability mass, splitting the boundary atom."""
    sample = _as_sample(sample)
    _check_alpha(alpha)
    if len(sample) == 0:
        raise ValueError("CVaR of an empty sample is undefined")
    order, take = _tail_takes(sample, alpha)
    return float(take @ sample.values[order] / take.sum())


def cvar_uniform(values: Sequence[float], alpha: float) -> float:
    """``cvar_sorted`` for equally weighted losses, touching only the top tail."""
    _check_alpha(alpha)
    n = len(values)
    if n == 0:
        raise ValueError("CVaR of an empty sample is undefined")
    tail = (1.0 - alpha) * n  # tail mass counted in atoms
    k = min(n, math.ceil(tail - 1e-12))
    top = heapq.nlargest(k, values)
    full = min(k, math.floor(tail + 1e-12))
    total = math.fsum(top[:full])
    if full < k:
        total += (tail - full) * top[full]
    return total / tail


def cvar_contributions(sample, alpha: float) -> np.ndarray:
    """Per-atom share of ``cvar_sorted``; the entries sum to the CVaR."""
    sample = _as_sample(sample)
    _check_alpha(alpha)
    if len(sample) == 0:
        raise ValueError("CVaR of an empty sample is undefined")
    order, take = _tail_takes(sample, alpha)
    out = np.zeros(len(sample))
    out[order] = take * sample.values[order] / take.sum()
    return out


def cvar_dual(sample, alpha: float) -> Tuple[float, float]:
    """Minimize ``t + E[(L - t)+] / (1 - alpha)`` exactly over the sample atoms.

    The objective is convex and piecewise linear with kinks at the atoms, so
    one of them is a minimizer. Returns ``(t_star, value)`` with the lowest
    minimizing atom.
    """
    sample = _as_sample(sample)
    _check_alpha(alpha)
    if len(sample) == 0:
        raise ValueError("CVaR of an empty sample is undefined")
    t, inverse = np.unique(sample.values, return_inverse=True)
    w = np.bincount(inverse, weights=sample.weights, minlength=len(t))
    # strict upper tails: mass and first moment above each atom
    mass_above = np.concatenate((np.cumsum(w[::-1])[::-1][1:], [0.0]))
    moment_above = np.concatenate((np.cumsum((w * t)[::-1])[::-1][1:], [0.0]))
    objective = t + (moment_above - t * mass_above) / (1.0 - alpha)
    best = objective.min()
    scale = max(1.0, abs(best))
    k = int(np.flatnonzero(objective <= best + 1e-12 * scale)[0])
    return float(t[k]), float(objective[k])


def cost_curve(scored: Sequence[Tuple[float, Label]], costs: CostParameters,
               thresholds: Sequence[float]) -> CostCurve:
    """Two-action sweep: ACCEPT iff ``p < threshold``, otherwise REJECT.

    ``expected_loss`` is the mean realized loss per attempt, so it weights the
    error rates by class prevalence.
    """
    taus = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(taus) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    if np.any((taus < 0) | (taus > 1)):
        raise ValueError("thresholds must lie in [0, 1]")
    p = np.array([s[0] for s in scored], dtype=float)
    impostor = np.array([Label.parse(s[1]) is Label.IMPOSTOR for s in scored], dtype=bool)
    n = len(p)
    n_imp = int(impostor.sum())
    n_legit = n - n_imp
    points = []
    for tau in taus:
        accepted = p < tau
        fa = int(np.sum(accepted & impostor))
        fr = int(np.sum(~accepted & ~impostor))
        rates = Rates(
            far=fa / n_imp if n_imp else 0.0,
            frr=fr / n_legit if n_legit else 0.0,
            chr=0.0,
            n_impostor=n_imp,
            n_legit=n_legit,
            n_total=n,
        )
        loss = (costs.c_fa * fa + costs.c_fr * fr) / n if n else 0.0
        points.append(CostCurvePoint(float(tau), float(loss), rates))
    return CostCurve(tuple(points))


@dataclass(frozen=True)
class ChallengeSweepPoint:
    c_ch: float
    expected_loss: float
    rates: Rates


def challenge_sweep(scored: Sequence[Tuple[float, Label]], costs: CostParameters, rho: float,
                    c_ch_values: Sequence[float]) -> Tuple[ChallengeSweepPoint, ...]:
    """Three-action Bayes policy on calibrated scores, swept over the challenge friction.

    Challenge outcomes are taken in expectation: a challenged attempt costs
    ``c_ch`` plus ``(1 - rho)`` times the error it would otherwise have made.
    """
    out = []
    for c_ch in c_ch_values:
        pairs = []
        total = 0.0
        for p, label in scored:
            label = Label.parse(label)
            p_clamped = min(max(p, 1e-9), 1 - 1e-9)
            action = bayes_action(action_risks(p_clamped, rho, c_ch, costs))
            impostor = label is Label.IMPOSTOR
            if action is Action.ACCEPT:
                total += costs.c_fa if impostor else 0.0
            elif action is Action.REJECT:
                total += 0.0 if impostor else costs.c_fr
            else:
                total += c_ch + (1 - rho) * (costs.c_fa if impostor else costs.c_fr)
            pairs.append((action, label))
        n = len(pairs)
        out.append(ChallengeSweepPoint(float(c_ch), total / n if n else 0.0, empirical_rates(pairs)))
    return tuple(out)
