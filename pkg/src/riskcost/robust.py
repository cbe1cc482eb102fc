"""Worst-case expected loss over total-variation and chi-square balls around a discrete sample."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .domain import ConfigError
from .riskmetrics import LossSample, _as_sample


class AmbiguityKind(str, enum.Enum):
    TOTAL_VARIATION = "tv"
    CHI_SQUARE = "chi2"


@dataclass(frozen=True)
class AmbiguitySpec:
    kind: AmbiguityKind
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "kind", AmbiguityKind(self.kind))
        if not math.isfinite(self.radius) or self.radius < 0:
            raise ConfigError("ambiguity radius must be finite and >= 0", field="delta")
        if self.kind is AmbiguityKind.TOTAL_VARIATION and self.radius > 1:
            raise ConfigError("total-variation radius must be <= 1", field="delta")


def _atoms(sample: LossSample) -> Tuple[np.ndarray, np.ndarray]:
    """Merge equal loss values; returns ascending atoms and their masses."""
    if len(sample) == 0:
        raise ValueError("worst-case mean of an empty sample is undefined")
    values, inverse = np.unique(sample.values, return_inverse=True)
    mass = np.bincount(inverse, weights=sample.weights, minlength=len(values))
    keep = mass > 0
    return values[keep], mass[keep]


def worst_case_weights_tv(sample, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Atoms and the adversarial reweighting within total-variation distance ``delta``."""
    sample = _as_sample(sample)
    if not (0.0 <= delta <= 1.0):
        raise ValueError("total-variation radius must lie in [0, 1]")
    values, mass = _atoms(sample)
    q = mass.copy()
    budget = min(delta, float(mass[:-1].sum()))
    moved = 0.0
    for i in range(len(q) - 1):
        if moved >= budget:
            break
        take = min(q[i], budget - moved)
        q[i] -= take
        moved += take
    q[-1] += moved
    return values, q


def worst_case_mean_tv(sample, delta: float) -> float:
    sample = _as_sample(sample)
    values, q = worst_case_weights_tv(sample, delta)
    if delta == 0:
        return sample.mean()
    return float(values @ q)


def worst_case_weights_chi2(sample, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Maximizer of ``E_Q[L]`` subject to ``sum (q - p)^2 / p <= delta``.

    The optimal ``q`` keeps a top set ``A`` of the largest losses and is affine
    in the loss on it. For each candidate top set the multiplier has a closed
    form; the first set (largest first) whose weights and complementary
    conditions are consistent is the solution. With the full set this reduces
    to ``mean + sqrt(delta * var)``.
    """
    sample = _as_sample(sample)
    if not math.isfinite(delta) or delta < 0:
        raise ValueError("chi-square radius must be finite and >= 0")
    values, mass = _atoms(sample)
    if delta == 0 or len(values) == 1:
        return values, mass.copy()
    n = len(values)
    # the maximizer is invariant to positive affine maps of the losses; work on [0, 1] to avoid underflow
    z = (values - values[0]) / (values[-1] - values[0])
    for start in range(n):
        lv, lm = z[start:], mass[start:]
        pa = float(lm.sum())
        # mass moved off the clipped atoms already costs (1 - pa) / pa of divergence;
        # summing the dropped mass directly keeps it exactly 0 for the full set
        dropped = float(mass[:start].sum())
        slack = delta - dropped / pa
        if slack < 0:
            continue
        if start == n - 1:
            q = np.zeros(n)
            q[-1] = 1.0
            return values, q
        m_a = float(lm @ lv / pa)
        var_a = float(lm @ (lv - m_a) ** 2 / pa)
        if var_a <= 0:
            continue
        s = math.sqrt(slack / (pa * var_a))
        ratio = 1.0 / pa + s * (lv - m_a)
        if ratio.min() < -1e-12:
            # adversary would push the smallest kept atom negative; shrink the set
            continue
        if start > 0 and 1.0 / pa + s * (z[start - 1] - m_a) > 1e-12:
            # the largest dropped atom would want positive mass
            continue
        q = np.zeros(n)
        q[start:] = lm * np.maximum(ratio, 0.0)
        return values, q
    # every proper top set infeasible: saturate on the maximum atom
    q = np.zeros(n)
    q[-1] = 1.0
    return values, q


def worst_case_mean_chi2(sample, delta: float) -> float:
    sample = _as_sample(sample)
    values, q = worst_case_weights_chi2(sample, delta)
    if delta == 0:
        return sample.mean()
    return float(values @ q)


def chi2_divergence(q, p) -> float:
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    return float(np.sum((q - p) ** 2 / p))


def worst_case_mean(sample, spec: AmbiguitySpec) -> float:
    if spec.kind is AmbiguityKind.TOTAL_VARIATION:
        return worst_case_mean_tv(sample, spec.radius)
    return worst_case_mean_chi2(sample, spec.radius)


def dro_policy_value(per_event_losses, spec: AmbiguitySpec, lam: float = 0.0,
                     leakage: float = 0.0) -> float:
    """Inner supremum of the robust objective for a fixed policy, plus priced leakage."""
    return worst_case_mean(per_event_losses, spec) + lam * leakage
