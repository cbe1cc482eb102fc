"""Score calibration (Platt, isotonic), reliability diagnostics and drift index."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .domain import Label

P_MIN = 1e-9
P_MAX = 1.0 - 1e-9
PSI_FLOOR = 1e-6


@dataclass(frozen=True)
class PlattParams:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("Platt parameters must be finite")


@dataclass(frozen=True)
class IsotonicMap:
    """Right-continuous step function given by ``(score, probability)`` breakpoints."""

    scores: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        if len(self.scores) != len(self.probs) or not self.scores:
            raise ValueError("isotonic map needs matching, non-empty breakpoints")
        s = np.asarray(self.scores, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if np.any(np.diff(s) <= 0):
            raise ValueError("isotonic breakpoints must be strictly increasing in score")
        if np.any(np.diff(p) < 0) or p.min() < 0 or p.max() > 1:
            raise ValueError("isotonic probabilities must be non-decreasing in [0, 1]")

    @property
    def breakpoints(self):
        return list(zip(self.scores, self.probs))

    def value_at(self, score: float) -> float:
        """Unclamped step lookup, flat beyond the outermost breakpoints."""
        idx = bisect.bisect_right(self.scores, score) - 1
        return self.probs[max(idx, 0)]


CalibrationMap = Union[PlattParams, IsotonicMap]


@dataclass(frozen=True)
class ReliabilityBin:
    lower: float
    upper: float
    mean_predicted: float
    empirical_rate: float
    count: int


@dataclass(frozen=True)
class ReliabilityDiagram:
    bins: Tuple[ReliabilityBin, ...]
    ece: float

    @property
    def n(self) -> int:
        return sum(b.count for b in self.bins)


@dataclass(frozen=True)
class Histogram:
    edges: Tuple[float, ...]
    counts: Tuple[float, ...]

    @property
    def masses(self) -> np.ndarray:
        c = np.asarray(self.counts, dtype=float)
        return c / c.sum()


def _labels_to_indicator(labels) -> np.ndarray:
    return np.array([Label.parse(l) is Label.IMPOSTOR for l in labels], dtype=float)


def _check_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1:
        raise ValueError("scores must be one-dimensional")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return s


def _platt_objective(a, b, s, y, ridge):
    z = a * s + b
    # log(1 + e^z) - y z, computed stably
    nll = np.logaddexp(0.0, z) - y * z
    return nll.mean() + 0.5 * ridge * (a * a + b * b)


def fit_platt(scores: Sequence[float], labels: Sequence, ridge: float = 1e-3,
              tol: float = 1e-8, max_iter: int = 100) -> PlattParams:
    """Fit ``P(impostor | s) = sigmoid(a s + b)`` by damped Newton.

    Minimizes the mean logistic negative log-likelihood plus
    ``ridge / 2 * (a^2 + b^2)``. The ridge term keeps separable data finite.
    """
    s = _check_scores(scores)
    y = _labels_to_indicator(labels)
    if len(s) != len(y):
        raise ValueError("scores and labels differ in length")
    if len(s) < 2:
        raise ValueError("need at least two samples")
    if y.min() == y.max():
        raise ValueError("both classes must be present to fit Platt scaling")
    if ridge < 0 or not math.isfinite(ridge):
        raise ValueError("ridge must be finite and >= 0")

    theta = np.array([0.0, math.log(y.mean() / (1 - y.mean()))])
    X = np.column_stack([s, np.ones_like(s)])
    n = len(s)
    f = _platt_objective(theta[0], theta[1], s, y, ridge)
    for _ in range(max_iter):
        q = 1.0 / (1.0 + np.exp(-(X @ theta)))
        grad = X.T @ (q - y) / n + ridge * theta
        if np.linalg.norm(grad) <= tol:
            break
        w = q * (1 - q)
        hess = (X.T * w) @ X / n + ridge * np.eye(2)
        try:
            direction = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            direction = grad
        step = 1.0
        while step > 1e-12:
            cand = theta - step * direction
            f_cand = _platt_objective(cand[0], cand[1], s, y, ridge)
            if f_cand <= f:
                break
            step *= 0.5
        else:
            break
        theta, f = cand, f_cand
    return PlattParams(float(theta[0]), float(theta[1]))


def pava(values: Sequence[float], weights: Sequence[float] = None) -> np.ndarray:
    """Weighted pool-adjacent-violators: non-decreasing least-squares fit.

    >>> pava([0, 1, 0, 1]).tolist()
    [0.0, 0.5, 0.5, 1.0]
    """
    y = np.asarray(values, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if len(y) != len(w):
        raise ValueError("values and weights differ in length")
    # blocks as parallel stacks: weighted mean, total weight, length
    means, totals, sizes = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        totals.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, n2 = means.pop(), totals.pop(), sizes.pop()
            m1, w1, n1 = means.pop(), totals.pop(), sizes.pop()
            wt = w1 + w2
            means.append((m1 * w1 + m2 * w2) / wt)
            totals.append(wt)
            sizes.append(n1 + n2)
    return np.repeat(np.array(means, dtype=float), sizes)


def fit_isotonic(scores: Sequence[float], labels: Sequence) -> IsotonicMap:
    s = _check_scores(scores)
    y = _labels_to_indicator(labels)
    if len(s) != len(y):
        raise ValueError("scores and labels differ in length")
    if len(s) < 1:
        raise ValueError("need at least one sample")
    uniq, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    tie_means = np.bincount(inverse, weights=y) / counts
    fitted = pava(tie_means, counts)
    # only block starts matter for a right-continuous step lookup
    keep = np.ones(len(uniq), dtype=bool)
    keep[1:] = fitted[1:] != fitted[:-1]
    return IsotonicMap(tuple(uniq[keep].tolist()), tuple(fitted[keep].tolist()))


def apply_calibration(cal_map: CalibrationMap, score: float) -> float:
    if not math.isfinite(score):
        raise ValueError("score must be finite")
    if isinstance(cal_map, PlattParams):
        z = cal_map.a * score + cal_map.b
        if z >= 0:
            p = 1.0 / (1.0 + math.exp(-z))
        else:
            ez = math.exp(z)
            p = ez / (1.0 + ez)
    else:
        p = cal_map.value_at(score)
    return min(max(p, P_MIN), P_MAX)


def apply_calibration_many(cal_map: CalibrationMap, scores) -> np.ndarray:
    s = _check_scores(scores)
    if isinstance(cal_map, PlattParams):
        p = 0.5 * (1.0 + np.tanh(0.5 * (cal_map.a * s + cal_map.b)))
    else:
        idx = np.searchsorted(cal_map.scores, s, side="right") - 1
        p = np.asarray(cal_map.probs)[np.maximum(idx, 0)]
    return np.clip(p, P_MIN, P_MAX)


def reliability_bins(probs: Sequence[float], labels: Sequence, n_bins: int = 10) -> ReliabilityDiagram:
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    p = np.asarray(probs, dtype=float)
    y = _labels_to_indicator(labels)
    if len(p) != len(y) or len(p) == 0:
        raise ValueError("probs and labels must be equal-length and non-empty")
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    idx = np.minimum((p * n_bins).astype(int), n_bins - 1)
    n = len(p)
    bins = []
    ece = 0.0
    for k in range(n_bins):
        mask = idx == k
        count = int(mask.sum())
        if count == 0:
            continue
        mean_pred = float(p[mask].mean())
        rate = float(y[mask].mean())
        ece += count / n * abs(mean_pred - rate)
        bins.append(ReliabilityBin(k / n_bins, (k + 1) / n_bins, mean_pred, rate, count))
    return ReliabilityDiagram(tuple(bins), float(ece))


def histogram(values: Sequence[float], n_bins: int = 10, lo: float = 0.0, hi: float = 1.0) -> Histogram:
    """Equal-width histogram on ``[lo, hi]``; out-of-range values go to the edge bins."""
    v = np.clip(np.asarray(values, dtype=float), lo, hi)
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(v, bins=edges)
    return Histogram(tuple(edges.tolist()), tuple(counts.astype(float).tolist()))


def drift_index(window_a: Histogram, window_b: Histogram) -> float:
    """Population stability index between two histograms sharing bin edges."""
    if len(window_a.edges) != len(window_b.edges) or not np.allclose(window_a.edges, window_b.edges):
        raise ValueError("histograms have mismatched bin edges")
    if sum(window_a.counts) <= 0 or sum(window_b.counts) <= 0:
        raise ValueError("histograms must be non-empty")
    pa = np.maximum(window_a.masses, PSI_FLOOR)
    pb = np.maximum(window_b.masses, PSI_FLOOR)
    return float(np.sum((pa - pb) * np.log(pa / pb)))
