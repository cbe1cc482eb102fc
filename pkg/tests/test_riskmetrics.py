import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cvar_grid_dual
from riskcost.decision import accept_threshold
from riskcost.domain import Action, CostParameters, Label
from riskcost.riskmetrics import (
    LossSample,
    Rates,
    challenge_sweep,
    cost_curve,
    cvar_contributions,
    cvar_dual,
    cvar_sorted,
    cvar_uniform,
    empirical_rates,
    risk_functional,
)

A, C, R = Action.ACCEPT, Action.CHALLENGE, Action.REJECT
I, L = Label.IMPOSTOR, Label.LEGITIMATE

values_st = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40)
alpha_st = st.floats(0, 0.999)


def test_empirical_rates_example():
    r = empirical_rates([(A, I), (R, L), (C, L), (A, L)])
    assert (r.far, r.frr, r.chr) == (1.0, pytest.approx(1 / 3), 0.25)
    assert (r.n_impostor, r.n_legit, r.n_total) == (1, 3, 4)


def test_empirical_rates_empty():
    r = empirical_rates([])
    assert (r.far, r.frr, r.chr, r.n_total) == (0.0, 0.0, 0.0, 0)


def test_risk_functional_example():
    r = Rates(far=0.01, frr=0.05, chr=0.2)
    assert risk_functional(r, CostParameters(1000, 20, 2, 0.5), leakage=3) == pytest.approx(12.9)
    assert risk_functional(Rates(0, 0, 0), CostParameters(1000, 20, 2, 0.5)) == 0


@pytest.mark.parametrize("alpha,expected", [(0.5, 3.5), (0.0, 2.5), (0.6, 3.625), (0.9, 4.0)])
def test_cvar_sorted_examples(alpha, expected):
    assert cvar_sorted(LossSample([1, 2, 3, 4]), alpha) == pytest.approx(expected, abs=1e-12)


def test_cvar_dual_examples():
    t, v = cvar_dual(LossSample([1, 2, 3, 4]), 0.5)
    assert v == pytest.approx(3.5, abs=1e-12)
    # t=2 and t=3 both minimize; the lowest is reported
    assert t == 2.0
    assert cvar_dual(LossSample([7.0]), 0.95) == (7.0, 7.0)


def test_cvar_dual_matches_dense_grid():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(1, 30))
        v = rng.normal(0, 10, n)
        w = rng.dirichlet(np.ones(n))
        alpha = float(rng.uniform(0, 0.99))
        _, value = cvar_dual(LossSample(v, w), alpha)
        grid = cvar_grid_dual(v, w, alpha)
        # the grid can only overshoot the true infimum
        assert value <= grid + 1e-9
        assert grid - value < 1e-2 * (1 + abs(value))


def test_cvar_empty_sample_rejected():
    with pytest.raises(ValueError):
        cvar_sorted(LossSample([]), 0.5)
    with pytest.raises(ValueError):
        cvar_dual(LossSample([]), 0.5)


def test_alpha_one_rejected():
    with pytest.raises(ValueError):
        cvar_sorted(LossSample([1.0]), 1.0)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        LossSample([1.0, 2.0], [0.5, 0.6])


@settings(max_examples=200)
@given(values_st, alpha_st)
def test_uniform_fast_path_agrees(values, alpha):
    assert cvar_uniform(values, alpha) == pytest.approx(cvar_sorted(LossSample(values), alpha),
                                                         rel=1e-9, abs=1e-9)


@given(values_st, alpha_st)
def test_dual_equals_sorted(values, alpha):
    s = LossSample(values)
    assert cvar_dual(s, alpha)[1] == pytest.approx(cvar_sorted(s, alpha), rel=1e-9, abs=1e-9)


@given(values_st, alpha_st, alpha_st)
def test_cvar_monotone_in_alpha_and_bounded(values, a1, a2):
    s = LossSample(values)
    lo, hi = sorted([a1, a2])
    tol = 1e-9 * (1 + max(abs(v) for v in values))
    assert cvar_sorted(s, lo) <= cvar_sorted(s, hi) + tol
    assert s.mean() - tol <= cvar_sorted(s, lo) <= max(values) + tol


@given(values_st, alpha_st, st.floats(0, 100), st.floats(-100, 100))
def test_cvar_homogeneous_and_translation_equivariant(values, alpha, c, m):
    s = LossSample(values)
    base = cvar_sorted(s, alpha)
    tol = 1e-7 * (1 + abs(c)) * (1 + max(abs(v) for v in values) + abs(m))
    assert cvar_sorted(LossSample(np.asarray(values) * c), alpha) == pytest.approx(c * base, abs=tol)
    assert cvar_sorted(LossSample(np.asarray(values) + m), alpha) == pytest.approx(base + m, abs=tol)


@given(values_st, alpha_st)
def test_contributions_sum_to_cvar(values, alpha):
    s = LossSample(values)
    assert cvar_contributions(s, alpha).sum() == pytest.approx(cvar_sorted(s, alpha), rel=1e-9, abs=1e-9)


def test_cvar_near_one_is_max():
    assert cvar_sorted(LossSample([1.0, 5.0, 3.0]), 0.999) == pytest.approx(5.0)


def _scored(n=4000, seed=0, prior=0.5):
    rng = np.random.default_rng(seed)
    p = rng.random(n)
    # labels drawn from p itself: perfectly calibrated
    y = rng.random(n) < p
    return [(float(pi), I if yi else L) for pi, yi in zip(p, y)], prior


def test_cost_curve_boundaries():
    scored = [(0.2, L), (0.3, L), (0.7, I), (0.9, L)]
    costs = CostParameters(c_fa=10, c_fr=4)
    curve = cost_curve(scored, costs, [0.0, 1.0])
    # tau=0 rejects everyone, tau=1 accepts all attempts with p < 1
    assert curve.points[0].expected_loss == pytest.approx(4 * 3 / 4)
    assert curve.points[1].expected_loss == pytest.approx(10 * 1 / 4)


def test_cost_curve_argmin_matches_exhaustive():
    scored, _ = _scored(500, seed=2)
    costs = CostParameters(c_fa=3, c_fr=1)
    taus = np.linspace(0.01, 0.99, 99)
    curve = cost_curve(scored, costs, taus)
    losses = []
    for t in taus:
        losses.append(sum(costs.c_fa if (p < t and y is I) else costs.c_fr if (p >= t and y is L) else 0
                          for p, y in scored) / len(scored))
    np.testing.assert_allclose([pt.expected_loss for pt in curve.points], losses)
    assert curve.argmin.threshold == taus[int(np.argmin(losses))]


def test_cost_curve_argmin_near_bayes_threshold_when_calibrated():
    scored, _ = _scored(40000, seed=4)
    for c_fa, c_fr in [(1, 1), (4, 1), (1, 3)]:
        costs = CostParameters(c_fa=c_fa, c_fr=c_fr)
        curve = cost_curve(scored, costs, np.linspace(0.02, 0.98, 49))
        assert abs(curve.argmin.threshold - accept_threshold(costs)) <= 0.06


def test_cost_curve_rejects_unsorted_thresholds():
    with pytest.raises(ValueError):
        cost_curve([(0.5, L)], CostParameters(1, 1), [0.5, 0.4])


def test_challenge_sweep_high_friction_never_challenges():
    scored, _ = _scored(300, seed=1)
    pts = challenge_sweep(scored, CostParameters(10, 10), 0.9, [0.0, 1e6])
    assert pts[0].rates.chr > 0
    assert pts[1].rates.chr == 0
