import math

import pytest

from riskcost.domain import Action, AuthEvent, ChallengeModel, ConfigError, CostParameters, Label


def test_costs_accept_valid_values():
    c = CostParameters(c_fa=100, c_fr=5, c_ch_base=1, lam=0.5)
    assert (c.c_fa, c.c_fr, c.c_ch_base, c.lam) == (100, 5, 1, 0.5)


@pytest.mark.parametrize("field", ["c_fa", "c_fr", "c_ch_base", "lam"])
def test_negative_cost_names_field(field):
    kwargs = dict(c_fa=1.0, c_fr=1.0, c_ch_base=0.0, lam=0.0)
    kwargs[field] = -1.0
    with pytest.raises(ConfigError) as err:
        CostParameters(**kwargs)
    assert err.value.field == field
    assert "negative" in str(err.value)


def test_nan_cost_rejected():
    with pytest.raises(ConfigError, match="not finite"):
        CostParameters(c_fa=math.nan, c_fr=1.0)


def test_both_error_costs_zero_is_degenerate():
    with pytest.raises(ConfigError, match="degenerate"):
        CostParameters(c_fa=0.0, c_fr=0.0)


def test_action_order_is_tie_break_order():
    assert sorted([Action.REJECT, Action.ACCEPT, Action.CHALLENGE]) == [
        Action.ACCEPT, Action.CHALLENGE, Action.REJECT]


@pytest.mark.parametrize("text,label", [("legit", Label.LEGITIMATE), ("Legitimate", Label.LEGITIMATE),
                                        ("0", Label.LEGITIMATE), ("impostor", Label.IMPOSTOR),
                                        ("1", Label.IMPOSTOR)])
def test_label_parse(text, label):
    assert Label.parse(text) is label


def test_label_parse_rejects_unknown():
    with pytest.raises(ValueError):
        Label.parse("fraudster")


def test_event_rejects_non_finite_score():
    with pytest.raises(ValueError):
        AuthEvent(event_id=1, step=0, raw_score=math.inf)


def test_challenge_model_bucket_lookup():
    m = ChallengeModel(default_rho=0.8, default_cost=2.0, leakage_increment=0.5,
                       rho_by_bucket={"mobile": 0.95}, cost_by_bucket={"mobile": 3.0})
    ev = AuthEvent(0, 0, 0.0, bucket="mobile")
    other = AuthEvent(1, 1, 0.0, bucket="web")
    assert m.rho(ev) == 0.95 and m.cost(ev) == 3.0
    assert m.rho(other) == 0.8 and m.cost(other) == 2.0
    assert m.leakage(ev) == 0.5


@pytest.mark.parametrize("kwargs", [dict(default_rho=1.2), dict(default_cost=-1.0),
                                    dict(leakage_increment=-0.1), dict(rho_by_bucket={"x": -0.1})])
def test_challenge_model_invariants(kwargs):
    with pytest.raises(ConfigError):
        ChallengeModel(**kwargs)
