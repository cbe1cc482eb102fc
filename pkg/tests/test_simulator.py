import dataclasses

import numpy as np
import pytest

from riskcost.domain import Action, ConfigError, Label
from riskcost.simulator import (
    AdversaryConfig,
    AdversaryState,
    Drift,
    GaussianScore,
    Scenario,
    adversary_update,
    fingerprint,
    generate_event,
    initial_adversary,
    run_replication,
    run_simulation,
)


def test_scenario_invariants(small_scenario):
    with pytest.raises(ConfigError) as err:
        dataclasses.replace(small_scenario, impostor_prior=1.5)
    assert err.value.field == "impostor_prior"
    with pytest.raises(ConfigError):
        GaussianScore(0.0, 0.0)
    with pytest.raises(ConfigError):
        dataclasses.replace(small_scenario, bucket_weights={"a": -1.0})


def test_generate_event_class_frequencies():
    sc = Scenario(0.3, GaussianScore(-1, 1), GaussianScore(1, 1), horizon=20000)
    rng = np.random.default_rng(0)
    events = [generate_event(sc, t, None, rng) for t in range(20000)]
    frac = np.mean([e.truth is Label.IMPOSTOR for e in events])
    assert abs(frac - 0.3) < 0.015
    legit = [e.raw_score for e in events if e.truth is Label.LEGITIMATE]
    assert abs(np.mean(legit) + 1) < 0.05


def test_drift_moves_legit_mean():
    sc = Scenario(0.0, GaussianScore(0, 0.01), GaussianScore(5, 1), drift=Drift(rate=0.01, start_step=100),
                  horizon=1000)
    rng = np.random.default_rng(0)
    assert abs(generate_event(sc, 50, None, rng).raw_score) < 0.1
    assert abs(generate_event(sc, 600, None, rng).raw_score - 5.0) < 0.1


def test_generate_event_past_horizon():
    sc = Scenario(0.5, GaussianScore(0, 1), GaussianScore(1, 1), horizon=10)
    with pytest.raises(ValueError):
        generate_event(sc, 10, None, np.random.default_rng(0))


def test_adversary_moves_toward_accepted_mean():
    cfg = AdversaryConfig(probe_step_size=0.5, probe_batch=2)
    st = AdversaryState(probe_mean=1.0)
    st = adversary_update(st, cfg, (0.8, Action.ACCEPT), -1.0)
    assert st.probe_mean == 1.0
    st = adversary_update(st, cfg, (2.0, Action.REJECT), -1.0)
    # accepted mean is 0.8, step capped at the gap 0.2
    assert st.probe_mean == pytest.approx(0.8)
    assert st.batch_rates == (0.5,)


def test_adversary_steps_toward_legit_when_blocked():
    cfg = AdversaryConfig(probe_step_size=0.25, probe_batch=1)
    st = adversary_update(AdversaryState(1.0), cfg, (1.0, Action.REJECT), -1.0)
    assert st.probe_mean == 0.75


def test_replication_is_deterministic(small_scenario, small_config):
    a = run_replication(small_scenario, small_config, 0)
    b = run_replication(small_scenario, small_config, 0)
    assert [r[1].action for r in a.rows] == [r[1].action for r in b.rows]
    assert a.summary == b.summary
    c = run_replication(small_scenario, small_config, 1)
    assert a.summary != c.summary


def test_workers_do_not_change_results(small_scenario, small_config):
    serial = run_simulation(small_scenario, small_config, workers=1)
    parallel = run_simulation(small_scenario, small_config, workers=2)
    assert [t.summary for t in serial] == [t.summary for t in parallel]


def test_trace_bookkeeping(small_scenario, small_config):
    tr = run_replication(small_scenario, small_config, 0)
    assert len(tr) == small_scenario.horizon
    eps = tr.epsilon_path()
    assert eps == sorted(eps)
    assert eps[-1] == pytest.approx(tr.summary.epsilon_final)
    assert tr.summary.total_loss == pytest.approx(sum(r.realized_loss for r in tr.records))
    challenged = {e.event_id for e, d, _ in tr.rows if d.action is Action.CHALLENGE}
    assert {k for k, v in tr.challenge_outcomes.items() if v is not None} == challenged


def test_feedback_lag_keeps_cap(small_scenario, small_config):
    cfg = dataclasses.replace(small_config, feedback_lag=25, epsilon_max=10.0)
    tr = run_replication(small_scenario, cfg, 0)
    assert max(tr.epsilon_path()) <= 10.0


def test_fingerprint_tracks_config(small_scenario, small_config):
    assert fingerprint(small_scenario, small_config) == fingerprint(small_scenario, small_config)
    other = dataclasses.replace(small_config, beta=0.2)
    assert fingerprint(small_scenario, small_config) != fingerprint(small_scenario, other)


def test_single_class_calibration_sample_rejected(small_config):
    sc = Scenario(0.0, GaussianScore(-1, 1), GaussianScore(1, 1), horizon=10)
    with pytest.raises(ConfigError):
        run_replication(sc, small_config, 0)


def test_initial_adversary_starts_at_impostor_mean(small_scenario):
    assert initial_adversary(small_scenario).probe_mean == 1.0
    assert initial_adversary(dataclasses.replace(small_scenario, adversary=None)) is None
