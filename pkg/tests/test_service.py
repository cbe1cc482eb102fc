import threading

import pytest
from fastapi.testclient import TestClient

from riskcost.calibration import PlattParams
from riskcost.domain import Action, AuthEvent, ChallengeModel, CostParameters
from riskcost.policy import PolicyConfig, new_state, policy_step
from riskcost.service import DecisionService, create_app

COSTS = CostParameters(100, 10, 1, 0.0)
CAL = PlattParams(1.0, -2.0)
CH = ChallengeModel(0.9, 1.0, 1.0)


@pytest.fixture
def service():
    return DecisionService(PolicyConfig(costs=COSTS, beta=0.0, reoptimize_every=3), CH, CAL)


@pytest.fixture
def client(service):
    return TestClient(create_app(service))


def test_metrics_before_traffic(client):
    body = client.get("/metrics").json()
    assert body["rates"]["n_total"] == 0
    assert body["epsilon_spent"] == 0.0
    assert body["decisions"] == 0 and body["feedback"] == 0


def test_decide_matches_library(client):
    resp = client.post("/decide", json={"raw_score": -5.0, "session_id": "s1"})
    assert resp.status_code == 200
    body = resp.json()
    cfg = PolicyConfig(costs=COSTS, beta=0.0, reoptimize_every=3)
    d = policy_step(new_state(cfg, CAL), cfg, AuthEvent(0, 0, -5.0), CH)
    assert body["action"] == d.action.name == "ACCEPT"
    assert body["p"] == d.p
    assert body["risks"]["accept"] == d.risks.accept
    assert body["risks"]["challenge"] == d.risks.challenge
    assert len(body["policy_version"]) == 16


@pytest.mark.parametrize("payload", [{"session_id": "x"}, {"raw_score": "high", "session_id": "x"},
                                     {"raw_score": 1.0}])
def test_malformed_decide_is_400(client, payload):
    assert client.post("/decide", json=payload).status_code == 400


def test_non_finite_score_is_400(client):
    resp = client.post("/decide", content='{"raw_score": Infinity, "session_id": "x"}',
                       headers={"content-type": "application/json"})
    assert resp.status_code == 400


def test_feedback_unknown_id_is_409(client):
    assert client.post("/feedback", json={"event_id": 12345, "label": "legit"}).status_code == 409


def test_feedback_bad_label_is_400(client):
    eid = client.post("/decide", json={"raw_score": -5.0, "session_id": "s"}).json()["event_id"]
    assert client.post("/feedback", json={"event_id": eid, "label": "who"}).status_code == 400


def test_challenged_feedback_needs_outcome(client):
    body = client.post("/decide", json={"raw_score": 0.0, "session_id": "s"}).json()
    assert body["action"] == "CHALLENGE"
    assert client.post("/feedback", json={"event_id": body["event_id"], "label": "legit"}).status_code == 400
    ok = client.post("/feedback", json={"event_id": body["event_id"], "label": "legit", "challenge_passed": True})
    assert ok.status_code == 200
    assert ok.json()["epsilon_spent"] == 1.0


def test_feedback_flow_updates_metrics(client):
    ids = [client.post("/decide", json={"raw_score": s, "session_id": "s"}).json()["event_id"]
           for s in (-5.0, 6.0)]
    client.post("/feedback", json={"event_id": ids[0], "label": "impostor"})
    client.post("/feedback", json={"event_id": ids[1], "label": "legit"})
    m = client.get("/metrics").json()
    assert m["rates"]["far"] == 1.0 and m["rates"]["frr"] == 1.0
    assert m["objective"]["expected"] == 110.0
    # second feedback on the same id is unknown now
    assert client.post("/feedback", json={"event_id": ids[0], "label": "impostor"}).status_code == 409


def test_busy_during_reoptimize(service, client):
    service._reoptimizing.set()
    try:
        assert client.post("/decide", json={"raw_score": 0.0, "session_id": "s"}).status_code == 503
    finally:
        service._reoptimizing.clear()


def test_reoptimize_changes_version(service, client):
    v0 = service.policy_version
    for s, label in [(-3.0, "legit"), (3.0, "impostor"), (-2.0, "legit")]:
        body = client.post("/decide", json={"raw_score": s, "session_id": "s"}).json()
        payload = {"event_id": body["event_id"], "label": label}
        if body["action"] == "CHALLENGE":
            payload["challenge_passed"] = label == "legit"
        assert client.post("/feedback", json=payload).status_code == 200
    assert service.state.refits == 1
    assert service.policy_version != v0


def test_concurrent_decides_get_unique_ids(service):
    ids = []
    lock = threading.Lock()

    def worker():
        for _ in range(50):
            out = service.decide(0.5, "default", "s")
            with lock:
                ids.append(out["event_id"])

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(ids) == list(range(200))
    assert len(service.state.pending) == 200
