"""HTTP surface tests: endpoint behavior, error envelopes, full flows."""

import pytest
from fastapi.testclient import TestClient

from poolscreen.service import create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path)
    with TestClient(app) as c:
        yield c


def _answer_pending(client, sid, outcomes):
    view = client.get(f"/sessions/{sid}").json()
    results = [
        {"test_id": t["test_id"], "outcome": o}
        for t, o in zip(view["pending"], outcomes)
    ]
    return client.post(f"/sessions/{sid}/results", json={"results": results})


class TestCreate:
    def test_created_with_first_round(self, client):
        r = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}})
        assert r.status_code == 201
        body = r.json()
        assert body["status"] == "awaiting_results"
        assert body["pending"][0]["members"] == [0, 1, 2, 3]

    def test_invalid_protocol_rejected(self, client):
        r = client.post("/sessions", json={"protocol": {"type": "classify", "p0": 0.05, "p1": 0.01, "N": 64, "L": 4}})
        assert r.status_code == 422
        err = r.json()["error"]
        assert err["code"] == "invalid_input"
        assert err["message"]

    def test_missing_protocol_rejected(self, client):
        assert client.post("/sessions", json={}).status_code == 422


class TestRead:
    def test_get_session(self, client):
        sid = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
        r = client.get(f"/sessions/{sid}")
        assert r.status_code == 200
        assert r.json()["id"] == sid

    def test_unknown_session_code(self, client):
        r = client.get("/sessions/deadbeef")
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "unknown_session"

    def test_list_sessions(self, client):
        a = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
        b = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
        _answer_pending(client, a, ["negative"])
        everything = client.get("/sessions").json()["sessions"]
        assert {v["id"] for v in everything} == {a, b}
        concluded = client.get("/sessions", params={"status": "concluded"}).json()["sessions"]
        assert [v["id"] for v in concluded] == [a]

    def test_list_rejects_unknown_filter(self, client):
        assert client.get("/sessions", params={"status": "done"}).status_code == 422


class TestSubmit:
    def test_full_identify_flow(self, client):
        sid = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
        r = _answer_pending(client, sid, ["positive"])
        assert r.status_code == 200
        assert [t["test_id"] for t in r.json()["pending"]] == [2, 3, 4]
        r = _answer_pending(client, sid, ["positive", "positive", "negative"])
        body = r.json()
        assert body["status"] == "concluded"
        assert body["test_count"] == 4
        assert body["verdict"] == {"kind": "identified", "infected": [1, 3], "labels": ["2", "4"]}

    def test_full_classify_flow(self, client):
        protocol = {"type": "classify", "p0": 0.01, "p1": 0.05, "N": 64, "L": 4}
        sid = client.post("/sessions", json={"protocol": protocol}).json()["id"]
        for outcomes in (["positive"], ["negative", "positive"], ["negative", "positive"]):
            r = _answer_pending(client, sid, outcomes)
            assert r.status_code == 200
        body = client.get(f"/sessions/{sid}").json()
        assert body["test_count"] == 5
        assert body["verdict"]["decision"] == "H0"

    def test_stale_submission_conflicts(self, client):
        sid = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
        _answer_pending(client, sid, ["positive"])
        r = client.post(f"/sessions/{sid}/results",
                        json={"results": [{"test_id": 1, "outcome": "positive"}]})
        assert r.status_code == 409
        assert r.json()["error"]["code"] == "stage_conflict"

    def test_partial_stage_conflicts(self, client):
        sid = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
        _answer_pending(client, sid, ["positive"])
        r = client.post(f"/sessions/{sid}/results",
                        json={"results": [{"test_id": 2, "outcome": "positive"}]})
        assert r.status_code == 409

    def test_bad_outcome_string(self, client):
        sid = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
        r = client.post(f"/sessions/{sid}/results",
                        json={"results": [{"test_id": 1, "outcome": "unclear"}]})
        assert r.status_code == 422
        assert r.json()["error"]["code"] == "invalid_input"

    def test_submit_to_unknown_session(self, client):
        r = client.post("/sessions/feedface/results",
                        json={"results": [{"test_id": 1, "outcome": "negative"}]})
        assert r.status_code == 404


class TestDelete:
    def test_delete_then_404(self, client):
        sid = client.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
        assert client.delete(f"/sessions/{sid}").status_code == 204
        assert client.get(f"/sessions/{sid}").status_code == 404

    def test_delete_unknown(self, client):
        assert client.delete("/sessions/deadbeef").status_code == 404


class TestPersistenceAcrossApps:
    def test_second_app_sees_first_apps_sessions(self, tmp_path):
        with TestClient(create_app(tmp_path)) as first:
            sid = first.post("/sessions", json={"protocol": {"type": "identify", "strategy": "soms4"}}).json()["id"]
            _answer_pending(first, sid, ["positive"])
            before = first.get(f"/sessions/{sid}").json()
        with TestClient(create_app(tmp_path)) as second:
            after = second.get(f"/sessions/{sid}").json()
            assert after == before
