"""Tests for durable lab sessions: protocol parsing, stage-atomic result
submission, crash recovery and audit replay."""

import threading

import pytest

from poolscreen.core import InputError
from poolscreen.session import SessionStore, StageConflict, UnknownSession, parse_protocol


@pytest.fixture()
def store(tmp_path):
    return SessionStore(tmp_path)


def _submit_all(store, sid, outcomes):
    """Answer every pending test in order with the given outcomes."""
    view = store.get(sid).view()
    results = [
        {"test_id": t["test_id"], "outcome": o}
        for t, o in zip(view["pending"], outcomes)
    ]
    store.submit(sid, results)


class TestProtocolParsing:
    def test_identify_defaults(self):
        spec = parse_protocol({"type": "identify", "strategy": "soms4"})
        assert spec.raw["n"] == 4
        assert spec.raw["p"] == 0.0

    def test_classify_fills_threshold_and_priors(self):
        spec = parse_protocol({"type": "classify", "p0": 0.01, "p1": 0.05, "N": 64, "L": 4})
        assert spec.raw["V"] == 1
        assert spec.raw["pi0"] == 0.5
        assert spec.raw["tau"] == 0
        assert spec.raw["rho"] == 1.0

    def test_classify_honors_explicit_threshold(self):
        spec = parse_protocol(
            {"type": "classify", "p0": 0.01, "p1": 0.05, "N": 64, "L": 4, "V": 3, "tau": 1}
        )
        assert spec.raw["V"] == 3
        assert spec.raw["tau"] == 1

    def test_rejects_unknown_type(self):
        with pytest.raises(InputError):
            parse_protocol({"type": "screen"})

    def test_rejects_unknown_strategy(self):
        with pytest.raises(InputError):
            parse_protocol({"type": "identify", "strategy": "dorfman"})

    def test_rejects_inconsistent_rates(self):
        with pytest.raises(InputError):
            parse_protocol({"type": "classify", "p0": 0.05, "p1": 0.01, "N": 64, "L": 4})


class TestSessionLifecycle:
    def test_create_exposes_first_round(self, store):
        s = store.create({"type": "identify", "strategy": "soms4"})
        view = s.view()
        assert view["status"] == "awaiting_results"
        assert view["pending"][0]["members"] == [0, 1, 2, 3]
        assert view["pending"][0]["labels"] == ["1", "2", "3", "4"]
        assert view["history"] == []
        assert view["verdict"] is None

    def test_identify_flow_to_verdict(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        _submit_all(store, sid, ["positive"])
        pending = store.get(sid).view()["pending"]
        assert [t["members"] for t in pending] == [[0, 1], [2, 3], [0, 2]]
        _submit_all(store, sid, ["positive", "positive", "negative"])
        view = store.get(sid).view()
        assert view["status"] == "concluded"
        assert view["test_count"] == 4
        assert view["verdict"] == {"kind": "identified", "infected": [1, 3], "labels": ["2", "4"]}

    def test_classify_flow_to_verdict(self, store):
        sid = store.create(
            {"type": "classify", "p0": 0.01, "p1": 0.05, "N": 64, "L": 4}
        ).view()["id"]
        # walk the lone-positive-in-the-last-subpool path
        for outcomes in (["positive"], ["negative", "positive"], ["negative", "positive"]):
            _submit_all(store, sid, outcomes)
        view = store.get(sid).view()
        assert view["status"] == "concluded"
        assert view["test_count"] == 5
        verdict = view["verdict"]
        assert verdict["kind"] == "decision"
        assert verdict["decision"] == "H0"
        assert verdict["pf"] == pytest.approx(0.10762889880753441)
        assert verdict["pd"] == pytest.approx(0.7715420562961154)

    def test_classify_subpool_labels(self, store):
        view = store.create(
            {"type": "classify", "p0": 0.01, "p1": 0.05, "N": 64, "L": 4, "tau": 1}
        ).view()
        assert [t["labels"] for t in view["pending"]] == [["S1", "S2"], ["S3", "S4"]]

    def test_history_records_everything(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        _submit_all(store, sid, ["negative"])
        view = store.get(sid).view()
        assert view["history"] == [
            {"test_id": 1, "members": [0, 1, 2, 3], "labels": ["1", "2", "3", "4"], "outcome": "negative"}
        ]
        assert view["verdict"] == {"kind": "identified", "infected": [], "labels": []}

    def test_list_and_filter(self, store):
        done = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        open_ = store.create({"type": "identify", "strategy": "sofa", "n": 8, "p": 0.05}).view()["id"]
        _submit_all(store, done, ["negative"])
        assert set(store.list_ids()) == {done, open_}
        concluded = [s.view()["id"] for s in store.list_sessions(status="concluded")]
        awaiting = [s.view()["id"] for s in store.list_sessions(status="awaiting_results")]
        assert concluded == [done]
        assert awaiting == [open_]

    def test_delete(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        store.delete(sid)
        assert sid not in store.list_ids()
        with pytest.raises(UnknownSession):
            store.get(sid)

    def test_unknown_session(self, store):
        with pytest.raises(UnknownSession):
            store.get("no-such-session")
        with pytest.raises(UnknownSession):
            store.submit("no-such-session", [{"test_id": 1, "outcome": "negative"}])


class TestStageAtomicity:
    def test_partial_stage_rejected(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        _submit_all(store, sid, ["positive"])
        # only two of the three pending tests answered
        with pytest.raises(StageConflict):
            store.submit(sid, [
                {"test_id": 2, "outcome": "positive"},
                {"test_id": 3, "outcome": "negative"},
            ])
        assert store.get(sid).view()["test_count"] == 1

    def test_duplicate_test_id_rejected(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        with pytest.raises(StageConflict):
            store.submit(sid, [
                {"test_id": 1, "outcome": "positive"},
                {"test_id": 1, "outcome": "negative"},
            ])

    def test_stale_test_ids_rejected(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        _submit_all(store, sid, ["positive"])
        # resubmitting the already-answered first round
        with pytest.raises(StageConflict):
            store.submit(sid, [{"test_id": 1, "outcome": "positive"}])

    def test_submission_after_verdict_rejected(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        _submit_all(store, sid, ["negative"])
        with pytest.raises(StageConflict):
            store.submit(sid, [{"test_id": 2, "outcome": "negative"}])

    def test_malformed_results_rejected(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        with pytest.raises(InputError):
            store.submit(sid, [{"test_id": 1, "outcome": "sort of"}])
        with pytest.raises(InputError):
            store.submit(sid, [{"outcome": "negative"}])

    def test_concurrent_submissions_one_winner(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        barrier = threading.Barrier(2)
        failures = []

        def race(outcome):
            barrier.wait()
            try:
                store.submit(sid, [{"test_id": 1, "outcome": outcome}])
            except StageConflict as e:
                failures.append(e)

        threads = [threading.Thread(target=race, args=(o,)) for o in ("negative", "negative")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(failures) == 1
        assert store.get(sid).view()["test_count"] == 1


class TestDurability:
    def test_restart_restores_state_mid_session(self, store, tmp_path):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        _submit_all(store, sid, ["positive"])
        before = store.get(sid).view()

        reopened = SessionStore(tmp_path)
        after = reopened.get(sid).view()
        assert after == before
        # and the reopened store keeps working
        _submit_all(reopened, sid, ["positive", "positive", "negative"])
        assert reopened.get(sid).view()["verdict"]["labels"] == ["2", "4"]

    def test_restart_restores_concluded_sessions(self, store, tmp_path):
        sid = store.create(
            {"type": "classify", "p0": 0.01, "p1": 0.05, "N": 64, "L": 4}
        ).view()["id"]
        _submit_all(store, sid, ["negative"])
        before = store.get(sid).view()
        after = SessionStore(tmp_path).get(sid).view()
        assert after == before

    def test_replay_verdict_recomputes_from_disk(self, store):
        sid = store.create({"type": "identify", "strategy": "soms4"}).view()["id"]
        _submit_all(store, sid, ["positive"])
        _submit_all(store, sid, ["positive", "positive", "negative"])
        assert store.replay_verdict(sid) == store.get(sid).view()["verdict"]

    def test_replay_verdict_for_classify(self, store):
        sid = store.create(
            {"type": "classify", "p0": 0.01, "p1": 0.05, "N": 64, "L": 4}
        ).view()["id"]
        for outcomes in (["positive"], ["negative", "positive"], ["negative", "positive"]):
            _submit_all(store, sid, outcomes)
        replayed = store.replay_verdict(sid)
        assert replayed["decision"] == "H0"
        assert replayed == store.get(sid).view()["verdict"]
