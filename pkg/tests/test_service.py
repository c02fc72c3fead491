import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from utilicit.cluster import hac, label_database
from utilicit.service import create_app
from utilicit.tree import answer, build_tree
from utilicit.utility import UtilityDatabase, UtilityFunction


@pytest.fixture(scope="module")
def corpus_app(mini_model, clean_corpus):
    db, _ = clean_corpus
    return create_app(mini_model, db, k=4), mini_model, db


@pytest.fixture(scope="module")
def client(corpus_app):
    app, _, _ = corpus_app
    return TestClient(app)


def drive(client, history_id, oracle_values, model):
    """Answer a session truthfully for a known utility vector; returns final state."""
    r = client.post("/sessions", json={"history_id": str(history_id)})
    assert r.status_code == 201
    state = r.json()
    while state["status"] == "IN_PROGRESS":
        q = state["question"]
        if q["kind"] == "preference":
            reply = bool(oracle_values[int(q["outcome_i"]["id"])]
                         > oracle_values[int(q["outcome_j"]["id"])])
        else:
            reply = bool(oracle_values[int(q["outcome_i"]["id"])] > q["lottery"]["p_best"])
        r = client.post(f"/sessions/{state['session_id']}/answer", json={"answer": reply})
        assert r.status_code == 200
        state = r.json()
    return state


class TestModelEndpoint:
    def test_model_metadata(self, client, mini_model):
        doc = client.get("/model").json()
        assert len(doc["outcomes"]) == mini_model.num_outcomes
        assert len(doc["strategies"]) == mini_model.num_strategies
        assert [h["label"] for h in doc["histories"]] == ["TEEN", "25YO", "35YO", "45YO"]
        assert doc["best_anchor"] == "1"
        assert doc["worst_anchor"] == "21"
        assert all(isinstance(o["id"], str) for o in doc["outcomes"])


class TestTreesEndpoint:
    def test_exported_tree_matches_direct_build(self, client, corpus_app):
        _, model, db = corpus_app
        doc = client.get("/trees/2").json()
        direct = build_tree(db, hac(db, model, 2, 4), model).to_dict()
        assert doc == direct

    def test_unknown_history(self, client):
        r = client.get("/trees/99")
        assert r.status_code == 404
        assert r.json()["code"] == "unknown_history"


class TestSessionLifecycle:
    def test_create_exposes_first_question(self, client):
        state = client.post("/sessions", json={"history_id": "0"}).json()
        assert state["status"] == "IN_PROGRESS"
        assert state["questions_answered"] == 0
        assert state["question"] is not None
        assert state["result"] is None
        assert state["history_label"] == "TEEN"

    def test_unknown_history_rejected(self, client):
        r = client.post("/sessions", json={"history_id": "teen"})
        assert r.status_code == 404
        r = client.post("/sessions", json={"history_id": "44"})
        assert r.status_code == 404

    def test_missing_body_is_validation_error(self, client):
        r = client.post("/sessions", json={})
        assert r.status_code == 422
        assert r.json()["code"] == "validation_error"

    def test_question_endpoint_matches_inline_question(self, client):
        state = client.post("/sessions", json={"history_id": "1"}).json()
        q = client.get(f"/sessions/{state['session_id']}/question").json()
        assert q == state["question"]

    def test_feature_question_exposes_lottery(self, client):
        # history 0's root is a lottery question on the bundled corpus
        state = client.post("/sessions", json={"history_id": "0"}).json()
        q = state["question"]
        assert q["kind"] == "feature"
        lot = q["lottery"]
        assert lot["p_best"] + lot["p_worst"] == pytest.approx(1.0, abs=1e-12)
        assert lot["best_outcome"]["id"] == "1"
        assert lot["worst_outcome"]["id"] == "21"

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/missing").status_code == 404
        assert client.get("/sessions/missing/question").status_code == 404
        r = client.post("/sessions/missing/answer", json={"answer": True})
        assert r.status_code == 404

    def test_training_function_reaches_its_own_label(self, client, corpus_app):
        _, model, db = corpus_app
        h = 3
        clustering = hac(db, model, h, 4)
        labels = label_database(db, clustering)
        for idx in (0, 7, 19, 42):
            state = drive(client, h, db[idx].values, model)
            assert state["status"] == "COMPLETE"
            assert int(state["result"]["cluster_label"]) == labels[idx]

    def test_result_strategy_is_best_for_prototype(self, client, corpus_app):
        from utilicit.model import best_strategy

        _, model, db = corpus_app
        state = drive(client, 2, db[5].values, model)
        result = state["result"]
        proto = db[db.index_of(result["prototype_id"])]
        sid, eu = best_strategy(model, proto, 2)
        assert int(result["strategy"]["id"]) == sid
        assert result["expected_utility"] == pytest.approx(eu, abs=1e-12)
        assert result["prototype_values"] == proto.values.tolist()
        assert result["strategy"]["description"]

    def test_transcript_grows_and_is_bounded_by_depth(self, client):
        state = client.post("/sessions", json={"history_id": "0"}).json()
        depth = state["max_questions"]
        answers = 0
        while state["status"] == "IN_PROGRESS":
            state = client.post(f"/sessions/{state['session_id']}/answer",
                                json={"answer": True}).json()
            answers += 1
        assert answers <= depth
        assert len(state["transcript"]) == answers

    def test_answer_after_complete_conflicts(self, client):
        state = client.post("/sessions", json={"history_id": "0"}).json()
        sid = state["session_id"]
        while state["status"] == "IN_PROGRESS":
            state = client.post(f"/sessions/{sid}/answer", json={"answer": False}).json()
        r = client.post(f"/sessions/{sid}/answer", json={"answer": True})
        assert r.status_code == 409
        assert r.json()["code"] == "session_complete"
        # state unchanged
        again = client.get(f"/sessions/{sid}").json()
        assert again["transcript"] == state["transcript"]
        assert again["result"] == state["result"]

    def test_question_on_complete_session_conflicts(self, client):
        state = client.post("/sessions", json={"history_id": "0"}).json()
        sid = state["session_id"]
        while state["status"] == "IN_PROGRESS":
            state = client.post(f"/sessions/{sid}/answer", json={"answer": True}).json()
        r = client.get(f"/sessions/{sid}/question")
        assert r.status_code == 409

    def test_concurrent_answer_conflicts(self, corpus_app, client):
        app, _, _ = corpus_app
        state = client.post("/sessions", json={"history_id": "0"}).json()
        sid = state["session_id"]
        session = app.state.store.get(sid)
        assert session.lock.acquire(blocking=False)
        try:
            r = client.post(f"/sessions/{sid}/answer", json={"answer": True})
            assert r.status_code == 409
            assert r.json()["code"] == "conflict"
        finally:
            session.lock.release()
        r = client.post(f"/sessions/{sid}/answer", json={"answer": True})
        assert r.status_code == 200

    def test_replaying_a_transcript_reproduces_the_result(self, client):
        state = client.post("/sessions", json={"history_id": "3"}).json()
        sid = state["session_id"]
        rng = np.random.default_rng(60)
        while state["status"] == "IN_PROGRESS":
            state = client.post(f"/sessions/{sid}/answer",
                                json={"answer": bool(rng.integers(2))}).json()
        replay = client.post("/sessions", json={"history_id": "3"}).json()
        for entry in state["transcript"]:
            replay = client.post(f"/sessions/{replay['session_id']}/answer",
                                 json={"answer": entry["answer"]}).json()
        assert replay["status"] == "COMPLETE"
        assert replay["result"] == state["result"]


class TestSingleLeafTree:
    def test_session_completes_immediately(self, tri_model):
        db = UtilityDatabase([UtilityFunction("u0", [1.0, 0.9, 0.0]),
                              UtilityFunction("u1", [1.0, 0.8, 0.0])])
        app = create_app(tri_model, db, k=1)
        client = TestClient(app)
        state = client.post("/sessions", json={"history_id": "0"}).json()
        assert state["status"] == "COMPLETE"
        assert state["questions_answered"] == 0
        assert state["result"]["cluster_label"] == "0"


class TestSnapshots:
    def test_sessions_survive_restart(self, tri_model, tmp_path):
        db = UtilityDatabase([UtilityFunction("u0", [1.0, 0.9, 0.0]),
                              UtilityFunction("u1", [1.0, 0.2, 0.0])])
        snap = tmp_path / "sessions.json"
        app = create_app(tri_model, db, k=2, snapshot_path=snap)
        client = TestClient(app)
        state = client.post("/sessions", json={"history_id": "0"}).json()
        sid = state["session_id"]
        client.post(f"/sessions/{sid}/answer", json={"answer": True})

        reborn = create_app(tri_model, db, k=2, snapshot_path=snap)
        client2 = TestClient(reborn)
        state2 = client2.get(f"/sessions/{sid}").json()
        assert state2["questions_answered"] == 1
        assert state2["status"] == "COMPLETE"


class TestWarmAndStatic:
    def test_warm_prebuilds_every_history(self, mini_model, clean_corpus):
        db, _ = clean_corpus
        app = create_app(mini_model, db, k=4, warm=True)
        assert set(app.state.bank._built) == {0, 1, 2, 3}

    def test_static_dir_served(self, tri_model, tmp_path):
        db = UtilityDatabase([UtilityFunction("u0", [1.0, 0.9, 0.0]),
                              UtilityFunction("u1", [1.0, 0.2, 0.0])])
        static = tmp_path / "static"
        static.mkdir()
        (static / "index.html").write_text("<html><body>elicit</body></html>")
        app = create_app(tri_model, db, k=2, static_dir=static)
        client = TestClient(app)
        r = client.get("/")
        assert r.status_code == 200
        assert "elicit" in r.text
        # API routes still take precedence
        assert client.get("/model").status_code == 200


class TestSessionConsistencyAgainstLocalClassify:
    def test_service_agrees_with_library_classification(self, corpus_app, client):
        from utilicit.tree import classify

        _, model, db = corpus_app
        h = 1
        tree = build_tree(db, hac(db, model, h, 4), model)
        for idx in (3, 31, 58):
            u = db[idx]
            local = classify(tree, lambda q: answer(q, u))
            state = drive(client, h, u.values, model)
            assert state["result"]["prototype_id"] == local.prototype_id
            assert int(state["result"]["cluster_label"]) == local.label
            assert state["questions_answered"] == local.questions_asked
