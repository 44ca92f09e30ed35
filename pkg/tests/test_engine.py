from __future__ import annotations

import json

import pytest

from recollect.engine import LlmExhaustedError, UnknownSessionError
from recollect.graph import EdgeKind, NodeKind

from conftest import make_mock_engine


def critic_json(score: float) -> str:
    return json.dumps({"score": score, "missing": [] if score >= 0.8 else ["details"]})


def scripted_answer_run(critic_scores, queries=1):
    engine = make_mock_engine()
    backend = engine.scripted_backend
    for i, score in enumerate(critic_scores):
        backend.script("answerer", respond=f"draft {i}")
        backend.script("critic", respond=critic_json(score))
    sid = engine.create_session(created_at=1000)
    return engine, backend, sid


def test_critic_accepts_on_second_iteration():
    engine, _, sid = scripted_answer_run([0.5, 0.9])
    bundle = engine.answer(sid, "What did we plan?", 1000)
    assert bundle.iterations_used == 2
    assert bundle.final_score == 0.9
    assert bundle.answer == "draft 1"
    assert len(bundle.context_sizes) == 2


def test_exhaustion_returns_best_scoring_iteration():
    engine, _, sid = scripted_answer_run([0.5, 0.6, 0.7])
    bundle = engine.answer(sid, "What did we plan?", 1000)
    assert bundle.iterations_used == 3
    assert bundle.final_score == 0.7
    assert bundle.answer == "draft 2"


def test_best_score_selection_is_not_last_iteration():
    engine, _, sid = scripted_answer_run([0.7, 0.5, 0.6])
    bundle = engine.answer(sid, "What did we plan?", 1000)
    assert bundle.iterations_used == 3
    assert bundle.final_score == 0.7
    assert bundle.answer == "draft 0"


def test_single_iteration_acceptance():
    engine, _, sid = scripted_answer_run([0.95])
    bundle = engine.answer(sid, "What did we plan?", 1000)
    assert bundle.iterations_used == 1
    assert len(bundle.context_sizes) == 1


def test_context_node_sets_nest_across_iterations():
    engine, backend, sid = scripted_answer_run([])
    # populate the store first so widening has something to widen over
    seed_texts = [
        "We compared the Dolomites and the Canadian Rockies for hiking.",
        "Then we considered the Alps near Innsbruck and the Pyrenees.",
        "Later the Andes, the Atlas Mountains and Patagonia came up.",
        "Scotland has the Cairngorms and Ben Nevis for rough weather.",
    ]
    for i, text in enumerate(seed_texts):
        backend.script("answerer", respond=f"noted {i}")
        engine.answer(sid, text, 1000 + i)
    for i, score in enumerate([0.1, 0.2, 0.3]):
        backend.script("answerer", respond=f"draft {i}")
        backend.script("critic", respond=critic_json(score))
    engine.answer(sid, "Which mountains did we discuss?", 2000)

    attempts = engine.last_answer_attempts(sid)
    assert len(attempts) == 3
    id_sets = [a[2].node_ids for a in attempts]
    assert id_sets[0] <= id_sets[1] <= id_sets[2]


def test_reflection_step_events_per_iteration():
    engine, _, sid = scripted_answer_run([0.5, 0.6, 0.7])
    engine.answer(sid, "What did we plan?", 1000)
    steps = [e for e in engine.log.events() if e.kind == "reflection_step"]
    assert len(steps) == 3
    assert [e.payload["iteration"] for e in steps] == [0, 1, 2]
    assert [e.payload["accepted"] for e in steps] == [False, False, False]


def test_answer_deterministic_across_identical_runs():
    runs = []
    for _ in range(2):
        engine, backend, sid = scripted_answer_run([0.5, 0.9])
        backend.script("answerer", respond="extra")  # unused tail entry
        runs.append(engine.answer(sid, "Plan a Dolomites trip with Anna.", 1234))
    assert runs[0] == runs[1]


def test_query_turn_recorded_before_retrieval():
    engine, backend, sid = scripted_answer_run([0.9])
    bundle = engine.answer(sid, "what did we just discuss about the Matterhorn?", 1000)
    cited_labels = {engine.store.get_node(i).label for i in bundle.cited_node_ids}
    assert "what did we just discuss about the Matterhorn?" in cited_labels


def test_extractor_garbage_falls_back_and_logs():
    engine = make_mock_engine()
    sid = engine.create_session(created_at=1000)
    delta = engine.record_turn(sid, "I prefer hiking in the Dolomites and the Canadian Rockies.", 1000)
    assert [label for label, _ in delta.nodes] == ["Dolomites", "Canadian Rockies"]
    kinds = [e.kind for e in engine.log.events()]
    assert "fallback_extract" in kinds
    assert engine.store.find_node("Dolomites", NodeKind.ENTITY) is not None


def test_scripted_extractor_counts():
    engine = make_mock_engine()
    payload = {
        "entities": [{"label": "Dolomites", "kind": "Entity"}, {"label": "Italy", "kind": "Entity"}],
        "relations": [{"src": "Dolomites", "dst": "Italy", "kind": "ABOUT", "confidence": 0.9}],
    }
    engine.scripted_backend.script("extractor", respond=json.dumps(payload))
    sid = engine.create_session(created_at=1000)
    engine.record_turn(sid, "Tell me about the Dolomites in Italy.", 1000)
    assert engine.store.node_count == 3  # 2 entities + the Turn node
    assert engine.store.edge_count == 3  # 1 relation + 2 MENTIONS
    kinds = {e.kind for e in engine.store.edges()}
    assert kinds == {EdgeKind.ABOUT, EdgeKind.MENTIONS}


def test_rerecording_same_turn_is_idempotent():
    engine = make_mock_engine()
    sid = engine.create_session(created_at=1000)
    text = "I prefer hiking in the Dolomites and the Canadian Rockies."
    engine.record_turn(sid, text, 1000)
    count = engine.store.node_count
    mentions_before = engine.store.find_node("Dolomites", NodeKind.ENTITY).mention_count
    engine.record_turn(sid, text, 1000)
    assert engine.store.node_count == count
    assert engine.store.find_node("Dolomites", NodeKind.ENTITY).mention_count == mentions_before + 1


def test_answerer_total_failure_is_hard_error():
    engine = make_mock_engine()
    engine.scripted_backend.set_default("answerer", fail="transport")
    sid = engine.create_session(created_at=1000)
    with pytest.raises(LlmExhaustedError):
        engine.answer(sid, "anything at all", 1000)
    errors = [e for e in engine.log.events() if e.kind == "llm_error"]
    assert errors  # every failed attempt was recorded


def test_critic_unusable_output_scores_zero_and_continues():
    engine = make_mock_engine()
    backend = engine.scripted_backend
    for i in range(3):
        backend.script("answerer", respond=f"draft {i}")
        backend.script("critic", respond="not a json verdict")
    sid = engine.create_session(created_at=1000)
    bundle = engine.answer(sid, "anything at all", 1000)
    assert bundle.iterations_used == 3
    assert bundle.final_score == 0.0
    attempts = engine.last_answer_attempts(sid)
    assert attempts[0][1].missing == ("critic-unparseable",)


def test_empty_query_rejected():
    engine = make_mock_engine()
    sid = engine.create_session()
    with pytest.raises(ValueError):
        engine.answer(sid, "   ", 1000)
    with pytest.raises(ValueError):
        engine.record_turn(sid, "", 1000)


def test_unknown_session_rejected():
    engine = make_mock_engine()
    with pytest.raises(UnknownSessionError):
        engine.answer("nope", "hello there", 1000)


def test_empty_stores_still_answer():
    engine, backend, sid = scripted_answer_run([0.9])
    bundle = engine.answer(sid, "first ever message", 1000)
    assert bundle.answer == "draft 0"
    assert bundle.iterations_used == 1


def test_session_messages_track_exchanges():
    engine, _, sid = scripted_answer_run([0.9])
    engine.answer(sid, "hello world", 1000)
    messages = engine.session_messages(sid)
    assert [m["role"] for m in messages] == ["user", "assistant"]
    assert messages[1]["iterations_used"] == 1
    assert engine.session_record(sid).turn_count == 2  # query + answer turns


def test_concurrent_sessions_do_not_corrupt_state():
    import threading

    engine = make_mock_engine()
    engine.scripted_backend.set_default("answerer", respond="noted")
    sessions = [engine.create_session(session_id=f"s{i}", created_at=1000) for i in range(4)]
    errors = []

    def worker(sid, offset):
        try:
            for i in range(5):
                engine.answer(sid, f"turn {offset}-{i} about the Alps", 1000 + offset * 100 + i)
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(sid, i)) for i, sid in enumerate(sessions)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    # each session recorded 5 exchanges = 10 turns; the log stayed gapless
    assert all(engine.session_record(sid).turn_count == 10 for sid in sessions)
    seqs = [e.seq for e in engine.log.events()]
    assert seqs == list(range(1, len(seqs) + 1))
