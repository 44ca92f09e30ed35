from __future__ import annotations

import json
import math

import pytest

from recollect.config import DEFAULT_TAU_MS
from recollect.scenarios import (
    Scenario,
    ScenarioStep,
    ScenarioValidationError,
    bundled_scenarios_path,
    load_scenarios,
    run_scenario,
    run_scenarios,
)

DAY_MS = 86_400_000


@pytest.fixture(scope="module")
def bundled_report():
    return run_scenarios(bundled_scenarios_path())


def test_bundle_has_four_scenarios(bundled_report):
    assert [s.name for s in bundled_report.scenarios] == [
        "vacation-recall",
        "hybrid-car-reasoning",
        "garden-timing",
        "fitness-tracker-shift",
    ]


def test_accuracy_is_perfect_with_scripted_answers(bundled_report):
    assert bundled_report.accuracy == 1.0
    for scenario in bundled_report.scenarios:
        assert scenario.accuracy == 1.0


def test_recall_query_context_contains_suggested_destinations(bundled_report):
    recall = bundled_report.scenarios[0].query_results[0]
    assert "Dolomites" in recall.cited_node_labels
    assert "Canadian Rockies" in recall.cited_node_labels


def test_rouge_is_perfect_when_answers_match_references(bundled_report):
    assert bundled_report.rouge1_f1 == 1.0
    assert bundled_report.rouge2_f1 == 1.0
    assert bundled_report.rouge_l_f1 == 1.0


def test_march_node_recency_matches_closed_form(bundled_report):
    garden = next(s for s in bundled_report.scenarios if s.name == "garden-timing")
    [query] = garden.query_results
    march_text = "I'm planning to start a vegetable garden this summer. Can you give me tips for what to plant in June?"
    march = next(n for n in query.scored_nodes if n["label"] == march_text)
    delta_ms = 1007948800000 - 1000000000000
    assert march["recency"] == pytest.approx(math.exp(-delta_ms / DEFAULT_TAU_MS), abs=1e-9)


def test_table_rendering(bundled_report):
    table = bundled_report.to_table()
    for column in ("ROGUE-1", "ROGUE-2", "ROGUE-L", "Accuracy"):
        assert column in table
    assert "100%" in table


def test_harness_is_deterministic():
    first = run_scenarios(bundled_scenarios_path())
    second = run_scenarios(bundled_scenarios_path())
    assert [s.state_hash for s in first.scenarios] == [s.state_hash for s in second.scenarios]
    assert first.to_dict() == second.to_dict()


def test_ingest_step_feeds_vector_retrieval(tmp_path):
    scenario = Scenario(
        name="with-docs",
        steps=[
            ScenarioStep(kind="ingest_doc", ts=1000, name="notes.md",
                         text="Dolomites gear list: boots, poles, water filter."),
            ScenarioStep(kind="query", ts=2000, text="What gear did my Dolomites notes mention?",
                         expected_reference="Your notes list boots, poles and a water filter.",
                         required_phrases=["boots"]),
            ScenarioStep(kind="assistant_script", text="Your notes list boots, poles and a water filter."),
        ],
    )
    run = run_scenario(scenario)
    assert run.result.accuracy == 1.0
    assert len(run.engine.index) == 1
    run.engine.close()


def test_empty_scenario_list_rejected(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text('{"scenarios": []}')
    with pytest.raises(ScenarioValidationError):
        load_scenarios(path)


def test_unknown_step_kind_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"scenarios": [{"name": "x", "steps": [{"kind": "teleport"}]}]}))
    with pytest.raises(ScenarioValidationError, match="teleport"):
        load_scenarios(path)


def test_decreasing_ts_rejected(tmp_path):
    path = tmp_path / "bad.json"
    steps = [
        {"kind": "user_turn", "ts": 2000, "text": "hi"},
        {"kind": "assistant_script", "text": "hello"},
        {"kind": "query", "ts": 1000, "text": "what?", "required_phrases": ["x"]},
        {"kind": "assistant_script", "text": "x"},
    ]
    path.write_text(json.dumps({"scenarios": [{"name": "x", "steps": steps}]}))
    with pytest.raises(ScenarioValidationError, match="decreases"):
        load_scenarios(path)


def test_script_count_mismatch_rejected(tmp_path):
    path = tmp_path / "bad.json"
    steps = [
        {"kind": "user_turn", "ts": 1000, "text": "hi"},
        {"kind": "query", "ts": 2000, "text": "what?", "required_phrases": ["x"]},
        {"kind": "assistant_script", "text": "only one line"},
    ]
    path.write_text(json.dumps({"scenarios": [{"name": "x", "steps": steps}]}))
    with pytest.raises(ScenarioValidationError, match="assistant_script"):
        load_scenarios(path)


def test_scenario_without_query_rejected(tmp_path):
    path = tmp_path / "bad.json"
    steps = [{"kind": "user_turn", "ts": 1000, "text": "hi"},
             {"kind": "assistant_script", "text": "hello"}]
    path.write_text(json.dumps({"scenarios": [{"name": "x", "steps": steps}]}))
    with pytest.raises(ScenarioValidationError, match="query"):
        load_scenarios(path)


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"scenarios": [\n  {"name": }\n]}')
    with pytest.raises(ScenarioValidationError, match="line 2"):
        load_scenarios(path)
