from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from recollect.cli import main
from recollect.scenarios import bundled_scenarios_path

DATA = Path(__file__).parent / "data"


@pytest.fixture
def runner():
    return CliRunner()


def write_mock_config(tmp_path: Path, script_path: Path | None = None, **extra) -> Path:
    endpoint = f"mock:{script_path.resolve()}" if script_path else "mock:"
    config = {
        "roles": {
            role: {"endpoint": endpoint, "model": "scripted", "temperature": 0.2, "max_tokens": 512}
            for role in ("extractor", "answerer", "critic")
        },
        **extra,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_chat_transcript_matches_golden(runner, tmp_path):
    config = write_mock_config(tmp_path, script_path=DATA / "car_script.jsonl")
    result = runner.invoke(
        main,
        ["--config", str(config), "chat", "--session", "car", "--at", "1000000000000"],
        input=(DATA / "car_input.txt").read_text(),
    )
    assert result.exit_code == 0, result.output
    assert result.output == (DATA / "chat_car_golden.txt").read_text()


def test_chat_json_mode_emits_single_document(runner, tmp_path):
    config = write_mock_config(tmp_path, script_path=DATA / "car_script.jsonl")
    result = runner.invoke(
        main,
        ["--config", str(config), "--json", "chat", "--session", "car", "--at", "1000000000000"],
        input=(DATA / "car_input.txt").read_text(),
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert len(doc["exchanges"]) == 3
    assert doc["exchanges"][1]["answer"].startswith("A Toyota Highlander Hybrid")
    assert doc["exchanges"][2]["ts"] == 1000000000000 + 2000


def test_ingest_prints_reports(runner, tmp_path):
    doc = tmp_path / "notes.md"
    doc.write_text("Dolomites hut-to-hut plan with Anna.")
    config = write_mock_config(tmp_path)
    result = runner.invoke(main, ["--config", str(config), "ingest", str(doc), "--at", "1000"])
    assert result.exit_code == 0, result.output
    assert "notes.md: 1 chunks" in result.output
    assert "dolomites" in result.output


def test_ingest_missing_file_is_usage_error(runner):
    result = runner.invoke(main, ["ingest", "/does/not/exist.txt"])
    assert result.exit_code == 2


def test_eval_prints_metric_table(runner):
    result = runner.invoke(main, ["eval", "--scenarios", str(bundled_scenarios_path())])
    assert result.exit_code == 0, result.output
    for column in ("ROGUE-1", "ROGUE-2", "ROGUE-L", "Accuracy"):
        assert column in result.output
    assert "100%" in result.output


def test_eval_json_mode(runner):
    result = runner.invoke(main, ["--json", "eval", "--scenarios", str(bundled_scenarios_path())])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["accuracy"] == 1.0
    assert len(report["scenarios"]) == 4


def test_eval_invalid_scenarios_exit_one(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"scenarios": []}')
    result = runner.invoke(main, ["eval", "--scenarios", str(bad)])
    assert result.exit_code == 1


def _produce_log(runner, tmp_path: Path) -> Path:
    log_path = tmp_path / "run.jsonl"
    config = write_mock_config(
        tmp_path, script_path=DATA / "car_script.jsonl", event_log_path=str(log_path)
    )
    result = runner.invoke(
        main,
        ["--config", str(config), "chat", "--session", "car", "--at", "1000000000000"],
        input=(DATA / "car_input.txt").read_text(),
    )
    assert result.exit_code == 0, result.output
    return log_path


def test_replay_verify_ok(runner, tmp_path):
    log_path = _produce_log(runner, tmp_path)
    result = runner.invoke(main, ["replay", str(log_path), "--verify"])
    assert result.exit_code == 0, result.output
    assert "verified" in result.output


def test_replay_verify_detects_tampering(runner, tmp_path):
    log_path = _produce_log(runner, tmp_path)
    raw = bytearray(log_path.read_bytes())
    raw[raw.index(b"Toyota") + 1] ^= 0x01
    tampered = tmp_path / "tampered.jsonl"
    tampered.write_bytes(bytes(raw))
    result = runner.invoke(main, ["replay", str(tampered), "--verify"])
    assert result.exit_code == 1


def test_replay_summary_without_verify(runner, tmp_path):
    log_path = _produce_log(runner, tmp_path)
    result = runner.invoke(main, ["--json", "replay", str(log_path)])
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output)
    assert summary["nodes"] > 0
    assert summary["state_hash"]


def test_usage_error_exit_code(runner):
    assert runner.invoke(main, ["replay"]).exit_code == 2
    assert runner.invoke(main, ["no-such-command"]).exit_code == 2
