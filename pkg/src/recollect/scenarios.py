"""Scenario files and the evaluation harness.

A scenario is an ordered transcript: user turns, the assistant lines a
scripted backend plays back for them, clock jumps, document ingests, and
scored queries. Each scenario drives a fresh engine; every user_turn and
query runs the full answer pipeline, popping the next assistant_script line
when the backend is the scripted mock (live backends answer for real, which
is how user-supplied models get the same report).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .config import EngineConfig, RoleConfig
from .engine import Engine
from .metrics import RougeScores, accuracy, answer_is_correct, rouge_l, rouge_n

STEP_KINDS = frozenset({"user_turn", "assistant_script", "advance_clock", "ingest_doc", "query"})

DEFAULT_CRITIC_ACCEPT = '{"score": 0.95, "missing": []}'
DEFAULT_START_TS = 1_000

REPORT_FOOTNOTE = (
    "ROUGE columns report balanced F1 (beta=1), scaled to 0-100; "
    "tools that report recall instead will differ."
)


class ScenarioValidationError(ValueError):
    """A scenario file violated the schema; message carries the location."""


@dataclass
class ScenarioStep:
    kind: str
    text: str = ""
    ts: int | None = None
    name: str = ""
    expected_reference: str = ""
    required_phrases: list[str] = field(default_factory=list)


@dataclass
class Scenario:
    name: str
    steps: list[ScenarioStep]


@dataclass
class QueryResult:
    query: str
    answer: str
    expected_reference: str
    required_phrases: list[str]
    correct: bool
    rouge1: RougeScores
    rouge2: RougeScores
    rouge_l: RougeScores
    iterations_used: int
    final_score: float
    cited_node_labels: list[str]
    scored_nodes: list[dict]

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "answer": self.answer,
            "correct": self.correct,
            "rouge_1_f1": self.rouge1.f1,
            "rouge_2_f1": self.rouge2.f1,
            "rouge_l_f1": self.rouge_l.f1,
            "iterations_used": self.iterations_used,
            "final_score": self.final_score,
            "cited_node_labels": self.cited_node_labels,
            "scored_nodes": self.scored_nodes,
        }


@dataclass
class ScenarioResult:
    name: str
    query_results: list[QueryResult]
    accuracy: float
    rouge1_f1: float
    rouge2_f1: float
    rouge_l_f1: float
    mean_iterations: float
    state_hash: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "accuracy": self.accuracy,
            "rouge_1_f1": self.rouge1_f1,
            "rouge_2_f1": self.rouge2_f1,
            "rouge_l_f1": self.rouge_l_f1,
            "mean_iterations": self.mean_iterations,
            "state_hash": self.state_hash,
            "queries": [q.to_dict() for q in self.query_results],
        }


@dataclass
class ScenarioRun:
    result: ScenarioResult
    engine: Engine


@dataclass
class EvalReport:
    scenarios: list[ScenarioResult]
    accuracy: float
    rouge1_f1: float
    rouge2_f1: float
    rouge_l_f1: float
    footnote: str = REPORT_FOOTNOTE

    def to_dict(self) -> dict:
        return {
            "scenarios": [s.to_dict() for s in self.scenarios],
            "accuracy": self.accuracy,
            "rouge_1_f1": self.rouge1_f1,
            "rouge_2_f1": self.rouge2_f1,
            "rouge_l_f1": self.rouge_l_f1,
            "footnote": self.footnote,
        }

    def to_table(self, label: str = "orchestration engine") -> str:
        """Render the summary as a four-metric comparison table."""
        headers = ["Model", "ROGUE-1", "ROGUE-2", "ROGUE-L", "Accuracy"]
        rows = [
            [
                s.name,
                f"{100 * s.rouge1_f1:.1f}",
                f"{100 * s.rouge2_f1:.1f}",
                f"{100 * s.rouge_l_f1:.1f}",
                f"{100 * s.accuracy:.0f}%",
            ]
            for s in self.scenarios
        ]
        rows.append(
            [
                label,
                f"{100 * self.rouge1_f1:.1f}",
                f"{100 * self.rouge2_f1:.1f}",
                f"{100 * self.rouge_l_f1:.1f}",
                f"{100 * self.accuracy:.0f}%",
            ]
        )
        widths = [max(len(str(r[i])) for r in [headers] + rows) for i in range(len(headers))]
        lines = [
            "  ".join(str(cell).ljust(widths[i]) for i, cell in enumerate(headers)),
            "  ".join("-" * widths[i] for i in range(len(headers))),
        ]
        lines.extend("  ".join(str(cell).ljust(widths[i]) for i, cell in enumerate(row)) for row in rows)
        lines.append("")
        lines.append(f"note: {self.footnote}")
        return "\n".join(lines)


def bundled_scenarios_path() -> Path:
    """Path of the packaged four-scenario fixture file."""
    return Path(str(resources.files("recollect.data").joinpath("scenarios.json")))


# -- loading -----------------------------------------------------------------


def _step_from_raw(raw: dict, where: str) -> ScenarioStep:
    if not isinstance(raw, dict):
        raise ScenarioValidationError(f"{where}: step must be an object")
    kind = raw.get("kind")
    if kind not in STEP_KINDS:
        raise ScenarioValidationError(f"{where}: unknown step kind {kind!r}")
    step = ScenarioStep(
        kind=kind,
        text=str(raw.get("text", "")),
        ts=int(raw["ts"]) if "ts" in raw else None,
        name=str(raw.get("name", "")),
        expected_reference=str(raw.get("expected_reference", "")),
        required_phrases=[str(p) for p in raw.get("required_phrases", [])],
    )
    if kind in ("user_turn", "assistant_script", "query", "ingest_doc") and not step.text:
        raise ScenarioValidationError(f"{where}: {kind} step requires text")
    if kind == "advance_clock" and step.ts is None:
        raise ScenarioValidationError(f"{where}: advance_clock step requires ts")
    return step


def _validate_scenario(scenario: Scenario, where: str) -> None:
    if not scenario.name:
        raise ScenarioValidationError(f"{where}: scenario needs a name")
    if not scenario.steps:
        raise ScenarioValidationError(f"{where}: scenario has no steps")
    if not any(s.kind == "query" for s in scenario.steps):
        raise ScenarioValidationError(f"{where}: scenario has no query steps")
    last_ts = None
    for i, step in enumerate(scenario.steps):
        if step.ts is not None:
            if last_ts is not None and step.ts < last_ts:
                raise ScenarioValidationError(
                    f"{where} step {i}: ts {step.ts} decreases (previous {last_ts})"
                )
            last_ts = step.ts
    answered = sum(1 for s in scenario.steps if s.kind in ("user_turn", "query"))
    scripted = sum(1 for s in scenario.steps if s.kind == "assistant_script")
    if scripted and scripted != answered:
        raise ScenarioValidationError(
            f"{where}: {answered} answered steps but {scripted} assistant_script lines"
        )


def load_scenarios(path: str | Path) -> list[Scenario]:
    """Parse and validate a scenario file ({"scenarios": [...]})."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError(f"{path} line {exc.lineno}: {exc.msg}") from exc
    items = raw.get("scenarios") if isinstance(raw, dict) else None
    if not isinstance(items, list) or not items:
        raise ScenarioValidationError(f"{path}: file must contain a non-empty 'scenarios' list")
    scenarios = []
    for s_idx, raw_scenario in enumerate(items):
        where = f"{path} scenario[{s_idx}]"
        if not isinstance(raw_scenario, dict):
            raise ScenarioValidationError(f"{where}: must be an object")
        name = str(raw_scenario.get("name", ""))
        steps = [
            _step_from_raw(raw_step, f"{where} step {i}")
            for i, raw_step in enumerate(raw_scenario.get("steps", []))
        ]
        scenario = Scenario(name=name, steps=steps)
        _validate_scenario(scenario, where)
        scenarios.append(scenario)
    return scenarios


# -- running -----------------------------------------------------------------


def _mock_config() -> EngineConfig:
    config = EngineConfig()
    config.roles = {name: RoleConfig(endpoint="mock:") for name in ("extractor", "answerer", "critic")}
    return config


def run_scenario(
    scenario: Scenario,
    config: EngineConfig | None = None,
    event_log_path: str | Path | None = None,
) -> ScenarioRun:
    """Drive one scenario on a fresh engine and score its queries."""
    config = config or _mock_config()
    if event_log_path is not None:
        config.event_log_path = str(event_log_path)
    engine = Engine(config=config)

    backend = engine.scripted_backend
    if backend is not None:
        backend.set_default("extractor", respond="(no structured output)")
        backend.set_default("critic", respond=DEFAULT_CRITIC_ACCEPT)
        for step in scenario.steps:
            if step.kind == "assistant_script":
                backend.script("answerer", respond=step.text)

    first_ts = next((s.ts for s in scenario.steps if s.ts is not None), DEFAULT_START_TS)
    # fixed session id keeps replays and repeat runs hash-identical
    session_id = engine.create_session(session_id=f"scenario:{scenario.name}", created_at=first_ts)
    now = first_ts
    doc_counter = 0
    query_results: list[QueryResult] = []

    for step in scenario.steps:
        if step.ts is not None:
            now = max(now, step.ts)
        if step.kind == "assistant_script":
            continue
        if step.kind == "advance_clock":
            continue
        if step.kind == "ingest_doc":
            doc_counter += 1
            engine.ingest_document(step.name or f"doc-{doc_counter}", step.text, now)
            continue

        bundle = engine.answer(session_id, step.text, now)
        if step.kind != "query":
            continue

        attempts = engine.last_answer_attempts(session_id)
        _, _, chosen = max(attempts, key=lambda a: a[1].score)
        labels = []
        for node_id in bundle.cited_node_ids:
            labels.append(engine.store.get_node(node_id).label)
        scored_nodes = [
            {
                "node_id": s.node_id,
                "label": engine.store.get_node(s.node_id).label,
                "score": s.score,
                "semantic": s.components.semantic,
                "recency": s.components.recency,
                "proximity": s.components.proximity,
            }
            for s in chosen.scored_nodes
        ]
        query_results.append(
            QueryResult(
                query=step.text,
                answer=bundle.answer,
                expected_reference=step.expected_reference,
                required_phrases=list(step.required_phrases),
                correct=answer_is_correct(bundle.answer, step.required_phrases),
                rouge1=rouge_n(step.expected_reference, bundle.answer, 1),
                rouge2=rouge_n(step.expected_reference, bundle.answer, 2),
                rouge_l=rouge_l(step.expected_reference, bundle.answer),
                iterations_used=bundle.iterations_used,
                final_score=bundle.final_score,
                cited_node_labels=labels,
                scored_nodes=scored_nodes,
            )
        )

    scored = [q for q in query_results if q.required_phrases]
    scenario_accuracy = accuracy(
        [q.answer for q in scored], [q.required_phrases for q in scored]
    ) if scored else 0.0

    def _mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    result = ScenarioResult(
        name=scenario.name,
        query_results=query_results,
        accuracy=scenario_accuracy,
        rouge1_f1=_mean([q.rouge1.f1 for q in query_results]),
        rouge2_f1=_mean([q.rouge2.f1 for q in query_results]),
        rouge_l_f1=_mean([q.rouge_l.f1 for q in query_results]),
        mean_iterations=_mean([float(q.iterations_used) for q in query_results]),
        state_hash=engine.state_hash(),
    )
    return ScenarioRun(result=result, engine=engine)


def run_scenarios(path: str | Path, config: EngineConfig | None = None) -> EvalReport:
    """Run every scenario in a file and aggregate the metrics."""
    scenarios = load_scenarios(path)
    results = []
    for scenario in scenarios:
        run = run_scenario(scenario, config=copy.deepcopy(config) if config else None)
        run.engine.close()
        results.append(run.result)

    all_queries = [q for r in results for q in r.query_results]
    scored = [q for q in all_queries if q.required_phrases]
    overall_accuracy = accuracy(
        [q.answer for q in scored], [q.required_phrases for q in scored]
    ) if scored else 0.0

    def _mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    return EvalReport(
        scenarios=results,
        accuracy=overall_accuracy,
        rouge1_f1=_mean([q.rouge1.f1 for q in all_queries]),
        rouge2_f1=_mean([q.rouge2.f1 for q in all_queries]),
        rouge_l_f1=_mean([q.rouge_l.f1 for q in all_queries]),
    )
