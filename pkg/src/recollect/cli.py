"""Operator entry points.

`recollect chat` talks to an in-process engine by default (no server
required); `--server` targets a running HTTP instance instead. `ingest`
loads documents, `eval` runs the scenario harness, `replay` rebuilds state
from an event log, `serve` starts the HTTP facade.

Exit codes: 0 ok, 1 verification or data failure, 2 usage error.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import click
import httpx

from .config import EngineConfig
from .engine import Engine
from .events import CorruptLogError, read_log, replay, state_hash, verify_log
from .llm import LlmError
from .scenarios import ScenarioValidationError, run_scenarios


@dataclass
class CliContext:
    config: EngineConfig
    json_output: bool
    server_url: str

    def build_engine(self) -> Engine:
        engine = Engine(config=self.config)
        backend = engine.scripted_backend
        if backend is not None and not backend.is_strict:
            # make a bare mock config usable interactively
            backend.set_default("extractor", respond="(no structured output)")
            backend.set_default("critic", respond='{"score": 0.95, "missing": []}')
            backend.set_default(
                "answerer",
                respond="(mock backend: no scripted reply; your message was recorded)",
            )
        return engine


def _now_ms() -> int:
    return int(time.time() * 1000)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Engine config JSON.")
@click.option("--server", "server_url", default="", help="Target a running HTTP instance instead.")
@click.option("--json", "json_output", is_flag=True, help="Emit one JSON document per command.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, server_url: str, json_output: bool) -> None:
    """Conversational memory engine with graph + vector recall."""
    config = EngineConfig.from_file(config_path) if config_path else EngineConfig()
    ctx.obj = CliContext(config=config, json_output=json_output, server_url=server_url.rstrip("/"))


@main.command()
@click.option("--session", "session_id", default="", help="Session id (created on first use).")
@click.option("--at", "at_ts", type=int, default=None,
              help="Pin the first turn's timestamp (ms); later turns advance by 1s.")
@click.pass_obj
def chat(ctx: CliContext, session_id: str, at_ts: int | None) -> None:
    """Chat REPL: each stdin line is answered; empty lines are ignored."""
    exchanges = []
    if ctx.server_url:
        _chat_http(ctx, session_id, at_ts, exchanges)
    else:
        engine = ctx.build_engine()
        sid = engine.create_session(session_id or None)
        try:
            for turn_index, line in enumerate(_stdin_lines()):
                ts = at_ts + 1000 * turn_index if at_ts is not None else _now_ms()
                try:
                    bundle = engine.answer(sid, line, ts)
                except (LlmError, ValueError, AssertionError) as exc:
                    click.echo(f"error: {exc}", err=True)
                    sys.exit(1)
                exchanges.append(
                    {
                        "text": line,
                        "answer": bundle.answer,
                        "iterations_used": bundle.iterations_used,
                        "final_score": bundle.final_score,
                        "ts": ts,
                    }
                )
                if not ctx.json_output:
                    click.echo(bundle.answer)
                    click.echo(f"[iterations={bundle.iterations_used} score={bundle.final_score:.2f}]")
                    click.echo("")
        finally:
            engine.close()
    if ctx.json_output:
        click.echo(json.dumps({"session_id": session_id or "(new)", "exchanges": exchanges}))


def _chat_http(ctx: CliContext, session_id: str, at_ts: int | None, exchanges: list) -> None:
    with httpx.Client(base_url=ctx.server_url, timeout=120.0) as client:
        if not session_id:
            session_id = client.post("/v1/sessions").json()["session_id"]
        for turn_index, line in enumerate(_stdin_lines()):
            ts = at_ts + 1000 * turn_index if at_ts is not None else _now_ms()
            response = client.post(f"/v1/sessions/{session_id}/messages", json={"text": line, "ts": ts})
            if response.status_code != 200:
                click.echo(f"error: server returned {response.status_code}: {response.text}", err=True)
                sys.exit(1)
            body = response.json()
            exchanges.append({"text": line, "ts": ts, **body})
            if not ctx.json_output:
                click.echo(body["answer"])
                click.echo(f"[iterations={body['iterations_used']} score={body['final_score']:.2f}]")
                click.echo("")


def _stdin_lines():
    for raw in sys.stdin:
        line = raw.strip()
        if line:
            yield line


@main.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--at", "at_ts", type=int, default=None, help="Timestamp (ms) to stamp the ingest with.")
@click.pass_obj
def ingest(ctx: CliContext, paths: tuple[str, ...], at_ts: int | None) -> None:
    """Ingest plain-text/Markdown files into the vector index."""
    engine = ctx.build_engine()
    reports = []
    try:
        for path in paths:
            text = Path(path).read_text(encoding="utf-8")
            ts = at_ts if at_ts is not None else _now_ms()
            try:
                report = engine.ingest_document(Path(path).name, text, ts)
            except ValueError as exc:
                click.echo(f"error: {path}: {exc}", err=True)
                sys.exit(1)
            reports.append(report)
            if not ctx.json_output:
                keys = ", ".join(sorted(report.concept_keys_attached)) or "(none)"
                click.echo(
                    f"{report.doc_name}: {report.chunk_count} chunks, keys: {keys} "
                    f"({report.elapsed_ms} ms)"
                )
    finally:
        engine.close()
    if ctx.json_output:
        click.echo(
            json.dumps(
                {
                    "reports": [
                        {
                            "doc_name": r.doc_name,
                            "chunk_count": r.chunk_count,
                            "concept_keys_attached": sorted(r.concept_keys_attached),
                            "elapsed_ms": r.elapsed_ms,
                        }
                        for r in reports
                    ]
                }
            )
        )


@main.command("eval")
@click.option("--scenarios", "scenarios_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def eval_command(ctx: CliContext, scenarios_path: str) -> None:
    """Run the scenario harness and print the metrics table."""
    config = ctx.config if ctx.config.roles["answerer"].endpoint != "mock:" else None
    try:
        report = run_scenarios(scenarios_path, config=config)
    except ScenarioValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if ctx.json_output:
        click.echo(json.dumps(report.to_dict()))
    else:
        click.echo(report.to_table())


@main.command("replay")
@click.argument("log_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--verify", "do_verify", is_flag=True, help="Compare against the log's footer digest.")
@click.pass_obj
def replay_command(ctx: CliContext, log_path: str, do_verify: bool) -> None:
    """Rebuild engine state from an event log."""
    try:
        if do_verify:
            ok, computed, expected = verify_log(log_path, ctx.config)
            if ctx.json_output:
                click.echo(json.dumps({"verified": ok, "computed": computed, "footer": expected}))
            elif ok:
                click.echo(f"verified: {computed}")
            else:
                click.echo(f"digest mismatch: computed {computed}, footer {expected}", err=True)
            sys.exit(0 if ok else 1)
        events, _ = read_log(log_path)
        store, index = replay(events, ctx.config)
        digest = state_hash(store, index)
        summary = {
            "events": len(events),
            "nodes": store.node_count,
            "edges": store.edge_count,
            "chunks": len(index),
            "state_hash": digest,
        }
        if ctx.json_output:
            click.echo(json.dumps(summary))
        else:
            click.echo(
                f"{summary['events']} events -> {summary['nodes']} nodes, "
                f"{summary['edges']} edges, {summary['chunks']} chunks"
            )
            click.echo(f"state_hash: {digest}")
    except CorruptLogError as exc:
        click.echo(f"corrupt log: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.pass_obj
def serve(ctx: CliContext) -> None:
    """Run the HTTP facade on the configured listen address."""
    import uvicorn

    from .server import create_app

    engine = ctx.build_engine()
    host, _, port = ctx.config.listen_addr.partition(":")
    uvicorn.run(create_app(engine), host=host or "127.0.0.1", port=int(port or 8040))


if __name__ == "__main__":
    main()
