from __future__ import annotations

import json

import httpx
import pytest

from recollect.config import LlmConfig, RoleConfig
from recollect.llm import (
    ChatMessage,
    HttpBackend,
    LlmClient,
    LlmOutputError,
    LlmRole,
    LlmStatusError,
    LlmTimeoutError,
    LlmTransportError,
    ScriptedBackend,
    ScriptMismatchError,
    parse_json_payload,
)

MESSAGES = [ChatMessage("system", "be brief"), ChatMessage("user", "hello")]


def make_client(backend, retries=2) -> tuple[LlmClient, list[float]]:
    sleeps = []
    client = LlmClient(
        roles={r.value: RoleConfig(endpoint="mock:") for r in LlmRole},
        backends={r.value: backend for r in LlmRole},
        settings=LlmConfig(timeout=5.0, retries=retries, backoff_base=0.25),
        sleeper=sleeps.append,
    )
    return client, sleeps


def test_scripted_playback():
    backend = ScriptedBackend()
    backend.script("answerer", respond="A")
    client, _ = make_client(backend)
    completion = client.complete(LlmRole.ANSWERER, MESSAGES)
    assert completion.text == "A"
    assert completion.backend_id == "scripted"
    assert completion.latency_ms >= 0


def test_retry_succeeds_after_two_transport_failures():
    backend = ScriptedBackend()
    backend.script("answerer", fail="transport")
    backend.script("answerer", fail="transport")
    backend.script("answerer", respond="recovered")
    client, sleeps = make_client(backend)
    errors = []
    completion = client.complete(LlmRole.ANSWERER, MESSAGES, event_sink=errors.append)
    assert completion.text == "recovered"
    assert sleeps == [0.25, 0.5]  # exponential backoff, 250 ms base
    assert [e["error"] for e in errors] == ["transport", "transport"]


def test_transport_exhaustion_after_three_attempts():
    backend = ScriptedBackend()
    backend.set_default("answerer", fail="transport")
    client, _ = make_client(backend)
    errors = []
    with pytest.raises(LlmTransportError):
        client.complete(LlmRole.ANSWERER, MESSAGES, event_sink=errors.append)
    assert len(errors) == 3


def test_timeout_surfaces_as_timeout_error():
    backend = ScriptedBackend()
    backend.set_default("critic", fail="timeout")
    client, _ = make_client(backend)
    with pytest.raises(LlmTimeoutError):
        client.complete(LlmRole.CRITIC, MESSAGES)


def test_non_2xx_is_not_retried():
    backend = ScriptedBackend()
    backend.script("extractor", fail="status:500")
    backend.script("extractor", respond="never reached")
    client, sleeps = make_client(backend)
    with pytest.raises(LlmStatusError):
        client.complete(LlmRole.EXTRACTOR, MESSAGES)
    assert sleeps == []


def test_strict_script_asserts_role_order(tmp_path):
    script = tmp_path / "script.jsonl"
    script.write_text(
        "\n".join(
            [
                json.dumps({"role": "extractor", "respond": "one"}),
                json.dumps({"role": "answerer", "respond": "two"}),
            ]
        )
    )
    backend = ScriptedBackend.from_jsonl(script)
    client, _ = make_client(backend)
    assert client.complete(LlmRole.EXTRACTOR, MESSAGES).text == "one"
    with pytest.raises(ScriptMismatchError):
        client.complete(LlmRole.CRITIC, MESSAGES)


def test_http_backend_wire_format():
    captured = {}

    def handler(request: httpx.Request) -> httpx.Response:
        captured["url"] = str(request.url)
        captured["body"] = json.loads(request.content)
        captured["auth"] = request.headers.get("authorization")
        return httpx.Response(
            200, json={"choices": [{"message": {"role": "assistant", "content": "pong"}}]}
        )

    backend = HttpBackend("http://llm.test/v1", bearer_token="sekrit", transport=httpx.MockTransport(handler))
    client, _ = make_client(backend)
    completion = client.complete(LlmRole.ANSWERER, MESSAGES)
    assert completion.text == "pong"
    assert captured["url"] == "http://llm.test/v1/chat"
    assert captured["auth"] == "Bearer sekrit"
    assert captured["body"]["messages"] == [
        {"role": "system", "content": "be brief"},
        {"role": "user", "content": "hello"},
    ]
    assert set(captured["body"]) == {"model", "messages", "temperature", "max_tokens"}


def test_http_backend_malformed_body_is_status_error():
    def handler(request):
        return httpx.Response(200, json={"nope": []})

    backend = HttpBackend("http://llm.test", transport=httpx.MockTransport(handler))
    client, _ = make_client(backend)
    with pytest.raises(LlmStatusError):
        client.complete(LlmRole.ANSWERER, MESSAGES)


# -- parse_json_payload -------------------------------------------------------


def test_parse_strips_code_fences():
    assert parse_json_payload('```json\n{"score": 0.9}\n```') == {"score": 0.9}


def test_parse_takes_first_balanced_object():
    assert parse_json_payload('Sure! {"a": 1} trailing') == {"a": 1}


def test_parse_skips_unbalanced_prefix():
    assert parse_json_payload('weird { not json, but {"a": 2} works') == {"a": 2}


def test_parse_nested_object():
    assert parse_json_payload('{"a": {"b": [1, 2]}} tail') == {"a": {"b": [1, 2]}}


def test_parse_no_json_raises():
    with pytest.raises(LlmOutputError):
        parse_json_payload("no json here")


def test_parse_malformed_json_raises():
    with pytest.raises(LlmOutputError):
        parse_json_payload("{broken: yes")
