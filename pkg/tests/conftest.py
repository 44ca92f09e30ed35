from __future__ import annotations

import pytest

from recollect import Engine, EngineConfig
from recollect.config import RoleConfig


def make_mock_config() -> EngineConfig:
    config = EngineConfig()
    config.roles = {r: RoleConfig(endpoint="mock:") for r in ("extractor", "answerer", "critic")}
    config.llm.backoff_base = 0.0
    return config


def make_mock_engine(event_log_path=None) -> Engine:
    """Engine on the scripted backend with fallback extraction and an
    accepting critic; answerer lines are queued per test."""
    config = make_mock_config()
    if event_log_path is not None:
        config.event_log_path = str(event_log_path)
    engine = Engine(config=config)
    backend = engine.scripted_backend
    backend.set_default("extractor", respond="(no structured output)")
    backend.set_default("critic", respond='{"score": 0.95, "missing": []}')
    return engine


@pytest.fixture
def mock_engine() -> Engine:
    return make_mock_engine()
