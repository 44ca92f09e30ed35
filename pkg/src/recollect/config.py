"""Engine configuration.

A single JSON file configures the whole engine: scoring weights, reflection
loop bounds, embedder provider, and per-role LLM backends. Every tunable the
pipeline hard-wires a default for lives here so deployments can override it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

MS_PER_DAY = 86_400_000

DEFAULT_TAU_MS = 30 * MS_PER_DAY
DEFAULT_MERGE_THRESHOLD = 0.92
DEFAULT_PROXIMITY_HOP_CAP = 3


@dataclass
class ScoringWeights:
    semantic: float = 0.6
    recency: float = 0.25
    proximity: float = 0.15


@dataclass
class ReflectionConfig:
    threshold: float = 0.8
    max_iterations: int = 3


@dataclass
class RetrievalConfig:
    base_nodes: int = 5
    base_chunks: int = 3
    base_hops: int = 1
    seed_turns: int = 3
    history_turns: int = 6


@dataclass
class ChunkingConfig:
    size: int = 512
    overlap: int = 64


@dataclass
class EmbedderConfig:
    provider: str = "deterministic"  # deterministic | remote
    dimension: int = 64
    endpoint: str = ""
    timeout: float = 10.0


@dataclass
class RoleConfig:
    """One LLM role's backend binding."""

    endpoint: str = "mock:"
    model: str = "scripted"
    temperature: float = 0.2
    max_tokens: int = 512


@dataclass
class LlmConfig:
    timeout: float = 30.0
    retries: int = 2
    backoff_base: float = 0.25
    bearer_token: str = ""


@dataclass
class PruneConfig:
    max_nodes: int | None = None


@dataclass
class EngineConfig:
    weights: ScoringWeights = field(default_factory=ScoringWeights)
    tau_ms: int = DEFAULT_TAU_MS
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD
    proximity_hop_cap: int = DEFAULT_PROXIMITY_HOP_CAP
    reflection: ReflectionConfig = field(default_factory=ReflectionConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    roles: dict[str, RoleConfig] = field(
        default_factory=lambda: {
            "extractor": RoleConfig(),
            "answerer": RoleConfig(),
            "critic": RoleConfig(),
        }
    )
    listen_addr: str = "127.0.0.1:8040"
    ui_origin: str = ""
    api_token: str = ""
    event_log_path: str = ""

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "EngineConfig":
        cfg = cls()
        if "weights" in raw:
            cfg.weights = ScoringWeights(**raw["weights"])
        if "tau_ms" in raw:
            cfg.tau_ms = int(raw["tau_ms"])
        if "merge_threshold" in raw:
            cfg.merge_threshold = float(raw["merge_threshold"])
        if "proximity_hop_cap" in raw:
            cfg.proximity_hop_cap = int(raw["proximity_hop_cap"])
        if "reflection" in raw:
            cfg.reflection = ReflectionConfig(**raw["reflection"])
        if "retrieval" in raw:
            cfg.retrieval = RetrievalConfig(**raw["retrieval"])
        if "chunking" in raw:
            cfg.chunking = ChunkingConfig(**raw["chunking"])
        if "embedder" in raw:
            cfg.embedder = EmbedderConfig(**raw["embedder"])
        if "llm" in raw:
            cfg.llm = LlmConfig(**raw["llm"])
        if "prune" in raw:
            cfg.prune = PruneConfig(**raw["prune"])
        if "roles" in raw:
            cfg.roles = {name: RoleConfig(**spec) for name, spec in raw["roles"].items()}
        for key in ("listen_addr", "ui_origin", "api_token", "event_log_path"):
            if key in raw:
                setattr(cfg, key, raw[key])
        missing = {"extractor", "answerer", "critic"} - set(cfg.roles)
        if missing:
            raise ValueError(f"roles must configure extractor/answerer/critic; missing {sorted(missing)}")
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
