"""recollect: a conversational memory engine.

Conversation turns become a time-stamped concept graph, private documents
become an exact-cosine vector index, and answers come from a role-split LLM
pipeline that widens retrieval in a reflection loop until a critic accepts.
"""

from .config import EngineConfig
from .embedding import DeterministicEmbedder, RemoteEmbedder, cosine
from .engine import AnswerBundle, ContextBundle, Critique, Engine, LlmExhaustedError, UnknownSessionError
from .events import EventLog, canonical_json, read_log, replay, state_hash, verify_log
from .extraction import GraphDelta, fallback_extract
from .graph import ConceptNode, EdgeKind, GraphStore, NodeKind, RelationEdge, ScoredNode
from .ingest import IngestReport, chunk_text
from .llm import ChatMessage, Completion, HttpBackend, LlmClient, LlmRole, ScriptedBackend, parse_json_payload
from .metrics import RougeScores, accuracy, rouge_l, rouge_n
from .scenarios import EvalReport, Scenario, bundled_scenarios_path, load_scenarios, run_scenario, run_scenarios
from .vectors import Chunk, SearchHit, VectorIndex

__version__ = "0.1.0"

__all__ = [
    "AnswerBundle",
    "ChatMessage",
    "Chunk",
    "Completion",
    "ConceptNode",
    "ContextBundle",
    "Critique",
    "DeterministicEmbedder",
    "EdgeKind",
    "Engine",
    "EngineConfig",
    "EvalReport",
    "EventLog",
    "GraphDelta",
    "GraphStore",
    "HttpBackend",
    "IngestReport",
    "LlmClient",
    "LlmExhaustedError",
    "LlmRole",
    "NodeKind",
    "RelationEdge",
    "RemoteEmbedder",
    "RougeScores",
    "Scenario",
    "ScoredNode",
    "ScriptedBackend",
    "SearchHit",
    "UnknownSessionError",
    "VectorIndex",
    "accuracy",
    "bundled_scenarios_path",
    "canonical_json",
    "chunk_text",
    "cosine",
    "fallback_extract",
    "load_scenarios",
    "parse_json_payload",
    "read_log",
    "replay",
    "rouge_l",
    "rouge_n",
    "run_scenario",
    "run_scenarios",
    "state_hash",
    "verify_log",
]
