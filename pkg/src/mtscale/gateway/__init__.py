"""Clients for the three external services (completion, embedding,
translation) and the deterministic scripted mock endpoint."""

from .completion import CompletionClient
from .mock_script import MockScript, load_script, script_from_dict
from .mock_server import MockCompletionServer, serve_mock
from .providers import (
    CachingEmbedder,
    CachingTranslator,
    ContentCache,
    HttpEmbedder,
    HttpTranslator,
    MockEmbedder,
    MockTranslator,
    make_embedder,
    make_translator,
)
from .types import (
    CompletionRequest,
    EmbedderConfig,
    EmbeddingVector,
    EndpointConfig,
    GatewayHandles,
    StopReason,
    StreamEvent,
    TranslatorConfig,
)

__all__ = [
    "CompletionClient",
    "MockScript",
    "load_script",
    "script_from_dict",
    "MockCompletionServer",
    "serve_mock",
    "CachingEmbedder",
    "CachingTranslator",
    "ContentCache",
    "HttpEmbedder",
    "HttpTranslator",
    "MockEmbedder",
    "MockTranslator",
    "make_embedder",
    "make_translator",
    "CompletionRequest",
    "EmbedderConfig",
    "EmbeddingVector",
    "EndpointConfig",
    "GatewayHandles",
    "StopReason",
    "StreamEvent",
    "TranslatorConfig",
]
