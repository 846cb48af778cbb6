"""Request/response types for the three external services."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..errors import InputError


@dataclass(frozen=True)
class CompletionRequest:
    prompt_text: str
    max_new_tokens: int
    stop_sequences: tuple[str, ...] = ()
    temperature: float = 0.0
    stream: bool = True

    def __post_init__(self) -> None:
        if self.max_new_tokens < 0:
            raise InputError("max_new_tokens must be >= 0")
        if self.temperature < 0:
            raise InputError("temperature must be >= 0")
        if any(not s for s in self.stop_sequences):
            raise InputError("stop sequences must be non-empty strings")


class StopReason(Enum):
    LENGTH = "length"
    STOP_SEQUENCE = "stop_sequence"
    END_OF_SEQUENCE = "end_of_sequence"
    NONE = "none"


@dataclass(frozen=True)
class StreamEvent:
    """One server-sent event: a token or the single terminal stop."""

    kind: str  # "token" | "stop"
    token_text: str = ""
    stop_reason: StopReason = StopReason.NONE

    def __post_init__(self) -> None:
        if (self.kind == "stop") != (self.stop_reason is not StopReason.NONE):
            raise InputError("kind=stop iff stop_reason set")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    provider_id: str
    dimension: int

    def __post_init__(self) -> None:
        if self.dimension <= 0 or len(self.values) != self.dimension:
            raise InputError("embedding length must equal its declared dimension")


@dataclass(frozen=True)
class EndpointConfig:
    """Streaming completion endpoint."""

    url: str
    model: str = "default"
    api_key: str | None = None
    timeout_s: float = 120.0
    connect_retries: int = 3
    backoff_s: float = 0.25

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EndpointConfig":
        return cls(
            url=d["url"],
            model=d.get("model", "default"),
            api_key=d.get("api_key"),
            timeout_s=d.get("timeout_s", 120.0),
            connect_retries=d.get("connect_retries", 3),
            backoff_s=d.get("backoff_s", 0.25),
        )


@dataclass(frozen=True)
class EmbedderConfig:
    """Embedding provider: `mock` (content-hash vectors) or `http`."""

    provider: str = "mock"
    url: str | None = None
    model: str = "default"
    api_key: str | None = None
    dimension: int = 64
    timeout_s: float = 60.0
    retries: int = 3
    backoff_s: float = 0.25

    @property
    def provider_id(self) -> str:
        if self.provider == "mock":
            return f"mock-embed-d{self.dimension}"
        return f"http-embed:{self.model}"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EmbedderConfig":
        return cls(
            provider=d.get("provider", "mock"),
            url=d.get("url"),
            model=d.get("model", "default"),
            api_key=d.get("api_key"),
            dimension=d.get("dimension", 64),
            timeout_s=d.get("timeout_s", 60.0),
            retries=d.get("retries", 3),
            backoff_s=d.get("backoff_s", 0.25),
        )


@dataclass(frozen=True)
class TranslatorConfig:
    """Translation provider: `mock` (identity) or `http`."""

    provider: str = "mock"
    url: str | None = None
    api_key: str | None = None
    timeout_s: float = 60.0
    retries: int = 3
    backoff_s: float = 0.25

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TranslatorConfig":
        return cls(
            provider=d.get("provider", "mock"),
            url=d.get("url"),
            api_key=d.get("api_key"),
            timeout_s=d.get("timeout_s", 60.0),
            retries=d.get("retries", 3),
            backoff_s=d.get("backoff_s", 0.25),
        )


@dataclass
class GatewayHandles:
    """Bundle of the three client handles an analytics pass needs."""

    embedder: Any = None
    translator: Any = None
    completion: Any = None
    extra: dict[str, Any] = field(default_factory=dict)
