"""Embedding and translation providers, plus the shared content-hash cache.

The mock embedder derives a unit vector from a SHA-256 of (provider id,
text): deterministic across processes and platforms, identical text maps to
identical vectors, different text to (almost surely) different ones. The
mock translator is the identity function. Both let the full analytics
pipeline run hermetically."""

from __future__ import annotations

import hashlib
import logging
import threading
import time
from typing import Callable

import httpx
import numpy as np

from ..errors import ConfigurationError, InputError, TransportError
from ..model import Language
from .types import EmbedderConfig, EmbeddingVector, TranslatorConfig

log = logging.getLogger(__name__)


def _content_key(provider_id: str, text: str) -> str:
    return hashlib.sha256(f"{provider_id}\x00{text}".encode("utf-8")).hexdigest()


def _retrying_post(url: str, payload: dict, api_key: str | None, timeout_s: float, retries: int, backoff_s: float) -> dict:
    headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
    attempt = 0
    while True:
        try:
            response = httpx.post(url, json=payload, headers=headers, timeout=timeout_s)
            if 400 <= response.status_code < 500:
                raise ConfigurationError(f"provider rejected request ({response.status_code}): {response.text[:200]}")
            if response.status_code != 200:
                raise TransportError(f"provider returned {response.status_code}")
            return response.json()
        except (httpx.HTTPError, ValueError) as e:
            if attempt >= retries:
                raise TransportError(f"provider call failed: {e}") from e
            delay = backoff_s * (2**attempt)
            attempt += 1
            log.warning("provider call failed (attempt %d), retrying in %.2fs", attempt, delay)
            time.sleep(delay)


class MockEmbedder:
    def __init__(self, config: EmbedderConfig):
        self.config = config
        self.provider_id = config.provider_id

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise InputError("cannot embed empty text")
        digest = hashlib.sha256(f"{self.provider_id}\x00{text}".encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.Generator(np.random.PCG64(seed))
        vec = rng.standard_normal(self.config.dimension)
        vec /= np.linalg.norm(vec)
        return EmbeddingVector(values=tuple(float(v) for v in vec), provider_id=self.provider_id, dimension=self.config.dimension)


class HttpEmbedder:
    def __init__(self, config: EmbedderConfig):
        if not config.url:
            raise ConfigurationError("http embedder needs a url")
        self.config = config
        self.provider_id = config.provider_id
        self._dimension: int | None = None
        self._lock = threading.Lock()

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise InputError("cannot embed empty text")
        data = _retrying_post(
            self.config.url,
            {"model": self.config.model, "input": [text]},
            self.config.api_key,
            self.config.timeout_s,
            self.config.retries,
            self.config.backoff_s,
        )
        try:
            values = tuple(float(v) for v in data["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed embedding response: {e}") from e
        with self._lock:
            if self._dimension is None:
                self._dimension = len(values)
            elif self._dimension != len(values):
                raise ConfigurationError(
                    f"embedder dimension changed mid-run: {self._dimension} -> {len(values)}"
                )
        return EmbeddingVector(values=values, provider_id=self.provider_id, dimension=len(values))


class MockTranslator:
    provider_id = "mock-translate"

    def __init__(self, config: TranslatorConfig | None = None):
        self.config = config or TranslatorConfig()

    def translate(self, text: str, target: Language) -> str:
        if not text:
            raise InputError("cannot translate empty text")
        return text


class HttpTranslator:
    provider_id = "http-translate"

    def __init__(self, config: TranslatorConfig):
        if not config.url:
            raise ConfigurationError("http translator needs a url")
        self.config = config

    def translate(self, text: str, target: Language) -> str:
        if not text:
            raise InputError("cannot translate empty text")
        data = _retrying_post(
            self.config.url,
            {"text": text, "target": target.value},
            self.config.api_key,
            self.config.timeout_s,
            self.config.retries,
            self.config.backoff_s,
        )
        try:
            return data["translation"]
        except KeyError as e:
            raise TransportError("malformed translation response") from e


def make_embedder(config: EmbedderConfig):
    if config.provider == "mock":
        return MockEmbedder(config)
    if config.provider == "http":
        return HttpEmbedder(config)
    raise ConfigurationError(f"unknown embedder provider {config.provider!r}")


def make_translator(config: TranslatorConfig):
    if config.provider == "mock":
        return MockTranslator(config)
    if config.provider == "http":
        return HttpTranslator(config)
    raise ConfigurationError(f"unknown translator provider {config.provider!r}")


class ContentCache:
    """Thread-safe (key, text) -> value cache for embeddings/translations.

    Consistency analytics touch the same prefix hundreds of times per
    matrix cell; caching by content hash makes that one provider call."""

    def __init__(self) -> None:
        self._data: dict[str, object] = {}
        self._lock = threading.Lock()

    def get_or(self, namespace: str, text: str, compute: Callable[[], object]):
        key = _content_key(namespace, text)
        with self._lock:
            if key in self._data:
                return self._data[key]
        value = compute()
        with self._lock:
            self._data.setdefault(key, value)
        return value

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)


class CachingEmbedder:
    """Wrap any embedder with the content cache."""

    def __init__(self, inner, cache: ContentCache | None = None):
        self.inner = inner
        self.provider_id = inner.provider_id
        self.cache = cache or ContentCache()

    def embed(self, text: str) -> EmbeddingVector:
        return self.cache.get_or(f"embed:{self.provider_id}", text, lambda: self.inner.embed(text))


class CachingTranslator:
    def __init__(self, inner, cache: ContentCache | None = None):
        self.inner = inner
        self.provider_id = inner.provider_id
        self.cache = cache or ContentCache()

    def translate(self, text: str, target: Language) -> str:
        return self.cache.get_or(
            f"translate:{self.provider_id}:{target.value}", text, lambda: self.inner.translate(text, target)
        )
