"""Streaming client for the completion wire protocol.

One stream event per served token. Connection-phase failures are retried
with exponential backoff; once the first token has been yielded a failure
propagates instead, because the caller owns resumption (it re-issues the
request from its last persisted state, which is what keeps the no-duplicate
guarantee)."""

from __future__ import annotations

import json
import logging
import time
from typing import Iterator

import httpx

from ..errors import ConfigurationError, TransportError
from .types import CompletionRequest, EndpointConfig, StopReason, StreamEvent

log = logging.getLogger(__name__)


def _terminal_event(choice: dict) -> StreamEvent:
    reason = choice.get("finish_reason")
    if reason == "length":
        stop = StopReason.LENGTH
    elif choice.get("matched_stop") or choice.get("stop_reason"):
        stop = StopReason.STOP_SEQUENCE
    else:
        stop = StopReason.END_OF_SEQUENCE
    return StreamEvent(kind="stop", stop_reason=stop)


class CompletionClient:
    """Shareable handle; each stream is consumed by a single task."""

    def __init__(self, endpoint: EndpointConfig):
        self.endpoint = endpoint
        headers = {}
        if endpoint.api_key:
            headers["Authorization"] = f"Bearer {endpoint.api_key}"
        self._client = httpx.Client(timeout=endpoint.timeout_s, headers=headers)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "CompletionClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def complete_stream(self, request: CompletionRequest) -> Iterator[StreamEvent]:
        """Yield token events then exactly one stop event."""
        attempt = 0
        while True:
            started = False
            try:
                for started, event in self._stream_once(request):
                    yield event
                return
            except TransportError:
                if started or attempt >= self.endpoint.connect_retries:
                    raise
                delay = self.endpoint.backoff_s * (2**attempt)
                attempt += 1
                log.warning("completion connect failed (attempt %d), retrying in %.2fs", attempt, delay)
                time.sleep(delay)

    def complete_text(self, request: CompletionRequest) -> tuple[str, StopReason]:
        """Consume a whole stream; returns (concatenated text, stop reason)."""
        parts: list[str] = []
        reason = StopReason.NONE
        for event in self.complete_stream(request):
            if event.kind == "token":
                parts.append(event.token_text)
            else:
                reason = event.stop_reason
        return "".join(parts), reason

    def _stream_once(self, request: CompletionRequest) -> Iterator[tuple[bool, StreamEvent]]:
        payload = {
            "model": self.endpoint.model,
            "prompt": request.prompt_text,
            "max_tokens": request.max_new_tokens,
            "stop": list(request.stop_sequences) or None,
            "temperature": request.temperature,
            "stream": True,
        }
        started = False
        saw_terminal = False
        try:
            with self._client.stream("POST", self.endpoint.url, json=payload) as response:
                if 400 <= response.status_code < 500:
                    response.read()
                    raise ConfigurationError(
                        f"endpoint rejected request ({response.status_code}): {response.text[:200]}"
                    )
                if response.status_code != 200:
                    response.read()
                    raise TransportError(f"endpoint returned {response.status_code}")
                for line in response.iter_lines():
                    if not line.startswith("data:"):
                        continue
                    data = line[len("data:") :].strip()
                    if data == "[DONE]":
                        break
                    choice = json.loads(data)["choices"][0]
                    if choice.get("finish_reason"):
                        saw_terminal = True
                        yield started, _terminal_event(choice)
                        break
                    started = True
                    yield started, StreamEvent(kind="token", token_text=choice.get("text", ""))
        except GeneratorExit:
            raise
        except httpx.HTTPError as e:
            raise TransportError(f"completion stream failed: {e}") from e
        if not saw_terminal:
            raise TransportError("stream ended without a terminal event")
