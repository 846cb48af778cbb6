"""Deterministic mock completion endpoint speaking the streaming wire protocol.

POST /v1/completions with ``{"model", "prompt", "max_tokens", "stop",
"temperature", "stream": true}`` answers with server-sent events, one token
per event and a terminal event carrying the finish reason (plus the matched
stop string when a stop sequence fired), followed by ``data: [DONE]``. The
same shape mainstream completion servers emit, so the production client is
exercised unchanged in tests.

Event sequences are a pure function of (script, request); the only state is
the per-rule failure counter used to test retry behavior.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import ConfigurationError
from .mock_script import MockScript, count_positions, split_preserving_whitespace

_STOP_TAIL_CHARS = 64  # enough context to catch stop strings spanning tokens


@dataclass
class PlannedResponse:
    status: int = 200
    tokens: tuple[str, ...] = ()
    finish_reason: str = "stop"  # "length" | "stop"
    matched_stop: str | None = None  # set → stop-sequence hit; unset stop → end of sequence
    error: str = ""


def _emit(token_source, max_tokens: int, stop_sequences: list[str]) -> tuple[list[str], str, str | None]:
    """Shared cap / stop-sequence logic. `token_source` is an iterator that
    exhausts when the script has nothing further to say."""
    emitted: list[str] = []
    tail = ""
    while True:
        if len(emitted) >= max_tokens:
            return emitted, "length", None
        tok = next(token_source, None)
        if tok is None:
            return emitted, "stop", None
        candidate = tail + tok
        for s in stop_sequences:
            if s in candidate:
                return emitted, "stop", s
        emitted.append(tok)
        tail = candidate[-_STOP_TAIL_CHARS:]


class _RuleState:
    def __init__(self) -> None:
        self.hits: dict[int, int] = {}
        self.lock = threading.Lock()

    def hit(self, rule_index: int) -> int:
        with self.lock:
            n = self.hits.get(rule_index, 0) + 1
            self.hits[rule_index] = n
            return n


def plan_response(script: MockScript, request: dict, state: _RuleState) -> PlannedResponse:
    prompt = request.get("prompt", "")
    max_tokens = int(request.get("max_tokens", 0))
    stop = request.get("stop") or []
    if isinstance(stop, str):
        stop = [stop]

    if script.is_answer_request(prompt):
        text = script.answers.text_for(prompt, count_positions(prompt))
        tokens, reason, matched = _emit(iter(split_preserving_whitespace(text)), max_tokens, stop)
        return PlannedResponse(tokens=tuple(tokens), finish_reason=reason, matched_stop=matched)

    for index, rule in enumerate(script.rules):
        if rule.prompt_contains not in prompt:
            continue
        if rule.respond_status:
            return PlannedResponse(status=rule.respond_status, error=f"scripted status {rule.respond_status}")
        if rule.fail_times and state.hit(index) <= rule.fail_times:
            return PlannedResponse(status=500, error="scripted transient failure")
        tokens, reason, matched = _emit(iter(rule.tokens), max_tokens, stop)
        if reason == "stop" and matched is None and rule.then == "length":
            reason = "length"
        return PlannedResponse(tokens=tuple(tokens), finish_reason=reason, matched_stop=matched)

    start = count_positions(prompt)
    generation = script.generation

    def stream_tokens():
        position = start
        while True:
            if generation.eos_every and position > start and position % generation.eos_every == 0:
                return
            yield generation.token_at(position)
            position += 1

    tokens, reason, matched = _emit(stream_tokens(), max_tokens, stop)
    return PlannedResponse(tokens=tuple(tokens), finish_reason=reason, matched_stop=matched)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "mtscale-mock"

    def log_message(self, fmt, *args):  # silence per-request stderr noise
        pass

    def do_GET(self):
        if self.path == "/healthz":
            body = b'{"ok": true}'
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        else:
            self._plain_error(404, "not found")

    def do_POST(self):
        if self.path != "/v1/completions":
            self._plain_error(404, "not found")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length))
        except (ValueError, json.JSONDecodeError):
            self._plain_error(400, "bad request body")
            return

        planned = plan_response(self.server.script, request, self.server.rule_state)  # type: ignore[attr-defined]
        if planned.status != 200:
            self._plain_error(planned.status, planned.error)
            return
        if request.get("stream", True):
            self._stream(planned)
        else:
            body = json.dumps(
                {
                    "object": "text_completion",
                    "choices": [
                        {
                            "index": 0,
                            "text": "".join(planned.tokens),
                            "finish_reason": planned.finish_reason,
                            "matched_stop": planned.matched_stop,
                        }
                    ],
                }
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    def _plain_error(self, status: int, message: str) -> None:
        body = json.dumps({"error": message}).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _stream(self, planned: PlannedResponse) -> None:
        delay = self.server.script.generation.token_delay_ms / 1000.0  # type: ignore[attr-defined]
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Transfer-Encoding", "chunked")
        self.end_headers()
        terminal = {
            "choices": [
                {
                    "index": 0,
                    "text": "",
                    "finish_reason": planned.finish_reason,
                    "matched_stop": planned.matched_stop,
                }
            ]
        }
        try:
            if delay:
                for tok in planned.tokens:
                    self._chunk(_sse({"choices": [{"index": 0, "text": tok, "finish_reason": None}]}))
                    time.sleep(delay)
                self._chunk(_sse(terminal))
                self._chunk(b"data: [DONE]\n\n")
            else:
                body = b"".join(
                    _sse({"choices": [{"index": 0, "text": tok, "finish_reason": None}]})
                    for tok in planned.tokens
                )
                self._chunk(body + _sse(terminal) + b"data: [DONE]\n\n")
            self.wfile.write(b"0\r\n\r\n")
        except (BrokenPipeError, ConnectionResetError):
            self.close_connection = True

    def _chunk(self, payload: bytes) -> None:
        self.wfile.write(f"{len(payload):x}\r\n".encode() + payload + b"\r\n")


def _sse(obj: dict) -> bytes:
    return b"data: " + json.dumps(obj, ensure_ascii=False).encode("utf-8") + b"\n\n"


class _QuietServer(ThreadingHTTPServer):
    def handle_error(self, request, client_address):
        import sys

        exc = sys.exc_info()[1]
        if isinstance(exc, (BrokenPipeError, ConnectionResetError)):
            return  # client hung up (stream cancel, pool teardown); expected
        super().handle_error(request, client_address)


class MockCompletionServer:
    """Script-driven endpoint on localhost; `port=0` picks a free port."""

    def __init__(self, script: MockScript, host: str = "127.0.0.1", port: int = 0):
        self._server = _QuietServer((host, port), _Handler)
        self._server.daemon_threads = True
        self._server.script = script  # type: ignore[attr-defined]
        self._server.rule_state = _RuleState()  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1/completions"

    def start(self) -> "MockCompletionServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockCompletionServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_mock(script: MockScript, host: str = "127.0.0.1", port: int = 0) -> MockCompletionServer:
    """Start a mock endpoint for the given script; caller stops it."""
    try:
        return MockCompletionServer(script, host=host, port=port).start()
    except OSError as e:
        raise ConfigurationError(f"mock server could not bind {host}:{port}: {e}") from e
