"""Scripted behavior for the deterministic mock completion endpoint.

A script describes three things:

* ``rules``      — literal token sequences served when a prompt substring
                   matches (first match wins); handy for unit tests.
* ``answers``    — what to reply when the prompt ends with an answer-
                   extraction marker, as a function of how many reasoning
                   tokens precede the marker.
* ``generation`` — the default reasoning stream: per-segment word sources
                   (inline lists or bundled seed corpora), an optional
                   end-of-sequence cadence, and optional literal text spliced
                   in at fixed stream positions.

Every generated token is ``word⦂N `` where N is the global stream position.
The marker character never occurs in prompts or wait prompts, so the server
can recover its position after the harness extends the context (wait-prompt
injection, continuation after a dropped connection) and can count the
reasoning tokens present in an extraction prompt. The marker and digits are
non-alphabetic, so language identification over the text is unaffected.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..assets import seed_corpus_words
from ..errors import ConfigurationError
from ..model import Language

POSITION_MARKER = "⦂"  # "⦂"
_POSITION_RE = re.compile(re.escape(POSITION_MARKER) + r"(\d+)")

# Final line openers of the bundled answer prompts, all six languages.
DEFAULT_ANSWER_MARKERS = ("Answer:", "Antwort:", "Risposta:", "Resposta:", "Đáp án:", "Sagot:")

DEFAULT_INCORRECT_TEXT = "\\( \\boxed{0} \\)"


def split_preserving_whitespace(text: str) -> list[str]:
    """Split into chunks at whitespace→non-whitespace boundaries; the chunks
    concatenate back to the exact input."""
    if not text:
        return []
    return re.split(r"(?<=\s)(?=\S)", text)


def count_positions(text: str) -> int:
    """Number of marker-carrying tokens present in `text` (max index + 1)."""
    best = -1
    for m in _POSITION_RE.finditer(text):
        best = max(best, int(m.group(1)))
    return best + 1


@dataclass(frozen=True)
class LiteralRule:
    prompt_contains: str
    tokens: tuple[str, ...]
    then: str = "end_of_sequence"  # finish reason when tokens run out before max_tokens
    fail_times: int = 0  # serve HTTP 500 for the first N hits (retry testing)
    respond_status: int = 0  # if > 0, always respond with this HTTP status


@dataclass(frozen=True)
class AnswerOverride:
    question_contains: str
    correct_text: str | None = None
    correct_from_tokens: int | None = None


@dataclass(frozen=True)
class AnswerRules:
    markers: tuple[str, ...] = DEFAULT_ANSWER_MARKERS
    tail_chars: int = 600
    correct_from_tokens: int | None = None  # None: never correct
    correct_text: str = "\\( \\boxed{204} \\)"
    incorrect_text: str = DEFAULT_INCORRECT_TEXT
    overrides: tuple[AnswerOverride, ...] = ()

    def text_for(self, prompt: str, reasoning_tokens: int) -> str:
        correct_from = self.correct_from_tokens
        correct_text = self.correct_text
        for ov in self.overrides:
            if ov.question_contains in prompt:
                if ov.correct_from_tokens is not None:
                    correct_from = ov.correct_from_tokens
                if ov.correct_text is not None:
                    correct_text = ov.correct_text
                break
        if correct_from is not None and reasoning_tokens >= correct_from:
            return correct_text
        return self.incorrect_text


@dataclass(frozen=True)
class Segment:
    """A run of `tokens` stream positions drawn from one word source."""

    tokens: int | None  # None: unbounded (must be last)
    words: tuple[str, ...]


@dataclass(frozen=True)
class GenerationScript:
    segments: tuple[Segment, ...]
    eos_every: int = 0  # emit end_of_sequence whenever the position hits a multiple
    emit_at: dict[int, str] = field(default_factory=dict)  # position → literal text
    token_delay_ms: float = 0.0

    def word_at(self, position: int) -> str:
        if position in self.emit_at:
            return self.emit_at[position]
        offset = position
        for seg in self.segments:
            if seg.tokens is None or offset < seg.tokens:
                return seg.words[offset % len(seg.words)]
            offset -= seg.tokens
        # Past the scripted range: keep cycling the last segment.
        last = self.segments[-1]
        return last.words[offset % len(last.words)]

    def token_at(self, position: int) -> str:
        return f"{self.word_at(position)}{POSITION_MARKER}{position} "


@dataclass(frozen=True)
class MockScript:
    rules: tuple[LiteralRule, ...] = ()
    answers: AnswerRules = AnswerRules()
    generation: GenerationScript = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.generation is None:
            object.__setattr__(self, "generation", _default_generation())

    def is_answer_request(self, prompt: str) -> bool:
        tail = prompt[-self.answers.tail_chars :]
        return any(marker in tail for marker in self.answers.markers)


def _default_generation() -> GenerationScript:
    return GenerationScript(segments=(Segment(tokens=None, words=seed_corpus_words(Language.EN)),))


def _segment_from_dict(d: dict[str, Any]) -> Segment:
    if "words" in d:
        words = tuple(d["words"])
    elif "language" in d:
        words = seed_corpus_words(Language.parse(d["language"]))
    else:
        raise ConfigurationError("generation segment needs `words` or `language`")
    if not words:
        raise ConfigurationError("generation segment has an empty word source")
    tokens = d.get("tokens")
    if tokens is not None and tokens < 1:
        raise ConfigurationError("segment token count must be >= 1")
    return Segment(tokens=tokens, words=words)


def script_from_dict(data: dict[str, Any]) -> MockScript:
    rules = tuple(
        LiteralRule(
            prompt_contains=r["prompt_contains"],
            tokens=tuple(r.get("tokens", ())),
            then=r.get("then", "end_of_sequence"),
            fail_times=r.get("fail_times", 0),
            respond_status=r.get("respond_status", 0),
        )
        for r in data.get("rules", ())
    )

    a = data.get("answers", {})
    answers = AnswerRules(
        markers=tuple(a.get("markers", DEFAULT_ANSWER_MARKERS)),
        tail_chars=a.get("tail_chars", 600),
        correct_from_tokens=a.get("correct_from_tokens"),
        correct_text=a.get("correct_text", "\\( \\boxed{204} \\)"),
        incorrect_text=a.get("incorrect_text", DEFAULT_INCORRECT_TEXT),
        overrides=tuple(
            AnswerOverride(
                question_contains=o["question_contains"],
                correct_text=o.get("correct_text"),
                correct_from_tokens=o.get("correct_from_tokens"),
            )
            for o in a.get("overrides", ())
        ),
    )

    g = data.get("generation")
    if g is None:
        generation = _default_generation()
    else:
        segments = tuple(_segment_from_dict(s) for s in g.get("segments", ()))
        if not segments:
            generation = _default_generation()
            segments = generation.segments
        generation = GenerationScript(
            segments=segments,
            eos_every=g.get("eos_every", 0),
            emit_at={int(k): v for k, v in g.get("emit_at", {}).items()},
            token_delay_ms=g.get("token_delay_ms", 0.0),
        )

    return MockScript(rules=rules, answers=answers, generation=generation)


def load_script(path: str | Path) -> MockScript:
    with open(path, encoding="utf-8") as f:
        return script_from_dict(json.load(f))
