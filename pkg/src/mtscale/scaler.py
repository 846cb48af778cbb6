"""
Budget-forced generation, checkpoint answer extraction, and scaling curves.

One trace is grown in rounds: the model streams tokens until it either fills
the remaining budget or tries to finish (end of sequence, or a final-answer
marker in the last few generated tokens). On a finish attempt the
language-specific wait prompt is appended to the stream as injected text and
generation resumes from the extended context. Injected text never counts
toward the budget and never appears in any checkpoint prefix arithmetic.

Checkpoint answers are elicited with a fresh completion over the prompt plus
the stream prefix up to the 32k-th generated token plus the answer prompt;
the output is parsed but never appended to the trace, so extraction at any k
leaves the stored trace byte-identical.
"""

from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterable

from .corpus import PromptCatalog
from .errors import ConfigurationError, HarnessError, InputError, TransportError
from .gateway.completion import CompletionClient
from .gateway.mock_script import split_preserving_whitespace
from .gateway.types import CompletionRequest, StopReason
from .model import (
    CheckpointAnswer,
    Language,
    ParseStatus,
    PromptBundle,
    Question,
    ReasoningTrace,
    ResourceClass,
    TokenRecord,
    canonical_index,
    checkpoint_indices,
)

log = logging.getLogger(__name__)

ANSWER_ATTEMPT_MARKER = "\\boxed{"


@dataclass(frozen=True)
class ScalingPolicy:
    """Generation budget and checkpoint schedule.

    `at_limits=None` means a checkpoint at every stride (the full schedule);
    otherwise only at the listed reasoning-token limits. A limit that is not
    a stride multiple maps to the largest checkpoint at or below it."""

    budget: int = 10000
    stride: int = 32
    at_limits: tuple[int, ...] | None = None
    answer_temperature: float = 0.0
    max_answer_tokens: int = 32
    reasoning_temperature: float = 0.7
    injection_cap: int = 50
    trigger_window: int = 16  # generated tokens scanned for the final-answer marker

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ConfigurationError("stride must be >= 1")
        if self.budget < 1:
            raise ConfigurationError("budget must be >= 1")
        if self.at_limits is not None:
            for limit in self.at_limits:
                if not 0 < limit < self.budget:
                    raise ConfigurationError(f"checkpoint limit {limit} must lie in (0, budget)")

    def checkpoint_ks(self) -> list[int]:
        if self.at_limits is None:
            return list(checkpoint_indices(self.budget, self.stride))
        return sorted({limit // self.stride for limit in self.at_limits})

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "stride": self.stride,
            "at_limits": list(self.at_limits) if self.at_limits is not None else None,
            "answer_temperature": self.answer_temperature,
            "max_answer_tokens": self.max_answer_tokens,
            "reasoning_temperature": self.reasoning_temperature,
            "injection_cap": self.injection_cap,
            "trigger_window": self.trigger_window,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingPolicy":
        limits = d.get("at_limits")
        return cls(
            budget=d.get("budget", 10000),
            stride=d.get("stride", 32),
            at_limits=tuple(limits) if limits is not None else None,
            answer_temperature=d.get("answer_temperature", 0.0),
            max_answer_tokens=d.get("max_answer_tokens", 32),
            reasoning_temperature=d.get("reasoning_temperature", 0.7),
            injection_cap=d.get("injection_cap", 50),
            trigger_window=d.get("trigger_window", 16),
        )


def build_prompt(catalog: PromptCatalog, question: Question) -> PromptBundle:
    """Concatenate system, demonstration, question and initiation (blank line
    between components), all in the question's language."""
    entry = catalog.entry(question.language)
    return PromptBundle(
        system=entry.system,
        demonstration=entry.demonstration,
        question=question.text,
        initiation=entry.initiation,
        wait_prompt=entry.wait,
        answer_prompt=entry.answer,
        language=question.language,
    )


@dataclass
class TraceOutcome:
    trace: ReasoningTrace
    injections: int
    cap_reached: bool


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_trace(
    bundle: PromptBundle,
    policy: ScalingPolicy,
    client: CompletionClient,
    trace_id: str = "trace",
    dataset_id: str = "dataset",
    question_id: str = "q",
    sample_index: int = 0,
    sink: Callable[[TokenRecord], None] | None = None,
    max_stream_restarts: int = 3,
) -> TraceOutcome:
    """Grow one budget-forced reasoning trace.

    `sink` gets every token record as soon as it exists, so a crash leaves a
    usable partial trail; on a mid-stream transport failure generation is
    re-issued from the already-received text (never duplicating tokens) up to
    `max_stream_restarts` times."""
    records: list[TokenRecord] = []
    generated = 0
    injections = 0
    cap_reached = False
    restarts = 0
    tail: deque[str] = deque(maxlen=policy.trigger_window)

    def emit(record: TokenRecord) -> None:
        records.append(record)
        if sink is not None:
            sink(record)

    while generated < policy.budget:
        request = CompletionRequest(
            prompt_text=bundle.prompt_text + "".join(r.text for r in records),
            max_new_tokens=policy.budget - generated,
            temperature=policy.reasoning_temperature,
        )
        stop_reason = StopReason.NONE
        triggered = False
        progressed = False
        stream = client.complete_stream(request)
        try:
            for event in stream:
                if event.kind == "token":
                    emit(TokenRecord(text=event.token_text, generated_index=generated, injected=False))
                    generated += 1
                    progressed = True
                    tail.append(event.token_text)
                    if ANSWER_ATTEMPT_MARKER in "".join(tail):
                        triggered = True
                        stream.close()
                        break
                else:
                    stop_reason = event.stop_reason
        except TransportError as e:
            restarts += 1
            if restarts > max_stream_restarts:
                log.error("trace %s: stream failed after %d restarts", trace_id, restarts - 1)
                raise
            log.warning("trace %s: stream dropped (%s); continuing from persisted state", trace_id, e)
            continue

        if generated >= policy.budget:
            break
        if triggered or stop_reason in (StopReason.END_OF_SEQUENCE, StopReason.STOP_SEQUENCE):
            if injections >= policy.injection_cap:
                cap_reached = True
                log.warning("trace %s: wait-prompt injection cap (%d) reached", trace_id, policy.injection_cap)
                break
            for chunk in split_preserving_whitespace(bundle.wait_prompt + "\n"):
                emit(TokenRecord(text=chunk, generated_index=None, injected=True))
            injections += 1
            tail.clear()  # the handled attempt must not re-trigger after resume
            continue
        if stop_reason is StopReason.LENGTH:
            if not progressed:
                raise HarnessError(f"trace {trace_id}: endpoint reported length without progress")
            continue  # server-side cap below our budget; ask for the rest
        raise HarnessError(f"trace {trace_id}: stream ended without a stop event")

    trace = ReasoningTrace(
        trace_id=trace_id,
        language=bundle.language,
        dataset_id=dataset_id,
        question_id=question_id,
        sample_index=sample_index,
        tokens=tuple(records),
        budget=policy.budget,
        model_id=client.endpoint.model,
        created_at=_now_iso(),
    )
    return TraceOutcome(trace=trace, injections=injections, cap_reached=cap_reached)


# ---------------------------------------------------------------------------
# Answer parsing and exact match
# ---------------------------------------------------------------------------

_BOXED_RE = re.compile(r"\\boxed\s*\{")
# A digit run is standalone when it is not glued to another digit and not
# part of a decimal number ("3.14" has none; "070." has one).
_STANDALONE_INT = re.compile(r"(?<!\d)(?<!\d\.)(\d+)(?!\.?\d)")
_LATEX_NOISE = re.compile(r"\\[a-zA-Z]+|[{}$~,\s]|\\")


def _boxed_contents(text: str) -> list[str]:
    """All \\boxed{...} bodies, brace-balanced, in order of appearance."""
    out = []
    for m in _BOXED_RE.finditer(text):
        depth = 1
        start = m.end()
        for pos in range(start, len(text)):
            if text[pos] == "{":
                depth += 1
            elif text[pos] == "}":
                depth -= 1
                if depth == 0:
                    out.append(text[start:pos])
                    break
    return out

def parse_answer(text: str) -> tuple[int | None, ParseStatus]:
    """Integer from the last \\boxed{...}; else the last standalone integer;
    leading zeros and surrounding LaTeX stripped."""
    for inner in reversed(_boxed_contents(text)):
        cleaned = _LATEX_NOISE.sub("", inner)
        if re.fullmatch(r"[+-]?\d+", cleaned):
            return int(cleaned), ParseStatus.BOXED
    matches = _STANDALONE_INT.findall(text)
    if matches:
        return int(matches[-1]), ParseStatus.FALLBACK_LAST_INTEGER
    return None, ParseStatus.UNPARSEABLE


def exact_match(parsed: int | None, gold: int) -> bool:
    if not 0 <= gold <= 999:
        raise InputError(f"gold answer {gold} outside [0, 999]")
    return parsed is not None and parsed == gold


def extract_answer(
    trace: ReasoningTrace,
    k: int,
    bundle: PromptBundle,
    client: CompletionClient,
    policy: ScalingPolicy,
    gold: int,
) -> CheckpointAnswer:
    """Elicit the answer after the first stride*k generated tokens."""
    reasoning_tokens = k * policy.stride
    if reasoning_tokens >= trace.budget:
        raise InputError(f"checkpoint k={k} is at or beyond the budget {trace.budget}")
    if trace.generated_count < reasoning_tokens:
        raise InputError(
            f"trace holds {trace.generated_count} generated tokens, checkpoint k={k} needs {reasoning_tokens}"
        )
    request = CompletionRequest(
        prompt_text=bundle.prompt_text + trace.stream_prefix_text(reasoning_tokens) + "\n\n" + bundle.answer_prompt,
        max_new_tokens=policy.max_answer_tokens,
        temperature=policy.answer_temperature,
    )
    raw, _ = client.complete_text(request)
    parsed, status = parse_answer(raw)
    return CheckpointAnswer(
        k=k,
        reasoning_tokens=reasoning_tokens,
        raw_answer_text=raw,
        parsed_answer=parsed,
        parse_status=status,
        correct=exact_match(parsed, gold),
    )


# ---------------------------------------------------------------------------
# Curve aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoredCheckpoint:
    """One scored checkpoint answer, flattened for aggregation."""

    language: Language
    dataset_id: str
    question_id: str
    sample_index: int
    k: int
    reasoning_tokens: int
    correct: bool


@dataclass(frozen=True)
class ScalingCurve:
    group: str  # language code or resource-class name
    grouping: str  # "per_language" | "per_resource_class"
    points: tuple[tuple[int, float, int], ...]  # (reasoning_tokens, accuracy, n) sorted


def scaling_curve(
    checkpoints: Iterable[ScoredCheckpoint],
    grouping: str = "per_language",
    limits: Iterable[int] | None = None,
) -> list[ScalingCurve]:
    """Accuracy per reasoning-token value. Per language: the exact ratio of
    correct over all (question, sample) pairs. Per resource class: the
    equal-weight mean of the member languages' curves."""
    if grouping not in ("per_language", "per_resource_class"):
        raise InputError(f"unknown grouping {grouping!r}")

    by_language: dict[Language, dict[int, list[bool]]] = {}
    for record in checkpoints:
        by_language.setdefault(record.language, {}).setdefault(record.reasoning_tokens, []).append(record.correct)

    if limits is not None:
        # Each limit selects the largest checkpoint at or below it (limits
        # need not be stride multiples).
        available = sorted({t for per_tokens in by_language.values() for t in per_tokens})
        wanted = {max((t for t in available if t <= limit), default=None) for limit in limits}
        wanted.discard(None)
        by_language = {
            lang: {t: flags for t, flags in per_tokens.items() if t in wanted}
            for lang, per_tokens in by_language.items()
        }

    language_curves: dict[Language, dict[int, tuple[float, int]]] = {}
    for lang, per_tokens in by_language.items():
        language_curves[lang] = {
            tokens: (sum(flags) / len(flags), len(flags)) for tokens, flags in per_tokens.items()
        }

    if grouping == "per_language":
        return [
            ScalingCurve(
                group=lang.value,
                grouping=grouping,
                points=tuple(sorted((t, acc, n) for t, (acc, n) in language_curves[lang].items())),
            )
            for lang in sorted(language_curves, key=canonical_index)
        ]

    curves = []
    for cls in (ResourceClass.HIGH, ResourceClass.LOW):
        members = [l for l in language_curves if l.resource_class is cls]
        if not members:
            continue
        token_values = sorted({t for l in members for t in language_curves[l]})
        points = []
        for tokens in token_values:
            cells = [language_curves[l][tokens] for l in members if tokens in language_curves[l]]
            accuracy = sum(acc for acc, _ in cells) / len(cells)
            points.append((tokens, accuracy, sum(n for _, n in cells)))
        curves.append(ScalingCurve(group=cls.value, grouping=grouping, points=tuple(points)))
    return curves
