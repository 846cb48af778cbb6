"""
Domain types shared by every pipeline stage.

All types are immutable after construction and JSON-serializable, so they can
be passed between concurrent tasks and persisted to the run store without
further bookkeeping. Token records store the surface text exactly as served
by the completion endpoint; the harness never re-tokenizes, so token counts
always agree with the serving side's accounting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class ResourceClass(Enum):
    HIGH = "high"
    LOW = "low"


class Language(Enum):
    """Study languages plus the `other` bucket used by the classifier."""

    EN = "en"
    DE = "de"
    IT = "it"
    PT = "pt"
    VI = "vi"
    TL = "tl"
    OTHER = "other"

    @property
    def resource_class(self) -> ResourceClass | None:
        """High for en/de/it/pt, low for vi/tl, none for `other`."""
        if self in _HIGH_RESOURCE:
            return ResourceClass.HIGH
        if self in _LOW_RESOURCE:
            return ResourceClass.LOW
        return None

    @classmethod
    def parse(cls, code: str) -> "Language":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown language code: {code!r}") from None


_HIGH_RESOURCE = {Language.EN, Language.DE, Language.IT, Language.PT}
_LOW_RESOURCE = {Language.VI, Language.TL}

# Canonical ordering used everywhere a deterministic language order is needed
# (classifier tie-breaks, export sort keys, CSV rows).
CANONICAL_ORDER = (
    Language.EN,
    Language.DE,
    Language.IT,
    Language.PT,
    Language.VI,
    Language.TL,
    Language.OTHER,
)

STUDY_LANGUAGES = CANONICAL_ORDER[:-1]


def canonical_index(lang: Language) -> int:
    return CANONICAL_ORDER.index(lang)


@dataclass(frozen=True)
class Question:
    """One benchmark question in one language.

    Attributes:
        dataset_id:  Contest subset identifier.
        question_id: Stable id, unique within (dataset_id, language).
        language:    Language the text is written in.
        text:        Question statement.
        gold_answer: Integer answer in [0, 999].
    """

    dataset_id: str
    question_id: str
    language: Language
    text: str
    gold_answer: int

    def __post_init__(self) -> None:
        if not isinstance(self.gold_answer, int) or isinstance(self.gold_answer, bool):
            raise ValueError(f"gold answer must be an integer, got {self.gold_answer!r}")
        if not 0 <= self.gold_answer <= 999:
            raise ValueError(f"gold answer {self.gold_answer} outside [0, 999]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset_id": self.dataset_id,
            "question_id": self.question_id,
            "language": self.language.value,
            "text": self.text,
            "gold_answer": self.gold_answer,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Question":
        return cls(
            dataset_id=d["dataset_id"],
            question_id=d["question_id"],
            language=Language.parse(d["language"]),
            text=d["text"],
            gold_answer=d["gold_answer"],
        )


@dataclass(frozen=True)
class PromptBundle:
    """The five prompt components for one (language, question) pair.

    `prompt_text` is the generation context: system, demonstration, question
    and initiation joined with blank lines. The wait and answer prompts are
    held for later injection/extraction and are not part of the context.
    """

    system: str
    demonstration: str
    question: str
    initiation: str
    wait_prompt: str
    answer_prompt: str
    language: Language

    def __post_init__(self) -> None:
        for name in ("system", "demonstration", "question", "initiation", "wait_prompt", "answer_prompt"):
            if not getattr(self, name):
                raise ValueError(f"prompt component {name!r} is empty")

    @property
    def prompt_text(self) -> str:
        return "\n\n".join((self.system, self.demonstration, self.question, self.initiation))

    def to_dict(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "demonstration": self.demonstration,
            "question": self.question,
            "initiation": self.initiation,
            "wait_prompt": self.wait_prompt,
            "answer_prompt": self.answer_prompt,
            "language": self.language.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PromptBundle":
        return cls(
            system=d["system"],
            demonstration=d["demonstration"],
            question=d["question"],
            initiation=d["initiation"],
            wait_prompt=d["wait_prompt"],
            answer_prompt=d["answer_prompt"],
            language=Language.parse(d["language"]),
        )


@dataclass(frozen=True)
class TokenRecord:
    """One token of a reasoning stream.

    Generated tokens carry a stream-wide index; injected wait-prompt chunks
    carry none and never count toward the generation budget.
    """

    text: str
    generated_index: int | None
    injected: bool

    def to_dict(self) -> dict[str, Any]:
        return {"t": self.text, "i": self.generated_index, "inj": self.injected}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TokenRecord":
        return cls(text=d["t"], generated_index=d["i"], injected=d["inj"])


@dataclass(frozen=True)
class ReasoningTrace:
    """A budget-forced reasoning stream for one (language, question, sample).

    Attributes:
        tokens: Stream-ordered records, generated and injected interleaved.
        budget: Maximum number of generated (non-injected) tokens.
        sample_index: Which independent generation this is for the cell.
    """

    trace_id: str
    language: Language
    dataset_id: str
    question_id: str
    sample_index: int
    tokens: tuple[TokenRecord, ...]
    budget: int
    model_id: str
    created_at: str

    def __post_init__(self) -> None:
        if self.sample_index < 0:
            raise ValueError("sample_index must be >= 0")
        expected = 0
        for tok in self.tokens:
            if tok.injected:
                if tok.generated_index is not None:
                    raise ValueError("injected token carries a generated_index")
            else:
                if tok.generated_index != expected:
                    raise ValueError(
                        f"generated_index {tok.generated_index} out of order (expected {expected})"
                    )
                expected += 1
        if expected > self.budget:
            raise ValueError(f"{expected} generated tokens exceed budget {self.budget}")

    @property
    def generated_count(self) -> int:
        return sum(1 for t in self.tokens if not t.injected)

    @property
    def injected_count(self) -> int:
        return sum(1 for t in self.tokens if t.injected)

    @property
    def full_text(self) -> str:
        """Concatenated stream text, injected chunks in place."""
        return "".join(t.text for t in self.tokens)

    def generated_text(self, limit: int | None = None) -> str:
        """Text of the first `limit` generated tokens, injected text excluded."""
        out: list[str] = []
        for tok in self.tokens:
            if tok.injected:
                continue
            if limit is not None and tok.generated_index >= limit:
                break
            out.append(tok.text)
        return "".join(out)

    def stream_prefix_text(self, generated_limit: int) -> str:
        """Stream text up to and including the `generated_limit`-th generated
        token, with injected chunks kept in their stream positions."""
        if generated_limit == 0:
            return ""
        out: list[str] = []
        for tok in self.tokens:
            out.append(tok.text)
            if not tok.injected and tok.generated_index == generated_limit - 1:
                break
        return "".join(out)

    def to_dict(self) -> dict[str, Any]:
        return {
            "trace_id": self.trace_id,
            "language": self.language.value,
            "dataset_id": self.dataset_id,
            "question_id": self.question_id,
            "sample_index": self.sample_index,
            "tokens": [t.to_dict() for t in self.tokens],
            "budget": self.budget,
            "model_id": self.model_id,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ReasoningTrace":
        return cls(
            trace_id=d["trace_id"],
            language=Language.parse(d["language"]),
            dataset_id=d["dataset_id"],
            question_id=d["question_id"],
            sample_index=d["sample_index"],
            tokens=tuple(TokenRecord.from_dict(t) for t in d["tokens"]),
            budget=d["budget"],
            model_id=d["model_id"],
            created_at=d["created_at"],
        )


class ParseStatus(Enum):
    BOXED = "boxed"
    FALLBACK_LAST_INTEGER = "fallback_last_integer"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class CheckpointAnswer:
    """Answer elicited after the first 32k generated reasoning tokens."""

    k: int
    reasoning_tokens: int
    raw_answer_text: str
    parsed_answer: int | None
    parse_status: ParseStatus
    correct: bool

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.correct and self.parsed_answer is None:
            raise ValueError("correct answer without a parsed value")

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "reasoning_tokens": self.reasoning_tokens,
            "raw": self.raw_answer_text,
            "parsed": self.parsed_answer,
            "status": self.parse_status.value,
            "correct": self.correct,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CheckpointAnswer":
        return cls(
            k=d["k"],
            reasoning_tokens=d["reasoning_tokens"],
            raw_answer_text=d["raw"],
            parsed_answer=d["parsed"],
            parse_status=ParseStatus(d["status"]),
            correct=d["correct"],
        )


def checkpoint_indices(budget: int, stride: int = 32) -> range:
    """Valid checkpoint indices k with stride*k < budget."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return range((budget + stride - 1) // stride)


@dataclass(frozen=True)
class CellKey:
    """Identity of one generation unit: (language, question, sample)."""

    language: Language
    dataset_id: str
    question_id: str
    sample_index: int

    def as_string(self) -> str:
        return f"{self.language.value}|{self.dataset_id}|{self.question_id}|{self.sample_index}"

    @classmethod
    def from_string(cls, s: str) -> "CellKey":
        lang, dataset_id, question_id, sample = s.split("|")
        return cls(Language.parse(lang), dataset_id, question_id, int(sample))

    def sort_key(self) -> tuple:
        return (canonical_index(self.language), self.dataset_id, self.question_id, self.sample_index)

    @property
    def trace_id(self) -> str:
        safe = lambda s: "".join(c if c.isalnum() or c in "-_." else "-" for c in s)  # noqa: E731
        return f"{self.language.value}_{safe(self.dataset_id)}_{safe(self.question_id)}_s{self.sample_index:03d}"
