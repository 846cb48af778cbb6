"""
Language fidelity analysis of reasoning traces.

The trace is cut into non-overlapping 32-token windows (generated tokens
only; injected wait prompts are harness-authored text, not model behavior),
each window gets a language label, and the label sequence is summarized two
ways: a 20-bin majority trace for coarse drift visualization, and a 100-bin
per-segment success score against the target language.

Identification is a character 1-3-gram multinomial classifier over the six
study languages plus `other`, trained from the bundled seed corpora. It is
hermetic and deterministic, which is what the test suite needs; anything
exposing `classify(text) -> Language` can be substituted. Windows are
lowercased and stripped of non-alphabetic characters before n-gram
extraction, so digits, LaTeX operators and the mock's position markers do
not bias classification.

Bin boundaries follow the floor rule: segment i of `bins` spans label
indices [floor(i*m/bins), floor((i+1)*m/bins)). The segment sizes differ by
at most one and always sum to m.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

from . import assets
from .errors import InputError
from .model import CANONICAL_ORDER, Language, ReasoningTrace, STUDY_LANGUAGES, canonical_index

_NON_ALPHA = re.compile(r"[^\W\d_]+", re.UNICODE)  # runs of alphabetic chars


def clean_for_ngrams(text: str) -> str:
    """Lowercase and keep only alphabetic runs, space-separated."""
    return " ".join(_NON_ALPHA.findall(text.lower()))


class NgramLanguageIdentifier:
    """Multinomial scorer over character n-grams of orders 1-3."""

    def __init__(self, corpora: dict[Language, str], orders: tuple[int, ...] = (1, 2, 3), smoothing: float = 0.5):
        if not corpora:
            raise InputError("identifier needs at least one training corpus")
        self.orders = orders
        self.smoothing = smoothing
        self.candidate_set: tuple[Language, ...] = tuple(
            l for l in CANONICAL_ORDER if l in corpora or l is Language.OTHER
        )
        self._counts: dict[Language, dict[int, Counter]] = {}
        self._totals: dict[Language, dict[int, int]] = {}
        vocab: dict[int, set[str]] = {n: set() for n in orders}
        for lang, text in corpora.items():
            cleaned = f" {clean_for_ngrams(text)} "
            per_order: dict[int, Counter] = {}
            totals: dict[int, int] = {}
            for n in orders:
                grams = Counter(cleaned[i : i + n] for i in range(len(cleaned) - n + 1))
                per_order[n] = grams
                totals[n] = sum(grams.values())
                vocab[n].update(grams)
            self._counts[lang] = per_order
            self._totals[lang] = totals
        self._vocab_sizes = {n: max(len(v), 1) for n, v in vocab.items()}

    def log_likelihood(self, text: str, lang: Language) -> float:
        cleaned = f" {clean_for_ngrams(text)} "
        counts = self._counts[lang]
        totals = self._totals[lang]
        score = 0.0
        for n in self.orders:
            denom = totals[n] + self.smoothing * self._vocab_sizes[n]
            grams = counts[n]
            for i in range(len(cleaned) - n + 1):
                score += math.log((grams[cleaned[i : i + n]] + self.smoothing) / denom)
        return score

    def posterior(self, text: str) -> dict[Language, float]:
        """Proper posterior over the candidate set (uniform prior)."""
        trained = [l for l in self.candidate_set if l in self._counts]
        if not clean_for_ngrams(text):
            return {l: (1.0 if l is Language.OTHER else 0.0) for l in self.candidate_set}
        logs = {l: self.log_likelihood(text, l) for l in trained}
        peak = max(logs.values())
        exps = {l: math.exp(v - peak) for l, v in logs.items()}
        total = sum(exps.values())
        post = {l: exps[l] / total for l in trained}
        if Language.OTHER in self.candidate_set and Language.OTHER not in post:
            post[Language.OTHER] = 0.0
        return post

    def classify(self, text: str) -> Language:
        """Argmax posterior; ties broken by canonical candidate order."""
        post = self.posterior(text)
        return min(post, key=lambda l: (-post[l], canonical_index(l)))


@lru_cache(maxsize=1)
def default_identifier() -> NgramLanguageIdentifier:
    """Identifier trained on the full bundled seed corpora."""
    return NgramLanguageIdentifier({lang: assets.seed_corpus_text(lang) for lang in STUDY_LANGUAGES})


# ---------------------------------------------------------------------------
# Windowing and binning
# ---------------------------------------------------------------------------


class Window(NamedTuple):
    index: int
    text: str


def window_partition(trace: ReasoningTrace, width: int = 32) -> list[Window]:
    """Non-overlapping windows over generated tokens only; a trailing
    remainder shorter than `width` is dropped."""
    if width < 1:
        raise InputError("window width must be >= 1")
    generated = [t.text for t in trace.tokens if not t.injected]
    count = len(generated) // width
    return [Window(index=i, text="".join(generated[i * width : (i + 1) * width])) for i in range(count)]


def classify_windows(windows: Iterable[Window], identifier: NgramLanguageIdentifier | None = None) -> list[Language]:
    identifier = identifier or default_identifier()
    return [identifier.classify(w.text) for w in windows]


def floor_partition(m: int, bins: int) -> list[tuple[int, int]]:
    """Near-equal split of m items into `bins` segments, floor boundaries."""
    if bins < 1:
        raise InputError("bins must be >= 1")
    if m < bins:
        raise InputError(f"cannot split {m} labels into {bins} bins (trace too short)")
    return [(i * m // bins, (i + 1) * m // bins) for i in range(bins)]


def majority_downsample(labels: list[Language], bins: int = 20) -> list[Language]:
    """Per-segment mode; ties broken by earliest first occurrence in the
    segment."""
    if not labels:
        raise InputError("no labels to downsample")
    out: list[Language] = []
    for start, end in floor_partition(len(labels), bins):
        segment = labels[start:end]
        counts = Counter(segment)
        best = max(counts.values())
        out.append(next(l for l in segment if counts[l] == best))
    return out


def fidelity_score(labels: list[Language], target: Language, bins: int = 100) -> list[float]:
    """Per-segment fraction of labels equal to the target language."""
    if not labels:
        raise InputError("no labels to score")
    out: list[float] = []
    for start, end in floor_partition(len(labels), bins):
        segment = labels[start:end]
        out.append(sum(1 for l in segment if l == target) / len(segment))
    return out


@dataclass(frozen=True)
class LanguageTrace:
    """Per-trace fidelity record: window labels plus both bin summaries."""

    trace_ref: str
    target: Language
    window_labels: tuple[Language, ...]
    majority_bins: tuple[Language, ...]
    fidelity_bins: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "trace_ref": self.trace_ref,
            "target": self.target.value,
            "window_labels": [l.value for l in self.window_labels],
            "majority_bins": [l.value for l in self.majority_bins],
            "fidelity_bins": list(self.fidelity_bins),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LanguageTrace":
        return cls(
            trace_ref=d["trace_ref"],
            target=Language.parse(d["target"]),
            window_labels=tuple(Language.parse(v) for v in d["window_labels"]),
            majority_bins=tuple(Language.parse(v) for v in d["majority_bins"]),
            fidelity_bins=tuple(d["fidelity_bins"]),
        )


def analyze_trace(
    trace: ReasoningTrace,
    identifier: NgramLanguageIdentifier | None = None,
    width: int = 32,
    majority_bins: int = 20,
    fine_bins: int = 100,
) -> LanguageTrace:
    """Full fidelity pass over one trace."""
    labels = classify_windows(window_partition(trace, width), identifier)
    return LanguageTrace(
        trace_ref=trace.trace_id,
        target=trace.language,
        window_labels=tuple(labels),
        majority_bins=tuple(majority_downsample(labels, majority_bins)),
        fidelity_bins=tuple(fidelity_score(labels, trace.language, fine_bins)),
    )


# ---------------------------------------------------------------------------
# Quality gate
# ---------------------------------------------------------------------------


def evaluate_identifier(window_tokens: int = 32, holdout_every: int = 4) -> dict[Language, float]:
    """Held-out self-classification accuracy per language.

    Every `holdout_every`-th seed-corpus line is held out; the identifier is
    trained on the rest and scored on non-overlapping `window_tokens`-word
    windows of the held-out text."""
    train: dict[Language, str] = {}
    held: dict[Language, list[str]] = {}
    for lang in STUDY_LANGUAGES:
        lines = assets.seed_corpus_lines(lang)
        held[lang] = [l for i, l in enumerate(lines) if i % holdout_every == holdout_every - 1]
        train[lang] = "\n".join(l for i, l in enumerate(lines) if i % holdout_every != holdout_every - 1)
    identifier = NgramLanguageIdentifier(train)

    accuracy: dict[Language, float] = {}
    for lang in STUDY_LANGUAGES:
        words = " ".join(held[lang]).split()
        windows = [
            " ".join(words[i * window_tokens : (i + 1) * window_tokens])
            for i in range(len(words) // window_tokens)
        ]
        if not windows:
            raise InputError(f"held-out corpus for {lang.value} yields no {window_tokens}-token windows")
        hits = sum(1 for w in windows if identifier.classify(w) == lang)
        accuracy[lang] = hits / len(windows)
    return accuracy
