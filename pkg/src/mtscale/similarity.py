"""Similarity analytics: incremental-segment similarity against English and
intra/inter-language consistency of 32-token reasoning prefixes.

Two embedding pathways are supported: embed segments directly with a
multilingual encoder, or translate everything to English first and embed
with a monolingual encoder. Consistency always uses the translate-first
route. Failed provider calls are excluded from means (and counted), never
imputed."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError, TransportError
from .gateway.types import EmbeddingVector
from .model import Language, ReasoningTrace, canonical_index

log = logging.getLogger(__name__)


class Pathway(Enum):
    MULTILINGUAL_EMBED = "multilingual_embed"
    TRANSLATE_THEN_EMBED = "translate_then_embed"


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dimension != b.dimension:
        raise InputError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    va = np.asarray(a.values)
    vb = np.asarray(b.values)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise InputError("cosine similarity undefined for a zero vector")
    if a.values == b.values:
        return 1.0
    # Round-off can push the quotient a hair outside [-1, 1]; clamp.
    return max(-1.0, min(1.0, float(np.dot(va, vb) / (na * nb))))


def incremental_segments(trace: ReasoningTrace, max_tokens: int = 1000, step: int = 32) -> list[str]:
    """Nested prefixes of the generated stream: segment k covers the first
    step*(k+1) generated tokens, for step*(k+1) <= min(max_tokens, length)."""
    if step < 1:
        raise InputError("step must be >= 1")
    limit = min(max_tokens, trace.generated_count)
    return [trace.generated_text(limit=(k + 1) * step) for k in range((limit // step))]


def rolling_average(points: list[float], window: int = 5) -> list[float]:
    """Trailing mean; output[i] = mean(points[i .. i+window-1])."""
    if window < 1:
        raise InputError("window must be >= 1")
    if len(points) < window:
        raise InputError(f"need at least {window} points, got {len(points)}")
    return [sum(points[i : i + window]) / window for i in range(len(points) - window + 1)]


@dataclass(frozen=True)
class SimilaritySeries:
    language: Language
    pathway: Pathway
    points: tuple[tuple[int, float], ...]  # (k, cosine), k strictly increasing
    missing: tuple[int, ...] = ()
    smoothed: tuple[float, ...] | None = None

    def values(self) -> list[float]:
        return [c for _, c in self.points]

    def with_smoothing(self, window: int = 5) -> "SimilaritySeries":
        return SimilaritySeries(
            language=self.language,
            pathway=self.pathway,
            points=self.points,
            missing=self.missing,
            smoothed=tuple(rolling_average(self.values(), window)),
        )


def similarity_to_english(
    segments_l: list[str],
    segments_en: list[str],
    pathway: Pathway,
    embedder,
    translator=None,
    language: Language = Language.EN,
) -> SimilaritySeries:
    """Per-segment cosine between a language's incremental prefixes and their
    English counterparts."""
    if len(segments_l) != len(segments_en):
        raise InputError(f"segment count mismatch: {len(segments_l)} vs {len(segments_en)}")
    if pathway is Pathway.TRANSLATE_THEN_EMBED and translator is None:
        raise InputError("translate_then_embed pathway needs a translator")

    points: list[tuple[int, float]] = []
    missing: list[int] = []
    for k, (seg_l, seg_en) in enumerate(zip(segments_l, segments_en)):
        try:
            text_l = seg_l
            if pathway is Pathway.TRANSLATE_THEN_EMBED and language is not Language.EN:
                text_l = translator.translate(seg_l, Language.EN)
            points.append((k, cosine(embedder.embed(text_l), embedder.embed(seg_en))))
        except TransportError as e:
            log.warning("similarity point k=%d failed: %s", k, e)
            missing.append(k)
    return SimilaritySeries(language=language, pathway=pathway, points=tuple(points), missing=tuple(missing))


def _translated_vectors(prefixes: list[str], embedder, translator, language: Language) -> tuple[list, int]:
    """Embed prefixes via the translate-first route; failures are dropped."""
    vectors = []
    failed = 0
    for text in prefixes:
        try:
            if language is not Language.EN and translator is not None:
                text = translator.translate(text, Language.EN)
            vectors.append(embedder.embed(text))
        except TransportError as e:
            failed += 1
            log.warning("prefix embedding failed (%s): %s", language.value, e)
    return vectors, failed


def intra_consistency(prefixes: list[str], embedder, translator=None, language: Language = Language.EN) -> float:
    """Mean pairwise cosine over all unordered prefix pairs, self-pairs
    excluded. Plain double loop so small-n results match a naive oracle
    bit for bit."""
    if len(prefixes) < 2:
        raise InputError("intra-language consistency needs at least 2 prefixes")
    vectors, failed = _translated_vectors(prefixes, embedder, translator, language)
    if failed:
        log.warning("intra consistency: %d of %d prefixes unusable", failed, len(prefixes))
    n = len(vectors)
    if n < 2:
        raise InputError("fewer than 2 usable prefixes after provider failures")
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += cosine(vectors[i], vectors[j])
            pairs += 1
    return total / pairs


@dataclass(frozen=True)
class ConsistencyMatrix:
    languages: tuple[Language, ...]
    values: tuple[tuple[float, ...], ...]  # NaN marks a missing cell
    level: str = "inter"

    def value(self, l1: Language, l2: Language) -> float:
        return self.values[self.languages.index(l1)][self.languages.index(l2)]


def _unit_rows(vectors) -> np.ndarray:
    mat = np.asarray([v.values for v in vectors], dtype=float)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise InputError("cosine similarity undefined for a zero vector")
    return mat / norms


def inter_consistency(
    prefix_sets: dict[Language, dict[str, list[str]]],
    embedder,
    translator=None,
) -> ConsistencyMatrix:
    """Language-pair consistency matrix.

    Off-diagonal (l1, l2): mean over shared questions of the mean cosine over
    all cross pairs of translated prefixes. Diagonal: intra-language
    consistency averaged over questions. Symmetric by construction; cells
    with no usable question are NaN."""
    languages = tuple(sorted(prefix_sets, key=canonical_index))
    if not languages:
        raise InputError("no prefix sets given")

    embedded: dict[tuple[Language, str], list] = {}
    for lang in languages:
        for qid, prefixes in prefix_sets[lang].items():
            vectors, _ = _translated_vectors(prefixes, embedder, translator, lang)
            if len(vectors) >= 1:
                embedded[(lang, qid)] = vectors

    size = len(languages)
    grid = [[float("nan")] * size for _ in range(size)]
    for i, l1 in enumerate(languages):
        for j in range(i, size):
            l2 = languages[j]
            per_question: list[float] = []
            shared = sorted(set(prefix_sets[l1]) & set(prefix_sets[l2]))
            for qid in shared:
                if (l1, qid) not in embedded or (l2, qid) not in embedded:
                    continue
                if i == j:
                    vectors = embedded[(l1, qid)]
                    if len(vectors) < 2:
                        continue
                    total = 0.0
                    pairs = 0
                    for a in range(len(vectors)):
                        for b in range(a + 1, len(vectors)):
                            total += cosine(vectors[a], vectors[b])
                            pairs += 1
                    per_question.append(total / pairs)
                else:
                    m1 = _unit_rows(embedded[(l1, qid)])
                    m2 = _unit_rows(embedded[(l2, qid)])
                    per_question.append(max(-1.0, min(1.0, float(np.mean(m1 @ m2.T)))))
            if per_question:
                value = sum(per_question) / len(per_question)
                grid[i][j] = value
                grid[j][i] = value
    return ConsistencyMatrix(languages=languages, values=tuple(tuple(row) for row in grid))
