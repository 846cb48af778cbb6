import math

import numpy as np
import pytest

from mtscale.errors import InputError
from mtscale.gateway.providers import MockEmbedder, MockTranslator
from mtscale.gateway.types import EmbedderConfig, EmbeddingVector
from mtscale.model import Language
from mtscale.similarity import (
    ConsistencyMatrix,
    Pathway,
    cosine,
    incremental_segments,
    inter_consistency,
    intra_consistency,
    rolling_average,
    similarity_to_english,
)

from test_model import make_trace


def vec(*values):
    return EmbeddingVector(values=tuple(float(v) for v in values), provider_id="fixed", dimension=len(values))


class FixedEmbedder:
    """Maps exact texts to hand-chosen vectors."""

    provider_id = "fixed"

    def __init__(self, table):
        self.table = table

    def embed(self, text):
        return self.table[text]


class TestCosine:
    def test_identity(self):
        v = vec(1, 2, 3)
        assert cosine(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine(vec(1, 0), vec(0, 1)) == 0.0

    def test_inv_sqrt2(self):
        # Oracle: ([1,1]·[1,0]) / (sqrt(2)·1) = 1/sqrt(2).
        assert cosine(vec(1, 1), vec(1, 0)) == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_zero_vector_rejected(self):
        with pytest.raises(InputError):
            cosine(vec(0, 0), vec(1, 0))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InputError):
            cosine(vec(1, 0), vec(1, 0, 0))


class TestIncrementalSegments:
    def test_31_segments_within_1000_tokens(self):
        # Oracle: count of k with 32*(k+1) <= 1000.
        expected = len([k for k in range(100) if 32 * (k + 1) <= 1000])
        assert expected == 31
        trace = make_trace([f"t{i} " for i in range(1200)], budget=1200)
        assert len(incremental_segments(trace, max_tokens=1000, step=32)) == 31

    def test_short_trace(self):
        trace = make_trace([f"t{i} " for i in range(100)], budget=100)
        segments = incremental_segments(trace, max_tokens=1000, step=32)
        assert [len(s.split()) for s in segments] == [32, 64, 96]

    def test_below_one_step(self):
        trace = make_trace([f"t{i} " for i in range(20)], budget=20)
        assert incremental_segments(trace) == []

    def test_prefix_nesting(self):
        trace = make_trace([f"t{i} " for i in range(200)], budget=200)
        segments = incremental_segments(trace, max_tokens=200, step=32)
        for shorter, longer in zip(segments, segments[1:]):
            assert longer.startswith(shorter)

    def test_injected_text_excluded(self):
        texts = [f"t{i} " for i in range(40)]
        texts.insert(10, "WAIT ")
        trace = make_trace(texts, injected_at={10}, budget=40)
        segments = incremental_segments(trace, max_tokens=40, step=32)
        assert "WAIT" not in segments[0]


class TestRollingAverage:
    def test_constant(self):
        assert rolling_average([1, 1, 1, 1, 1], 5) == [1.0]

    def test_single_spike(self):
        assert rolling_average([0, 0, 0, 0, 5], 5) == [1.0]

    def test_two_windows(self):
        assert rolling_average([1, 2, 3, 4, 5, 6], 5) == [3.0, 4.0]

    def test_too_few_points(self):
        with pytest.raises(InputError):
            rolling_average([1, 2, 3], 5)


class TestSimilarityToEnglish:
    def test_english_against_itself_is_unity(self):
        segments = ["alpha beta", "alpha beta gamma"]
        embedder = MockEmbedder(EmbedderConfig(dimension=16))
        for pathway in Pathway:
            series = similarity_to_english(
                segments, segments, pathway, embedder, MockTranslator(), language=Language.EN
            )
            assert [c for _, c in series.points] == [1.0, 1.0]

    def test_identical_streams_under_identity_translation(self):
        segments = ["uno due", "uno due tre"]
        series = similarity_to_english(
            segments,
            segments,
            Pathway.TRANSLATE_THEN_EMBED,
            MockEmbedder(EmbedderConfig(dimension=16)),
            MockTranslator(),
            language=Language.IT,
        )
        assert [c for _, c in series.points] == [1.0, 1.0]

    def test_divergence_after_segment_five(self):
        shared = [f"common {i}" for i in range(6)]
        segments_l = shared + ["different tail"]
        segments_en = shared + ["another ending"]
        series = similarity_to_english(
            segments_l, segments_en, Pathway.MULTILINGUAL_EMBED, MockEmbedder(EmbedderConfig(dimension=32))
        )
        values = [c for _, c in series.points]
        assert values[:6] == [1.0] * 6
        assert values[6] < 1.0

    def test_k_values_increase_from_zero(self):
        segments = ["a", "b", "c"]
        series = similarity_to_english(
            segments, segments, Pathway.MULTILINGUAL_EMBED, MockEmbedder(EmbedderConfig(dimension=8))
        )
        assert [k for k, _ in series.points] == [0, 1, 2]

    def test_count_mismatch_rejected(self):
        with pytest.raises(InputError):
            similarity_to_english(["a"], ["a", "b"], Pathway.MULTILINGUAL_EMBED, None)


class TestIntraConsistency:
    def test_identical_prefixes(self):
        embedder = MockEmbedder(EmbedderConfig(dimension=16))
        assert intra_consistency(["same text"] * 100, embedder) == pytest.approx(1.0, abs=1e-12)

    def test_hand_built_three_prefix_case(self):
        # Oracle: pairwise cosines {1.0, 0.5, 0.5} -> mean 2/3, brute force
        # over the three unordered pairs.
        table = {
            "p1": vec(1, 0),
            "p2": vec(1, 0),
            "p3": vec(0.5, math.sqrt(3) / 2),
        }
        got = intra_consistency(["p1", "p2", "p3"], FixedEmbedder(table))
        assert got == pytest.approx((1.0 + 0.5 + 0.5) / 3, abs=1e-12)

    def test_two_prefixes_is_single_pair(self):
        table = {"a": vec(1, 0), "b": vec(0, 1)}
        assert intra_consistency(["a", "b"], FixedEmbedder(table)) == 0.0

    def test_fewer_than_two_rejected(self):
        with pytest.raises(InputError):
            intra_consistency(["only"], MockEmbedder(EmbedderConfig()))

    def test_matches_naive_double_loop_bit_for_bit(self):
        embedder = MockEmbedder(EmbedderConfig(dimension=24))
        for n in range(2, 11):
            prefixes = [f"prefix number {i}" for i in range(n)]
            vectors = [embedder.embed(p) for p in prefixes]
            total = 0.0
            pairs = 0
            for i in range(n):
                for j in range(i + 1, n):
                    total += cosine(vectors[i], vectors[j])
                    pairs += 1
            naive = total / pairs
            assert intra_consistency(prefixes, embedder) == naive  # bit-for-bit

    def test_permutation_invariance(self):
        embedder = MockEmbedder(EmbedderConfig(dimension=16))
        prefixes = [f"text {i}" for i in range(12)]
        forward = intra_consistency(prefixes, embedder)
        backward = intra_consistency(list(reversed(prefixes)), embedder)
        assert forward == pytest.approx(backward, abs=1e-12)


class TestInterConsistency:
    def test_identical_sets_give_unity(self):
        sets = {
            Language.EN: {"q1": ["same"] * 4},
            Language.DE: {"q1": ["same"] * 4},
        }
        matrix = inter_consistency(sets, MockEmbedder(EmbedderConfig(dimension=16)), MockTranslator())
        assert matrix.value(Language.EN, Language.DE) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry_exact(self):
        embedder = MockEmbedder(EmbedderConfig(dimension=16))
        sets = {
            Language.EN: {"q1": ["a", "b"], "q2": ["c"]},
            Language.VI: {"q1": ["d", "e"], "q2": ["f"]},
            Language.TL: {"q1": ["g"], "q2": ["h", "i"]},
        }
        matrix = inter_consistency(sets, embedder, MockTranslator())
        for i in range(len(matrix.languages)):
            for j in range(len(matrix.languages)):
                assert matrix.values[i][j] == matrix.values[j][i]

    def test_two_by_two_matches_brute_force(self):
        # Oracle: 2 languages x 1 question x 2 prefixes -> 4 cross pairs.
        table = {
            "a1": vec(1, 0, 0),
            "a2": vec(0, 1, 0),
            "b1": vec(1, 1, 0),
            "b2": vec(0, 0, 1),
        }
        brute = (
            cosine(table["a1"], table["b1"])
            + cosine(table["a1"], table["b2"])
            + cosine(table["a2"], table["b1"])
            + cosine(table["a2"], table["b2"])
        ) / 4
        sets = {
            Language.EN: {"q": ["a1", "a2"]},
            Language.DE: {"q": ["b1", "b2"]},
        }
        matrix = inter_consistency(sets, FixedEmbedder(table))
        assert matrix.value(Language.EN, Language.DE) == pytest.approx(brute, abs=1e-12)

    def test_diagonal_is_mean_intra(self):
        embedder = MockEmbedder(EmbedderConfig(dimension=16))
        sets = {Language.EN: {"q1": ["a", "b", "c"], "q2": ["d", "e"]}}
        matrix = inter_consistency(sets, embedder)
        expected = (
            intra_consistency(["a", "b", "c"], embedder) + intra_consistency(["d", "e"], embedder)
        ) / 2
        assert matrix.value(Language.EN, Language.EN) == pytest.approx(expected, abs=1e-12)

    def test_missing_cell_is_nan(self):
        embedder = MockEmbedder(EmbedderConfig(dimension=8))
        sets = {
            Language.EN: {"q1": ["a", "b"]},
            Language.DE: {"q2": ["c", "d"]},  # no shared question
        }
        matrix = inter_consistency(sets, embedder, MockTranslator())
        assert math.isnan(matrix.value(Language.EN, Language.DE))
