import json

import pytest

from mtscale.errors import InputError
from mtscale.model import CellKey, Language
from mtscale.prefixes import PrefixSample, Strategy, assemble, collect_prefixes, export_training_set
from mtscale.store import DONE, RUNNING, RunStore, StatusBoard

from test_store import bundle, write_cell


def seeded_store(tmp_path, languages, questions, samples, token_count=40):
    cells = [
        CellKey(lang, "d", f"q{qi}", s)
        for lang in languages
        for qi in range(questions)
        for s in range(samples)
    ]
    store = RunStore.create(tmp_path, "run", seed=0, config={}, cells=cells)
    board = StatusBoard(store)
    for cell in cells:
        write_cell(store, cell, [f"{cell.language.value}tok{i} " for i in range(token_count)])
        board.mark(cell, RUNNING)
        board.mark(cell, DONE)
    return store


def synthetic_prefixes(languages, questions=30, samples=100):
    return [
        PrefixSample(
            language=lang,
            dataset_id="d",
            question_id=f"q{qi}",
            sample_index=s,
            text=f"{lang.value} q{qi} s{s}",
            prompt_context="ctx",
        )
        for lang in languages
        for qi in range(questions)
        for s in range(samples)
    ]


class TestCollect:
    def test_complete_collection(self, tmp_path):
        store = seeded_store(tmp_path, [Language.EN, Language.VI], questions=3, samples=2)
        samples, report = collect_prefixes(store, n=2, prefix_tokens=32)
        assert len(samples) == 2 * 3 * 2
        assert report.complete
        for sample in samples:
            assert len(sample.text.split()) == 32
            assert sample.prompt_context == bundle().prompt_text

    def test_short_trace_counts_as_deficit(self, tmp_path):
        store = seeded_store(tmp_path, [Language.EN], questions=1, samples=2, token_count=31)
        samples, report = collect_prefixes(store, n=2, prefix_tokens=32)
        assert samples == []
        assert report.deficits == {"en|d|q0": 2}
        assert len(report.skipped) == 2
        assert not report.complete

    def test_single_sample_per_cell(self, tmp_path):
        store = seeded_store(tmp_path, [Language.EN], questions=2, samples=3)
        samples, report = collect_prefixes(store, n=1, prefix_tokens=32)
        assert len(samples) == 2
        assert all(s.sample_index == 0 for s in samples)
        assert report.complete


class TestAssemble:
    def test_e3_counts_and_epochs(self):
        prefixes = synthetic_prefixes([Language.EN, Language.VI])
        training = assemble(Strategy.E3, prefixes)
        # 100 prefixes x 30 questions, English only, 3 epochs.
        assert len(training.records) == 3000
        assert training.languages == {Language.EN}
        assert training.epochs == 3

    def test_h1_counts_and_epochs(self):
        prefixes = synthetic_prefixes([Language.EN, Language.IT, Language.DE, Language.PT, Language.VI])
        training = assemble(Strategy.H1, prefixes)
        assert len(training.records) == 12000
        assert training.languages == {Language.EN, Language.IT, Language.DE, Language.PT}
        assert training.epochs == 1

    def test_h1_missing_language_named(self):
        prefixes = synthetic_prefixes([Language.EN, Language.IT, Language.DE])
        with pytest.raises(InputError, match="pt"):
            assemble(Strategy.H1, prefixes)

    def test_deterministic_order(self):
        prefixes = synthetic_prefixes([Language.EN], questions=2, samples=2)
        training = assemble(Strategy.E3, list(reversed(prefixes)))
        keys = [(r.question_id, r.sample_index) for r in training.records]
        assert keys == sorted(keys)

    def test_seeded_shuffle_is_reproducible(self):
        prefixes = synthetic_prefixes([Language.EN], questions=3, samples=4)
        a = assemble(Strategy.E3, prefixes, seed=7, shuffle=True)
        b = assemble(Strategy.E3, prefixes, seed=7, shuffle=True)
        c = assemble(Strategy.E3, prefixes, seed=8, shuffle=True)
        assert a.records == b.records
        assert a.records != c.records


class TestExport:
    def test_schema_and_byte_identical_reexport(self, tmp_path):
        prefixes = synthetic_prefixes([Language.EN], questions=2, samples=3)
        training = assemble(Strategy.E3, prefixes, seed=5, shuffle=True)
        path_a = tmp_path / "a.jsonl"
        path_b = tmp_path / "b.jsonl"
        export_training_set(training, path_a, run_id="r")
        export_training_set(assemble(Strategy.E3, prefixes, seed=5, shuffle=True), path_b, run_id="r")
        assert path_a.read_bytes() == path_b.read_bytes()
        for line in path_a.read_text().splitlines():
            record = json.loads(line)
            assert set(record) == {"text", "lang", "question_id", "sample_index"}

    def test_sidecar_manifest(self, tmp_path):
        prefixes = synthetic_prefixes([Language.EN], questions=2, samples=2)
        training = assemble(Strategy.E3, prefixes)
        path = tmp_path / "train.jsonl"
        manifest_path = export_training_set(training, path, run_id="runX")
        manifest = json.loads(manifest_path.read_text())
        assert manifest["strategy"] == "e3"
        assert manifest["epochs"] == 3
        assert manifest["records"] == 4
        assert manifest["source_run"] == "runX"
        assert manifest["records_per_language"] == {"en": 4}

    def test_records_round_trip_from_store(self, tmp_path):
        store = seeded_store(tmp_path, [Language.EN], questions=1, samples=1)
        samples, _ = collect_prefixes(store, n=1, prefix_tokens=32)
        trace = store.read_trace(store.manifest().cells[0].trace_id)
        assert samples[0].text == trace.generated_text(limit=32)
