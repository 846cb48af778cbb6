import json

import pytest

from mtscale.assets import sample_dataset_path
from mtscale.corpus import load_dataset, load_prompts
from mtscale.errors import IngestionError
from mtscale.model import Language


class TestLoadDataset:
    def test_bundled_sample_layout(self):
        manifest = load_dataset(sample_dataset_path())
        # 2 contest subsets x 15 questions x 6 languages.
        assert len(manifest.dataset_ids) == 2
        assert len(manifest.languages) == 6
        assert len(manifest.question_keys) == 30
        assert len(manifest.questions) == 180

    def test_gold_consistent_across_languages(self):
        manifest = load_dataset(sample_dataset_path())
        for dataset_id, question_id in manifest.question_keys:
            golds = {
                q.gold_answer
                for q in manifest.questions
                if (q.dataset_id, q.question_id) == (dataset_id, question_id)
            }
            assert len(golds) == 1

    def test_ingestion_is_pure(self):
        assert load_dataset(sample_dataset_path()) == load_dataset(sample_dataset_path())

    def test_non_integer_gold_rejected(self, tmp_path):
        doc = {"datasets": [{"id": "d", "questions": [{"id": "7", "gold": "12a", "text": {"en": "t"}}]}]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(IngestionError, match="12a"):
            load_dataset(path)

    def test_missing_language_names_cell(self, tmp_path):
        doc = {
            "datasets": [
                {
                    "id": "d",
                    "questions": [
                        {"id": "6", "gold": 1, "text": {"en": "a", "tl": "b"}},
                        {"id": "7", "gold": 2, "text": {"en": "c"}},
                    ],
                }
            ]
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc, ensure_ascii=False))
        with pytest.raises(IngestionError, match=r"\(7, tl\)"):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_dataset(tmp_path / "nope.json")


class TestLoadPrompts:
    def test_defaults_cover_all_six_languages(self):
        catalog = load_prompts()
        for lang in (Language.EN, Language.DE, Language.IT, Language.PT, Language.VI, Language.TL):
            entry = catalog.entry(lang)
            assert entry.system and entry.demonstration and entry.initiation and entry.wait and entry.answer

    def test_default_english_wait_prompt(self):
        assert load_prompts().entry(Language.EN).wait == "Let me re-think my reasoning from scratch."

    def test_default_english_initiation_prompt(self):
        assert load_prompts().entry(Language.EN).initiation == "Let us think step-by-step in English."

    def test_partial_override_keeps_other_entries(self, tmp_path):
        override = tmp_path / "override.json"
        override.write_text(json.dumps({"de": {"wait": "Moment."}}))
        catalog = load_prompts(override)
        defaults = load_prompts()
        assert catalog.entry(Language.DE).wait == "Moment."
        assert catalog.entry(Language.DE).system == defaults.entry(Language.DE).system
        assert catalog.entry(Language.EN) == defaults.entry(Language.EN)

    def test_unknown_language_override_rejected(self, tmp_path):
        override = tmp_path / "override.json"
        override.write_text(json.dumps({"fr": {"wait": "attends"}}))
        with pytest.raises(IngestionError):
            load_prompts(override)

    def test_unknown_field_rejected(self, tmp_path):
        override = tmp_path / "override.json"
        override.write_text(json.dumps({"en": {"waiting": "x"}}))
        with pytest.raises(IngestionError):
            load_prompts(override)
