"""Ingestion of the multilingual question set and the per-language prompt
catalog. Loading is pure and validates everything up front so nothing fails
mid-run: catalog completeness, cross-language gold-answer consistency,
integer answers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import assets
from .errors import IngestionError
from .model import Language, Question, STUDY_LANGUAGES

_CATALOG_FIELDS = ("system", "demonstration", "initiation", "wait", "answer")


@dataclass(frozen=True)
class PromptCatalogEntry:
    system: str
    demonstration: str
    initiation: str
    wait: str
    answer: str


@dataclass(frozen=True)
class PromptCatalog:
    entries: dict[Language, PromptCatalogEntry]

    def entry(self, language: Language) -> PromptCatalogEntry:
        if language not in self.entries:
            raise IngestionError(f"prompt catalog has no entry for {language.value}")
        return self.entries[language]

    def require(self, languages) -> None:
        missing = [l.value for l in languages if l not in self.entries]
        if missing:
            raise IngestionError(f"prompt catalog missing languages: {', '.join(missing)}")


@dataclass(frozen=True)
class DatasetManifest:
    dataset_ids: tuple[str, ...]
    languages: tuple[Language, ...]
    questions: tuple[Question, ...]

    def questions_for(self, language: Language) -> list[Question]:
        return [q for q in self.questions if q.language == language]

    def question(self, dataset_id: str, question_id: str, language: Language) -> Question:
        for q in self.questions:
            if (q.dataset_id, q.question_id, q.language) == (dataset_id, question_id, language):
                return q
        raise IngestionError(f"no question ({dataset_id}, {question_id}, {language.value})")

    @property
    def question_keys(self) -> list[tuple[str, str]]:
        """(dataset_id, question_id) pairs in file order, language-independent."""
        seen: list[tuple[str, str]] = []
        for q in self.questions:
            key = (q.dataset_id, q.question_id)
            if key not in seen:
                seen.append(key)
        return seen


def load_dataset(path: str | Path) -> DatasetManifest:
    """Load and validate the single-document dataset layout."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"dataset file not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise IngestionError(f"dataset file is not valid JSON: {e}") from e

    datasets = raw.get("datasets")
    if not isinstance(datasets, list) or not datasets:
        raise IngestionError("dataset file has no `datasets` list")

    questions: list[Question] = []
    dataset_ids: list[str] = []
    languages: set[Language] = set()
    seen_ids: set[tuple[str, str, Language]] = set()

    for ds in datasets:
        ds_id = ds.get("id")
        if not ds_id:
            raise IngestionError("dataset entry without an id")
        dataset_ids.append(ds_id)
        for q in ds.get("questions", ()):
            q_id = q.get("id")
            if not q_id:
                raise IngestionError(f"question without an id in dataset {ds_id}")
            gold = q.get("gold")
            if not isinstance(gold, int) or isinstance(gold, bool):
                raise IngestionError(f"({q_id}) gold answer {gold!r} is not an integer")
            texts = q.get("text")
            if not isinstance(texts, dict) or not texts:
                raise IngestionError(f"({q_id}) has no text map")
            for code, text in texts.items():
                lang = Language.parse(code)
                if lang not in STUDY_LANGUAGES:
                    raise IngestionError(f"({q_id}, {code}) is not a study language")
                if not text or not text.strip():
                    raise IngestionError(f"({q_id}, {code}) has empty text")
                key = (ds_id, q_id, lang)
                if key in seen_ids:
                    raise IngestionError(f"duplicate question ({q_id}, {code}) in dataset {ds_id}")
                seen_ids.add(key)
                languages.add(lang)
                try:
                    questions.append(
                        Question(dataset_id=ds_id, question_id=q_id, language=lang, text=text, gold_answer=gold)
                    )
                except ValueError as e:
                    raise IngestionError(f"({q_id}, {code}): {e}") from e

    # Every question must exist in every language present anywhere in the file,
    # with one shared gold answer.
    ordered_languages = tuple(l for l in STUDY_LANGUAGES if l in languages)
    by_question: dict[tuple[str, str], set[Language]] = {}
    for q in questions:
        by_question.setdefault((q.dataset_id, q.question_id), set()).add(q.language)
    for (ds_id, q_id), present in by_question.items():
        for lang in ordered_languages:
            if lang not in present:
                raise IngestionError(f"question ({q_id}, {lang.value}) missing from dataset {ds_id}")

    return DatasetManifest(
        dataset_ids=tuple(dataset_ids), languages=ordered_languages, questions=tuple(questions)
    )


def load_prompts(path: str | Path | None = None) -> PromptCatalog:
    """Built-in defaults for all six languages; a user file may override any
    subset of entries (per language, per field)."""
    merged: dict[str, dict[str, str]] = {
        code: dict(entry) for code, entry in assets.default_prompt_entries().items()
    }

    if path is not None:
        path = Path(path)
        if not path.exists():
            raise IngestionError(f"prompt override file not found: {path}")
        with open(path, encoding="utf-8") as f:
            try:
                overrides = json.load(f)
            except json.JSONDecodeError as e:
                raise IngestionError(f"prompt override file is not valid JSON: {e}") from e
        for code, entry in overrides.items():
            try:
                lang = Language.parse(code)
            except ValueError as e:
                raise IngestionError(str(e)) from e
            if lang not in STUDY_LANGUAGES:
                raise IngestionError(f"prompt override for non-study language {code!r}")
            if not isinstance(entry, dict):
                raise IngestionError(f"prompt override for {code!r} is not an object")
            for field, value in entry.items():
                if field not in _CATALOG_FIELDS:
                    raise IngestionError(f"unknown prompt field {field!r} for language {code!r}")
                if not value:
                    raise IngestionError(f"empty prompt override ({code}, {field})")
                merged[code][field] = value

    entries: dict[Language, PromptCatalogEntry] = {}
    for code, entry in merged.items():
        lang = Language.parse(code)
        missing = [f for f in _CATALOG_FIELDS if not entry.get(f)]
        if missing:
            raise IngestionError(f"catalog entry {code!r} missing fields: {', '.join(missing)}")
        entries[lang] = PromptCatalogEntry(
            system=entry["system"],
            demonstration=entry["demonstration"],
            initiation=entry["initiation"],
            wait=entry["wait"],
            answer=entry["answer"],
        )

    catalog = PromptCatalog(entries=entries)
    catalog.require(STUDY_LANGUAGES)
    return catalog
