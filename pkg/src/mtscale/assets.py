"""Access to bundled data assets (prompt catalog, seed corpora, sample dataset)."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any

from .model import Language


def _data_root() -> Path:
    return Path(__file__).resolve().parent / "data"


def default_prompts_path() -> Path:
    return _data_root() / "prompts.json"


def sample_dataset_path() -> Path:
    return _data_root() / "sample_dataset.json"


@lru_cache(maxsize=None)
def default_prompt_entries() -> dict[str, dict[str, str]]:
    with open(default_prompts_path(), encoding="utf-8") as f:
        data: dict[str, Any] = json.load(f)
    return data


@lru_cache(maxsize=None)
def seed_corpus_text(language: Language) -> str:
    """Full bundled seed-corpus text for one study language."""
    path = _data_root() / "seed_corpus" / f"{language.value}.txt"
    return path.read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def seed_corpus_lines(language: Language) -> tuple[str, ...]:
    return tuple(
        line.strip() for line in seed_corpus_text(language).splitlines() if line.strip()
    )


@lru_cache(maxsize=None)
def seed_corpus_words(language: Language) -> tuple[str, ...]:
    return tuple(seed_corpus_text(language).split())
