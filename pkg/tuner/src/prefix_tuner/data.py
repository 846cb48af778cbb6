"""Training-set ingestion. The file is line-delimited JSON with records
{"text", "lang", "question_id", "sample_index"}; an optional sidecar
manifest `<file>.manifest.json` carries the strategy and epoch count. The
whole file is validated before any training starts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ValidationError(Exception):
    """The training file violates the exchange schema."""


@dataclass(frozen=True)
class TrainingRecord:
    text: str
    lang: str
    question_id: str
    sample_index: int


@dataclass(frozen=True)
class TrainingData:
    records: tuple[TrainingRecord, ...]
    epochs: int | None  # from the sidecar manifest, if present
    strategy: str | None
    source: str


def load_training_file(path: str | Path) -> TrainingData:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"training file not found: {path}")

    records: list[TrainingRecord] = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                raise ValidationError(f"{path}:{number}: blank line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{path}:{number}: not valid JSON: {e}") from e
            if not isinstance(obj, dict):
                raise ValidationError(f"{path}:{number}: record is not an object")
            missing = {"text", "lang", "question_id", "sample_index"} - set(obj)
            if missing:
                raise ValidationError(f"{path}:{number}: missing fields {sorted(missing)}")
            if not isinstance(obj["text"], str) or not obj["text"].strip():
                raise ValidationError(f"{path}:{number}: empty or non-string text")
            if not isinstance(obj["sample_index"], int):
                raise ValidationError(f"{path}:{number}: sample_index is not an integer")
            records.append(
                TrainingRecord(
                    text=obj["text"],
                    lang=str(obj["lang"]),
                    question_id=str(obj["question_id"]),
                    sample_index=obj["sample_index"],
                )
            )
    if not records:
        raise ValidationError(f"{path}: no records")

    epochs = None
    strategy = None
    sidecar = path.with_name(path.name + ".manifest.json")
    if sidecar.exists():
        with open(sidecar, encoding="utf-8") as f:
            try:
                manifest = json.load(f)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{sidecar}: not valid JSON: {e}") from e
        epochs = manifest.get("epochs")
        strategy = manifest.get("strategy")
        declared = manifest.get("records")
        if declared is not None and declared != len(records):
            raise ValidationError(
                f"{sidecar}: declares {declared} records but the file holds {len(records)}"
            )
    return TrainingData(records=tuple(records), epochs=epochs, strategy=strategy, source=str(path))
