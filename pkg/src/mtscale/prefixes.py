"""Reasoning-prefix corpus construction: collect the first 32 generated
tokens of every sampled trace and assemble the two training strategies —
all-English for three epochs (e3), or all high-resource languages for one
epoch (h1). Exports are line-delimited JSON plus a sidecar manifest and are
byte-identical for identical inputs and seed."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import InputError, StoreCorruptionError, StoreError
from .model import CellKey, Language, canonical_index
from .store import RunStore

HIGH_RESOURCE_SET = (Language.EN, Language.IT, Language.DE, Language.PT)


class Strategy(Enum):
    E3 = "e3"
    H1 = "h1"

    @property
    def epochs(self) -> int:
        return 3 if self is Strategy.E3 else 1

    @property
    def languages(self) -> tuple[Language, ...]:
        return (Language.EN,) if self is Strategy.E3 else HIGH_RESOURCE_SET


@dataclass(frozen=True)
class PrefixSample:
    language: Language
    dataset_id: str
    question_id: str
    sample_index: int
    text: str
    prompt_context: str

    def sort_key(self) -> tuple:
        return (canonical_index(self.language), self.dataset_id, self.question_id, self.sample_index)


@dataclass(frozen=True)
class DeficitReport:
    """Per (language, dataset, question) shortfall against the target count."""

    need: int
    deficits: dict[str, int]  # cell-group key -> samples missing
    skipped: list[str]  # trace ids skipped (too short / unreadable)

    @property
    def complete(self) -> bool:
        return not self.deficits

    def to_dict(self) -> dict:
        return {"need": self.need, "deficits": self.deficits, "skipped": self.skipped, "complete": self.complete}


def collect_prefixes(
    store: RunStore,
    languages: tuple[Language, ...] | None = None,
    n: int = 100,
    prefix_tokens: int = 32,
) -> tuple[list[PrefixSample], DeficitReport]:
    """First `prefix_tokens` generated tokens of up to `n` done samples per
    (language, question) cell. Cells that cannot fill their quota are listed
    in the deficit report, never fabricated."""
    manifest = store.manifest()
    wanted = tuple(languages) if languages else tuple(
        sorted({c.language for c in manifest.cells}, key=canonical_index)
    )
    groups: dict[tuple[Language, str, str], list[CellKey]] = {}
    for cell in manifest.cells:
        if cell.language in wanted and cell.sample_index < n:
            groups.setdefault((cell.language, cell.dataset_id, cell.question_id), []).append(cell)

    done = {c.as_string() for c in store.done_cells()}
    samples: list[PrefixSample] = []
    deficits: dict[str, int] = {}
    skipped: list[str] = []
    for (lang, dataset_id, question_id), cells in sorted(groups.items(), key=lambda kv: (canonical_index(kv[0][0]), kv[0][1], kv[0][2])):
        have = 0
        for cell in sorted(cells, key=lambda c: c.sample_index):
            if cell.as_string() not in done:
                continue
            try:
                trace = store.read_trace(cell.trace_id)
            except (StoreError, StoreCorruptionError) as e:
                skipped.append(f"{cell.trace_id}: {e}")
                continue
            if trace.generated_count < prefix_tokens:
                skipped.append(f"{cell.trace_id}: only {trace.generated_count} generated tokens")
                continue
            samples.append(
                PrefixSample(
                    language=lang,
                    dataset_id=dataset_id,
                    question_id=question_id,
                    sample_index=cell.sample_index,
                    text=trace.generated_text(limit=prefix_tokens),
                    prompt_context=store.read_bundle(cell.trace_id).prompt_text,
                )
            )
            have += 1
        if have < n:
            deficits[f"{lang.value}|{dataset_id}|{question_id}"] = n - have
    return samples, DeficitReport(need=n, deficits=deficits, skipped=skipped)


@dataclass(frozen=True)
class TrainingSet:
    strategy: Strategy
    records: tuple[PrefixSample, ...]
    epochs: int
    provenance: dict

    @property
    def languages(self) -> set[Language]:
        return {r.language for r in self.records}


def assemble(
    strategy: Strategy,
    prefixes: list[PrefixSample],
    seed: int | None = None,
    shuffle: bool = False,
) -> TrainingSet:
    """Filter to the strategy's languages and fix the record order:
    (language, question, sample), optionally followed by a seeded shuffle."""
    wanted = strategy.languages
    present = {p.language for p in prefixes}
    missing = [l.value for l in wanted if l not in present]
    if missing:
        raise InputError(f"strategy {strategy.value} requires languages: {', '.join(missing)}")

    records = sorted((p for p in prefixes if p.language in wanted), key=PrefixSample.sort_key)
    if shuffle:
        rng = random.Random(seed if seed is not None else 0)
        rng.shuffle(records)
    return TrainingSet(
        strategy=strategy,
        records=tuple(records),
        epochs=strategy.epochs,
        provenance={
            "strategy": strategy.value,
            "epochs": strategy.epochs,
            "seed": seed,
            "shuffled": shuffle,
            "count": len(records),
        },
    )


def export_training_set(training_set: TrainingSet, path: str | Path, run_id: str = "") -> Path:
    """Write the line-delimited training file plus its sidecar manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in training_set.records:
            f.write(
                json.dumps(
                    {
                        "text": record.text,
                        "lang": record.language.value,
                        "question_id": record.question_id,
                        "sample_index": record.sample_index,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    counts: dict[str, int] = {}
    for record in training_set.records:
        counts[record.language.value] = counts.get(record.language.value, 0) + 1
    manifest = {
        "strategy": training_set.strategy.value,
        "epochs": training_set.epochs,
        "records": len(training_set.records),
        "records_per_language": counts,
        "seed": training_set.provenance.get("seed"),
        "shuffled": training_set.provenance.get("shuffled", False),
        "source_run": run_id,
        "sha256": digest,
    }
    manifest_path = path.with_name(path.name + ".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2)
        f.write("\n")
    return manifest_path
