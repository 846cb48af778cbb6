"""Figure-ready CSV exports over a completed (or partial) run: scaling
curves, fidelity matrices, similarity series, consistency scores. All
outputs are sorted deterministically so identical runs produce byte-
identical files; traces that cannot be read or are too short are skipped and
named in the returned report."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from pathlib import Path

from .errors import HarnessError, InputError, StoreCorruptionError, StoreError
from .fidelity import NgramLanguageIdentifier, analyze_trace, default_identifier
from .model import CellKey, Language, canonical_index
from .scaler import ScoredCheckpoint, scaling_curve
from .similarity import Pathway, incremental_segments, inter_consistency, intra_consistency, similarity_to_english
from .store import RunStore

log = logging.getLogger(__name__)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _fmt(x: float) -> str:
    return format(x, ".10g")


# ---------------------------------------------------------------------------
# Scaling curves
# ---------------------------------------------------------------------------


def load_scored_checkpoints(store: RunStore) -> tuple[list[ScoredCheckpoint], list[str]]:
    records: list[ScoredCheckpoint] = []
    skipped: list[str] = []
    for cell in store.done_cells():
        try:
            answers = store.read_answers(cell.trace_id)
        except StoreCorruptionError as e:
            skipped.append(str(e))
            continue
        for answer in answers:
            records.append(
                ScoredCheckpoint(
                    language=cell.language,
                    dataset_id=cell.dataset_id,
                    question_id=cell.question_id,
                    sample_index=cell.sample_index,
                    k=answer.k,
                    reasoning_tokens=answer.reasoning_tokens,
                    correct=answer.correct,
                )
            )
    return records, skipped


def export_curve(store: RunStore, grouping: str = "per_language", limits: list[int] | None = None) -> Path:
    records, skipped = load_scored_checkpoints(store)
    for line in skipped:
        log.warning("curve export skipped: %s", line)
    curves = scaling_curve(records, grouping=grouping, limits=limits)
    if limits:
        header = ["group"] + [str(limit) for limit in sorted(limits)]
        rows = []
        for curve in curves:
            by_tokens = {t: acc for t, acc, _ in curve.points}
            row = [curve.group]
            for limit in sorted(limits):
                effective = max((t for t in by_tokens if t <= limit), default=None)
                row.append(_fmt(by_tokens[effective]) if effective is not None else "")
            rows.append(row)
        name = f"curve_{grouping}_limits.csv"
    else:
        header = ["group", "reasoning_tokens", "accuracy", "n"]
        rows = [[c.group, t, _fmt(acc), n] for c in curves for t, acc, n in c.points]
        name = f"curve_{grouping}.csv"
    return _write_csv(store.analytics_dir / name, header, rows)


# ---------------------------------------------------------------------------
# Fidelity matrices
# ---------------------------------------------------------------------------


def export_fidelity(
    store: RunStore,
    identifier: NgramLanguageIdentifier | None = None,
    majority_bins: int = 20,
    fine_bins: int = 100,
) -> tuple[Path, Path, list[str]]:
    """Per-trace records into the store, then two matrices: 20-bin majority
    labels and 100-bin target-language success scores, one row per language
    (mean / mode over that language's traces)."""
    identifier = identifier or default_identifier()
    skipped: list[str] = []
    records: dict[Language, list[dict]] = {}
    for cell in store.done_cells():
        record = store.read_fidelity(cell.trace_id)
        if record is None:
            try:
                trace = store.read_trace(cell.trace_id)
                record = analyze_trace(
                    trace, identifier, majority_bins=majority_bins, fine_bins=fine_bins
                ).to_dict()
            except (StoreError, StoreCorruptionError, InputError) as e:
                skipped.append(f"{cell.trace_id}: {e}")
                continue
            store.write_fidelity(cell.trace_id, record)
        records.setdefault(cell.language, []).append(record)

    languages = sorted(records, key=canonical_index)
    majority_rows = []
    score_rows = []
    for lang in languages:
        recs = records[lang]
        bins = len(recs[0]["majority_bins"])
        row = [lang.value]
        for i in range(bins):
            votes = Counter(r["majority_bins"][i] for r in recs)
            top = max(votes.values())
            winner = min((c for c in votes if votes[c] == top), key=lambda c: canonical_index(Language.parse(c)))
            row.append(winner)
        majority_rows.append(row)

        fine = len(recs[0]["fidelity_bins"])
        score_rows.append(
            [lang.value] + [_fmt(sum(r["fidelity_bins"][i] for r in recs) / len(recs)) for i in range(fine)]
        )

    majority_path = _write_csv(
        store.analytics_dir / "fidelity_majority.csv",
        ["language"] + [f"bin_{i:02d}" for i in range(majority_bins)],
        majority_rows,
    )
    score_path = _write_csv(
        store.analytics_dir / "fidelity_score.csv",
        ["language"] + [f"bin_{i:03d}" for i in range(fine_bins)],
        score_rows,
    )
    return majority_path, score_path, skipped


# ---------------------------------------------------------------------------
# Similarity series
# ---------------------------------------------------------------------------


def export_similarity(
    store: RunStore,
    pathway: Pathway,
    embedder,
    translator,
    question_id: str | None = None,
    max_tokens: int = 1000,
    step: int = 32,
    smooth_window: int = 5,
) -> tuple[Path, list[str]]:
    """Per-language similarity-to-English series over sample 0 traces,
    averaged over questions unless one question is named."""
    done = {(c.language, c.dataset_id, c.question_id): c for c in store.done_cells() if c.sample_index == 0}
    skipped: list[str] = []

    en_segments: dict[tuple[str, str], list[str]] = {}
    for (lang, dataset_id, qid), cell in done.items():
        if lang is not Language.EN:
            continue
        if question_id is not None and qid != question_id:
            continue
        try:
            en_segments[(dataset_id, qid)] = incremental_segments(
                store.read_trace(cell.trace_id), max_tokens=max_tokens, step=step
            )
        except (StoreError, StoreCorruptionError) as e:
            skipped.append(f"{cell.trace_id}: {e}")
    if not en_segments:
        raise HarnessError("similarity export needs English sample-0 traces")

    languages = sorted({lang for (lang, _, _) in done}, key=canonical_index)
    rows = []
    for lang in languages:
        per_k: dict[int, list[float]] = {}
        for (l, dataset_id, qid), cell in done.items():
            if l is not lang or (dataset_id, qid) not in en_segments:
                continue
            if question_id is not None and qid != question_id:
                continue
            try:
                segments = incremental_segments(store.read_trace(cell.trace_id), max_tokens=max_tokens, step=step)
            except (StoreError, StoreCorruptionError) as e:
                skipped.append(f"{cell.trace_id}: {e}")
                continue
            reference = en_segments[(dataset_id, qid)]
            count = min(len(segments), len(reference))
            series = similarity_to_english(
                segments[:count], reference[:count], pathway, embedder, translator, language=lang
            )
            for k, value in series.points:
                per_k.setdefault(k, []).append(value)
        if not per_k:
            continue
        ks = sorted(per_k)
        values = [sum(per_k[k]) / len(per_k[k]) for k in ks]
        smoothed: dict[int, float] = {}
        if len(values) >= smooth_window:
            for offset, value in enumerate(
                [sum(values[i : i + smooth_window]) / smooth_window for i in range(len(values) - smooth_window + 1)]
            ):
                smoothed[ks[offset + smooth_window - 1]] = value
        for k, value in zip(ks, values):
            rows.append([lang.value, pathway.value, k, _fmt(value), _fmt(smoothed[k]) if k in smoothed else ""])

    path = _write_csv(
        store.analytics_dir / f"similarity_{pathway.value}.csv",
        ["language", "pathway", "k", "cosine", "smoothed"],
        rows,
    )
    return path, skipped


# ---------------------------------------------------------------------------
# Consistency
# ---------------------------------------------------------------------------


def collect_prefix_texts(
    store: RunStore, n: int = 100, prefix_tokens: int = 32
) -> tuple[dict[Language, dict[str, list[str]]], list[str]]:
    """language -> question key -> up to n prefix texts (sample order)."""
    sets: dict[Language, dict[str, list[str]]] = {}
    skipped: list[str] = []
    for cell in store.done_cells():
        if cell.sample_index >= n:
            continue
        try:
            trace = store.read_trace(cell.trace_id)
        except (StoreError, StoreCorruptionError) as e:
            skipped.append(f"{cell.trace_id}: {e}")
            continue
        if trace.generated_count < prefix_tokens:
            skipped.append(f"{cell.trace_id}: too short for a {prefix_tokens}-token prefix")
            continue
        key = f"{cell.dataset_id}/{cell.question_id}"
        sets.setdefault(cell.language, {}).setdefault(key, []).append(trace.generated_text(limit=prefix_tokens))
    return sets, skipped


def export_consistency(
    store: RunStore, embedder, translator, n: int = 100, prefix_tokens: int = 32
) -> tuple[Path, Path, list[str]]:
    sets, skipped = collect_prefix_texts(store, n=n, prefix_tokens=prefix_tokens)
    if not sets:
        raise HarnessError("consistency export found no usable prefixes")

    intra_rows = []
    for lang in sorted(sets, key=canonical_index):
        for question in sorted(sets[lang]):
            prefixes = sets[lang][question]
            if len(prefixes) < 2:
                skipped.append(f"{lang.value}/{question}: fewer than 2 prefixes")
                continue
            score = intra_consistency(prefixes, embedder, translator, language=lang)
            intra_rows.append([lang.value, question, _fmt(score)])
    intra_path = _write_csv(
        store.analytics_dir / "intra_consistency.csv", ["language", "question", "score"], intra_rows
    )

    matrix = inter_consistency(sets, embedder, translator)
    header = ["language"] + [l.value for l in matrix.languages]
    rows = []
    for i, lang in enumerate(matrix.languages):
        rows.append([lang.value] + [_fmt(v) if v == v else "" for v in matrix.values[i]])
    inter_path = _write_csv(store.analytics_dir / "inter_consistency.csv", header, rows)
    return intra_path, inter_path, skipped


# ---------------------------------------------------------------------------
# Run report
# ---------------------------------------------------------------------------


def run_report(store: RunStore) -> str:
    manifest = store.manifest()
    states = store.statuses()
    counts = Counter(states.values())
    lines = [
        f"run {manifest.run_id}",
        f"  cells: " + ", ".join(f"{state}={counts[state]}" for state in sorted(counts)),
    ]

    deficits_path = store.exports_dir / "deficit_report.json"
    if deficits_path.exists():
        import json

        report = json.loads(deficits_path.read_text())
        lines.append(f"  prefix deficits: {len(report['deficits'])} cells short (need {report['need']})")

    score_csv = store.analytics_dir / "fidelity_score.csv"
    if score_csv.exists():
        with open(score_csv, encoding="utf-8") as f:
            reader = csv.reader(f)
            next(reader)
            for row in reader:
                values = [float(v) for v in row[1:] if v]
                if values:
                    lines.append(f"  fidelity mean [{row[0]}]: {sum(values) / len(values):.4f}")

    intra_csv = store.analytics_dir / "intra_consistency.csv"
    if intra_csv.exists():
        per_lang: dict[str, list[float]] = {}
        with open(intra_csv, encoding="utf-8") as f:
            reader = csv.reader(f)
            next(reader)
            for row in reader:
                per_lang.setdefault(row[0], []).append(float(row[2]))
        for lang in per_lang:
            values = per_lang[lang]
            lines.append(f"  intra consistency [{lang}]: {sum(values) / len(values):.4f} over {len(values)} questions")
    return "\n".join(lines)
