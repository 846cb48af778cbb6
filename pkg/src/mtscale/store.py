"""
Run persistence and resumability.

One directory per run: an immutable `manifest.json` (config snapshot, seed,
cell list), an append-only `status.log` journal of cell state transitions,
one line-delimited JSON file per trace (header line, token lines, end line),
and per-trace answer / fidelity files keyed by trace id so extraction and
analytics can run long after generation.

Durability boundary: a cell only counts once its trace file is fsynced,
renamed from `.partial` to final, and `done` is journaled. Anything less is
redone on resume, so token lines can stream through normal buffered writes.
Trace files are append-only; analytics never mutate them.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import StoreCorruptionError, StoreError
from .model import CellKey, CheckpointAnswer, Language, PromptBundle, ReasoningTrace, TokenRecord

PENDING = "pending"
RUNNING = "running"
DONE = "done"
FAILED = "failed"

_ALLOWED_TRANSITIONS = {
    (PENDING, RUNNING),
    (RUNNING, DONE),
    (RUNNING, FAILED),
    (FAILED, PENDING),  # explicit retry
    (RUNNING, PENDING),  # crash recovery on resume
}


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    created_at: str
    seed: int
    config: dict
    cells: tuple[CellKey, ...]

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "created_at": self.created_at,
            "seed": self.seed,
            "config": self.config,
            "cells": [c.as_string() for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            run_id=d["run_id"],
            created_at=d["created_at"],
            seed=d["seed"],
            config=d["config"],
            cells=tuple(CellKey.from_string(c) for c in d["cells"]),
        )


class TraceWriter:
    """Single writer for one trace file; writes to `.partial` and renames on
    a successful finalize."""

    def __init__(self, store: "RunStore", cell: CellKey, header: dict):
        self.store = store
        self.cell = cell
        self.partial_path = store.trace_partial_path(cell.trace_id)
        self._file = open(self.partial_path, "w", encoding="utf-8")
        self._write_line({"kind": "header", **header})
        self._generated = 0
        self._injected = 0

    def _write_line(self, obj: dict) -> None:
        self._file.write(json.dumps(obj, ensure_ascii=False) + "\n")

    def append(self, record: TokenRecord) -> None:
        self._write_line(record.to_dict())
        if record.injected:
            self._injected += 1
        else:
            self._generated += 1

    def finalize(self, injections: int, cap_reached: bool, failed: bool = False) -> None:
        self._write_line(
            {
                "kind": "end",
                "generated": self._generated,
                "injected": self._injected,
                "injections": injections,
                "cap_reached": cap_reached,
                "failed": failed,
            }
        )
        self._file.flush()
        os.fsync(self._file.fileno())
        self._file.close()
        if not failed:
            os.replace(self.partial_path, self.store.trace_path(self.cell.trace_id))

    def abort(self) -> None:
        if not self._file.closed:
            self._file.flush()
            self._file.close()


class RunStore:
    """All reads and writes for one run directory."""

    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)

    # -- creation / loading ------------------------------------------------

    @classmethod
    def create(cls, runs_dir: str | Path, run_id: str, seed: int, config: dict, cells: list[CellKey]) -> "RunStore":
        run_dir = Path(runs_dir) / run_id
        if (run_dir / "manifest.json").exists():
            raise StoreError(f"run {run_id} already exists in {runs_dir}")
        for sub in ("traces", "answers", "fidelity", "analytics", "exports"):
            (run_dir / sub).mkdir(parents=True, exist_ok=True)
        store = cls(run_dir)
        manifest = RunManifest(
            run_id=run_id,
            created_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            seed=seed,
            config=config,
            cells=tuple(cells),
        )
        tmp = run_dir / "manifest.json.tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(manifest.to_dict(), f, ensure_ascii=False, indent=2)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, run_dir / "manifest.json")
        (run_dir / "status.log").touch()
        return store

    @classmethod
    def open(cls, runs_dir: str | Path, run_id: str) -> "RunStore":
        run_dir = Path(runs_dir) / run_id
        if not (run_dir / "manifest.json").exists():
            raise StoreError(f"no run {run_id!r} under {runs_dir}")
        return cls(run_dir)

    def manifest(self) -> RunManifest:
        with open(self.run_dir / "manifest.json", encoding="utf-8") as f:
            return RunManifest.from_dict(json.load(f))

    @property
    def lock_path(self) -> Path:
        return self.run_dir / "lock"

    # -- status journal ----------------------------------------------------

    def statuses(self) -> dict[str, str]:
        """Replay the journal; every manifest cell starts pending."""
        states = {cell.as_string(): PENDING for cell in self.manifest().cells}
        path = self.run_dir / "status.log"
        if not path.exists():
            return states
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
        for number, line in enumerate(lines, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                entry = json.loads(stripped)
            except json.JSONDecodeError as e:
                if number == len(lines) and not line.endswith("\n"):
                    break  # torn final append from a crash; the cell was not done
                raise StoreCorruptionError(str(path), number, f"bad journal line: {e}") from e
            states[entry["cell"]] = entry["state"]
        return states

    def mark(self, cell: CellKey, state: str) -> None:
        key = cell.as_string()
        current = self.statuses().get(key, PENDING)
        if (current, state) not in _ALLOWED_TRANSITIONS:
            raise StoreError(f"illegal status transition {current} -> {state} for {key}")
        self._append_status(key, state)

    def _append_status(self, key: str, state: str) -> None:
        # No fsync: a `done` line lost to a crash only means the (already
        # fsynced) trace is regenerated identically on resume. The trace file
        # is always durable before its done mark is written.
        with open(self.run_dir / "status.log", "a", encoding="utf-8") as f:
            f.write(json.dumps({"cell": key, "state": state, "ts": time.time()}) + "\n")
            f.flush()

    def recover_running(self) -> list[str]:
        """Resume pass: running cells (from a crashed process) go back to
        pending; their `.partial` files are left in place."""
        recovered = []
        for key, state in self.statuses().items():
            if state == RUNNING:
                self._append_status(key, PENDING)
                recovered.append(key)
        return recovered

    # -- traces --------------------------------------------------------

    def trace_path(self, trace_id: str) -> Path:
        return self.run_dir / "traces" / f"{trace_id}.jsonl"

    def trace_partial_path(self, trace_id: str) -> Path:
        return self.run_dir / "traces" / f"{trace_id}.jsonl.partial"

    def open_trace_writer(
        self, cell: CellKey, bundle: PromptBundle, budget: int, model_id: str, created_at: str, gold_answer: int
    ) -> TraceWriter:
        header = {
            "trace_id": cell.trace_id,
            "language": cell.language.value,
            "dataset_id": cell.dataset_id,
            "question_id": cell.question_id,
            "sample_index": cell.sample_index,
            "budget": budget,
            "model_id": model_id,
            "created_at": created_at,
            "gold_answer": gold_answer,
            "bundle": bundle.to_dict(),
        }
        return TraceWriter(self, cell, header)

    def read_header(self, trace_id: str) -> dict:
        for _, obj in self._iter_trace_lines(trace_id):
            if obj.get("kind") == "header":
                return obj
            break
        raise StoreCorruptionError(str(self.trace_path(trace_id)), 1, "missing header line")

    def _iter_trace_lines(self, trace_id: str) -> Iterator[tuple[int, dict]]:
        path = self.trace_path(trace_id)
        if not path.exists():
            raise StoreError(f"no completed trace {trace_id!r}")
        with open(path, encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                stripped = line.strip()
                if not stripped or not line.endswith("\n"):
                    raise StoreCorruptionError(str(path), number, "truncated line")
                try:
                    yield number, json.loads(stripped)
                except json.JSONDecodeError as e:
                    raise StoreCorruptionError(str(path), number, f"bad JSON: {e}") from e

    def read_trace(self, trace_id: str) -> ReasoningTrace:
        header: dict | None = None
        tokens: list[TokenRecord] = []
        end: dict | None = None
        path = str(self.trace_path(trace_id))
        for number, obj in self._iter_trace_lines(trace_id):
            if obj.get("kind") == "header":
                header = obj
            elif obj.get("kind") == "end":
                end = obj
            else:
                tokens.append(TokenRecord.from_dict(obj))
        if header is None:
            raise StoreCorruptionError(path, 1, "missing header line")
        if end is None:
            raise StoreCorruptionError(path, 0, "missing end line")
        if end.get("failed"):
            raise StoreError(f"trace {trace_id} is marked failed")
        if end["generated"] != sum(1 for t in tokens if not t.injected):
            raise StoreCorruptionError(path, 0, "token count does not match end line")
        return ReasoningTrace(
            trace_id=header["trace_id"],
            language=Language.parse(header["language"]),
            dataset_id=header["dataset_id"],
            question_id=header["question_id"],
            sample_index=header["sample_index"],
            tokens=tuple(tokens),
            budget=header["budget"],
            model_id=header["model_id"],
            created_at=header["created_at"],
        )

    def read_bundle(self, trace_id: str) -> PromptBundle:
        return PromptBundle.from_dict(self.read_header(trace_id)["bundle"])

    def done_cells(self) -> list[CellKey]:
        return sorted(
            (CellKey.from_string(key) for key, state in self.statuses().items() if state == DONE),
            key=lambda c: c.sort_key(),
        )

    # -- answers / fidelity / outputs ---------------------------------------

    def answers_path(self, trace_id: str) -> Path:
        return self.run_dir / "answers" / f"{trace_id}.jsonl"

    def write_answers(self, trace_id: str, answers: list[CheckpointAnswer]) -> None:
        tmp = self.answers_path(trace_id).with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            for answer in answers:
                f.write(json.dumps(answer.to_dict(), ensure_ascii=False) + "\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self.answers_path(trace_id))

    def read_answers(self, trace_id: str) -> list[CheckpointAnswer]:
        path = self.answers_path(trace_id)
        if not path.exists():
            return []
        out = []
        with open(path, encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                try:
                    out.append(CheckpointAnswer.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError) as e:
                    raise StoreCorruptionError(str(path), number, f"bad answer line: {e}") from e
        return out

    def fidelity_path(self, trace_id: str) -> Path:
        return self.run_dir / "fidelity" / f"{trace_id}.json"

    def write_fidelity(self, trace_id: str, record: dict) -> None:
        with open(self.fidelity_path(trace_id), "w", encoding="utf-8") as f:
            json.dump(record, f, ensure_ascii=False)

    def read_fidelity(self, trace_id: str) -> dict | None:
        path = self.fidelity_path(trace_id)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as f:
            return json.load(f)

    @property
    def analytics_dir(self) -> Path:
        return self.run_dir / "analytics"

    @property
    def exports_dir(self) -> Path:
        return self.run_dir / "exports"


class StatusBoard:
    """Serialized journal writer shared by worker threads."""

    def __init__(self, store: RunStore):
        self.store = store
        self._lock = threading.Lock()
        self._states = store.statuses()

    def state(self, cell: CellKey) -> str:
        with self._lock:
            return self._states.get(cell.as_string(), PENDING)

    def mark(self, cell: CellKey, state: str) -> None:
        key = cell.as_string()
        with self._lock:
            current = self._states.get(key, PENDING)
            if (current, state) not in _ALLOWED_TRANSITIONS:
                raise StoreError(f"illegal status transition {current} -> {state} for {key}")
            self.store._append_status(key, state)
            self._states[key] = state

    def counts(self) -> dict[str, int]:
        with self._lock:
            out: dict[str, int] = {}
            for state in self._states.values():
                out[state] = out.get(state, 0) + 1
            return out
