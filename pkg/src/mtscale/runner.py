"""Bounded-parallel execution of a run: one task per (language, question,
sample) cell, resumable at cell granularity. A cell is generated whole or
redone from scratch on the next resume; nothing is ever regenerated once its
trace file is finalized and journaled done."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from contextlib import contextmanager

from .config import RunConfig
from .corpus import DatasetManifest, PromptCatalog, load_dataset, load_prompts
from .errors import HarnessError, StoreError
from .gateway.completion import CompletionClient
from .gateway.mock_script import load_script
from .gateway.mock_server import serve_mock
from .model import CellKey, canonical_index
from .scaler import ScalingPolicy, build_prompt, extract_answer, run_trace
from .store import DONE, FAILED, PENDING, RUNNING, RunStore, StatusBoard

log = logging.getLogger(__name__)


def plan_cells(dataset: DatasetManifest, languages, samples: int) -> list[CellKey]:
    cells = []
    for language in sorted(languages, key=canonical_index):
        for dataset_id, question_id in dataset.question_keys:
            for sample in range(samples):
                cells.append(CellKey(language, dataset_id, question_id, sample))
    return cells


@contextmanager
def completion_client(config: RunConfig):
    """Yields a client against the configured endpoint, spinning up an
    in-process mock server when the config names a script."""
    server = None
    try:
        if config.mock_script:
            server = serve_mock(load_script(config.mock_script))
            url = server.url
        else:
            url = config.endpoint_url
        client = CompletionClient(config.endpoint(url))
        try:
            yield client
        finally:
            client.close()
    finally:
        if server is not None:
            server.stop()


def prepare_run(config: RunConfig, run_id: str) -> tuple[RunStore, RunConfig, bool]:
    """Create the run directory, or reopen it and adopt its immutable config
    snapshot (transport fields aside). Returns (store, effective config,
    resumed)."""
    from .config import config_from_dict

    try:
        store = RunStore.open(config.runs_dir, run_id)
    except StoreError:
        dataset = load_dataset(config.dataset)
        missing = [l.value for l in config.languages if l not in dataset.languages]
        if missing:
            raise HarnessError(f"dataset lacks configured languages: {', '.join(missing)}")
        load_prompts(config.prompts)  # validate the catalog up front
        cells = plan_cells(dataset, config.languages, config.samples)
        store = RunStore.create(config.runs_dir, run_id, config.seed, config.snapshot(), cells)
        return store, config, False

    snapshot = dict(store.manifest().config)
    # The snapshot owns the experiment; only the transport location may move.
    if config.endpoint_url:
        snapshot["endpoint_url"] = config.endpoint_url
    if config.mock_script:
        snapshot["mock_script"] = config.mock_script
    snapshot["runs_dir"] = config.runs_dir
    effective = config_from_dict(snapshot)
    return store, effective, True


def generate_cells(store: RunStore, config: RunConfig, retry_failed: bool = False) -> dict[str, int]:
    """Run every pending cell to completion under the parallelism bound."""
    dataset = load_dataset(config.dataset)
    catalog = load_prompts(config.prompts)
    policy = config.policy

    recovered = store.recover_running()
    if recovered:
        log.info("recovered %d interrupted cells back to pending", len(recovered))
    board = StatusBoard(store)
    manifest = store.manifest()

    if retry_failed:
        for cell in manifest.cells:
            if board.state(cell) == FAILED:
                board.mark(cell, PENDING)

    todo = [cell for cell in manifest.cells if board.state(cell) == PENDING]
    skipped_done = sum(1 for cell in manifest.cells if board.state(cell) == DONE)
    if skipped_done:
        log.info("skipping %d done cells", skipped_done)
    log.info("run %s: %d cells to generate (%d total)", manifest.run_id, len(todo), len(manifest.cells))

    def one(cell: CellKey, client: CompletionClient) -> None:
        question = dataset.question(cell.dataset_id, cell.question_id, cell.language)
        bundle = build_prompt(catalog, question)
        board.mark(cell, RUNNING)
        writer = store.open_trace_writer(
            cell,
            bundle,
            policy.budget,
            client.endpoint.model,
            time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            question.gold_answer,
        )
        try:
            outcome = run_trace(
                bundle,
                policy,
                client,
                trace_id=cell.trace_id,
                dataset_id=cell.dataset_id,
                question_id=cell.question_id,
                sample_index=cell.sample_index,
                sink=writer.append,
            )
            writer.finalize(outcome.injections, outcome.cap_reached)
            board.mark(cell, DONE)
        except HarnessError as e:
            log.error("cell %s failed: %s", cell.as_string(), e)
            writer.finalize(injections=0, cap_reached=False, failed=True)
            board.mark(cell, FAILED)

    with completion_client(config) as client:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            futures = [pool.submit(one, cell, client) for cell in todo]
            for future in as_completed(futures):
                future.result()

    return board.counts()


def extract_all(store: RunStore, config: RunConfig, limit_cells: int | None = None) -> dict[str, int]:
    """Checkpoint-answer extraction over all done cells; cells that already
    have an answers file are skipped, so the command is idempotent."""
    policy = config.policy
    done = store.done_cells()
    if limit_cells is not None:
        done = done[:limit_cells]
    todo = [cell for cell in done if not store.answers_path(cell.trace_id).exists()]
    log.info("extracting answers for %d traces (%d already extracted)", len(todo), len(done) - len(todo))

    def one(cell: CellKey, client: CompletionClient) -> int:
        trace = store.read_trace(cell.trace_id)
        header = store.read_header(cell.trace_id)
        bundle = store.read_bundle(cell.trace_id)
        gold = header["gold_answer"]
        answers = []
        for k in policy.checkpoint_ks():
            if k * policy.stride > trace.generated_count:
                log.warning(
                    "trace %s: skipping checkpoint k=%d beyond %d generated tokens",
                    cell.trace_id, k, trace.generated_count,
                )
                continue
            answers.append(extract_answer(trace, k, bundle, client, policy, gold))
        store.write_answers(cell.trace_id, answers)
        return len(answers)

    extracted = 0
    with completion_client(config) as client:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            futures = [pool.submit(one, cell, client) for cell in todo]
            for future in as_completed(futures):
                extracted += future.result()
    return {"traces": len(todo), "answers": extracted, "skipped": len(done) - len(todo)}
