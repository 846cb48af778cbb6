"""Command-line entry point.

Exit codes: 0 on success, 1 on partial completion (failed cells or prefix
deficits; a report is still written), 2 on configuration errors. Progress
goes to stderr; machine-readable outputs go to files under the run
directory (`report` prints its human summary to stdout)."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from filelock import FileLock, Timeout

from . import reports
from .config import RunConfig, config_from_dict, load_config
from .errors import ConfigurationError, HarnessError, IngestionError, InputError, StoreError
from .gateway.mock_script import load_script
from .gateway.mock_server import MockCompletionServer
from .gateway.providers import CachingEmbedder, CachingTranslator, make_embedder, make_translator
from .model import Language
from .prefixes import Strategy, assemble, collect_prefixes, export_training_set
from .runner import extract_all, generate_cells, prepare_run
from .similarity import Pathway
from .store import FAILED, RunStore

log = logging.getLogger("mtscale")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    data = config.snapshot()
    if getattr(args, "languages", None):
        data["languages"] = [code.strip() for code in args.languages.split(",")]
    if getattr(args, "samples", None) is not None:
        data["samples"] = args.samples
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "parallelism", None) is not None:
        data["parallelism"] = args.parallelism
    if getattr(args, "endpoint", None):
        data["endpoint_url"] = args.endpoint
        data["mock_script"] = None
    if getattr(args, "mock_script", None):
        data["mock_script"] = args.mock_script
    if getattr(args, "limits", None):
        data.setdefault("policy", {})
        data["policy"]["at_limits"] = _parse_limits(args.limits)
    return config_from_dict(data)


def _parse_limits(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"bad --limits value: {text!r}") from e


def _open_store(args: argparse.Namespace) -> RunStore:
    runs_dir = args.runs_dir
    if getattr(args, "config", None):
        runs_dir = load_config(args.config).runs_dir
    return RunStore.open(runs_dir, args.run)


def _providers(store: RunStore):
    snapshot = store.manifest().config
    config = config_from_dict(snapshot)
    embedder = CachingEmbedder(make_embedder(config.embedder))
    translator = CachingTranslator(make_translator(config.translator))
    return embedder, translator


def _locked(store: RunStore):
    lock = FileLock(str(store.lock_path))
    try:
        lock.acquire(timeout=0.5)
    except Timeout:
        raise StoreError(f"run directory is locked by another process: {store.run_dir}")
    return lock


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_run_scaling(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    run_id = args.run or config.run_id or time.strftime("run-%Y%m%d-%H%M%S")
    store, config, resumed = prepare_run(config, run_id)
    log.info("%s run %s in %s", "resuming" if resumed else "starting", run_id, store.run_dir)
    lock = _locked(store)
    try:
        counts = generate_cells(store, config, retry_failed=args.retry_failed)
    finally:
        lock.release()
    log.info("generation finished: %s", counts)
    return EXIT_PARTIAL if counts.get(FAILED, 0) else EXIT_OK


def cmd_extract_answers(args: argparse.Namespace) -> int:
    store = _open_store(args)
    config = config_from_dict(store.manifest().config)
    config = _apply_overrides(config, args)
    lock = _locked(store)
    try:
        summary = extract_all(store, config)
    finally:
        lock.release()
    log.info("extraction finished: %s", summary)
    return EXIT_OK


def cmd_curve(args: argparse.Namespace) -> int:
    store = _open_store(args)
    grouping = "per_resource_class" if args.group == "resource-class" else "per_language"
    limits = _parse_limits(args.limits) if args.limits else None
    path = reports.export_curve(store, grouping=grouping, limits=limits)
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_fidelity(args: argparse.Namespace) -> int:
    store = _open_store(args)
    majority_path, score_path, skipped = reports.export_fidelity(
        store, majority_bins=args.majority_bins, fine_bins=args.fine_bins
    )
    for line in skipped:
        log.warning("skipped %s", line)
    log.info("wrote %s and %s", majority_path, score_path)
    return EXIT_OK


def cmd_similarity(args: argparse.Namespace) -> int:
    store = _open_store(args)
    embedder, translator = _providers(store)
    pathway = Pathway.TRANSLATE_THEN_EMBED if args.pathway == "translated" else Pathway.MULTILINGUAL_EMBED
    path, skipped = reports.export_similarity(
        store, pathway, embedder, translator, question_id=args.question
    )
    for line in skipped:
        log.warning("skipped %s", line)
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_consistency(args: argparse.Namespace) -> int:
    store = _open_store(args)
    embedder, translator = _providers(store)
    intra_path, inter_path, skipped = reports.export_consistency(
        store, embedder, translator, n=args.samples or 100, prefix_tokens=args.prefix_tokens
    )
    for line in skipped:
        log.warning("skipped %s", line)
    log.info("wrote %s and %s", intra_path, inter_path)
    return EXIT_OK


def cmd_export_prefixes(args: argparse.Namespace) -> int:
    store = _open_store(args)
    languages = None
    if args.languages:
        languages = tuple(Language.parse(code.strip()) for code in args.languages.split(","))
    samples, deficits = collect_prefixes(
        store, languages=languages, n=args.samples or 100, prefix_tokens=args.prefix_tokens
    )
    store.exports_dir.mkdir(parents=True, exist_ok=True)
    with open(store.exports_dir / "deficit_report.json", "w", encoding="utf-8") as f:
        json.dump(deficits.to_dict(), f, ensure_ascii=False, indent=2)
        f.write("\n")

    raw_path = store.exports_dir / "prefixes.jsonl"
    with open(raw_path, "w", encoding="utf-8") as f:
        for sample in sorted(samples, key=lambda s: s.sort_key()):
            f.write(
                json.dumps(
                    {
                        "text": sample.text,
                        "lang": sample.language.value,
                        "dataset_id": sample.dataset_id,
                        "question_id": sample.question_id,
                        "sample_index": sample.sample_index,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    log.info("wrote %s (%d prefixes)", raw_path, len(samples))

    if args.strategy:
        strategy = Strategy(args.strategy)
        training_set = assemble(strategy, samples, seed=args.seed, shuffle=args.shuffle)
        out = Path(args.out) if args.out else store.exports_dir / f"train_{strategy.value}.jsonl"
        manifest_path = export_training_set(training_set, out, run_id=store.manifest().run_id)
        log.info("wrote %s (%d records) and %s", out, len(training_set.records), manifest_path)

    if not deficits.complete:
        log.warning("%d cells short of %d samples; see deficit_report.json", len(deficits.deficits), deficits.need)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_mock_serve(args: argparse.Namespace) -> int:
    script = load_script(args.mock_script)
    server = MockCompletionServer(script, host=args.host, port=args.port).start()
    print(server.url, flush=True)
    log.info("mock endpoint at %s (ctrl-c to stop)", server.url)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    store = _open_store(args)
    print(reports.run_report(store))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_run_arg(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--run", required=required, help="run id")
    p.add_argument("--runs-dir", default="runs", help="runs directory (default: runs)")
    p.add_argument("--config", help="run config file (for its runs_dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtscale", description="Multilingual test-time scaling harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-scaling", help="generate budget-forced reasoning traces")
    p.add_argument("--config", required=True)
    p.add_argument("--run", help="run id (resumes if it exists)")
    p.add_argument("--languages", help="comma-separated language codes")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--endpoint", help="completion endpoint URL")
    p.add_argument("--mock-script", help="serve this mock script in-process")
    p.add_argument("--retry-failed", action="store_true")
    p.set_defaults(func=cmd_run_scaling)

    p = sub.add_parser("extract-answers", help="extract checkpoint answers for done traces")
    _add_run_arg(p)
    p.add_argument("--endpoint")
    p.add_argument("--mock-script")
    p.add_argument("--limits", help="extract only at these reasoning-token limits")
    p.set_defaults(func=cmd_extract_answers)

    p = sub.add_parser("curve", help="scaling-curve CSV")
    _add_run_arg(p)
    p.add_argument("--group", choices=["language", "resource-class"], default="language")
    p.add_argument("--limits", help="comma-separated reasoning-token limits")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("fidelity", help="language-fidelity matrices")
    _add_run_arg(p)
    p.add_argument("--majority-bins", type=int, default=20)
    p.add_argument("--fine-bins", type=int, default=100)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("similarity", help="segment similarity to English")
    _add_run_arg(p)
    p.add_argument("--pathway", choices=["multilingual", "translated"], default="multilingual")
    p.add_argument("--question", help="restrict to one question id")
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("consistency", help="intra/inter-language prefix consistency")
    _add_run_arg(p)
    p.add_argument("--samples", type=int, help="prefixes per cell (default 100)")
    p.add_argument("--prefix-tokens", type=int, default=32)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("export-prefixes", help="prefix corpus and training-set export")
    _add_run_arg(p)
    p.add_argument("--strategy", choices=["e3", "h1"])
    p.add_argument("--languages", help="restrict collection to these languages")
    p.add_argument("--samples", type=int, help="prefixes per cell (default 100)")
    p.add_argument("--prefix-tokens", type=int, default=32)
    p.add_argument("--seed", type=int)
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--out", help="training-set output path")
    p.set_defaults(func=cmd_export_prefixes)

    p = sub.add_parser("mock-serve", help="run the scripted mock endpoint")
    p.add_argument("--mock-script", required=True)
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_mock_serve)

    p = sub.add_parser("report", help="human-readable run summary")
    _add_run_arg(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    logging.getLogger("httpx").setLevel(logging.WARNING)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, IngestionError, InputError, StoreError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except HarnessError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
