"""Command line: validate a training file and fine-tune adapters.

Exit codes: 0 on success, 2 on a validation or configuration problem (the
process exits before any training starts)."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import TuneConfig
from .data import ValidationError, load_training_file
from .train import finetune

log = logging.getLogger("prefix_tuner")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefix-tuner", description="Adapter fine-tuning on reasoning prefixes")
    parser.add_argument("--data", required=True, help="line-delimited training file")
    parser.add_argument("--base-model", required=True, help="model id or local path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--epochs", type=int, help="override the training-set manifest")
    parser.add_argument("--rank", type=int, default=8)
    parser.add_argument("--scale", type=int, default=32)
    parser.add_argument("--dropout", type=float, default=0.05)
    parser.add_argument("--learning-rate", type=float, default=2e-4)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-seq-len", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quantization", choices=["4bit", "none"], default="4bit")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        data = load_training_file(args.data)  # full validation before any training
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    epochs = args.epochs if args.epochs is not None else data.epochs
    if epochs is None:
        print("error: no sidecar manifest found; pass --epochs", file=sys.stderr)
        return 2

    config = TuneConfig(
        base_model_id=args.base_model,
        adapter_rank=args.rank,
        adapter_scale=args.scale,
        adapter_dropout=args.dropout,
        epochs=epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_seq_len=args.max_seq_len,
        seed=args.seed,
        quantization=args.quantization,
    )
    result = finetune(args.data, config, args.out)
    log.info(
        "trained %d steps; adapter in %s (first/final epoch loss %.4f / %.4f)",
        result.manifest["steps"],
        result.adapter_dir,
        result.manifest["first_epoch_mean_loss"],
        result.manifest["final_epoch_mean_loss"],
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
