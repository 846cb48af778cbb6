#!/usr/bin/env python3
"""Held-out quality gate for the bundled language identifier.

Trains on three quarters of each seed corpus, classifies 32-word windows of
the held-out quarter, and fails (exit 1) if any language drops below 0.95
accuracy."""

import argparse
import sys

from mtscale.fidelity import evaluate_identifier


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--window-tokens", type=int, default=32)
    parser.add_argument("--gate", type=float, default=0.95)
    args = parser.parse_args()

    accuracy = evaluate_identifier(window_tokens=args.window_tokens)
    worst = min(accuracy.values())
    for lang, value in accuracy.items():
        flag = "" if value >= args.gate else "  <-- BELOW GATE"
        print(f"{lang.value}: {value:.4f}{flag}")
    print(f"gate: {args.gate} -> {'PASS' if worst >= args.gate else 'FAIL'}")
    return 0 if worst >= args.gate else 1


if __name__ == "__main__":
    sys.exit(main())
