"""Tuning configuration. Adapter defaults (rank 8, scale 32, dropout 0.05 on
the attention query/value projections) are fixed by the experiment recipe;
learning rate and batch size are recorded in the adapter manifest so results
stay auditable."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class TuneConfig:
    base_model_id: str
    adapter_rank: int = 8
    adapter_scale: int = 32
    adapter_dropout: float = 0.05
    target_projections: tuple[str, ...] = ("q_proj", "v_proj")
    quantization: str = "4bit"  # 4-bit base with half-precision compute; falls back on CPU
    epochs: int = 1
    learning_rate: float = 2e-4
    batch_size: int = 16
    max_seq_len: int = 64
    seed: int = 0
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.adapter_rank < 1:
            raise ValueError("adapter rank must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not self.target_projections:
            raise ValueError("no target projections configured")

    def to_manifest(self) -> dict[str, Any]:
        return {
            "base_model_id": self.base_model_id,
            "adapter_rank": self.adapter_rank,
            "adapter_scale": self.adapter_scale,
            "adapter_dropout": self.adapter_dropout,
            "target_projections": list(self.target_projections),
            "quantization": self.quantization,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_seq_len": self.max_seq_len,
            "seed": self.seed,
            "notes": list(self.notes),
        }
