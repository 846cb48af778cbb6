"""Causal-LM fine-tuning of the adapter weights on a reasoning-prefix file.

Only adapter parameters train; the count is checked against the closed-form
rank-r size before the first step. Per-step losses stream to `loss.csv`, the
adapter weights and a manifest echoing the full configuration land in the
output directory. Out-of-memory failures fall back to a halved batch size,
recorded in the manifest."""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from torch.utils.data import DataLoader, Dataset
from transformers import AutoModelForCausalLM, AutoTokenizer

from .config import TuneConfig
from .data import TrainingData, load_training_file
from .lora import closed_form_parameter_count, inject_adapters, save_adapter, trainable_parameter_count

log = logging.getLogger(__name__)


class PrefixDataset(Dataset):
    """One padded-on-collate sample per training record."""

    def __init__(self, records, tokenizer, max_seq_len: int):
        self.encoded = [
            tokenizer(record.text, truncation=True, max_length=max_seq_len)["input_ids"]
            for record in records
        ]

    def __len__(self) -> int:
        return len(self.encoded)

    def __getitem__(self, index: int):
        return self.encoded[index]


def make_collate(pad_id: int):
    def collate(batch):
        width = max(len(ids) for ids in batch)
        input_ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
        attention_mask = torch.zeros((len(batch), width), dtype=torch.long)
        for row, ids in enumerate(batch):
            input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            attention_mask[row, : len(ids)] = 1
        labels = input_ids.clone()
        labels[attention_mask == 0] = -100
        return {"input_ids": input_ids, "attention_mask": attention_mask, "labels": labels}

    return collate


def load_base_model(config: TuneConfig):
    """Load the base model, honoring the 4-bit request when the stack
    supports it and falling back (with a manifest note) when it does not."""
    quantization_used = "none"
    if config.quantization == "4bit":
        if torch.cuda.is_available():
            try:
                from transformers import BitsAndBytesConfig

                bnb = BitsAndBytesConfig(load_in_4bit=True, bnb_4bit_compute_dtype=torch.bfloat16)
                model = AutoModelForCausalLM.from_pretrained(config.base_model_id, quantization_config=bnb)
                return model, "4bit"
            except Exception as e:  # bitsandbytes missing or incompatible
                config.notes.append(f"4-bit load unavailable ({type(e).__name__}); using full precision")
        else:
            config.notes.append("4-bit quantization needs CUDA; using full precision on CPU")
    elif config.quantization not in ("none", "4bit"):
        raise ValueError(f"unknown quantization mode {config.quantization!r}")
    model = AutoModelForCausalLM.from_pretrained(config.base_model_id)
    return model, quantization_used


@dataclass
class TuneResult:
    manifest: dict
    loss_csv: Path
    adapter_dir: Path


def finetune(training_file: str | Path, config: TuneConfig, out_dir: str | Path) -> TuneResult:
    data = load_training_file(training_file)
    if data.epochs is not None and data.epochs != config.epochs:
        config.notes.append(
            f"epochs overridden to {config.epochs} (training-set manifest says {data.epochs})"
        )
    return _train(data, config, Path(out_dir))


def _train(data: TrainingData, config: TuneConfig, out_dir: Path, batch_size: int | None = None) -> TuneResult:
    batch_size = batch_size or config.batch_size
    torch.manual_seed(config.seed)
    random.seed(config.seed)

    tokenizer = AutoTokenizer.from_pretrained(config.base_model_id)
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token
    model, quantization_used = load_base_model(config)
    device = torch.device("cuda" if torch.cuda.is_available() else "cpu")
    model.to(device)
    model.train()

    wrapped = inject_adapters(
        model, config.target_projections, config.adapter_rank, config.adapter_scale, config.adapter_dropout
    )
    closed_form = closed_form_parameter_count(wrapped)
    trainable = trainable_parameter_count(model)
    if trainable != closed_form:
        raise AssertionError(
            f"trainable parameters {trainable} do not match the closed-form adapter size {closed_form}"
        )
    log.info(
        "adapters on %d modules: %d trainable parameters (rank %d)",
        len(wrapped), trainable, config.adapter_rank,
    )

    dataset = PrefixDataset(data.records, tokenizer, config.max_seq_len)
    loader = DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=True,
        collate_fn=make_collate(tokenizer.pad_token_id),
        generator=torch.Generator().manual_seed(config.seed),
    )
    optimizer = torch.optim.AdamW((p for p in model.parameters() if p.requires_grad), lr=config.learning_rate)

    out_dir.mkdir(parents=True, exist_ok=True)
    loss_csv = out_dir / "loss.csv"
    step = 0
    epoch_means: list[float] = []
    try:
        with open(loss_csv, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["step", "epoch", "loss"])
            for epoch in range(1, config.epochs + 1):
                losses: list[float] = []
                for batch in loader:
                    batch = {k: v.to(device) for k, v in batch.items()}
                    loss = model(**batch).loss
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
                    step += 1
                    value = float(loss.detach())
                    losses.append(value)
                    writer.writerow([step, epoch, f"{value:.6f}"])
                epoch_means.append(sum(losses) / len(losses))
                log.info("epoch %d/%d: mean loss %.4f (%d steps)", epoch, config.epochs, epoch_means[-1], step)
    except torch.cuda.OutOfMemoryError:
        if batch_size <= 1:
            raise
        fallback = max(1, batch_size // 2)
        config.notes.append(f"out of memory at batch size {batch_size}; retrained at {fallback}")
        log.warning("out of memory at batch size %d, retrying at %d", batch_size, fallback)
        return _train(data, config, out_dir, batch_size=fallback)

    adapter_dir = out_dir / "adapter"
    save_adapter(wrapped, adapter_dir)
    manifest = {
        **config.to_manifest(),
        "batch_size_used": batch_size,
        "quantization_used": quantization_used,
        "device": device.type,
        "records": len(data.records),
        "strategy": data.strategy,
        "training_file": data.source,
        "adapter_modules": len(wrapped),
        "trainable_parameters": trainable,
        "closed_form_parameters": closed_form,
        "steps": step,
        "epoch_mean_loss": [round(v, 6) for v in epoch_means],
        "first_epoch_mean_loss": round(epoch_means[0], 6),
        "final_epoch_mean_loss": round(epoch_means[-1], 6),
    }
    with open(out_dir / "adapter_manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return TuneResult(manifest=manifest, loss_csv=loss_csv, adapter_dir=adapter_dir)
