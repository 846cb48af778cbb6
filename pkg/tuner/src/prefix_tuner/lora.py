"""Low-rank adapters on attention projection layers.

Each targeted ``nn.Linear`` is wrapped so the frozen base weight is summed
with a rank-r update scaled by alpha/r: ``W x + (alpha/r) * B (A dropout(x))``.
A starts from the standard kaiming-uniform linear init and B from zeros, so
a freshly wrapped model computes exactly what the base model computed.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import torch
from torch import nn


class LoraLinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int, alpha: float, dropout: float):
        super().__init__()
        self.base = base
        self.rank = rank
        self.scaling = alpha / rank
        self.dropout = nn.Dropout(dropout)
        self.lora_a = nn.Linear(base.in_features, rank, bias=False, dtype=torch.float32)
        self.lora_b = nn.Linear(rank, base.out_features, bias=False, dtype=torch.float32)
        nn.init.kaiming_uniform_(self.lora_a.weight, a=math.sqrt(5))
        nn.init.zeros_(self.lora_b.weight)
        for parameter in self.base.parameters():
            parameter.requires_grad = False

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        update = self.lora_b(self.lora_a(self.dropout(x.to(self.lora_a.weight.dtype))))
        return self.base(x) + self.scaling * update.to(x.dtype)

    @property
    def adapter_parameter_count(self) -> int:
        # Closed form: r * (in_features + out_features).
        return self.rank * (self.base.in_features + self.base.out_features)


def inject_adapters(model: nn.Module, targets, rank: int, alpha: float, dropout: float) -> dict[str, LoraLinear]:
    """Replace every Linear whose name ends in one of `targets`; freezes the
    rest of the model. Returns the wrapped modules keyed by module path."""
    for parameter in model.parameters():
        parameter.requires_grad = False

    wrapped: dict[str, LoraLinear] = {}
    replacements = []
    for name, module in model.named_modules():
        if isinstance(module, nn.Linear) and any(name.endswith(t) for t in targets):
            replacements.append(name)
    if not replacements:
        raise ValueError(f"base model has no linear modules named {list(targets)}")

    for name in replacements:
        parent_name, _, attr = name.rpartition(".")
        parent = model.get_submodule(parent_name) if parent_name else model
        adapter = LoraLinear(getattr(parent, attr), rank, alpha, dropout)
        setattr(parent, attr, adapter)
        wrapped[name] = adapter
    return wrapped


def closed_form_parameter_count(wrapped: dict[str, LoraLinear]) -> int:
    return sum(adapter.adapter_parameter_count for adapter in wrapped.values())


def trainable_parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def save_adapter(wrapped: dict[str, LoraLinear], directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = {}
    for name, adapter in wrapped.items():
        state[f"{name}.lora_a.weight"] = adapter.lora_a.weight.detach().cpu()
        state[f"{name}.lora_b.weight"] = adapter.lora_b.weight.detach().cpu()
    torch.save(state, directory / "adapter_weights.pt")
    with open(directory / "adapter_modules.json", "w", encoding="utf-8") as f:
        json.dump(sorted(wrapped), f, indent=2)
    return directory / "adapter_weights.pt"


def load_adapter(wrapped: dict[str, LoraLinear], directory: str | Path) -> None:
    state = torch.load(Path(directory) / "adapter_weights.pt", map_location="cpu")
    for name, adapter in wrapped.items():
        adapter.lora_a.weight.data.copy_(state[f"{name}.lora_a.weight"])
        adapter.lora_b.weight.data.copy_(state[f"{name}.lora_b.weight"])
