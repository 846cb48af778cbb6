"""Fixtures: a tiny randomly initialized base model with a word-level
tokenizer, saved to disk so the trainer loads it like any local model."""

from __future__ import annotations

import json
import random

import pytest
from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.pre_tokenizers import Whitespace
from transformers import LlamaConfig, LlamaForCausalLM, PreTrainedTokenizerFast

VOCAB_WORDS = [
    "the", "a", "sum", "of", "and", "is", "we", "compute", "first", "then",
    "add", "subtract", "multiply", "divide", "remainder", "answer", "step",
    "by", "so", "let", "us", "think", "carefully", "number", "value",
    "equals", "gives", "take", "result", "final", "check", "again", "total",
] + [str(i) for i in range(50)]


def synth_text(rng: random.Random, words: int = 32) -> str:
    """Heavily templated sentences so the adapter has structure to learn."""
    parts: list[str] = []
    while len(parts) < words:
        a, b = rng.randint(0, 20), rng.randint(0, 20)
        parts += f"let us think step by the sum of {a} and {b} equals {a + b} so".split()
    return " ".join(parts[:words])


def write_training_file(path, n_records, epochs=None, strategy=None, seed=1):
    rng = random.Random(seed)
    with open(path, "w", encoding="utf-8") as f:
        for i in range(n_records):
            record = {
                "text": synth_text(rng),
                "lang": "en",
                "question_id": f"q{i % 30}",
                "sample_index": i % 100,
            }
            f.write(json.dumps(record) + "\n")
    if epochs is not None:
        sidecar = path.with_name(path.name + ".manifest.json")
        sidecar.write_text(json.dumps({"strategy": strategy, "epochs": epochs, "records": n_records}))
    return path


@pytest.fixture(scope="session")
def tiny_base_model(tmp_path_factory):
    directory = tmp_path_factory.mktemp("base_model")
    specials = ["<pad>", "<s>", "</s>", "<unk>"]
    vocab = {w: i for i, w in enumerate(specials + VOCAB_WORDS)}
    tokenizer = Tokenizer(WordLevel(vocab, unk_token="<unk>"))
    tokenizer.pre_tokenizer = Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer, pad_token="<pad>", bos_token="<s>", eos_token="</s>", unk_token="<unk>"
    )
    config = LlamaConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        intermediate_size=64,
        num_hidden_layers=2,
        num_attention_heads=4,
        num_key_value_heads=2,
        max_position_embeddings=128,
    )
    model = LlamaForCausalLM(config)
    model.save_pretrained(directory)
    fast.save_pretrained(directory)
    return directory
