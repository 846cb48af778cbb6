"""Multilingual test-time scaling harness: budget-forced reasoning
generation against streaming completion endpoints, checkpointed answer
extraction, language-fidelity and similarity analytics, and reasoning-prefix
corpus export for adapter fine-tuning."""

__version__ = "0.1.0"
