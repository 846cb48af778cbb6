"""Parameter-efficient adapter fine-tuning on reasoning-prefix corpora."""

__version__ = "0.1.0"
