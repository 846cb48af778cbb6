"""Run configuration: one JSON file describing dataset, languages, policy and
the three service endpoints. API keys come from the environment only
(HARNESS_API_KEY, HARNESS_EMBED_KEY, HARNESS_TRANSLATE_KEY), never from the
file."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .gateway.types import EmbedderConfig, EndpointConfig, TranslatorConfig
from .model import Language, STUDY_LANGUAGES
from .scaler import ScalingPolicy


@dataclass
class RunConfig:
    dataset: str
    languages: tuple[Language, ...]
    samples: int = 1
    parallelism: int = 4
    seed: int = 0
    runs_dir: str = "runs"
    run_id: str | None = None
    prompts: str | None = None
    policy: ScalingPolicy = field(default_factory=ScalingPolicy)
    endpoint_url: str | None = None
    model: str = "default"
    mock_script: str | None = None
    endpoint_timeout_s: float = 120.0
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    translator: TranslatorConfig = field(default_factory=TranslatorConfig)

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise ConfigurationError("samples must be >= 1")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be >= 1")
        if not self.languages:
            raise ConfigurationError("no languages configured")
        if self.endpoint_url is None and self.mock_script is None:
            raise ConfigurationError("config needs an endpoint url or a mock script")

    def endpoint(self, url: str) -> EndpointConfig:
        return EndpointConfig(
            url=url,
            model=self.model,
            api_key=os.environ.get("HARNESS_API_KEY"),
            timeout_s=self.endpoint_timeout_s,
        )

    def snapshot(self) -> dict:
        """JSON copy stored in the run manifest; no secrets."""
        return {
            "dataset": self.dataset,
            "languages": [l.value for l in self.languages],
            "samples": self.samples,
            "parallelism": self.parallelism,
            "seed": self.seed,
            "runs_dir": self.runs_dir,
            "prompts": self.prompts,
            "policy": self.policy.to_dict(),
            "endpoint_url": self.endpoint_url,
            "model": self.model,
            "mock_script": self.mock_script,
            "endpoint_timeout_s": self.endpoint_timeout_s,
            "embedder": {"provider": self.embedder.provider, "url": self.embedder.url, "model": self.embedder.model, "dimension": self.embedder.dimension},
            "translator": {"provider": self.translator.provider, "url": self.translator.url},
        }


def _parse_languages(values) -> tuple[Language, ...]:
    langs = []
    for code in values:
        lang = Language.parse(code.strip()) if isinstance(code, str) else code
        if lang not in STUDY_LANGUAGES:
            raise ConfigurationError(f"{lang.value!r} is not a study language")
        if lang not in langs:
            langs.append(lang)
    return tuple(langs)


def config_from_dict(data: dict, base_dir: Path | None = None) -> RunConfig:
    def resolve(p: str | None) -> str | None:
        if p is None or base_dir is None:
            return p
        path = Path(p)
        return str(path if path.is_absolute() else base_dir / path)

    embedder = dict(data.get("embedder", {}))
    embedder.setdefault("api_key", os.environ.get("HARNESS_EMBED_KEY"))
    translator = dict(data.get("translator", {}))
    translator.setdefault("api_key", os.environ.get("HARNESS_TRANSLATE_KEY"))
    try:
        return RunConfig(
            dataset=resolve(data["dataset"]),
            languages=_parse_languages(data.get("languages", [l.value for l in STUDY_LANGUAGES])),
            samples=data.get("samples", 1),
            parallelism=data.get("parallelism", 4),
            seed=data.get("seed", 0),
            runs_dir=resolve(data.get("runs_dir", "runs")),
            run_id=data.get("run_id"),
            prompts=resolve(data.get("prompts")),
            policy=ScalingPolicy.from_dict(data.get("policy", {})),
            endpoint_url=data.get("endpoint_url"),
            model=data.get("model", "default"),
            mock_script=resolve(data.get("mock_script")),
            endpoint_timeout_s=data.get("endpoint_timeout_s", 120.0),
            embedder=EmbedderConfig.from_dict(embedder),
            translator=TranslatorConfig.from_dict(translator),
        )
    except KeyError as e:
        raise ConfigurationError(f"config missing required field {e}") from e


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config file is not valid JSON: {e}") from e
    return config_from_dict(data, base_dir=path.resolve().parent)
