"""Pipeline configuration: one JSON file drives train, predict, and ablate.

Defaults follow the reference training recipe: span cap 30, check fractions
0.6, confidence penalty 1e-3, encoder learning rate 2e-5 with 3e-4 for the
remaining layers, gradient accumulation over four steps, clipping at 1.0,
linear warmup over 10% of steps, early stopping patience 30, validation every
epoch, and LLM temperature 0.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .agent.client import LlmClientConfig
from .detection import MODE_BIAFFINE, SpanLimits
from .encoding import EncoderConfig
from .errors import ConfigError
from .filters import FilterConfig


@dataclass
class DetectorConfig:
    mode: str = MODE_BIAFFINE
    d_r: int = 128
    l_max: int | float = 30
    threshold: float = 0.5

    def limits(self) -> SpanLimits:
        return SpanLimits(l_max=self.l_max, threshold=self.threshold)


@dataclass
class LlmConfig:
    # "mock:yes" | "mock:no" | "mock:gold" | "mock:scripted:<path>" | "api"
    backend: str = "mock:yes"
    client: LlmClientConfig = field(default_factory=LlmClientConfig)
    n_prev_sentences: int = 2


@dataclass
class TrainConfig:
    lr_encoder: float = 2e-5
    lr_heads: float = 3e-4
    optimizer: str = "adafactor"  # or "adamw"
    grad_accum_steps: int = 4
    clip_norm: float = 1.0
    warmup_frac: float = 0.10
    early_stop_patience: int = 30
    validate_every_epochs: int = 1
    max_epochs: int = 200
    detection_weight: float = 1.0
    clustering_weight: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.warmup_frac <= 1.0):
            raise ConfigError(f"warmup_frac must lie in [0, 1], got {self.warmup_frac}")
        if self.grad_accum_steps < 1:
            raise ConfigError("grad_accum_steps must be >= 1")
        if self.optimizer not in ("adafactor", "adamw"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class PipelineConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    filters: FilterConfig = field(default_factory=FilterConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    dataset_paths: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        # the pronoun list ships as package data, not per-run configuration
        out["filters"].pop("pronoun_set", None)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")

        def build(section_cls, payload):
            if payload is None:
                return section_cls()
            payload = dict(payload)
            names = {f.name for f in dataclasses.fields(section_cls)}
            bad = set(payload) - names
            if bad:
                raise ConfigError(f"unknown {section_cls.__name__} keys {sorted(bad)}")
            if section_cls is FilterConfig and "pronoun_set" in payload:
                payload["pronoun_set"] = frozenset(
                    str(w).lower() for w in payload["pronoun_set"]
                )
            return section_cls(**payload)

        llm_payload = dict(data.get("llm") or {})
        client = build(LlmClientConfig, llm_payload.pop("client", None))
        llm_names = {f.name for f in dataclasses.fields(LlmConfig)} - {"client"}
        bad = set(llm_payload) - llm_names
        if bad:
            raise ConfigError(f"unknown LlmConfig keys {sorted(bad)}")
        llm = LlmConfig(client=client, **llm_payload)
        return cls(
            encoder=build(EncoderConfig, data.get("encoder")),
            detector=build(DetectorConfig, data.get("detector")),
            filters=build(FilterConfig, data.get("filters")),
            llm=llm,
            train=build(TrainConfig, data.get("train")),
            seed=int(data.get("seed", 0)),
            dataset_paths=dict(data.get("dataset_paths") or {}),
        )


def load_config(path: str | Path) -> PipelineConfig:
    with Path(path).open(encoding="utf-8") as fh:
        return PipelineConfig.from_dict(json.load(fh))


def save_config(config: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
