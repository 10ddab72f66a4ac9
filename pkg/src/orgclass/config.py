"""Run configuration.

A run is driven by one flat YAML file of scalar keys. Unknown keys are
rejected by name, every field has a documented default except ``task``,
and the resolved config hashes stably so artifacts can record it.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .datasets import TASK_ISSUES, TASK_SIC2
from .metrics import MacroF1Mode
from .models.classifier import (
    ARCH_ORGMODEL1,
    ARCH_ORGMODEL2,
    DEFAULT_THRESHOLD,
)
from .models.encoders import (
    KIND_BASELINE,
    KIND_TRANSFORMER,
    EncoderConfig,
)
from .models.train import (
    LOSS_BINARY_CROSS_ENTROPY,
    LOSS_CROSS_ENTROPY,
    TrainConfig,
    task_mode_for,
    validate_loss,
)
from .storage import canonical_json, sha256_hex
from .taxonomy import DescriptionStyle

ENV_CACHE_DIR = "ORGCLASS_CACHE_DIR"
ENV_RATE_LIMIT_RPS = "ORGCLASS_RATE_LIMIT_RPS"

STAGE_FETCH_EDGAR = "fetch-edgar"
STAGE_FETCH_SNIPPETS = "fetch-snippets"
STAGE_BUILD_DATASET = "build-dataset"
STAGE_TRAIN = "train"
STAGE_PREDICT = "predict"
STAGE_EVALUATE = "evaluate"

STAGES = (
    STAGE_FETCH_EDGAR,
    STAGE_FETCH_SNIPPETS,
    STAGE_BUILD_DATASET,
    STAGE_TRAIN,
    STAGE_PREDICT,
    STAGE_EVALUATE,
)

PROVIDER_SERPAPI = "serpapi"
PROVIDER_FIXTURE = "fixture"

# Split totals used when the config does not override them.
_TASK_SPLITS = {
    TASK_ISSUES: (1370, 0, 500),
    TASK_SIC2: (2700, 900, 1800),
}


class ConfigError(ValueError):
    """Raised for unreadable, unknown, or invalid configuration."""


def _env_cache_dir() -> str:
    return os.environ.get(ENV_CACHE_DIR, ".cache")


def _env_rate_limit() -> float:
    raw = os.environ.get(ENV_RATE_LIMIT_RPS)
    if raw is None:
        return 1.0
    try:
        rps = float(raw)
    except ValueError:
        raise ConfigError(f"{ENV_RATE_LIMIT_RPS} is not a number: {raw!r}")
    if rps <= 0:
        raise ConfigError(f"{ENV_RATE_LIMIT_RPS} must be positive, got {rps}")
    return rps


@dataclass(frozen=True)
class PipelineConfig:
    """Fully resolved settings for one pipeline run."""

    task: str

    # Paths.
    cache_dir: str = dataclasses.field(default_factory=_env_cache_dir)
    out_dir: str = "out"
    issue_taxonomy: str = "taxonomy/issues.json"
    sic_taxonomy: str = "taxonomy/sic.json"

    # Ingestion.
    user_agent: str = ""
    top_n: int = 10
    rate_limit_rps: float = dataclasses.field(default_factory=_env_rate_limit)
    search_provider: str = PROVIDER_SERPAPI
    search_fixture: str = ""

    # Dataset construction.
    k: int = 15
    per_class: int = 200
    min_class: int = 200
    seed: int | None = None
    train_size: int | None = None
    dev_size: int | None = None
    test_size: int | None = None

    # Model.
    architecture: str = ARCH_ORGMODEL1
    encoder: str = KIND_BASELINE
    hidden_size: int | None = None
    max_tokens: int = 512
    model_name: str = "bert-base-uncased"
    use_bigrams: bool = True
    description_style: str = DescriptionStyle.SHORT.value
    threshold: float = DEFAULT_THRESHOLD
    loss: str | None = None
    epochs: int = 4
    batch_size: int = 16
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    early_stop_metric: str | None = None

    # Reporting.
    macro_f1_mode: str = MacroF1Mode.MEAN_OF_F1.value

    def __post_init__(self) -> None:
        _validate(self)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()).encode("utf-8"))

    def split_sizes(self) -> tuple[int, int, int]:
        sizes = (self.train_size, self.dev_size, self.test_size)
        if all(s is None for s in sizes):
            return _TASK_SPLITS[self.task]
        if any(s is None for s in sizes):
            missing = [
                name
                for name, s in zip(("train_size", "dev_size", "test_size"), sizes)
                if s is None
            ]
            raise ConfigError(
                "split sizes must be given together; missing: " + ", ".join(missing)
            )
        return sizes  # type: ignore[return-value]

    def resolved_loss(self) -> str:
        if self.loss is not None:
            validate_loss(self.architecture, task_mode_for(self.task), self.loss)
            return self.loss
        mode = task_mode_for(self.task)
        if self.architecture == ARCH_ORGMODEL2 or mode == "multilabel":
            return LOSS_BINARY_CROSS_ENTROPY
        return LOSS_CROSS_ENTROPY

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            kind=self.encoder,
            hidden_size=self.hidden_size,
            max_tokens=self.max_tokens,
            model_name=self.model_name,
            use_bigrams=self.use_bigrams,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            loss=self.resolved_loss(),
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            seed=self.seed,
            early_stop_metric=self.early_stop_metric,
        )

    def require(self, stage: str) -> None:
        """Check the stage-specific mandatory fields, naming any gaps."""
        if stage not in STAGES:
            raise ConfigError(f"unknown stage: {stage}")
        missing: list[str] = []
        if stage in (STAGE_BUILD_DATASET, STAGE_TRAIN) and self.seed is None:
            missing.append("seed")
        if stage == STAGE_FETCH_EDGAR and not self.user_agent:
            missing.append("user_agent")
        if stage == STAGE_FETCH_SNIPPETS:
            if self.search_provider == PROVIDER_SERPAPI and not self.user_agent:
                missing.append("user_agent")
            if self.search_provider == PROVIDER_FIXTURE and not self.search_fixture:
                missing.append("search_fixture")
        if missing:
            raise ConfigError(
                f"stage {stage} requires: " + ", ".join(missing)
            )


_CHOICES = {
    "task": (TASK_ISSUES, TASK_SIC2),
    "search_provider": (PROVIDER_SERPAPI, PROVIDER_FIXTURE),
    "architecture": (ARCH_ORGMODEL1, ARCH_ORGMODEL2),
    "encoder": (KIND_BASELINE, KIND_TRANSFORMER),
    "description_style": tuple(s.value for s in DescriptionStyle),
    "loss": (LOSS_CROSS_ENTROPY, LOSS_BINARY_CROSS_ENTROPY),
    "early_stop_metric": ("dev_macro_f1",),
    "macro_f1_mode": tuple(m.value for m in MacroF1Mode),
}

_OPTIONAL_INT = ("seed", "train_size", "dev_size", "test_size", "hidden_size")
_OPTIONAL_STR = ("loss", "early_stop_metric")
_POSITIVE_INT = (
    "top_n",
    "k",
    "per_class",
    "min_class",
    "hidden_size",
    "max_tokens",
    "epochs",
    "batch_size",
)
_NONNEGATIVE_INT = ("train_size", "dev_size", "test_size")
_POSITIVE_FLOAT = ("rate_limit_rps", "learning_rate")
_NONEMPTY_STR = ("cache_dir", "out_dir", "issue_taxonomy", "sic_taxonomy", "model_name")


def _validate(cfg: PipelineConfig) -> None:
    for name, allowed in _CHOICES.items():
        value = getattr(cfg, name)
        if value is None and name in _OPTIONAL_STR:
            continue
        if value not in allowed:
            raise ConfigError(
                f"{name} must be one of {', '.join(allowed)}; got {value!r}"
            )
    for name in _POSITIVE_INT:
        value = getattr(cfg, name)
        if value is None:
            continue
        if value < 1:
            raise ConfigError(f"{name} must be >= 1, got {value}")
    for name in _NONNEGATIVE_INT:
        value = getattr(cfg, name)
        if value is not None and value < 0:
            raise ConfigError(f"{name} must be >= 0, got {value}")
    for name in _POSITIVE_FLOAT:
        value = getattr(cfg, name)
        if value <= 0:
            raise ConfigError(f"{name} must be positive, got {value}")
    for name in _NONEMPTY_STR:
        if not getattr(cfg, name):
            raise ConfigError(f"{name} must be non-empty")
    if cfg.weight_decay < 0:
        raise ConfigError(f"weight_decay must be >= 0, got {cfg.weight_decay}")
    if not 0.0 < cfg.threshold < 1.0:
        raise ConfigError(
            f"threshold must be strictly between 0 and 1, got {cfg.threshold}"
        )


def _coerce(name: str, value: object, annotation: type) -> object:
    # bool is an int subclass; keep the two apart explicitly.
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false, got {value!r}")
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string, got {value!r}")
        return value
    raise ConfigError(f"{name} has unsupported type {annotation!r}")


_FIELD_TYPES: dict[str, type] = {}
for _f in dataclasses.fields(PipelineConfig):
    if _f.name in _OPTIONAL_INT:
        _FIELD_TYPES[_f.name] = int
    elif _f.name in _OPTIONAL_STR:
        _FIELD_TYPES[_f.name] = str
    elif isinstance(_f.default, bool):
        _FIELD_TYPES[_f.name] = bool
    elif isinstance(_f.default, float):
        _FIELD_TYPES[_f.name] = float
    elif isinstance(_f.default, int):
        _FIELD_TYPES[_f.name] = int
    else:
        _FIELD_TYPES[_f.name] = str


def config_from_mapping(raw: dict, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from parsed YAML plus optional CLI overrides."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of keys to scalar values")
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    unknown = sorted(set(merged) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))
    if "task" not in merged:
        raise ConfigError("missing required config key: task")
    kwargs = {}
    for name, value in merged.items():
        if value is None:
            if name in _OPTIONAL_INT or name in _OPTIONAL_STR:
                kwargs[name] = None
                continue
            raise ConfigError(f"{name} must not be null")
        kwargs[name] = _coerce(name, value, _FIELD_TYPES[name])
    return PipelineConfig(**kwargs)


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    """Parse, default, and validate the YAML config at ``path``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}")
    if raw is None:
        raw = {}
    return config_from_mapping(raw, overrides)
