"""Run configuration: defaults, key=value files and environment overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from .embedding import EmbedHyperparams
from .inference import SCORING_VARIANTS
from .textcnn import CnnHyperparams
from .training import PipelineConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    corpus: str | None = None
    schema: str | None = None
    test: str | None = None
    model_dir: str | None = None
    min_count: int = 3
    dim: int = 100
    window: int = 5
    lambda_g: float = 2.5
    lambda_r: float = 1.0
    epochs: int = 5
    negatives: int = 5
    emb_lr: float = 0.025
    min_emb_lr: float = 0.0001
    subsample: float = 0.0
    temperature: float = 20.0
    cnn_lr: float = 1e-3
    batch_size: int = 16
    pretrain_epochs: int = 5
    max_self_train_epochs: int = 50
    no_joint: bool = False
    scoring: str = "combined"
    threads: int = 1
    seed: int = 0

    def validate(self):
        positive = ("dim", "window", "epochs", "negatives", "min_count", "batch_size",
                    "max_self_train_epochs", "threads")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("emb_lr", "cnn_lr", "temperature"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("lambda_g", "lambda_r", "subsample", "min_emb_lr", "pretrain_epochs"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.scoring not in SCORING_VARIANTS:
            raise ConfigError(f"scoring must be one of {', '.join(SCORING_VARIANTS)}")
        return self

    def require_files(self, *names):
        for name in names:
            path = getattr(self, name)
            if path is None:
                raise ConfigError(f"--{name.replace('_', '-')} is required")
            if not os.path.isfile(path):
                raise FileNotFoundError(path)

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            embed=EmbedHyperparams(
                dim=self.dim, window=self.window, lambda_g=self.lambda_g, lambda_r=self.lambda_r,
                epochs=self.epochs, negatives=self.negatives, lr=self.emb_lr,
                min_lr=self.min_emb_lr, subsample=self.subsample, use_joint=not self.no_joint,
                seed=self.seed),
            cnn=CnnHyperparams(lr=self.cnn_lr, batch_size=self.batch_size,
                               pretrain_epochs=self.pretrain_epochs,
                               max_self_train_epochs=self.max_self_train_epochs, seed=self.seed),
            temperature=self.temperature,
            scoring=self.scoring,
            threads=self.threads,
        )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    def updated(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    kind = _TYPES[key]
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw.strip()


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Apply ``key=value`` lines (``#`` comments allowed) on top of ``base``."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return dataclasses.replace(base or RunConfig(), **values)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read(), base)


def apply_env(cfg: RunConfig, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    raw = environ.get("JASEN_SEED")
    if raw is None:
        return cfg
    try:
        return dataclasses.replace(cfg, seed=int(raw))
    except ValueError:
        raise ConfigError(f"JASEN_SEED must be an integer, got {raw!r}") from None
