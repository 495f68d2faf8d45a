"""Run configuration: defaults, key-value config files and validation.

Precedence is defaults < config file < command-line flags.  A config file
holds one ``key = value`` per line; ``#`` starts a comment; keys are
RunConfig field names (dashes and underscores are interchangeable).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from revsent.errors import ConfigError

DEEP_MODELS = ("cnn", "han")
CLASSICAL_MODELS = ("dt", "rf", "knn", "svm", "gb", "mlp")
MODELS = CLASSICAL_MODELS + DEEP_MODELS
INPUTS = ("meta", "text", "joint")
MODES = ("binary", "five")
MULTITASK = ("off", "weighted", "uncertainty")
DEFAULT_DATA_DIR = "data"


@dataclass
class RunConfig:
    # data
    data_dir: str = DEFAULT_DATA_DIR
    input_path: str | None = None
    out: str | None = None
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    stratify: bool = False
    lexicon: str | None = None
    # features
    ngram_max: int = 1
    tfidf_max_features: int | None = None
    vocab_min_freq: int = 1
    vocab_max_size: int | None = None
    max_categories: int = 201
    n_max: int = 50
    r_max: int = 10
    embeddings: str | None = None
    embed_dim: int = 100
    freeze_embeddings: bool = False
    # task and model
    mode: str = "binary"
    input: str = "joint"
    model: str = "han"
    multitask: str = "off"
    lam: float = 0.5
    # deep training
    epochs: int = 5
    batch_size: int = 32
    lr: float = 1e-4
    patience: int | None = 2
    meta_dropout: float = 0.2
    # classical hyperparameters
    n_trees: int = 100
    max_depth: int | None = None
    k: int = 10
    C: float = 1.0
    gb_rounds: int = 100
    gb_lr: float = 0.1
    gb_max_depth: int = 5
    feature_fraction: float = 0.5
    mlp_hidden: str = "256,128"
    mlp_lr: float = 1e-3
    mlp_epochs: int = 20
    # everything random derives from this
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {', '.join(MODELS)}; got {self.model!r}")
        if self.input not in INPUTS:
            raise ConfigError(f"input must be one of {', '.join(INPUTS)}; got {self.input!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {self.mode!r}")
        if self.multitask not in MULTITASK:
            raise ConfigError(f"multitask must be one of {', '.join(MULTITASK)}; got {self.multitask!r}")
        if self.model in DEEP_MODELS and self.input == "meta":
            raise ConfigError("RunConfig invariant violated: deep models (cnn, han) need input text or joint")
        if self.multitask != "off" and self.model not in DEEP_MODELS:
            raise ConfigError("RunConfig invariant violated: multitask training applies to deep models (cnn, han) only")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lam must lie in [0, 1], got {self.lam}")
        for name in ("epochs", "batch_size", "n_trees", "k", "gb_rounds", "mlp_epochs", "n_max", "r_max",
                     "embed_dim", "ngram_max", "vocab_min_freq"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.patience is not None and self.patience < 0:
            raise ConfigError("patience must be >= 0")
        return self

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    default = RunConfig.__dataclass_fields__[name].default
    text = raw.strip()
    if text.lower() in ("none", "null", ""):
        return None
    kind = type(default) if default is not None and default is not dataclasses.MISSING else None
    hint = str(_FIELDS[name].type)
    try:
        if kind is bool or "bool" in hint:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int or hint.startswith("int"):
            return int(text)
        if kind is float or hint.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {raw!r}") from None
    return text


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS or key == "extra":
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(config_file=None, flags: dict | None = None) -> RunConfig:
    """Merge defaults, an optional config file and explicitly given flags."""
    values = read_config_file(config_file) if config_file else {}
    for k, v in (flags or {}).items():
        if v is not None:
            if k not in _FIELDS:
                raise ConfigError(f"unknown setting {k!r}")
            values[k] = v
    return RunConfig(**values).validate()


def from_json(obj: dict) -> RunConfig:
    unknown = set(obj) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown settings in manifest: {sorted(unknown)}")
    return RunConfig(**obj).validate()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
