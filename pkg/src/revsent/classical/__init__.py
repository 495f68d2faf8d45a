"""Classical baselines over meta, TF-IDF or joint feature matrices."""

from __future__ import annotations

from pathlib import Path

from revsent.autodiff.checkpoint import load_checkpoint, save_checkpoint
from revsent.classical.base import Baseline, joint_features, gini
from revsent.classical.boosting import GradientBoosting
from revsent.classical.forest import RandomForest
from revsent.classical.knn import Knn
from revsent.classical.mlp import Mlp
from revsent.classical.svm import LinearSvm
from revsent.classical.tree import DecisionTree
from revsent.errors import ConfigError, DataError

MODELS = {
    "dt": DecisionTree,
    "rf": RandomForest,
    "knn": Knn,
    "svm": LinearSvm,
    "gb": GradientBoosting,
    "mlp": Mlp,
}


def make_baseline(name: str, **params) -> Baseline:
    try:
        cls = MODELS[name]
    except KeyError:
        raise ConfigError(f"unknown baseline {name!r}; choose from {sorted(MODELS)}") from None
    return cls(**params)


def save_baseline(model: Baseline, directory) -> Path:
    """Write a fitted baseline as manifest + raw payloads (float64 / int64)."""
    arrays, config = model.get_state()
    return save_checkpoint(directory, arrays, {"baseline": model.name, **config}, default_dtype="<f8")


def load_baseline(directory) -> Baseline:
    arrays, config = load_checkpoint(directory)
    name = config.pop("baseline", None)
    if name not in MODELS:
        raise DataError(f"{directory}: not a baseline checkpoint")
    return MODELS[name].from_state(arrays, config)


__all__ = [
    "Baseline", "DecisionTree", "GradientBoosting", "Knn", "LinearSvm", "MODELS", "Mlp", "RandomForest",
    "gini", "joint_features", "load_baseline", "make_baseline", "save_baseline",
]
