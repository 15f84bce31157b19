"""Hyperparameter tuning of the classifiers on a labelled dataset."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..datagen import LabeledDataset
from ..metrics import sample_accuracy
from ..neural import TrainConfig, TrainedModel, ann_spec, cnn_spec, predict_probabilities, train
from .bo import BoResult, HyperSpace, ann_space, bo_run, cnn_space

ARCHITECTURES = ("ann", "cnn")
THRESHOLD = 0.5
# Accuracy on a small split moves in steps of 1/n and shifts with tiny
# hyperparameter changes, so the surrogate treats it as noisy.
TUNING_NOISE = 1e-3


def default_space(arch: str) -> HyperSpace:
    if arch == "ann":
        return ann_space()
    if arch == "cnn":
        return cnn_space()
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")


def network_for(arch: str, theta: dict):
    if arch == "ann":
        return ann_spec(int(theta["hidden_layers"]), int(theta["neurons"]))
    if arch == "cnn":
        return cnn_spec(float(theta.get("dropout1", 0.0)), float(theta.get("dropout2", 0.3)))
    raise ValueError(f"unknown architecture {arch!r}")


def train_config_for(theta: dict, seed: int = 0, batch_size: int | None = None) -> TrainConfig:
    return TrainConfig(epochs=int(theta["epochs"]), learning_rate=float(theta["learning_rate"]),
                       batch_size=batch_size, seed=seed)


def fit(dataset: LabeledDataset, arch: str, theta: dict, seed: int = 0,
        batch_size: int | None = None) -> TrainedModel:
    """Train on the training split with hyperparameters ``theta``."""
    model = train(network_for(arch, theta), dataset.X("train"), dataset.Y("train"),
                  train_config_for(theta, seed, batch_size), scale=dataset.scale_factor(),
                  scaling_stats=dataset.scaling)
    model.config.update({"architecture": arch, "theta": dict(theta)})
    return model


def split_accuracy(model: TrainedModel, dataset: LabeledDataset, split: str) -> float:
    X, Y = dataset.X(split), dataset.Y(split)
    if len(X) == 0:
        raise ValueError(f"the {split} split is empty")
    pred = (predict_probabilities(model, X) >= THRESHOLD).astype(int)
    return sample_accuracy(Y, pred)


def make_objective(dataset: LabeledDataset, arch: str, seed: int = 0,
                   batch_size: int | None = None, split: str = "test"):
    """Sample-level accuracy on ``split`` after training with the given hyperparameters."""
    def objective(theta: dict) -> float:
        return split_accuracy(fit(dataset, arch, theta, seed, batch_size), dataset, split)
    return objective


def tune(dataset: LabeledDataset, arch: str, maxiter: int, seed: int = 0, kappa: float = 2.0,
         space: HyperSpace | None = None, history_path=None,
         batch_size: int | None = None, noise: float = TUNING_NOISE) -> BoResult:
    space = space or default_space(arch)
    return bo_run(make_objective(dataset, arch, seed, batch_size), space, maxiter, seed=seed,
                  kappa=kappa, noise=noise, history_path=history_path)


def save_theta(result: BoResult, arch: str, path) -> None:
    doc = {"architecture": arch, "theta": result.best_theta, "accuracy": result.best_accuracy,
           "evaluations": len(result.history)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_theta(path) -> tuple[str, dict]:
    doc = json.loads(Path(path).read_text())
    return doc["architecture"], doc["theta"]
