"""Binary cross-entropy loss, Adam training, prediction and model files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import Network, NetworkSpec, SpecError

MODEL_FORMAT = "mipreduce-model/1"


class TrainingDiverged(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


def per_label_bce(logits: np.ndarray, labels: np.ndarray, pos_weight=None) -> np.ndarray:
    """Mean-over-batch loss of each label, computed from logits without sigmoid."""
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=float)
    if z.shape != y.shape:
        raise ValueError(f"logits {z.shape} and labels {y.shape} differ in shape")
    w = np.ones(z.shape[-1]) if pos_weight is None else np.asarray(pos_weight, dtype=float)
    # -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    sp_neg = np.logaddexp(0.0, -z)
    sp_pos = np.logaddexp(0.0, z)
    return (w * y * sp_neg + (1.0 - y) * sp_pos).mean(axis=0)


def bce_with_logits_loss(logits, labels, pos_weight=None) -> tuple[float, np.ndarray]:
    """Sum over labels of the batch-mean BCE, and its gradient with respect to the logits."""
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=float)
    loss = float(per_label_bce(z, y, pos_weight).sum())
    w = np.ones(z.shape[-1]) if pos_weight is None else np.asarray(pos_weight, dtype=float)
    sig = _sigmoid(z)
    # d/dz of w*y*softplus(-z) + (1-y)*softplus(z)
    grad = (-w * y * (1.0 - sig) + (1.0 - y) * sig) / z.shape[0]
    return loss, grad


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float
    batch_size: int | None = None  # None means full batch
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    pos_weight: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ValueError("epochs must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be positive")


@dataclass
class TrainedModel:
    network: Network
    scaling: dict = field(default_factory=lambda: {"scale": 1.0})
    loss_log: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def spec(self) -> NetworkSpec:
        return self.network.spec

    def scale_features(self, features) -> np.ndarray:
        return np.atleast_2d(np.asarray(features, dtype=float)) / float(self.scaling["scale"])


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(spec: NetworkSpec, X, Y, config: TrainConfig, scale: float = 1.0,
          scaling_stats: dict | None = None) -> TrainedModel:
    """Fit ``spec`` to raw features ``X`` (divided by ``scale``) and 0/1 labels ``Y``.

    The shuffle order and dropout masks come from one generator seeded by
    ``config.seed``, so a rerun reproduces the parameters exactly.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.input_width:
        raise SpecError(f"features must have shape (N, {spec.input_width})")
    if Y.shape != (X.shape[0], spec.output_width):
        raise SpecError(f"labels must have shape (N, {spec.output_width})")
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty split")
    if not scale > 0:
        raise ValueError("feature scale must be positive")
    net = Network.build(spec, seed=config.seed)
    rng = np.random.default_rng([config.seed, 1])
    opt = Adam(net.params, config.learning_rate, config.beta1, config.beta2, config.eps)
    Xs = X / scale
    n = X.shape[0]
    bs = n if config.batch_size is None else min(config.batch_size, n)
    log: list[float] = []
    for epoch in range(int(config.epochs)):
        order = np.arange(n) if bs == n else rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            logits = net.forward(Xs[idx], train=True, rng=rng)
            loss, g = bce_with_logits_loss(logits, Y[idx], config.pos_weight)
            net.backward(g)
            with np.errstate(over="ignore", invalid="ignore"):  # caught by the guard below
                opt.step(net.grads)
            total += loss * len(idx)
        epoch_loss = total / n
        # an overflowing second moment silently freezes Adam, so it counts as divergence
        if not np.isfinite(epoch_loss) or not all(
                np.isfinite(a).all() for a in net.params + opt.v):
            raise TrainingDiverged(
                f"loss became non-finite at epoch {epoch + 1} (lr={config.learning_rate}); "
                f"last finite loss {log[-1] if log else 'n/a'}")
        log.append(epoch_loss)
    stats = {"scale": float(scale)}
    if scaling_stats:
        stats.update({k: v for k, v in scaling_stats.items() if k != "scale"})
    cfg = {"epochs": int(config.epochs), "learning_rate": float(config.learning_rate),
           "batch_size": config.batch_size, "seed": int(config.seed)}
    return TrainedModel(net, stats, log, cfg)


def forward(model: TrainedModel, features, mode: str = "eval", rng=None) -> np.ndarray:
    """Logits for raw features; ``mode='train'`` applies dropout using ``rng``."""
    if mode not in ("eval", "train"):
        raise ValueError("mode must be 'eval' or 'train'")
    return model.network.forward(model.scale_features(features), train=mode == "train", rng=rng)


def predict_probabilities(model: TrainedModel, features) -> np.ndarray:
    """Independent per-label probabilities, shape (N, 7) or (7,) for one profile."""
    single = np.asarray(features).ndim == 1
    p = _sigmoid(forward(model, features, "eval"))
    return p[0] if single else p


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "spec": model.spec.to_dict(),
        "scaling": model.scaling,
        "config": model.config,
        "loss_log": [float(x) for x in model.loss_log],
        "params": [{"shape": list(p.shape), "values": [float(v) for v in p.ravel()]}
                   for p in model.network.params],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: unsupported model format {doc.get('format')!r}")
    net = Network.build(NetworkSpec.from_dict(doc["spec"]))
    params = net.params
    if len(params) != len(doc["params"]):
        raise ModelFormatError(f"{path}: parameter count does not match the network")
    for p, rec in zip(params, doc["params"]):
        vals = np.array(rec["values"], dtype=float)
        if tuple(rec["shape"]) != p.shape or vals.size != p.size:
            raise ModelFormatError(f"{path}: parameter shape mismatch")
        if not np.isfinite(vals).all():
            raise ModelFormatError(f"{path}: non-finite parameter")
        p[...] = vals.reshape(p.shape)
    return TrainedModel(net, doc["scaling"], doc.get("loss_log", []), doc.get("config", {}))
