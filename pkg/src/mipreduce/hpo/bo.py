"""Bayesian optimisation with Sobol initialisation and a UCB acquisition."""
from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .gp import GpModel, gp_fit
from .sobol import sobol_points

log = logging.getLogger(__name__)

N_INIT = 5
SCAN_POINTS = 1024
N_STARTS = 5
NEIGHBOUR_STEP = 1.0 / 1024  # grid step in unit coordinates for real dimensions


class SpaceError(ValueError):
    pass


@dataclass(frozen=True)
class Dimension:
    name: str
    lower: float
    upper: float
    scale: str = "linear"  # or "log10"
    kind: str = "real"  # or "integer"

    def __post_init__(self):
        if not self.lower < self.upper:
            raise SpaceError(f"{self.name}: lower bound must be below upper bound")
        if self.scale not in ("linear", "log10"):
            raise SpaceError(f"{self.name}: scale must be linear or log10")
        if self.kind not in ("real", "integer"):
            raise SpaceError(f"{self.name}: kind must be real or integer")
        if self.scale == "log10" and self.lower <= 0:
            raise SpaceError(f"{self.name}: log scale needs positive bounds")

    def _ends(self):
        if self.scale == "log10":
            return math.log10(self.lower), math.log10(self.upper)
        return float(self.lower), float(self.upper)

    def from_unit(self, u: float):
        lo, hi = self._ends()
        v = lo + min(max(u, 0.0), 1.0) * (hi - lo)
        if self.scale == "log10":
            v = 10.0 ** v
        v = min(max(v, self.lower), self.upper)
        if self.kind == "integer":
            return int(min(max(round(v), math.ceil(self.lower)), math.floor(self.upper)))
        return float(v)

    def to_unit(self, v: float) -> float:
        lo, hi = self._ends()
        x = math.log10(v) if self.scale == "log10" else float(v)
        return (x - lo) / (hi - lo)


@dataclass(frozen=True)
class HyperSpace:
    dims: tuple[Dimension, ...]

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if not names or len(set(names)) != len(names):
            raise SpaceError("a space needs uniquely named dimensions")

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def __len__(self):
        return len(self.dims)

    def decode(self, u) -> dict:
        return {d.name: d.from_unit(float(x)) for d, x in zip(self.dims, u)}

    def encode(self, theta: dict) -> np.ndarray:
        return np.array([d.to_unit(theta[d.name]) for d in self.dims])

    def contains(self, theta: dict) -> bool:
        return all(d.lower <= theta[d.name] <= d.upper for d in self.dims)


def ann_space() -> HyperSpace:
    return HyperSpace((
        Dimension("hidden_layers", 1, 3, "linear", "integer"),
        Dimension("neurons", 50, 256, "linear", "integer"),
        Dimension("learning_rate", 1e-5, 1e-1, "log10", "real"),
        Dimension("epochs", 500, 15000, "linear", "integer"),
    ))


def cnn_space() -> HyperSpace:
    return HyperSpace((
        Dimension("learning_rate", 1e-5, 1e-1, "log10", "real"),
        Dimension("epochs", 500, 15000, "linear", "integer"),
        Dimension("dropout1", 0.0, 0.3, "linear", "real"),
        Dimension("dropout2", 0.0, 0.3, "linear", "real"),
    ))


def space_from_dict(d: dict) -> HyperSpace:
    return HyperSpace(tuple(Dimension(name, float(v["lower"]), float(v["upper"]),
                                      v.get("scale", "linear"), v.get("kind", "real"))
                            for name, v in d.items()))


# ------------------------------------------------------------------ acquisition
def ucb(model: GpModel, U, kappa: float) -> np.ndarray:
    mean, sd = model.posterior(U)
    if math.isinf(kappa):
        return sd
    return mean + kappa * sd


def maximize_ucb(model: GpModel, dim: int, kappa: float) -> np.ndarray:
    """Best unit-cube point from a Sobol scan refined by bounded Nelder-Mead."""
    scan = sobol_points(dim, SCAN_POINTS)
    vals = ucb(model, scan, kappa)
    starts = scan[np.argsort(-vals, kind="stable")[:N_STARTS]]
    best_u, best_v = scan[int(np.argmax(vals))], float(vals.max())
    for s in starts:
        res = minimize(lambda u: -float(ucb(model, np.clip(u, 0, 1)[None, :], kappa)[0]), s,
                       method="Nelder-Mead", bounds=[(0.0, 1.0)] * dim,
                       options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 400 * dim})
        u = np.clip(res.x, 0.0, 1.0)
        v = float(ucb(model, u[None, :], kappa)[0])
        if v > best_v + 1e-15:
            best_u, best_v = u, v
    return best_u


def _key(space: HyperSpace, theta: dict) -> tuple:
    return tuple(round(theta[n], 12) if isinstance(theta[n], float) else theta[n]
                 for n in space.names)


def _nearest_unevaluated(space: HyperSpace, u: np.ndarray, seen: set) -> tuple[dict, np.ndarray]:
    """Rounded point closest to ``u`` whose hyperparameters were not evaluated yet."""
    steps = []
    for d in space.dims:
        if d.kind == "integer" and d.scale == "linear":
            steps.append(1.0 / (d.upper - d.lower))
        else:
            steps.append(NEIGHBOUR_STEP)
    steps = np.array(steps)
    for radius in range(1, 64):
        offsets = [o for o in itertools.product(range(-radius, radius + 1), repeat=len(space))
                   if max(abs(x) for x in o) == radius]
        cands = []
        for o in offsets:
            v = np.clip(u + np.array(o) * steps, 0.0, 1.0)
            th = space.decode(v)
            if _key(space, th) not in seen:
                cands.append((float(np.sum((np.array(o) * steps) ** 2)), o, v, th))
        if cands:
            cands.sort(key=lambda c: (c[0], c[1]))
            return cands[0][3], cands[0][2]
    raise RuntimeError("no unevaluated neighbour found")


def acquire_ucb(model: GpModel, space: HyperSpace, kappa: float = 2.0,
                seen: set | None = None) -> tuple[dict, np.ndarray]:
    """Next hyperparameters (decoded and rounded) and their unit-cube coordinates."""
    u = maximize_ucb(model, len(space), kappa)
    theta = space.decode(u)
    if seen is not None and _key(space, theta) in seen:
        theta, u = _nearest_unevaluated(space, u, seen)
    return theta, space.encode(theta)


# ------------------------------------------------------------------- main loop
@dataclass
class Evaluation:
    iteration: int
    phase: str  # "sobol" or "ucb"
    theta: dict
    accuracy: float
    wall_time: float
    error: str = ""


@dataclass
class BoResult:
    best_theta: dict
    best_accuracy: float
    history: list[Evaluation] = field(default_factory=list)

    @property
    def incumbent_trace(self) -> list[float]:
        out, best = [], -math.inf
        for e in self.history:
            best = max(best, e.accuracy)
            out.append(best)
        return out


def _history_writer(path, space: HyperSpace):
    if path is None:
        return None
    fh = open(path, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["iteration", "phase"] + space.names + ["accuracy", "wall_time", "error"])
    fh.flush()
    return fh, w


def bo_run(objective: Callable[[dict], float], space: HyperSpace, maxiter: int, seed: int = 0,
           kappa: float = 2.0, n_init: int = N_INIT, noise: float = 1e-6,
           history_path=None) -> BoResult:
    """Maximise ``objective`` with exactly ``n_init + maxiter`` evaluations.

    ``seed`` selects which block of the Sobol sequence seeds the search (block 0
    is the sequence start).  A failing evaluation scores 0 and the loop goes on.
    Ties keep the earlier incumbent.
    """
    if maxiter < 0 or n_init < 1:
        raise ValueError("need maxiter >= 0 and at least one initial point")
    writer = _history_writer(history_path, space)
    history: list[Evaluation] = []
    U: list[np.ndarray] = []
    seen: set = set()
    best_theta, best_acc = None, -math.inf

    def evaluate(theta, u, it, phase):
        nonlocal best_theta, best_acc
        t0 = time.perf_counter()
        err = ""
        try:
            acc = float(objective(dict(theta)))
            if not math.isfinite(acc):
                raise ValueError(f"objective returned {acc}")
        except Exception as exc:  # an untrainable configuration scores zero
            log.warning("evaluation %d failed: %s", it, exc)
            acc, err = 0.0, f"{type(exc).__name__}: {exc}"
        ev = Evaluation(it, phase, dict(theta), acc, time.perf_counter() - t0, err)
        history.append(ev)
        U.append(np.asarray(u, dtype=float))
        seen.add(_key(space, theta))
        if acc > best_acc:
            best_theta, best_acc = dict(theta), acc
        if writer:
            fh, w = writer
            w.writerow([it, phase] + [theta[n] for n in space.names]
                       + [repr(acc), f"{ev.wall_time:.3f}", err])
            fh.flush()

    try:
        init = sobol_points(len(space), n_init, skip=seed * n_init)
        for i, u in enumerate(init):
            theta = space.decode(u)
            if _key(space, theta) in seen:
                theta, u = _nearest_unevaluated(space, u, seen)
            evaluate(theta, space.encode(theta), i + 1, "sobol")
        for i in range(maxiter):
            X = np.array(U)
            y = np.array([e.accuracy for e in history])
            if np.all(np.ptp(X, axis=0) == 0):
                theta, u = _nearest_unevaluated(space, X[0], seen)
            else:
                model = gp_fit(X, y, noise=noise)
                theta, u = acquire_ucb(model, space, kappa, seen)
            evaluate(theta, u, n_init + i + 1, "ucb")
    finally:
        if writer:
            writer[0].close()
    return BoResult(best_theta, best_acc, history)
