"""Randomised demand instances, oracle labelling and dataset files."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .milp import INFEASIBLE, OPTIMAL, SolverConfig, solve_milp
from .sct.config import FEATURE_DAYS, DemandProfile, SupplyChainConfig
from .sct.model import build_model, established_vector

log = logging.getLogger(__name__)

DISTRIBUTIONS = ("uniform", "left_triangular", "right_triangular")
DATASET_VERSION = "mipreduce-dataset/1"
N_FACILITY_LABELS = 6
LABEL_NAMES = [f"m{i}" for i in range(1, N_FACILITY_LABELS + 1)] + ["infeasible"]
SPLITS = ("train", "test", "validation")


class CapacityError(ValueError):
    """More patients than the centers can receive over the horizon."""


class DatasetFormatError(ValueError):
    pass


# ---------------------------------------------------------------- sampling
def day_weights(distribution: str, horizon: int) -> np.ndarray:
    """Arrival-day probabilities; left triangular peaks on day 1, right on the last day."""
    days = np.arange(1, horizon + 1, dtype=float)
    if distribution == "uniform":
        w = np.ones(horizon)
    elif distribution == "left_triangular":
        w = horizon - days + 1
    elif distribution == "right_triangular":
        w = days.copy()
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return w / w.sum()


def sample_demand_profile(
    n_patients: int,
    distribution: str,
    n_centers: int,
    rng: np.random.Generator,
    horizon: int = FEATURE_DAYS,
    daily_cap: int = 8,
) -> DemandProfile:
    """Draw arrival days from ``distribution`` and centers uniformly.

    A draw landing on a full (center, day) cell moves to the nearest day with
    room at that center, scanning earlier days before later ones at each
    distance, so the total number of patients is always preserved.
    """
    if n_patients < 1:
        raise ValueError("need at least one patient")
    if n_patients > horizon * n_centers * daily_cap:
        raise CapacityError(
            f"{n_patients} patients exceed {n_centers} centers x {horizon} days x {daily_cap}/day")
    weights = day_weights(distribution, horizon)
    days = rng.choice(horizon, size=n_patients, p=weights)
    centers = rng.integers(0, n_centers, size=n_patients)
    counts = np.zeros((n_centers, horizon), dtype=int)
    arrivals = []
    for c, d in zip(centers.tolist(), days.tolist()):
        if counts[c].sum() >= horizon * daily_cap:
            # this center is full everywhere; the least loaded center takes the patient
            c = int(np.argmin(counts.sum(axis=1)))
        t = _nearest_free(counts[c], d, daily_cap)
        counts[c, t] += 1
        arrivals.append((c, t + 1))
    return DemandProfile(tuple(arrivals), n_centers, horizon,
                         meta={"distribution": distribution, "level": n_patients})


def _nearest_free(row: np.ndarray, d: int, cap: int) -> int:
    if row[d] < cap:
        return d
    for dist in range(1, len(row)):
        for t in (d - dist, d + dist):
            if 0 <= t < len(row) and row[t] < cap:
                return t
    raise CapacityError("no free day at this center")


# --------------------------------------------------------- generation plan
@dataclass(frozen=True)
class GenerationPlan:
    levels: tuple[int, ...]
    distributions: tuple[str, ...] = DISTRIBUTIONS
    replicates: int = 5
    daily_cap: int = 8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        for d in self.distributions:
            if d not in DISTRIBUTIONS:
                raise ValueError(f"unknown distribution {d!r}")
        if self.replicates < 1 or not self.levels:
            raise ValueError("plan needs at least one level and one replicate")

    @property
    def n_instances(self) -> int:
        return len(self.levels) * len(self.distributions) * self.replicates

    @classmethod
    def from_range(cls, p_min: int, p_max: int, n_levels: int, **kw) -> "GenerationPlan":
        """Evenly spaced demand levels, rounded to whole patients (repeats allowed)."""
        levels = np.rint(np.linspace(p_min, p_max, n_levels)).astype(int)
        return cls(tuple(levels.tolist()), **kw)


@dataclass(frozen=True)
class InstanceSpec:
    index: int
    level: int
    distribution: str
    replicate: int
    seed: int
    profile: DemandProfile


def generate_instance_set(plan: GenerationPlan, n_centers: int,
                          horizon: int = FEATURE_DAYS) -> list[InstanceSpec]:
    """Profiles ordered by (level, distribution, replicate).

    Each instance draws from its own generator seeded by (plan seed, index), so
    an instance does not depend on how many were generated before it.
    """
    out = []
    k = 0
    for level in plan.levels:
        for dist in plan.distributions:
            for rep in range(plan.replicates):
                seed = int(np.random.SeedSequence([plan.seed, k]).generate_state(1)[0])
                rng = np.random.default_rng(seed)
                try:
                    prof = sample_demand_profile(level, dist, n_centers, rng, horizon, plan.daily_cap)
                except ValueError as exc:
                    raise type(exc)(f"instance {k} (level={level}, {dist}, replicate={rep}): {exc}") from exc
                out.append(InstanceSpec(k, level, dist, rep, seed, prof))
                k += 1
    return out


# ---------------------------------------------------------------- labelling
@dataclass
class LabeledInstance:
    features: np.ndarray
    labels: np.ndarray  # m1..m6, infeasible
    objective: float | None
    status: str
    level: int
    distribution: str
    replicate: int
    seed: int
    split: str = ""
    arrivals: tuple = ()

    def __eq__(self, other):
        if not isinstance(other, LabeledInstance):
            return NotImplemented
        same_obj = (self.objective == other.objective
                    or (self.objective is None and other.objective is None))
        return (np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels) and same_obj
                and (self.status, self.level, self.distribution, self.replicate, self.seed,
                     self.split, tuple(self.arrivals))
                == (other.status, other.level, other.distribution, other.replicate, other.seed,
                    other.split, tuple(other.arrivals)))

    def profile(self, n_centers: int, horizon: int = FEATURE_DAYS) -> DemandProfile:
        return DemandProfile(tuple(self.arrivals), n_centers, horizon)


@dataclass
class LabeledDataset:
    instances: list[LabeledInstance]
    scaling: dict = field(default_factory=dict)
    unresolved: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.instances)

    def X(self, split: str | None = None) -> np.ndarray:
        rows = [i.features for i in self.instances if split is None or i.split == split]
        return np.array(rows, dtype=float).reshape(-1, FEATURE_DAYS)

    def Y(self, split: str | None = None) -> np.ndarray:
        rows = [i.labels for i in self.instances if split is None or i.split == split]
        return np.array(rows, dtype=int).reshape(-1, len(LABEL_NAMES))

    def subset(self, split: str) -> list[LabeledInstance]:
        return [i for i in self.instances if i.split == split]

    def label_counts(self, split: str | None = None) -> dict:
        Y = self.Y(split)
        return {name: int(Y[:, k].sum()) for k, name in enumerate(LABEL_NAMES)}

    def scale_factor(self) -> float:
        return float(self.scaling.get("scale", 1.0))


def label_profile(profile: DemandProfile, config: SupplyChainConfig,
                  solver: SolverConfig | None = None):
    """Solve the full model; return (labels, objective, status)."""
    solver = solver or SolverConfig()
    built = build_model(config, profile)
    sol = solve_milp(built.problem, solver)
    labels = np.zeros(len(LABEL_NAMES), dtype=int)
    if sol.status == OPTIMAL:
        labels[:config.n_facilities] = established_vector(built, sol)
        return labels, float(sol.objective), OPTIMAL
    if sol.status == INFEASIBLE:
        labels[-1] = 1
        return labels, None, INFEASIBLE
    return None, None, sol.status


def label_instances(
    specs: Sequence[InstanceSpec],
    config: SupplyChainConfig,
    solver: SolverConfig | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> LabeledDataset:
    """Label every instance with the optimal facility vector or the infeasible flag.

    Instances the solver cannot settle (node or time limit) are left out and
    listed in ``dataset.unresolved``.
    """
    if config.n_facilities != N_FACILITY_LABELS:
        raise ValueError(f"labels assume {N_FACILITY_LABELS} facilities")
    out, unresolved = [], []
    for k, spec in enumerate(specs):
        labels, obj, status = label_profile(spec.profile, config, solver)
        if labels is None:
            msg = {"index": spec.index, "level": spec.level, "distribution": spec.distribution,
                   "replicate": spec.replicate, "status": status}
            log.warning("instance %d unresolved (%s); excluded", spec.index, status)
            unresolved.append(msg)
        else:
            out.append(LabeledInstance(
                spec.profile.features(), labels, obj, status, spec.level, spec.distribution,
                spec.replicate, spec.seed, "", spec.profile.arrivals))
        if progress:
            progress(k + 1, len(specs))
    return LabeledDataset(out, {}, unresolved)


# ---------------------------------------------------------------- splitting
def split_dataset(dataset: LabeledDataset, fractions=(0.8, 0.1, 0.1), seed: int = 0,
                  daily_cap: int | None = None, n_centers: int | None = None) -> LabeledDataset:
    """Random split into train/test/validation, deterministic under ``seed``.

    Sizes are ``round(n * f)`` for train and test with validation taking the
    rest.  Feature scaling divides by the largest possible daily arrival count
    (``daily_cap * n_centers``) when given, else by the training maximum.
    """
    fr = np.asarray(fractions, dtype=float)
    if fr.shape != (3,) or np.any(fr < 0) or not math.isclose(fr.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("split fractions must be three non-negative numbers summing to 1")
    n = len(dataset.instances)
    n_train = int(round(n * fr[0]))
    n_test = int(round(n * fr[1]))
    n_train = min(n_train, n)
    n_test = min(n_test, n - n_train)
    if n_train == 0:
        raise ValueError("split leaves the training set empty")
    perm = np.random.default_rng(seed).permutation(n)
    names = np.empty(n, dtype=object)
    names[perm[:n_train]] = "train"
    names[perm[n_train:n_train + n_test]] = "test"
    names[perm[n_train + n_test:]] = "validation"
    for inst, s in zip(dataset.instances, names):
        inst.split = s
    Xtr = dataset.X("train")
    if daily_cap and n_centers:
        scale = float(daily_cap * n_centers)
    else:
        scale = float(max(Xtr.max(), 1.0))
    dataset.scaling = {"scale": scale, "train_mean": float(Xtr.mean()),
                       "train_max": float(Xtr.max())}
    return dataset


def split_summary(dataset: LabeledDataset) -> dict:
    return {s: {"n": len(dataset.subset(s)), **dataset.label_counts(s)} for s in SPLITS}


# --------------------------------------------------------------- file format
_COLUMNS = ([f"day_{d}" for d in range(1, FEATURE_DAYS + 1)] + LABEL_NAMES
            + ["objective", "status", "level", "distribution", "replicate", "seed", "split",
               "arrivals"])


def _fmt_arrivals(arrivals) -> str:
    return ";".join(f"{c + 1}:{t}" for c, t in arrivals)


def _parse_arrivals(text: str):
    if not text:
        return ()
    return tuple((int(c) - 1, int(t)) for c, t in (x.split(":") for x in text.split(";")))


def save_dataset(dataset: LabeledDataset, path) -> None:
    buf = io.StringIO()
    scaling = " ".join(f"{k}={v!r}" for k, v in sorted(dataset.scaling.items()))
    buf.write(f"# {DATASET_VERSION} {scaling}\n".rstrip() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_COLUMNS)
    for inst in dataset.instances:
        w.writerow(
            [f"{int(v)}" if float(v).is_integer() else repr(float(v)) for v in inst.features]
            + [int(v) for v in inst.labels]
            + ["" if inst.objective is None else repr(float(inst.objective)), inst.status,
               inst.level, inst.distribution, inst.replicate, inst.seed, inst.split,
               _fmt_arrivals(inst.arrivals)])
    Path(path).write_text(buf.getvalue())


def load_dataset(path) -> LabeledDataset:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise DatasetFormatError(f"{path}: missing version header on line 1")
    head = lines[0][2:].split()
    if head[0] != DATASET_VERSION:
        raise DatasetFormatError(f"{path}: version {head[0]!r} is not {DATASET_VERSION!r}")
    scaling = {}
    for item in head[1:]:
        k, v = item.split("=", 1)
        scaling[k] = float(v)
    rows = list(csv.reader(lines[1:]))
    if not rows or rows[0] != _COLUMNS:
        raise DatasetFormatError(f"{path}: unexpected column header on line 2")
    nf, nl = FEATURE_DAYS, len(LABEL_NAMES)
    out = []
    for lineno, row in enumerate(rows[1:], start=3):
        if len(row) != len(_COLUMNS):
            raise DatasetFormatError(
                f"{path}: malformed row on line {lineno} ({len(row)} fields, expected {len(_COLUMNS)})")
        try:
            feats = np.array([float(v) for v in row[:nf]])
            labels = np.array([int(v) for v in row[nf:nf + nl]])
            obj_s, status, level, dist, rep, seed, split, arr = row[nf + nl:]
            inst = LabeledInstance(feats, labels, float(obj_s) if obj_s else None, status,
                                   int(level), dist, int(rep), int(seed), split,
                                   _parse_arrivals(arr))
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: malformed row on line {lineno}: {exc}") from None
        out.append(inst)
    return LabeledDataset(out, scaling)
