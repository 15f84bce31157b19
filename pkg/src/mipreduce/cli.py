"""Command-line front end: gen-data, tune, train, evaluate, solve.

All commands read one JSON run configuration; flags override single fields.
Relative paths in the configuration are resolved against its directory.
Failures exit nonzero with the failing stage named in the message.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TUNE = 4
EXIT_TRAIN = 5
EXIT_EVALUATE = 6
EXIT_SOLVE = 7

DEFAULTS = {
    "seed": 0,
    "parameters": "desk",
    "paths": {
        "dataset": "dataset.csv",
        "theta": "theta.json",
        "history": "history.csv",
        "model": "model.json",
        "reports": "reports",
    },
    "generation": {
        "p_min": 2, "p_max": 6, "n_levels": 10, "replicates": 5,
        "distributions": ["uniform", "left_triangular", "right_triangular"],
        "split": [0.8, 0.1, 0.1],
    },
    "network": "ann",
    "train": {"batch_size": None},
    "hpo": {"maxiter": 20, "kappa": 2.0, "noise": 1e-3, "space": None},
    "solver": {"mipgap": 1e-4, "node_limit": None, "time_limit": None},
    "k_prob": 0.5,
    "mode": "reduce",
}


class StageError(Exception):
    def __init__(self, stage: str, code: int, message: str):
        super().__init__(message)
        self.stage, self.code = stage, code


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            return cls(_merge(DEFAULTS, {}), Path.cwd())
        p = Path(path)
        try:
            doc = json.loads(p.read_text())
        except FileNotFoundError:
            raise StageError("config", EXIT_CONFIG, f"configuration file {p} not found") from None
        except json.JSONDecodeError as exc:
            raise StageError("config", EXIT_CONFIG, f"{p}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise StageError("config", EXIT_CONFIG, f"{p}: expected a JSON object")
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise StageError("config", EXIT_CONFIG, f"{p}: unknown keys {sorted(unknown)}")
        return cls(_merge(DEFAULTS, doc), p.resolve().parent)

    def path(self, key: str) -> Path:
        p = Path(self.raw["paths"][key])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def supply_chain(self):
        from .sct import ConfigError, SupplyChainConfig, builtin_config
        ref = self.raw["parameters"]
        try:
            if ref.endswith(".json"):
                p = Path(ref) if Path(ref).is_absolute() else self.base_dir / ref
                return SupplyChainConfig.load(p)
            return builtin_config(ref)
        except (ConfigError, OSError, FileNotFoundError) as exc:
            raise StageError("config", EXIT_CONFIG, f"parameter file {ref!r}: {exc}") from None

    def solver(self):
        from .milp import SolverConfig
        s = self.raw["solver"]
        try:
            return SolverConfig(mipgap=float(s["mipgap"]), node_limit=s.get("node_limit"),
                                time_limit=s.get("time_limit"))
        except (TypeError, ValueError) as exc:
            raise StageError("config", EXIT_CONFIG, f"solver settings: {exc}") from None

    def space(self):
        from .hpo import space_from_dict
        from .hpo.tuning import default_space
        sp = self.raw["hpo"].get("space")
        try:
            return space_from_dict(sp) if sp else default_space(self.raw["network"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StageError("config", EXIT_CONFIG, f"hyperparameter space: {exc}") from None


def _load_dataset(cfg: RunConfig):
    from .datagen import DatasetFormatError, load_dataset
    p = cfg.path("dataset")
    try:
        return load_dataset(p)
    except FileNotFoundError:
        raise StageError("data", EXIT_DATA, f"dataset {p} not found; run gen-data first") from None
    except DatasetFormatError as exc:
        raise StageError("data", EXIT_DATA, str(exc)) from None


def _load_model(cfg: RunConfig, stage: str, code: int):
    from .neural import ModelFormatError, load_model
    p = cfg.path("model")
    try:
        return load_model(p)
    except FileNotFoundError:
        raise StageError(stage, code, f"model {p} not found; run train first") from None
    except ModelFormatError as exc:
        raise StageError(stage, code, str(exc)) from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# ------------------------------------------------------------------ commands
def cmd_gen_data(cfg: RunConfig, out=None) -> Path:
    out = out or sys.stdout
    from .datagen import (GenerationPlan, generate_instance_set, label_instances, save_dataset,
                          split_dataset, split_summary)
    sc = cfg.supply_chain()
    g = cfg.raw["generation"]
    try:
        plan = GenerationPlan.from_range(int(g["p_min"]), int(g["p_max"]), int(g["n_levels"]),
                                         distributions=tuple(g["distributions"]),
                                         replicates=int(g["replicates"]),
                                         daily_cap=sc.center_daily_cap, seed=cfg.seed)
        specs = generate_instance_set(plan, len(sc.centers), sc.demand_horizon)
    except (KeyError, TypeError, ValueError) as exc:
        raise StageError("generate", EXIT_DATA, str(exc)) from None
    try:
        ds = label_instances(specs, sc, cfg.solver())
    except Exception as exc:
        raise StageError("label", EXIT_DATA, f"{type(exc).__name__}: {exc}") from exc
    try:
        ds = split_dataset(ds, tuple(g["split"]), seed=cfg.seed, daily_cap=sc.center_daily_cap,
                           n_centers=len(sc.centers))
    except ValueError as exc:
        raise StageError("split", EXIT_DATA, str(exc)) from None
    path = cfg.path("dataset")
    path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, path)
    print(f"wrote {len(ds)} instances to {path}", file=out)
    if ds.unresolved:
        print(f"{len(ds.unresolved)} instances unresolved and excluded", file=out)
    print("label distribution (positives per label):", file=out)
    print(_dump({"all": ds.label_counts(), **split_summary(ds)}), file=out)
    return path


def cmd_tune(cfg: RunConfig, out=None):
    out = out or sys.stdout
    from .hpo.tuning import save_theta, tune
    ds = _load_dataset(cfg)
    h = cfg.raw["hpo"]
    space = cfg.space()
    hist = cfg.path("history")
    hist.parent.mkdir(parents=True, exist_ok=True)
    try:
        res = tune(ds, cfg.raw["network"], int(h["maxiter"]), seed=cfg.seed,
                   kappa=float(h["kappa"]), space=space, history_path=hist,
                   batch_size=cfg.raw["train"].get("batch_size"), noise=float(h["noise"]))
    except Exception as exc:
        raise StageError("tune", EXIT_TUNE, f"{type(exc).__name__}: {exc}") from exc
    save_theta(res, cfg.raw["network"], cfg.path("theta"))
    print(f"{len(res.history)} evaluations; best test-split sample accuracy "
          f"{res.best_accuracy:.4f}", file=out)
    print(_dump(res.best_theta), file=out)
    return res


def _theta_for_training(cfg: RunConfig, theta_path: str | None) -> dict:
    from .hpo.tuning import load_theta
    explicit = {k: v for k, v in cfg.raw["train"].items() if k != "batch_size"}
    p = Path(theta_path) if theta_path else cfg.path("theta")
    theta = {}
    if p.exists():
        arch, theta = load_theta(p)
        if arch != cfg.raw["network"]:
            raise StageError("train", EXIT_TRAIN,
                             f"{p} was tuned for {arch!r}, configuration asks for {cfg.raw['network']!r}")
    elif theta_path:
        raise StageError("train", EXIT_TRAIN, f"hyperparameter file {p} not found")
    theta.update(explicit)
    needed = {"ann": ("hidden_layers", "neurons", "learning_rate", "epochs"),
              "cnn": ("learning_rate", "epochs")}[cfg.raw["network"]]
    missing = [k for k in needed if k not in theta]
    if missing:
        raise StageError("train", EXIT_TRAIN,
                         f"missing hyperparameters {missing}; run tune or set them under 'train'")
    return theta


def _metrics_block(report) -> str:
    lines = [
        f"sample-level accuracy (%)  {100 * report.sample_accuracy:.2f}",
        f"Jaccard index (%)          {100 * report.jaccard_index:.2f}",
        f"Hamming loss (%)           {100 * report.hamming_loss:.2f}",
        "",
        f"{'class':<14}{'precision':>10}{'recall':>10}{'f1-score':>10}{'weight':>8}",
    ]
    rows = list(report.per_label.items()) + [
        ("micro avg", report.micro), ("macro avg", report.macro),
        ("weighted avg", report.weighted), ("samples avg", report.sample)]
    for name, s in rows:
        lines.append(f"{name:<14}{s.precision:>10.2f}{s.recall:>10.2f}{s.f1:>10.2f}{s.support:>8d}")
    return "\n".join(lines)


def _predict_labels(model, X) -> np.ndarray:
    from .hpo.tuning import THRESHOLD
    from .neural import predict_probabilities
    return (predict_probabilities(model, X) >= THRESHOLD).astype(int)


def cmd_train(cfg: RunConfig, theta_path: str | None = None, out=None):
    out = out or sys.stdout
    from .hpo.tuning import fit
    from .metrics import evaluate
    from .neural import SpecError, TrainingDiverged, save_model
    ds = _load_dataset(cfg)
    theta = _theta_for_training(cfg, theta_path)
    try:
        model = fit(ds, cfg.raw["network"], theta, seed=cfg.seed,
                    batch_size=cfg.raw["train"].get("batch_size"))
    except TrainingDiverged as exc:
        raise StageError("train", EXIT_TRAIN, f"training diverged: {exc}") from None
    except (SpecError, ValueError, KeyError) as exc:
        raise StageError("train", EXIT_TRAIN, str(exc)) from None
    path = cfg.path("model")
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, path)
    print(f"saved model to {path} (final training loss {model.loss_log[-1]:.6g})", file=out)
    if len(ds.X("test")):
        rep = evaluate(ds.Y("test"), _predict_labels(model, ds.X("test")))
        print("test split:", file=out)
        print(_metrics_block(rep), file=out)
    return model


def cmd_evaluate(cfg: RunConfig, split: str = "validation", out=None):
    out = out or sys.stdout
    from .metrics import evaluate, mlcm_confusion
    ds = _load_dataset(cfg)
    model = _load_model(cfg, "evaluate", EXIT_EVALUATE)
    X, Y = ds.X(split), ds.Y(split)
    if len(X) == 0:
        raise StageError("evaluate", EXIT_EVALUATE, f"the {split} split is empty")
    pred = _predict_labels(model, X)
    rep = evaluate(Y, pred)
    mlcm = mlcm_confusion(Y, pred)
    d = cfg.path("reports")
    d.mkdir(parents=True, exist_ok=True)
    (d / f"metrics_{split}.json").write_text(rep.to_json())
    (d / f"metrics_{split}.csv").write_text(rep.table())
    lines = ["true\\pred," + ",".join(mlcm.col_names)]
    for name, row in zip(mlcm.row_names, mlcm.counts):
        lines.append(name + "," + ",".join(repr(float(v)) for v in row))
    (d / f"mlcm_{split}.csv").write_text("\n".join(lines) + "\n")
    lines = ["true\\pred," + ",".join(mlcm.col_names)]
    for name, row in zip(mlcm.row_names, mlcm.normalized()):
        lines.append(name + "," + ",".join(f"{v:.6f}" for v in row))
    (d / f"mlcm_{split}_normalized.csv").write_text("\n".join(lines) + "\n")
    print(f"{split} split ({len(X)} instances):", file=out)
    print(_metrics_block(rep), file=out)
    return rep, mlcm


def cmd_solve(cfg: RunConfig, instance: str | None = None, split: str = "validation",
              k_prob: float | None = None, mode: str | None = None, compare_full: bool = False,
              out=None):
    out = out or sys.stdout
    from .reducer import PipelineError, outcome_counts, pipeline_solve, write_reports
    from .sct import ConfigError, DemandProfile
    sc = cfg.supply_chain()
    model = _load_model(cfg, "predict", EXIT_SOLVE)
    k = float(cfg.raw["k_prob"] if k_prob is None else k_prob)
    mode = mode or cfg.raw["mode"]
    solver = cfg.solver()
    if instance:
        try:
            demands = [(Path(instance).stem, DemandProfile.load(instance, len(sc.centers),
                                                               sc.demand_horizon))]
        except (OSError, ConfigError) as exc:
            raise StageError("data", EXIT_DATA, str(exc)) from None
    else:
        ds = _load_dataset(cfg)
        demands = [(f"{split}_{i:03d}", inst.profile(len(sc.centers), sc.demand_horizon))
                   for i, inst in enumerate(ds.subset(split))]
        if not demands:
            raise StageError("data", EXIT_DATA, f"the {split} split is empty")
    reports = []
    for name, demand in demands:
        try:
            reports.append(pipeline_solve(model, demand, k, mode, sc, solver, compare_full,
                                          instance=name))
        except PipelineError as exc:
            raise StageError(exc.stage, EXIT_SOLVE, str(exc)) from None
        except ValueError as exc:
            raise StageError("reduce", EXIT_SOLVE, f"{name}: {exc}") from None
    d = cfg.path("reports") / f"solve_k{k:g}_{mode}"
    write_reports(reports, d)
    for r in reports:
        red = r.reductions or {}
        extra = ""
        if red:
            extra = (f" constraints -{100 * red['constraints']:.1f}%"
                     f" binaries -{100 * red['binaries']:.1f}%")
        obj = "" if r.objective is None else f" objective {r.objective:g}"
        cmp = ""
        if compare_full:
            full = "none" if r.full_objective is None else f"{r.full_objective:g}"
            cmp = f" full {full} -> {r.outcome}"
        print(f"{r.instance}: {r.verdict} [{' '.join(r.active)}] {r.status}{obj}{extra}{cmp}",
              file=out)
    if compare_full:
        print(_dump(outcome_counts(reports)), file=out)
    print(f"reports written to {d}", file=out)
    return reports


# ---------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mipreduce", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        return p

    p = common(sub.add_parser("gen-data", help="generate and label the instance set"))
    p.add_argument("--out", help="dataset path")
    p = common(sub.add_parser("tune", help="Bayesian optimisation of hyperparameters"))
    p.add_argument("--maxiter", type=int)
    p.add_argument("--network", choices=["ann", "cnn"])
    p = common(sub.add_parser("train", help="train with tuned or configured hyperparameters"))
    p.add_argument("--theta", help="hyperparameter file from tune")
    p.add_argument("--network", choices=["ann", "cnn"])
    p = common(sub.add_parser("evaluate", help="metrics and MLCM on a split"))
    p.add_argument("--split", default="validation", choices=["train", "test", "validation"])
    p = common(sub.add_parser("solve", help="predict, reduce and solve"))
    p.add_argument("--instance", help="demand CSV (p,c,t); default: every instance of --split")
    p.add_argument("--split", default="validation", choices=["train", "test", "validation"])
    p.add_argument("--k-prob", type=float)
    p.add_argument("--mode", choices=["reduce", "fix"])
    p.add_argument("--compare-full", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.raw["seed"] = args.seed
        if getattr(args, "network", None):
            cfg.raw["network"] = args.network
        if args.command == "gen-data":
            if args.out:
                cfg.raw["paths"]["dataset"] = str(Path(args.out).resolve())
            cmd_gen_data(cfg)
        elif args.command == "tune":
            if args.maxiter is not None:
                cfg.raw["hpo"]["maxiter"] = args.maxiter
            cmd_tune(cfg)
        elif args.command == "train":
            cmd_train(cfg, args.theta)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.split)
        elif args.command == "solve":
            cmd_solve(cfg, args.instance, args.split, args.k_prob, args.mode, args.compare_full)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
