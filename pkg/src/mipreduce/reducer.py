"""Turn predicted label probabilities into a reduced or fixed MILP and solve it."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .milp import INFEASIBLE, OPTIMAL, SolverConfig, solve_milp
from .sct import DemandProfile, ModelStats, SupplyChainConfig, build_model, extract_solution

log = logging.getLogger(__name__)

PROCEED = "proceed"
PREDICTED_INFEASIBLE = "predicted_infeasible"
EMPTY_PREDICTION = "empty_prediction"
MODES = ("reduce", "fix")

GLOBAL_MATCH = "global_match"
SUBOPTIMAL = "suboptimal"
REDUCED_INFEASIBLE = "infeasible"
CORRECTLY_SKIPPED = "correctly_skipped"
WRONGLY_SKIPPED = "wrongly_skipped"
SUCCESS_OUTCOMES = (GLOBAL_MATCH, CORRECTLY_SKIPPED)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class ReductionDecision:
    probabilities: tuple[float, ...]
    k_prob: float
    mode: str
    verdict: str
    active: tuple[int, ...] = ()

    @property
    def skipped(self) -> bool:
        return self.verdict != PROCEED


def threshold_reduce(probabilities, k_prob: float, mode: str = "reduce") -> ReductionDecision:
    """Infeasibility gate first, then keep every facility with probability >= k_prob.

    The last entry of ``probabilities`` is the infeasible class.  ``active``
    always holds the thresholded facility set; a skip is signalled by the
    verdict alone.  An empty facility set gets its own verdict and is treated
    like a predicted infeasibility.
    """
    probs = np.asarray(probabilities, dtype=float).ravel()
    if probs.size < 2:
        raise ValueError("need facility probabilities followed by the infeasible probability")
    if not 0.0 < k_prob < 1.0:
        raise ValueError("k_prob must lie in (0, 1)")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    tup = tuple(float(x) for x in probs)
    active = tuple(int(m) for m in np.flatnonzero(probs[:-1] >= k_prob))
    if probs[-1] >= k_prob:
        return ReductionDecision(tup, k_prob, mode, PREDICTED_INFEASIBLE, active)
    if not active:
        log.warning("no facility reached k_prob=%g; treating the instance as infeasible", k_prob)
        return ReductionDecision(tup, k_prob, mode, EMPTY_PREDICTION)
    return ReductionDecision(tup, k_prob, mode, PROCEED, active)


@dataclass
class ReductionReport:
    instance: str
    mode: str
    k_prob: float
    verdict: str
    probabilities: tuple
    active: list[str]
    status: str  # solver status of the reduced model, or "skipped"
    objective: float | None = None
    established: list[str] = field(default_factory=list)
    full_stats: ModelStats | None = None
    reduced_stats: ModelStats | None = None
    reductions: dict | None = None
    full_status: str | None = None
    full_objective: float | None = None
    full_established: list[str] | None = None
    outcome: str | None = None
    nodes: int = 0
    times: dict = field(default_factory=dict)

    def to_dict(self, include_times: bool = False) -> dict:
        def st(s):
            return None if s is None else {"constraints": s.constraints, "binaries": s.binaries,
                                           "continuous": s.continuous}
        d = {
            "instance": self.instance, "mode": self.mode, "k_prob": self.k_prob,
            "verdict": self.verdict, "probabilities": list(self.probabilities),
            "active": self.active, "status": self.status, "objective": self.objective,
            "established": self.established, "nodes": self.nodes,
            "full_stats": st(self.full_stats), "reduced_stats": st(self.reduced_stats),
            "reductions": self.reductions, "full_status": self.full_status,
            "full_objective": self.full_objective, "full_established": self.full_established,
            "outcome": self.outcome,
        }
        if include_times:
            d["times"] = self.times
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _names(config: SupplyChainConfig, idx) -> list[str]:
    return [config.facilities[m].name for m in idx]


def solve_reduced(decision: ReductionDecision, demand: DemandProfile, config: SupplyChainConfig,
                  solver: SolverConfig | None = None, builder: Callable = build_model,
                  instance: str = "instance", full_stats: ModelStats | None = None):
    """Build and solve over the predicted facilities; skip when predicted infeasible.

    Returns ``(report, solution)`` where ``solution`` is ``None`` unless the
    reduced model was solved to optimality.
    """
    solver = solver or SolverConfig()
    report = ReductionReport(instance, decision.mode, decision.k_prob, decision.verdict,
                             decision.probabilities, _names(config, decision.active), "skipped")
    if decision.skipped:
        return report, None
    t0 = time.perf_counter()
    try:
        if full_stats is None:
            full_stats = builder(config, demand).stats
        built = builder(config, demand, decision.active, fix_established=decision.mode == "fix")
    except Exception as exc:
        raise PipelineError("reduce", f"{instance}: building the reduced model failed: {exc}") from exc
    t1 = time.perf_counter()
    try:
        sol = solve_milp(built.problem, solver)
    except Exception as exc:
        raise PipelineError("solve", f"{instance}: reduced solve failed: {exc}") from exc
    t2 = time.perf_counter()
    report.full_stats = full_stats
    report.reduced_stats = built.stats
    report.reductions = built.stats.reduction_from(full_stats)
    report.status = sol.status
    report.nodes = sol.nodes
    report.times = {"build": t1 - t0, "solve": t2 - t1}
    solution = None
    if sol.status == OPTIMAL:
        solution = extract_solution(built, sol)
        report.objective = float(sol.objective)
        report.established = solution.established
    return report, solution


def classify(report: ReductionReport, rtol: float) -> str:
    full_feasible = report.full_status == OPTIMAL
    if report.verdict != PROCEED:
        return WRONGLY_SKIPPED if full_feasible else CORRECTLY_SKIPPED
    if report.status != OPTIMAL or not full_feasible:
        return REDUCED_INFEASIBLE
    full = report.full_objective
    if abs(report.objective - full) <= rtol * max(1.0, abs(full)):
        return GLOBAL_MATCH
    return SUBOPTIMAL


def pipeline_solve(model, demand: DemandProfile, k_prob: float, mode: str,
                   config: SupplyChainConfig, solver: SolverConfig | None = None,
                   compare_full: bool = False, builder: Callable = build_model,
                   instance: str = "instance") -> ReductionReport:
    """Predict, threshold, solve the reduced model and optionally the full one.

    With ``compare_full`` the outcome is classified against the full-model
    optimum; objectives within the solver's relative gap count as a match.
    """
    from .neural import predict_probabilities

    solver = solver or SolverConfig()
    t0 = time.perf_counter()
    try:
        probs = predict_probabilities(model, demand.features())
    except Exception as exc:
        raise PipelineError("predict", f"{instance}: {exc}") from exc
    t_pred = time.perf_counter() - t0
    try:
        decision = threshold_reduce(probs, k_prob, mode)
    except Exception as exc:
        raise PipelineError("reduce", f"{instance}: {exc}") from exc
    full_built = None
    if compare_full:
        try:
            full_built = builder(config, demand)
        except Exception as exc:
            raise PipelineError("solve", f"{instance}: building the full model failed: {exc}") from exc
    report, _ = solve_reduced(decision, demand, config, solver, builder, instance,
                              full_built.stats if full_built else None)
    report.times["predict"] = t_pred
    if compare_full:
        t1 = time.perf_counter()
        try:
            full = solve_milp(full_built.problem, solver)
        except Exception as exc:
            raise PipelineError("solve", f"{instance}: full solve failed: {exc}") from exc
        report.times["full_solve"] = time.perf_counter() - t1
        if report.full_stats is None:
            report.full_stats = full_built.stats
        report.full_status = full.status
        if full.status == OPTIMAL:
            report.full_objective = float(full.objective)
            report.full_established = _names(
                config, [m for m, v in full_built.index["E1"].items() if full.values[v] > 0.5])
        elif full.status != INFEASIBLE:
            log.warning("%s: full model ended with status %s", instance, full.status)
        report.outcome = classify(report, solver.mipgap)
    return report


SUMMARY_COLUMNS = ["instance", "verdict", "active", "status", "objective", "full_status",
                   "full_objective", "outcome", "constraint_reduction", "binary_reduction"]


def summary_table(reports: Sequence[ReductionReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in reports:
        red = r.reductions or {}
        w.writerow([r.instance, r.verdict, " ".join(r.active), r.status,
                    "" if r.objective is None else repr(r.objective),
                    r.full_status or "", "" if r.full_objective is None else repr(r.full_objective),
                    r.outcome or "",
                    "" if "constraints" not in red else f"{red['constraints']:.6f}",
                    "" if "binaries" not in red else f"{red['binaries']:.6f}"])
    return buf.getvalue()


def timings_table(reports: Sequence[ReductionReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = ["predict", "build", "solve", "full_solve"]
    w.writerow(["instance"] + keys)
    for r in reports:
        w.writerow([r.instance] + [f"{r.times[k]:.4f}" if k in r.times else "" for k in keys])
    return buf.getvalue()


def outcome_counts(reports: Sequence[ReductionReport]) -> dict:
    out: dict[str, int] = {}
    for r in reports:
        out[r.outcome or "unclassified"] = out.get(r.outcome or "unclassified", 0) + 1
    return dict(sorted(out.items()))


def write_reports(reports: Sequence[ReductionReport], directory) -> None:
    """One JSON file per instance plus ``summary.csv``; wall times go to ``timings.csv``.

    Keeping times out of the report files makes reruns byte-identical.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for r in reports:
        (d / f"{r.instance}.json").write_text(r.to_json())
    (d / "summary.csv").write_text(summary_table(reports))
    (d / "timings.csv").write_text(timings_table(reports))
