"""Thresholding, reduced and fixed solves, outcome classification and report files."""
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mipreduce.milp import OPTIMAL, SolverConfig, solve_milp
from mipreduce.neural import Network, TrainedModel, ann_spec
from mipreduce.reducer import (
    CORRECTLY_SKIPPED, EMPTY_PREDICTION, GLOBAL_MATCH, PREDICTED_INFEASIBLE, PROCEED,
    REDUCED_INFEASIBLE, SUBOPTIMAL, WRONGLY_SKIPPED, PipelineError, classify, outcome_counts,
    pipeline_solve, solve_reduced, threshold_reduce, write_reports,
)
from mipreduce.sct import DemandProfile, build_model, builtin_config


def constant_model(probs) -> TrainedModel:
    """A linear network that ignores its input and returns ``probs``."""
    net = Network.build(ann_spec(0, 1))
    W, b = net.params
    W[...] = 0.0
    p = np.clip(np.asarray(probs, float), 1e-12, 1 - 1e-12)
    b[...] = np.log(p / (1 - p))
    return TrainedModel(net, {"scale": 1.0}, [], {})


@pytest.fixture(scope="module")
def trivial():
    return builtin_config("trivial")


def _prof(n=2):
    return DemandProfile(tuple((0, 1) for _ in range(n)), 1, 1)


# -------------------------------------------------------------- thresholding
def test_threshold_basic():
    d = threshold_reduce([0.9, 0.2, 0.6, 0, 0, 0, 0.1], 0.5)
    assert d.verdict == PROCEED and d.active == (0, 2)


def test_threshold_gate_precedes_facilities():
    d = threshold_reduce([0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.5], 0.5)
    assert d.verdict == PREDICTED_INFEASIBLE and d.skipped and len(d.active) == 6


def test_threshold_empty_prediction():
    d = threshold_reduce([0.1] * 7, 0.5)
    assert d.verdict == EMPTY_PREDICTION and d.skipped


def test_threshold_rejects_bad_arguments():
    with pytest.raises(ValueError):
        threshold_reduce([0.5] * 7, 0.0)
    with pytest.raises(ValueError):
        threshold_reduce([0.5] * 7, 1.0)
    with pytest.raises(ValueError):
        threshold_reduce([0.5] * 7, 0.5, "drop")


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=7, max_size=7),
       st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_threshold_monotone(probs, a, b):
    k1, k2 = sorted((a, b))
    d1, d2 = threshold_reduce(probs, k1), threshold_reduce(probs, k2)
    assert set(d2.active) <= set(d1.active)
    assert not (d1.verdict == PROCEED and d2.verdict == PREDICTED_INFEASIBLE)


# ------------------------------------------------------------------ solving
def test_reduced_solve_counts_builds(trivial):
    calls = []

    def counting(*args, **kw):
        calls.append(kw)
        return build_model(*args, **kw)

    d = threshold_reduce([0.9, 0.9, 0, 0, 0, 0, 0], 0.5)
    report, sol = solve_reduced(d, _prof(), trivial, SolverConfig(mipgap=0), counting)
    assert len(calls) == 2  # full-size statistics plus the reduced model
    assert report.status == OPTIMAL and sol.established == ["m1"]
    assert report.reductions["constraints"] > 0 and report.reductions["binaries"] > 0


def test_skipped_decision_builds_nothing(trivial):
    calls = []
    d = threshold_reduce([0, 0, 0, 0, 0, 0, 0.9], 0.5)
    report, sol = solve_reduced(d, _prof(), trivial, builder=lambda *a, **k: calls.append(1))
    assert report.status == "skipped" and sol is None and not calls


def test_fix_mode_opens_every_predicted_facility(trivial):
    d = threshold_reduce([0.9, 0.9, 0, 0, 0, 0, 0], 0.5, "fix")
    report, sol = solve_reduced(d, _prof(), trivial, SolverConfig(mipgap=0))
    assert sol.established == ["m1", "m2"]
    reduce_rep, _ = solve_reduced(threshold_reduce([0.9, 0.9, 0, 0, 0, 0, 0], 0.5), _prof(),
                                  trivial, SolverConfig(mipgap=0))
    assert report.objective > reduce_rep.objective


def test_pipeline_outcomes(trivial):
    full = solve_milp(build_model(trivial, _prof()).problem, SolverConfig(mipgap=0))
    cases = [
        ([0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.0], GLOBAL_MATCH),
        ([0.1, 0.1, 0.9, 0.1, 0.1, 0.1, 0.0], SUBOPTIMAL),
        ([0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.9], WRONGLY_SKIPPED),
        ([0.1] * 7, WRONGLY_SKIPPED),
    ]
    for probs, outcome in cases:
        rep = pipeline_solve(constant_model(probs), _prof(), 0.5, "reduce", trivial,
                             SolverConfig(mipgap=0), compare_full=True)
        assert rep.outcome == outcome
        assert rep.full_objective == pytest.approx(full.objective)


def test_pipeline_reduced_infeasible(trivial):
    """Nine same-day patients overflow m1's four lines."""
    rep = pipeline_solve(constant_model([0.9, 0, 0, 0, 0, 0, 0]), _prof(9), 0.5, "reduce",
                         trivial, compare_full=True)
    assert rep.status == "infeasible" and rep.outcome == REDUCED_INFEASIBLE


def test_classify_correct_skip():
    from mipreduce.reducer import ReductionReport
    rep = ReductionReport("x", "reduce", 0.5, PREDICTED_INFEASIBLE, (), [], "skipped",
                          full_status="infeasible")
    assert classify(rep, 1e-4) == CORRECTLY_SKIPPED


def test_pipeline_wraps_stage_errors(trivial):
    def broken(*a, **k):
        raise RuntimeError("no memory")
    with pytest.raises(PipelineError) as info:
        pipeline_solve(constant_model([0.9] + [0] * 6), _prof(), 0.5, "reduce", trivial,
                       builder=broken)
    assert info.value.stage == "reduce"
    with pytest.raises(PipelineError) as info:
        pipeline_solve(constant_model([0.9] + [0] * 6), DemandProfile(((0, 1),), 1, 1), 2.0,
                       "reduce", trivial)
    assert info.value.stage == "reduce"


def test_reports_are_reproducible(tmp_path, trivial):
    def run(d):
        reps = [pipeline_solve(constant_model(p), _prof(), 0.5, "reduce", trivial,
                               compare_full=True, instance=f"i{k}")
                for k, p in enumerate([[0.9] + [0] * 6, [0] * 6 + [0.9]])]
        write_reports(reps, d)
        return reps

    reps = run(tmp_path / "a")
    run(tmp_path / "b")
    for name in ("i0.json", "i1.json", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    doc = json.loads((tmp_path / "a" / "i0.json").read_text())
    assert "times" not in doc and doc["outcome"] == GLOBAL_MATCH
    assert (tmp_path / "a" / "timings.csv").read_text().startswith("instance,predict")
    assert outcome_counts(reps) == {GLOBAL_MATCH: 1, WRONGLY_SKIPPED: 1}
