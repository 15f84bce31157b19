"""Sobol sequence, Gaussian-process surrogate, UCB acquisition and the tuning loop."""
import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF, ConstantKernel

from mipreduce.datagen import LabeledDataset, LabeledInstance
from mipreduce.hpo import (
    MAX_DIM, DegenerateDataError, Dimension, HyperSpace, SobolDimensionError, SpaceError,
    acquire_ucb, ann_space, bo_run, cnn_space, gp_fit, se_kernel, sobol_points, space_from_dict,
    ucb,
)
from mipreduce.hpo.tuning import fit, load_theta, network_for, save_theta, split_accuracy, tune


# ------------------------------------------------------------------- sobol
@pytest.mark.parametrize("dim", [1, 2, 4, 7, MAX_DIM])
def test_sobol_matches_reference(dim):
    ref = qmc.Sobol(dim, scramble=False).random(512)[1:257]
    assert np.array_equal(sobol_points(dim, 256), ref)


def test_sobol_skip_continues_sequence():
    assert np.array_equal(sobol_points(3, 5, skip=5), sobol_points(3, 10)[5:])


def test_sobol_errors():
    with pytest.raises(SobolDimensionError):
        sobol_points(MAX_DIM + 1, 4)
    with pytest.raises(SobolDimensionError):
        sobol_points(0, 4)


def test_sobol_balance():
    """Every dyadic half of each axis holds exactly half of the first 2^k points (after zero)."""
    pts = np.vstack([np.zeros((1, 5)), sobol_points(5, 63)])
    assert np.all((pts < 0.5).sum(axis=0) == 32)


# -------------------------------------------------------------------- space
@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4))
def test_decode_stays_in_bounds(u):
    for space in (ann_space(), cnn_space()):
        theta = space.decode(u)
        assert space.contains(theta)
        assert np.all((space.encode(theta) >= -1e-12) & (space.encode(theta) <= 1 + 1e-12))


def test_space_validation():
    with pytest.raises(SpaceError):
        Dimension("a", 1, 1)
    with pytest.raises(SpaceError):
        Dimension("a", 0, 1, "log10")
    with pytest.raises(SpaceError):
        HyperSpace((Dimension("a", 0, 1), Dimension("a", 0, 2)))
    sp = space_from_dict({"lr": {"lower": 1e-4, "upper": 1e-1, "scale": "log10"}})
    assert sp.decode([0.5])["lr"] == pytest.approx(10 ** -2.5)


# ---------------------------------------------------------------------- GP
def test_gp_matches_independent_regressor():
    rng = np.random.default_rng(0)
    X = rng.random((8, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    model = gp_fit(X, y, noise=1e-4)
    kern = ConstantKernel(model.amplitude, "fixed") * RBF(model.lengthscale, "fixed")
    ref = GaussianProcessRegressor(kern, alpha=1e-4 + model.nugget, optimizer=None)
    ref.fit(X, y - y.mean())
    Q = rng.random((20, 2))
    mu, sd = model.posterior(Q)
    rmu, rsd = ref.predict(Q, return_std=True)
    assert np.allclose(mu, rmu + y.mean(), atol=1e-8)
    assert np.allclose(sd, rsd, atol=1e-6)
    assert model.log_marginal_likelihood == pytest.approx(ref.log_marginal_likelihood_value_, rel=1e-8)


def test_gp_interpolates_with_small_noise():
    X = np.linspace(0, 1, 6)[:, None]
    y = np.cos(4 * X[:, 0])
    mu, sd = gp_fit(X, y, noise=1e-10).posterior(X)
    assert np.allclose(mu, y, atol=1e-4) and np.all(sd < 1e-2)


def test_gp_grid_choice_maximises_likelihood():
    rng = np.random.default_rng(1)
    X = rng.random((6, 1))
    y = X[:, 0] ** 2
    best = gp_fit(X, y)
    for ls in (0.05, 0.3, 3.0):
        other = gp_fit(X, y, lengthscales=[ls], amplitudes=[best.amplitude])
        assert best.log_marginal_likelihood >= other.log_marginal_likelihood - 1e-9


def test_gp_handles_duplicates_and_constant_targets():
    X = np.array([[0.1], [0.1], [0.5]])
    model = gp_fit(X, np.array([1.0, 1.0, 1.0]), noise=0.0)
    mu, sd = model.posterior([[0.3]])
    assert mu[0] == pytest.approx(1.0) and np.isfinite(sd).all()
    with pytest.raises(DegenerateDataError):
        gp_fit(np.array([[0.2], [0.2]]), np.array([1.0, 0.0]))


def test_se_kernel_values():
    K = se_kernel(np.array([[0.0], [1.0]]), np.array([[0.0]]), 2.0, 0.5)
    assert K[0, 0] == 2.0 and K[1, 0] == pytest.approx(2.0 * math.exp(-2.0))


# ------------------------------------------------------------- acquisition
def test_ucb_pure_exploration():
    X = np.array([[0.0], [0.2]])
    model = gp_fit(X, np.array([0.0, 1.0]))
    Q = np.array([[0.1], [0.9]])
    assert np.array_equal(ucb(model, Q, math.inf), model.posterior(Q)[1])


def test_acquisition_avoids_evaluated_points():
    space = HyperSpace((Dimension("n", 1, 3, kind="integer"),))
    X = np.array([[0.0], [0.5]])
    model = gp_fit(X, np.array([0.0, 1.0]))
    theta, u = acquire_ucb(model, space, 0.0, seen={(2,)})
    assert theta["n"] != 2 and space.contains(theta)


# -------------------------------------------------------------------- loop
QUAD = HyperSpace((Dimension("x", 0.0, 1.0),))


def test_bo_finds_quadratic_optimum():
    res = bo_run(lambda th: -(th["x"] - 0.3) ** 2, QUAD, maxiter=30, seed=0, kappa=2.0)
    assert len(res.history) == 35
    assert abs(res.best_theta["x"] - 0.3) <= 1e-2
    assert res.best_accuracy > max(e.accuracy for e in res.history[:5])
    trace = res.incumbent_trace
    assert all(b >= a for a, b in zip(trace, trace[1:]))


def test_bo_scores_failures_as_zero(tmp_path):
    calls = []

    def flaky(th):
        calls.append(th)
        if len(calls) % 3 == 0:
            raise RuntimeError("boom")
        return th["x"]

    res = bo_run(flaky, QUAD, maxiter=4, seed=1, history_path=tmp_path / "h.csv")
    assert len(calls) == 9
    failed = [e for e in res.history if e.error]
    assert failed and all(e.accuracy == 0.0 for e in failed)
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0][:3] == ["iteration", "phase", "x"] and len(rows) == 10


def test_bo_never_repeats_integer_points():
    space = HyperSpace((Dimension("a", 0, 3, kind="integer"), Dimension("b", 0, 2, kind="integer")))
    res = bo_run(lambda th: th["a"] + th["b"], space, maxiter=6, seed=0)
    keys = [(e.theta["a"], e.theta["b"]) for e in res.history]
    assert len(set(keys)) == len(keys) == 11


def test_bo_ties_keep_first_incumbent():
    res = bo_run(lambda th: 1.0, QUAD, maxiter=2)
    assert res.best_theta == res.history[0].theta


def test_bo_seed_selects_initial_block():
    a = bo_run(lambda th: th["x"], QUAD, maxiter=0, seed=0)
    b = bo_run(lambda th: th["x"], QUAD, maxiter=0, seed=1)
    assert [e.theta["x"] for e in b.history] == list(sobol_points(1, 10)[5:, 0])
    assert [e.theta for e in a.history] != [e.theta for e in b.history]


# ------------------------------------------------------------------ tuning
def _synthetic_dataset(n=30, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        f = np.zeros(90)
        day = int(rng.integers(0, 10))
        f[day] = 1 + rng.integers(0, 3)
        labels = np.zeros(7, dtype=int)
        labels[0 if day < 5 else 2] = 1
        split = "train" if k < 20 else ("test" if k < 25 else "validation")
        out.append(LabeledInstance(f, labels, 1.0, "optimal", 2, "uniform", 0, k, split))
    return LabeledDataset(out, {"scale": 4.0})


def test_tune_small_space(tmp_path):
    ds = _synthetic_dataset()
    space = HyperSpace((Dimension("hidden_layers", 1, 2, kind="integer"),
                        Dimension("neurons", 8, 16, kind="integer"),
                        Dimension("learning_rate", 1e-3, 1e-1, "log10"),
                        Dimension("epochs", 20, 60, kind="integer")))
    res = tune(ds, "ann", maxiter=2, space=space)
    assert len(res.history) == 7 and 0.0 <= res.best_accuracy <= 1.0
    save_theta(res, "ann", tmp_path / "t.json")
    arch, theta = load_theta(tmp_path / "t.json")
    assert arch == "ann" and theta == res.best_theta
    model = fit(ds, "ann", theta)
    assert split_accuracy(model, ds, "test") == pytest.approx(res.best_accuracy)


def test_network_for_cnn_uses_dropouts():
    spec = network_for("cnn", {"dropout1": 0.1, "dropout2": 0.2, "learning_rate": 1e-3, "epochs": 1})
    assert ("dropout", 0.1) in spec.layers and ("dropout", 0.2) in spec.layers
    with pytest.raises(ValueError):
        network_for("rnn", {})
