"""Gaussian-process regression with an isotropic squared-exponential kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

LENGTHSCALES = np.logspace(-2, 1, 31)
AMPLITUDE_FACTORS = np.logspace(-2, 2, 17)  # multiplies the target variance
NUGGETS = (0.0,) + tuple(10.0 ** e for e in range(-12, -1))


class DegenerateDataError(ValueError):
    pass


def se_kernel(A: np.ndarray, B: np.ndarray, amplitude: float, lengthscale: float) -> np.ndarray:
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return amplitude * np.exp(-0.5 * d2 / lengthscale ** 2)


@dataclass
class GpModel:
    X: np.ndarray
    y: np.ndarray
    amplitude: float  # kernel variance
    lengthscale: float
    noise: float
    nugget: float
    prior_mean: float
    chol: np.ndarray
    alpha: np.ndarray
    log_marginal_likelihood: float

    def posterior(self, Q) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and standard deviation of the latent function at ``Q``."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        Ks = se_kernel(Q, self.X, self.amplitude, self.lengthscale)
        mean = self.prior_mean + Ks @ self.alpha
        v = _solve_lower(self.chol, Ks.T)
        var = self.amplitude - (v * v).sum(axis=0)
        return mean, np.sqrt(np.maximum(var, 0.0))


def _solve_lower(L, B):
    return solve_triangular(L, B, lower=True, check_finite=False)


def _factor(K: np.ndarray, noise: float, scale: float):
    n = K.shape[0]
    for nug in NUGGETS:
        try:
            L = np.linalg.cholesky(K + (noise + nug * scale) * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        return L, nug * scale
    raise np.linalg.LinAlgError("kernel matrix is not positive definite even with nugget")


def _fit_fixed(X, y, amp, ls, noise, mean):
    K = se_kernel(X, X, amp, ls)
    L, nug = _factor(K, noise, amp)
    r = y - mean
    alpha = cho_solve((L, True), r, check_finite=False)
    lml = -0.5 * r @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(y) * np.log(2 * np.pi)
    return L, nug, alpha, float(lml)


def gp_fit(X, y, noise: float = 1e-6, lengthscales=None, amplitudes=None) -> GpModel:
    """Fit by grid search over lengthscale and amplitude on the log-marginal likelihood.

    The prior mean is the target mean.  Amplitudes are searched relative to
    the target variance (or 1 when the targets are constant).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("inputs and targets differ in length")
    if X.shape[0] < 2 or np.all(np.ptp(X, axis=0) == 0):
        raise DegenerateDataError("need at least two distinct inputs")
    if noise < 0:
        raise ValueError("noise variance must be non-negative")
    mean = float(y.mean())
    var = float(y.var())
    base = var if var > 0 else 1.0
    lss = LENGTHSCALES if lengthscales is None else np.asarray(lengthscales, dtype=float)
    amps = base * AMPLITUDE_FACTORS if amplitudes is None else np.asarray(amplitudes, dtype=float)
    best = None
    for ls in lss:
        for amp in amps:
            try:
                L, nug, alpha, lml = _fit_fixed(X, y, amp, ls, noise, mean)
            except np.linalg.LinAlgError:
                continue
            if best is None or lml > best[0] + 1e-12:
                best = (lml, amp, ls, L, nug, alpha)
    if best is None:
        raise DegenerateDataError("no kernel setting gave a positive-definite matrix")
    lml, amp, ls, L, nug, alpha = best
    return GpModel(X, y, float(amp), float(ls), float(noise), float(nug), mean, L, alpha, lml)
