"""Bounded-variable primal simplex on a dense tableau.

Variables keep their finite lower bounds and (possibly infinite) upper bounds
instead of being shifted and split.  Phase 1 minimises the sum of artificial
variables, phase 2 the true objective.  Pricing is Dantzig's largest reduced
cost until the objective stalls, after which Bland's smallest-index rule takes
over for the rest of the phase, which guarantees termination.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problem import MilpProblem

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class NumericalBreakdown(RuntimeError):
    """Pivoting failed to converge; the input is probably ill-conditioned."""


@dataclass(frozen=True)
class SolverConfig:
    mipgap: float = 1e-4
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    branching: str = "most_fractional"
    node_selection: str = "best_bound"
    presolve: bool = True
    # simplex internals
    stall_threshold: int = 50
    refactor_every: int = 100
    max_iter: int | None = None

    def __post_init__(self):
        if not self.mipgap >= 0:
            raise ValueError("mipgap must be non-negative")
        if not (self.feas_tol > 0 and self.int_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.branching != "most_fractional":
            raise ValueError(f"unsupported branching rule {self.branching!r}")
        if self.node_selection != "best_bound":
            raise ValueError(f"unsupported node selection {self.node_selection!r}")


@dataclass
class LpSolution:
    status: str
    objective: float = math.nan
    values: dict[str, float] = field(default_factory=dict)
    iterations: int = 0


@dataclass
class ArrayResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int


_PIV_TOL = 1e-9
_DJ_TOL = 1e-9


class _Tableau:
    """Simplex state over the columns [structural | slack | artificial]."""

    def __init__(self, A, rel, b, lb, ub, feas_tol):
        m, n = A.shape
        self.m, self.n = m, n
        self.feas_tol = feas_tol
        slack_rows = np.flatnonzero(rel != 0)
        ns = len(slack_rows)
        # slack s_i: row i gets +s for <= rows and -s for >= rows, s >= 0
        S = np.zeros((m, ns))
        S[slack_rows, np.arange(ns)] = np.where(rel[slack_rows] < 0, 1.0, -1.0)
        lo = np.concatenate([lb, np.zeros(ns)])
        hi = np.concatenate([ub, np.full(ns, np.inf)])
        x = lo.copy()
        resid = b - A @ lb
        # crash basis: a slack whose sign matches the residual, else an artificial
        basis = np.empty(m, dtype=np.int64)
        art_rows = []
        slack_of_row = {r: n + k for k, r in enumerate(slack_rows)}
        for i in range(m):
            j = slack_of_row.get(i)
            if j is not None and S[i, j - n] * resid[i] >= 0:
                basis[i] = j
                x[j] = abs(resid[i])
            else:
                art_rows.append(i)
        na = len(art_rows)
        Art = np.zeros((m, na))
        for k, i in enumerate(art_rows):
            Art[i, k] = 1.0 if resid[i] >= 0 else -1.0
            basis[i] = n + ns + k
        self.M0 = np.hstack([A, S, Art])
        self.b = b.astype(float)
        self.lo = np.concatenate([lo, np.zeros(na)])
        self.hi = np.concatenate([hi, np.full(na, np.inf)])
        self.x = np.concatenate([x, np.abs(resid[art_rows])])
        self.n_real = n + ns
        self.n_art = na
        self.art_rows = np.array(art_rows, dtype=np.int64)
        self.basis = basis
        self.is_basic = np.zeros(self.M0.shape[1], dtype=bool)
        self.is_basic[basis] = True
        # the crash basis is diagonal with +-1 entries, so B^-1 = B
        diag = self.M0[np.arange(m), basis]
        self.T = self.M0 * diag[:, None]
        self.iterations = 0

    # ----------------------------------------------------------------- helpers
    def refactor(self) -> None:
        if self.m == 0:
            return
        B = self.M0[:, self.basis]
        try:
            self.T = np.linalg.solve(B, self.M0)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis during refactorisation") from exc
        xn = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = np.linalg.solve(B, self.b - self.M0 @ xn)

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.T

    def pivot(self, r: int, q: int, d: np.ndarray) -> None:
        row = self.T[r] / self.T[r, q]
        col = self.T[:, q].copy()
        col[r] = 0.0
        # tableau columns are sparse, so only touch rows with a nonzero multiplier
        nz = np.flatnonzero(col)
        if nz.size:
            self.T[nz] -= col[nz, None] * row
        self.T[r] = row
        d -= d[q] * row
        self.is_basic[self.basis[r]] = False
        self.is_basic[q] = True
        self.basis[r] = q

    # -------------------------------------------------------------- main loop
    def run(self, cost: np.ndarray, active: np.ndarray, config: SolverConfig, max_iter: int) -> str:
        """Minimise ``cost @ x``; ``active`` masks columns allowed to enter."""
        d = self.reduced_costs(cost)
        bland = False
        stall = 0
        best = cost @ self.x
        since_refactor = 0
        while True:
            if self.iterations >= max_iter:
                raise NumericalBreakdown(f"simplex did not converge in {max_iter} iterations")
            at_upper = self.x >= self.hi - 1e-12
            at_lower = self.x <= self.lo + 1e-12
            cand = active & ~self.is_basic & (
                ((d < -_DJ_TOL) & ~at_upper) | ((d > _DJ_TOL) & ~at_lower)
            )
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return OPTIMAL
            q = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if d[q] < 0 else -1.0

            g = self.T[:, q] * direction  # basic x decreases by g per unit step
            xb = self.x[self.basis]
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            limits = np.full(self.m, np.inf)
            pos = g > _PIV_TOL
            neg = g < -_PIV_TOL
            limits[pos] = (xb[pos] - lo_b[pos]) / g[pos]
            with np.errstate(invalid="ignore"):
                limits[neg] = (hi_b[neg] - xb[neg]) / (-g[neg])
            np.maximum(limits, 0.0, out=limits)
            theta_row = limits.min() if self.m else np.inf
            theta_flip = self.hi[q] - self.lo[q]
            if not math.isfinite(theta_row) and not math.isfinite(theta_flip):
                return UNBOUNDED
            self.iterations += 1
            if theta_flip <= theta_row:
                theta = theta_flip
                self.x[self.basis] = xb - theta * g
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
            else:
                theta = theta_row
                ties = np.flatnonzero(limits <= theta + 1e-12)
                if bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(g[ties]))])
                leaving = self.basis[r]
                self.x[self.basis] = xb - theta * g
                self.x[q] += direction * theta
                self.x[leaving] = self.lo[leaving] if g[r] > 0 else self.hi[leaving]
                self.pivot(r, q, d)
                since_refactor += 1
                if since_refactor >= config.refactor_every:
                    self.refactor()
                    d = self.reduced_costs(cost)
                    since_refactor = 0
            obj = cost @ self.x
            if obj < best - 1e-12 * (1.0 + abs(best)):
                best = obj
                stall = 0
            else:
                stall += 1
                if stall >= config.stall_threshold:
                    bland = True

    def drive_out_artificials(self) -> None:
        """Pivot zero-valued artificials out of the basis, dropping redundant rows."""
        keep = np.ones(self.m, dtype=bool)
        d_dummy = np.zeros(self.M0.shape[1])
        for r in range(self.m):
            if self.basis[r] < self.n_real:
                continue
            row = np.abs(self.T[r, : self.n_real])
            row[self.is_basic[: self.n_real]] = 0.0
            j = int(np.argmax(row)) if row.size else -1
            if j >= 0 and row[j] > 1e-7:
                self.x[self.basis[r]] = 0.0
                self.pivot(r, j, d_dummy)
            else:
                keep[r] = False
        if not keep.all():
            # a basic artificial whose tableau row vanishes on real columns marks
            # its own original row as a combination of the others
            redundant = self.art_rows[self.basis[~keep] - self.n_real]
            rows = np.ones(self.m, dtype=bool)
            rows[redundant] = False
            self.is_basic[self.basis[~keep]] = False
            self.basis = self.basis[keep]
            self.M0 = self.M0[rows]
            self.b = self.b[rows]
            self.m = int(rows.sum())
        nr = self.n_real
        self.M0 = self.M0[:, :nr]
        self.lo, self.hi, self.x = self.lo[:nr], self.hi[:nr], self.x[:nr]
        self.is_basic = self.is_basic[:nr]
        self.refactor()


def solve_arrays(A, rel, b, c, lb, ub, config: SolverConfig | None = None) -> ArrayResult:
    """Minimise ``c @ x`` subject to ``A x (rel) b`` and ``lb <= x <= ub``.

    ``rel`` uses -1 / 0 / 1 for ``<=`` / ``==`` / ``>=``.  Lower bounds must be
    finite.  The returned objective excludes any constant term.
    """
    config = config or SolverConfig()
    tol = config.feas_tol
    A = np.asarray(A, dtype=float)
    rel = np.asarray(rel)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape
    if np.any(lb > ub + tol):
        return ArrayResult(INFEASIBLE, None, math.nan, 0)

    fixed = ub - lb <= 0
    x = lb.copy()
    free = np.flatnonzero(~fixed)
    b_eff = b - A[:, fixed] @ lb[fixed] if fixed.any() else b.copy()
    A1 = A[:, free]
    nonempty = np.any(A1 != 0, axis=1)
    scale = 1.0 + np.abs(b)
    empty = ~nonempty
    if empty.any():
        r = b_eff[empty]
        s = scale[empty]
        rr = rel[empty]
        bad = ((rr <= 0) & (r < -tol * s)) | ((rr >= 0) & (r > tol * s))
        if bad.any():
            return ArrayResult(INFEASIBLE, None, math.nan, 0)
    A1, rel1, b1 = A1[nonempty], rel[nonempty], b_eff[nonempty]
    lb1, ub1, c1 = lb[free], ub[free], c[free]
    m1, n1 = A1.shape

    if m1 == 0:
        # bounds only: each variable sits at the bound its cost prefers
        if np.any((c1 < 0) & np.isinf(ub1)):
            return ArrayResult(UNBOUNDED, None, math.nan, 0)
        x[free] = np.where(c1 < 0, ub1, lb1)
        return ArrayResult(OPTIMAL, x, float(c @ x), 0)

    # row scaling keeps pivots well conditioned across rows of mixed magnitude
    rs = np.abs(A1).max(axis=1)
    A1 = A1 / rs[:, None]
    b1 = b1 / rs

    tab = _Tableau(A1, rel1, b1, lb1, ub1, tol)
    max_iter = config.max_iter or 50 * (m1 + tab.M0.shape[1]) + 1000
    if tab.n_art:
        cost1 = np.zeros(tab.M0.shape[1])
        cost1[tab.n_real:] = 1.0
        active = np.ones(tab.M0.shape[1], dtype=bool)
        tab.run(cost1, active, config, max_iter)
        tab.refactor()
        infeas = tab.x[tab.n_real:].sum()
        if infeas > tol * (1.0 + np.abs(b1).max()):
            return ArrayResult(INFEASIBLE, None, math.nan, tab.iterations)
        tab.drive_out_artificials()
    cost2 = np.zeros(tab.M0.shape[1])
    cost2[:n1] = c1
    active = np.ones(tab.M0.shape[1], dtype=bool)
    status = tab.run(cost2, active, config, max_iter)
    if status == UNBOUNDED:
        return ArrayResult(UNBOUNDED, None, math.nan, tab.iterations)
    tab.refactor()
    xs = np.clip(tab.x[:n1], lb1, ub1)
    x[free] = xs
    return ArrayResult(OPTIMAL, x, float(c @ x), tab.iterations)


def solve_lp(problem: MilpProblem, config: SolverConfig | None = None) -> LpSolution:
    """Solve the LP relaxation of ``problem`` (integrality is ignored)."""
    arr = problem.arrays()
    res = solve_arrays(arr.A, arr.rel, arr.b, arr.c, arr.lb, arr.ub, config)
    if res.status != OPTIMAL:
        return LpSolution(res.status, math.nan, {}, res.iterations)
    values = {v.name: float(res.x[i]) for i, v in enumerate(problem.variables)}
    objective = arr.sign * res.objective + arr.constant
    return LpSolution(OPTIMAL, float(objective), values, res.iterations)
