"""Best-bound branch-and-bound over binary variables."""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .presolve import InfeasibleProblem, Postsolve, presolve
from .problem import MilpProblem
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, SolverConfig, solve_arrays

NODE_LIMIT = "node_limit"
TIME_LIMIT = "time_limit"


@dataclass
class MilpSolution:
    status: str
    objective: float = math.nan
    values: dict[str, float] = field(default_factory=dict)
    best_bound: float = math.nan
    gap: float = math.inf
    nodes: int = 0
    lp_iterations: int = 0

    @property
    def has_solution(self) -> bool:
        return bool(self.values)


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(incumbent - bound, 0.0) / max(abs(incumbent), 1e-10)


def _most_fractional(x: np.ndarray, binary_idx: np.ndarray, int_tol: float) -> int:
    """Index of the binary furthest from integrality, lowest index on ties; -1 if none."""
    if binary_idx.size == 0:
        return -1
    vals = x[binary_idx]
    frac = np.abs(vals - np.round(vals))
    k = int(np.argmax(frac))
    if frac[k] <= int_tol:
        return -1
    return int(binary_idx[k])


def solve_milp(problem: MilpProblem, config: SolverConfig | None = None) -> MilpSolution:
    config = config or SolverConfig()
    start = time.perf_counter()
    sign = -1.0 if problem.objective.sense == "max" else 1.0
    if config.presolve:
        try:
            work, post = presolve(problem, config.int_tol)
        except InfeasibleProblem:
            return MilpSolution(INFEASIBLE)
    else:
        work, post = problem, Postsolve()

    arr = work.arrays()
    binary_idx = np.flatnonzero(arr.binary)
    const = sign * arr.constant  # objective constant in minimisation units

    def finish(status, x, inc, bound, nodes, iters):
        if x is None:
            return MilpSolution(status, math.nan, {}, sign * bound if math.isfinite(bound) else bound,
                                math.inf, nodes, iters)
        x = x.copy()
        x[binary_idx] = np.round(x[binary_idx])
        reduced = {v.name: float(x[i]) for i, v in enumerate(work.variables)}
        full = post.restore(reduced)
        values = {v.name: full[v.name] for v in problem.variables}
        for name in problem.binaries:
            values[name] = float(round(values[name]))
        return MilpSolution(status, sign * inc, values, sign * bound,
                            relative_gap(inc, bound), nodes, iters)

    def lp(lb, ub):
        return solve_arrays(arr.A, arr.rel, arr.b, arr.c, lb, ub, config)

    root = lp(arr.lb, arr.ub)
    nodes, iters = 1, root.iterations
    if root.status == INFEASIBLE:
        return MilpSolution(INFEASIBLE, nodes=nodes, lp_iterations=iters)
    if root.status == UNBOUNDED:
        return MilpSolution(UNBOUNDED, nodes=nodes, lp_iterations=iters)

    inc_val, inc_x = math.inf, None
    pruned_bound = math.inf  # smallest bound among nodes dropped by the gap test
    heap: list = []
    counter = 0

    def consider(res, lb, ub):
        nonlocal inc_val, inc_x, counter
        val = res.objective + const
        j = _most_fractional(res.x, binary_idx, config.int_tol)
        if j < 0:
            if val < inc_val:
                inc_val, inc_x = val, res.x
            return
        heapq.heappush(heap, (val, counter, lb, ub, res.x, j))
        counter += 1

    consider(root, arr.lb.copy(), arr.ub.copy())
    status = OPTIMAL
    while heap:
        bound = heap[0][0]
        if relative_gap(inc_val, bound) <= config.mipgap:
            pruned_bound = min(pruned_bound, bound)
            break
        if config.node_limit is not None and nodes >= config.node_limit:
            status = NODE_LIMIT
            break
        if config.time_limit is not None and time.perf_counter() - start > config.time_limit:
            status = TIME_LIMIT
            break
        _, _, lb, ub, _, j = heapq.heappop(heap)
        for value in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = value
            res = lp(clb, cub)
            nodes += 1
            iters += res.iterations
            if res.status == OPTIMAL:
                consider(res, clb, cub)

    open_bound = heap[0][0] if heap and status != OPTIMAL else math.inf
    if status == OPTIMAL:
        open_bound = min(pruned_bound, heap[0][0]) if heap else pruned_bound
    if inc_x is None:
        if status == OPTIMAL:
            return MilpSolution(INFEASIBLE, nodes=nodes, lp_iterations=iters)
        return finish(status, None, math.inf, open_bound, nodes, iters)
    best_bound = min(inc_val, open_bound)
    return finish(status, inc_x, inc_val, best_bound, nodes, iters)
