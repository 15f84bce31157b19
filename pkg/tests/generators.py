"""Random problem generators shared by unit and acceptance tests."""
from __future__ import annotations

import numpy as np

from mipreduce.milp import BINARY, CONTINUOUS, Constraint, MilpProblem, Objective, Variable

_REL = ("<=", "==", ">=")


def random_milp(rng: np.random.Generator, max_bin: int = 12, max_cont: int = 4) -> MilpProblem:
    """Small MILP with integer data; continuous variables are boxed so it is bounded."""
    nb = int(rng.integers(1, max_bin + 1))
    nc = int(rng.integers(0, max_cont + 1))
    m = int(rng.integers(1, 7))
    variables = [Variable(f"y{i}", 0.0, 1.0, BINARY) for i in range(nb)]
    for i in range(nc):
        lo = float(rng.integers(-3, 2))
        variables.append(Variable(f"x{i}", lo, lo + float(rng.integers(1, 8)), CONTINUOUS))
    names = [v.name for v in variables]
    cons = []
    for r in range(m):
        coeffs = {}
        for v in names:
            if rng.random() < 0.6:
                coeffs[v] = float(rng.integers(-6, 7))
        rel = _REL[int(rng.choice(3, p=[0.6, 0.1, 0.3]))]
        cons.append(Constraint(coeffs, rel, float(rng.integers(-4, 12)), f"r{r}"))
    obj = Objective({v: float(rng.integers(-10, 11)) for v in names},
                    "max" if rng.random() < 0.5 else "min", float(rng.integers(-5, 6)))
    return MilpProblem(variables, cons, obj, "random")


def random_lp_arrays(rng: np.random.Generator, max_n: int = 6, max_m: int = 6):
    """Bounded random LP in array form (rel -1/0/1), real-valued data."""
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    A = np.round(rng.normal(size=(m, n)) * 3, 2)
    A[rng.random((m, n)) < 0.2] = 0.0
    rel = rng.choice([-1, 0, 1], size=m, p=[0.6, 0.1, 0.3])
    b = np.round(rng.normal(size=m) * 4 + 2, 2)
    c = np.round(rng.normal(size=n) * 5, 2)
    lb = np.round(rng.uniform(-3, 1, size=n), 2)
    ub = lb + np.round(rng.uniform(0.5, 6, size=n), 2)
    return A, rel, b, c, lb, ub
