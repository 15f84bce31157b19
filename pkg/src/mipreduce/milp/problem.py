"""MILP problem representation.

A :class:`MilpProblem` is an immutable value holding variables with bounds and
integrality, sparse linear constraints and a linear objective.  Solvers work on
the dense array view returned by :meth:`MilpProblem.arrays`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"

LE = "<="
EQ = "=="
GE = ">="
_RELATIONS = {LE: -1, EQ: 0, GE: 1, "<": -1, "=": 0, ">": 1, ">=": 1, "<=": -1, "==": 0}

MIN = "min"
MAX = "max"

# dense arrays beyond this many entries are refused; export the model instead
DENSE_CEILING = 5_000 * 5_000


class ModelError(ValueError):
    """Raised when a problem violates the representation invariants."""


class ModelTooLarge(ModelError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    kind: str = CONTINUOUS

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[str, float]
    relation: str
    rhs: float
    name: str | None = None


@dataclass(frozen=True)
class Objective:
    coeffs: Mapping[str, float] = field(default_factory=dict)
    sense: str = MIN
    constant: float = 0.0


@dataclass(frozen=True)
class LpArrays:
    """Dense view of a problem in minimisation form.

    ``rel`` holds -1 for ``<=``, 0 for ``==`` and 1 for ``>=`` rows.  ``c`` is
    already negated for maximisation problems; ``sign`` recovers the user sense.
    """

    A: np.ndarray
    rel: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    constant: float
    sign: float


def normalize_relation(relation: str) -> str:
    try:
        code = _RELATIONS[relation]
    except KeyError:
        raise ModelError(f"unknown relation {relation!r}") from None
    return (LE, EQ, GE)[code + 1]


class MilpProblem:
    """Mixed-integer linear program with binary integer variables only."""

    def __init__(
        self,
        variables: Iterable[Variable],
        constraints: Iterable[Constraint],
        objective: Objective,
        name: str = "problem",
    ):
        self.name = name
        self.variables = tuple(variables)
        self.constraints = tuple(
            Constraint(dict(c.coeffs), normalize_relation(c.relation), float(c.rhs), c.name)
            for c in constraints
        )
        sense = objective.sense.lower()
        if sense not in (MIN, MAX):
            raise ModelError(f"unknown objective sense {objective.sense!r}")
        self.objective = Objective(dict(objective.coeffs), sense, float(objective.constant))
        self.index = {}
        for i, v in enumerate(self.variables):
            if v.name in self.index:
                raise ModelError(f"duplicate variable name {v.name!r}")
            self.index[v.name] = i
        self._validate()
        self._arrays: LpArrays | None = None

    def _validate(self) -> None:
        for v in self.variables:
            if v.kind not in (CONTINUOUS, BINARY):
                raise ModelError(
                    f"variable {v.name!r} has kind {v.kind!r}; only continuous and binary "
                    "variables are supported (general integers are rejected)"
                )
            if math.isnan(v.lower) or math.isnan(v.upper):
                raise ModelError(f"variable {v.name!r} has a NaN bound")
            if not math.isfinite(v.lower):
                raise ModelError(f"variable {v.name!r} needs a finite lower bound")
            if v.lower > v.upper:
                raise ModelError(f"variable {v.name!r} has lower bound above upper bound")
            if v.is_binary and (v.lower < 0.0 or v.upper > 1.0):
                raise ModelError(f"binary variable {v.name!r} has bounds outside [0, 1]")
        for k, con in enumerate(self.constraints):
            label = con.name or f"row {k}"
            if not math.isfinite(con.rhs):
                raise ModelError(f"constraint {label} has a non-finite right-hand side")
            for var, a in con.coeffs.items():
                if var not in self.index:
                    raise ModelError(f"constraint {label} references undeclared variable {var!r}")
                if not math.isfinite(a):
                    raise ModelError(f"constraint {label} has a non-finite coefficient on {var!r}")
        for var, a in self.objective.coeffs.items():
            if var not in self.index:
                raise ModelError(f"objective references undeclared variable {var!r}")
            if not math.isfinite(a):
                raise ModelError(f"objective has a non-finite coefficient on {var!r}")
        if not math.isfinite(self.objective.constant):
            raise ModelError("objective constant is not finite")

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def binaries(self) -> list[str]:
        return [v.name for v in self.variables if v.is_binary]

    def arrays(self) -> LpArrays:
        if self._arrays is None:
            self._arrays = self._build_arrays()
        return self._arrays

    def _build_arrays(self) -> LpArrays:
        m, n = self.n_constraints, self.n_vars
        if m * n > DENSE_CEILING:
            raise ModelTooLarge(
                f"{m} x {n} exceeds the dense solver ceiling; presolve the model or "
                "export it with export_lp_file for an external solver"
            )
        A = np.zeros((m, n))
        rel = np.empty(m, dtype=np.int8)
        b = np.empty(m)
        for i, con in enumerate(self.constraints):
            for var, a in con.coeffs.items():
                A[i, self.index[var]] += a
            rel[i] = _RELATIONS[con.relation]
            b[i] = con.rhs
        sign = -1.0 if self.objective.sense == MAX else 1.0
        c = np.zeros(n)
        for var, a in self.objective.coeffs.items():
            c[self.index[var]] += sign * a
        lb = np.array([v.lower for v in self.variables], dtype=float)
        ub = np.array([v.upper for v in self.variables], dtype=float)
        binary = np.array([v.is_binary for v in self.variables], dtype=bool)
        return LpArrays(A, rel, b, c, lb, ub, binary, self.objective.constant, sign)

    def evaluate(self, values: Mapping[str, float]) -> float:
        obj = self.objective
        return obj.constant + sum(a * values[v] for v, a in obj.coeffs.items())

    def max_violation(self, values: Mapping[str, float]) -> float:
        """Largest bound or constraint violation of ``values``."""
        worst = 0.0
        for v in self.variables:
            x = values[v.name]
            worst = max(worst, v.lower - x, x - v.upper)
        for con in self.constraints:
            lhs = sum(a * values[v] for v, a in con.coeffs.items())
            if con.relation == LE:
                worst = max(worst, lhs - con.rhs)
            elif con.relation == GE:
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        return worst

    def with_bounds(self, bounds: Mapping[str, tuple[float, float]]) -> "MilpProblem":
        """Copy of the problem with some variable bounds replaced."""
        variables = [
            Variable(v.name, *bounds[v.name], v.kind) if v.name in bounds else v
            for v in self.variables
        ]
        return MilpProblem(variables, self.constraints, self.objective, self.name)

    def relaxed(self) -> "MilpProblem":
        variables = [Variable(v.name, v.lower, v.upper, CONTINUOUS) for v in self.variables]
        return MilpProblem(variables, self.constraints, self.objective, self.name)

    def __repr__(self) -> str:
        return (
            f"MilpProblem({self.name!r}, vars={self.n_vars}, binaries={len(self.binaries)}, "
            f"constraints={self.n_constraints})"
        )


class ProblemBuilder:
    """Incremental construction helper; call :meth:`build` once at the end."""

    def __init__(self, name: str = "problem"):
        self.name = name
        self._vars: list[Variable] = []
        self._names: set[str] = set()
        self._cons: list[Constraint] = []
        self._obj: dict[str, float] = {}
        self._sense = MIN
        self._constant = 0.0

    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf,
                kind: str = CONTINUOUS) -> str:
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        self._names.add(name)
        self._vars.append(Variable(name, float(lower), float(upper), kind))
        return name

    def add_binary(self, name: str) -> str:
        return self.add_var(name, 0.0, 1.0, BINARY)

    def add_constraint(self, coeffs: Mapping[str, float], relation: str, rhs: float,
                       name: str | None = None) -> None:
        row = {v: float(a) for v, a in coeffs.items() if a != 0}
        self._cons.append(Constraint(row, relation, float(rhs), name))

    def set_objective(self, coeffs: Mapping[str, float], sense: str = MIN,
                      constant: float = 0.0) -> None:
        self._obj = {v: float(a) for v, a in coeffs.items() if a != 0}
        self._sense = sense
        self._constant = float(constant)

    def __contains__(self, name: str) -> bool:
        return name in self._names

    def build(self) -> MilpProblem:
        return MilpProblem(self._vars, self._cons,
                           Objective(self._obj, self._sense, self._constant), self.name)
