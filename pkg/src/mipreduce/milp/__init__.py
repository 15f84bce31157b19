"""Small dense MILP solver: problem representation, simplex, presolve, branch-and-bound."""
from .branch_and_bound import NODE_LIMIT, TIME_LIMIT, MilpSolution, relative_gap, solve_milp
from .lpfile import NameCollisionError, export_lp_file
from .presolve import InfeasibleProblem, Postsolve, presolve
from .problem import (
    BINARY, CONTINUOUS, EQ, GE, LE, MAX, MIN, Constraint, MilpProblem, ModelError,
    ModelTooLarge, Objective, ProblemBuilder, Variable,
)
from .simplex import (
    INFEASIBLE, OPTIMAL, UNBOUNDED, LpSolution, NumericalBreakdown, SolverConfig,
    solve_arrays, solve_lp,
)
