"""Presolve reductions with postsolve.

Reductions applied repeatedly until nothing changes:

* fixed variables (lower == upper) are substituted out;
* empty rows are checked and dropped;
* singleton rows become variable bounds (rounded for binaries);
* rows whose activity range already satisfies them are dropped, rows whose
  activity range can only just satisfy them fix every variable in them;
* dual fixing moves a variable to the bound its objective prefers when no
  row can be violated by that move;
* continuous variables in doubleton equalities, or appearing in a single
  equality row, are substituted out.

Every substitution is recorded so :meth:`Postsolve.restore` can rebuild a full
assignment from a solution of the reduced problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .problem import (
    BINARY, CONTINUOUS, EQ, GE, LE, MAX, MIN, Constraint, MilpProblem, Objective, Variable,
)

_ZERO = 1e-12
_TOL = 1e-9


class InfeasibleProblem(Exception):
    """Presolve proved the problem has no feasible point."""


@dataclass
class _Row:
    coeffs: dict
    rel: int  # -1 <=, 0 ==, 1 >=
    rhs: float
    name: str | None


class Postsolve(dict):
    """Map of variables fixed to constants, plus ordered substitution records.

    Each record ``(name, const, terms)`` means ``name = const + sum(c * terms[v])``.
    """

    def __init__(self):
        super().__init__()
        self.records: list[tuple[str, float, dict]] = []

    def restore(self, values: dict) -> dict:
        full = dict(values)
        for name, const, terms in reversed(self.records):
            full[name] = const + sum(a * full[v] for v, a in terms.items())
        return full


class _Presolver:
    def __init__(self, problem: MilpProblem, int_tol: float):
        self.problem = problem
        self.int_tol = int_tol
        self.sign = -1.0 if problem.objective.sense == MAX else 1.0
        self.lo = {v.name: v.lower for v in problem.variables}
        self.hi = {v.name: v.upper for v in problem.variables}
        self.binary = {v.name for v in problem.variables if v.is_binary}
        self.obj = {v: self.sign * a for v, a in problem.objective.coeffs.items() if a != 0}
        self.constant = self.sign * problem.objective.constant
        self.rows: dict[int, _Row] = {}
        self.cols: dict[str, set] = {v.name: set() for v in problem.variables}
        self.next_id = 0
        for con in problem.constraints:
            rel = {LE: -1, EQ: 0, GE: 1}[con.relation]
            self._add_row(dict(con.coeffs), rel, con.rhs, con.name)
        self.post = Postsolve()
        self.changed = False

    # ----------------------------------------------------------- bookkeeping
    def _add_row(self, coeffs, rel, rhs, name):
        coeffs = {v: a for v, a in coeffs.items() if abs(a) > _ZERO}
        rid = self.next_id
        self.next_id += 1
        self.rows[rid] = _Row(coeffs, rel, rhs, name)
        for v in coeffs:
            self.cols[v].add(rid)
        return rid

    def _drop_row(self, rid):
        row = self.rows.pop(rid)
        for v in row.coeffs:
            self.cols[v].discard(rid)
        self.changed = True

    def _fix(self, v, value):
        """Substitute ``v = value`` everywhere and record it."""
        for rid in list(self.cols[v]):
            row = self.rows[rid]
            row.rhs -= row.coeffs.pop(v) * value
        del self.cols[v]
        c = self.obj.pop(v, 0.0)
        self.constant += c * value
        self.post[v] = value
        self.post.records.append((v, value, {}))
        self.changed = True

    def _substitute(self, v, const, terms):
        """Replace ``v`` by ``const + sum(terms)`` in all rows and the objective."""
        for rid in list(self.cols[v]):
            row = self.rows[rid]
            a = row.coeffs.pop(v)
            row.rhs -= a * const
            for u, k in terms.items():
                new = row.coeffs.get(u, 0.0) + a * k
                if abs(new) > _ZERO:
                    if u not in row.coeffs:
                        self.cols[u].add(rid)
                    row.coeffs[u] = new
                elif u in row.coeffs:
                    del row.coeffs[u]
                    self.cols[u].discard(rid)
        del self.cols[v]
        c = self.obj.pop(v, 0.0)
        if c:
            self.constant += c * const
            for u, k in terms.items():
                new = self.obj.get(u, 0.0) + c * k
                if abs(new) > _ZERO:
                    self.obj[u] = new
                else:
                    self.obj.pop(u, None)
        self.post.records.append((v, const, dict(terms)))
        self.changed = True

    def _tighten(self, v, lo, hi):
        """Intersect the bounds of ``v`` with [lo, hi]."""
        if v in self.binary:
            lo = math.ceil(lo - self.int_tol) if math.isfinite(lo) else lo
            hi = math.floor(hi + self.int_tol) if math.isfinite(hi) else hi
        new_lo = max(self.lo[v], lo)
        new_hi = min(self.hi[v], hi)
        if new_lo > new_hi:
            if new_lo - new_hi > _TOL * (1.0 + abs(new_lo)):
                raise InfeasibleProblem(f"bounds of {v} cross ({new_lo} > {new_hi})")
            new_lo = new_hi = 0.5 * (new_lo + new_hi)
        if new_lo > self.lo[v] + _ZERO or new_hi < self.hi[v] - _ZERO:
            self.lo[v], self.hi[v] = new_lo, new_hi
            self.changed = True

    def _activity(self, row):
        lo_act = hi_act = 0.0
        for v, a in row.coeffs.items():
            if a > 0:
                lo_act += a * self.lo[v]
                hi_act += a * self.hi[v]
            else:
                lo_act += a * self.hi[v]
                hi_act += a * self.lo[v]
        return lo_act, hi_act

    # ------------------------------------------------------------ reductions
    def fixed_vars(self):
        for v in list(self.cols):
            if self.hi[v] - self.lo[v] <= _ZERO:
                self._fix(v, self.lo[v])

    def rows_pass(self):
        for rid in list(self.rows):
            row = self.rows.get(rid)
            if row is None:
                continue
            tol = _TOL * (1.0 + abs(row.rhs))
            if not row.coeffs:
                r = row.rhs
                if (row.rel <= 0 and r < -tol) or (row.rel >= 0 and r > tol):
                    raise InfeasibleProblem(f"empty row {row.name} cannot hold")
                self._drop_row(rid)
                continue
            if len(row.coeffs) == 1:
                (v, a), = row.coeffs.items()
                bound = row.rhs / a
                rel = row.rel if a > 0 else -row.rel
                self._tighten(v, bound if rel >= 0 else -math.inf, bound if rel <= 0 else math.inf)
                self._drop_row(rid)
                continue
            lo_act, hi_act = self._activity(row)
            b = row.rhs
            if row.rel <= 0 and lo_act > b + tol or row.rel >= 0 and hi_act < b - tol:
                raise InfeasibleProblem(f"row {row.name} cannot be satisfied")
            if row.rel < 0 and hi_act <= b + tol or row.rel > 0 and lo_act >= b - tol:
                self._drop_row(rid)
                continue
            at_min = row.rel <= 0 and lo_act >= b - tol
            at_max = row.rel >= 0 and hi_act <= b + tol
            if at_min or at_max:
                coeffs = dict(row.coeffs)
                self._drop_row(rid)
                for v, a in coeffs.items():
                    value = self.lo[v] if (a > 0) == at_min else self.hi[v]
                    self._fix(v, value)

    def dual_fix(self):
        for v in list(self.cols):
            c = self.obj.get(v, 0.0)
            up = down = 0
            for rid in self.cols[v]:
                row = self.rows[rid]
                a = row.coeffs[v]
                if row.rel == 0:
                    up += 1
                    down += 1
                elif (row.rel < 0) == (a > 0):
                    up += 1
                else:
                    down += 1
            if c >= 0 and down == 0:
                self._fix(v, self.lo[v])
            elif c <= 0 and up == 0 and math.isfinite(self.hi[v]):
                self._fix(v, self.hi[v])

    def substitutions(self):
        for v in list(self.cols):
            if v in self.binary or v not in self.cols:
                continue
            rows = self.cols[v]
            eq_rows = [rid for rid in rows if self.rows[rid].rel == 0]
            if not eq_rows:
                continue
            # doubleton equality: v = (b - e*y)/a, transfer v's bounds to y
            for rid in sorted(eq_rows):
                row = self.rows[rid]
                if len(row.coeffs) != 2:
                    continue
                a = row.coeffs[v]
                (y, e), = ((u, k) for u, k in row.coeffs.items() if u != v)
                if abs(a) < 1e-6 * abs(e):
                    continue
                k0, k = row.rhs / a, -e / a
                lo_y = (self.lo[v] - k0) / k if k > 0 else (self.hi[v] - k0) / k
                hi_y = (self.hi[v] - k0) / k if k > 0 else (self.lo[v] - k0) / k
                self._drop_row(rid)
                self._tighten(y, lo_y, hi_y)
                self._substitute(v, k0, {y: k})
                break
            else:
                if len(rows) == 1:
                    self._column_singleton(v, eq_rows[0])

    def _column_singleton(self, v, rid):
        row = self.rows[rid]
        a = row.coeffs[v]
        rest = {u: k for u, k in row.coeffs.items() if u != v}
        if not rest:  # singleton row; the next row pass fixes v
            return
        if max(abs(k) for k in rest.values()) * 1e-6 > abs(a):
            return
        lo_r, hi_r = self._activity(_Row(rest, 0, 0.0, None))
        # lo_v <= (b - R)/a <= hi_v  rewritten as bounds on R
        if a > 0:
            r_lo, r_hi = row.rhs - a * self.hi[v], row.rhs - a * self.lo[v]
        else:
            r_lo, r_hi = row.rhs - a * self.lo[v], row.rhs - a * self.hi[v]
        tol = _TOL * (1.0 + abs(row.rhs))
        need_lo = math.isfinite(r_lo) and lo_r < r_lo - tol
        need_hi = math.isfinite(r_hi) and hi_r > r_hi + tol
        if need_lo and need_hi:
            return
        name = row.name
        self._drop_row(rid)
        if need_lo:
            self._add_row(dict(rest), 1, r_lo, name)
        if need_hi:
            self._add_row(dict(rest), -1, r_hi, name)
        self._substitute(v, row.rhs / a, {u: -k / a for u, k in rest.items()})

    # ------------------------------------------------------------------ run
    def run(self, max_passes: int = 100):
        for _ in range(max_passes):
            self.changed = False
            self.fixed_vars()
            self.rows_pass()
            self.fixed_vars()
            self.dual_fix()
            self.substitutions()
            if not self.changed:
                break
        return self.result()

    def result(self):
        variables = [
            Variable(v.name, self.lo[v.name], self.hi[v.name], v.kind)
            for v in self.problem.variables if v.name in self.cols
        ]
        rel_names = {-1: LE, 0: EQ, 1: GE}
        constraints = [
            Constraint(row.coeffs, rel_names[row.rel], row.rhs, row.name)
            for row in self.rows.values()
        ]
        obj = Objective(
            {v: self.sign * a for v, a in self.obj.items()},
            self.problem.objective.sense,
            self.sign * self.constant,
        )
        return MilpProblem(variables, constraints, obj, self.problem.name), self.post


def presolve(problem: MilpProblem, int_tol: float = 1e-6) -> tuple[MilpProblem, Postsolve]:
    """Return ``(reduced, postsolve)``; raises :class:`InfeasibleProblem`.

    ``postsolve`` is a dict of variables fixed to constants; its ``restore``
    method maps a reduced solution back to values for every original variable.
    The reduced problem has the same optimal objective as ``problem``.
    """
    return _Presolver(problem, int_tol).run()
