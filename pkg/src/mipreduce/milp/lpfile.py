"""Export to the text LP file format read by common external solvers."""
from __future__ import annotations

import math
import re
from pathlib import Path

from .problem import MAX, MilpProblem

_VALID = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")
_BAD_CHARS = re.compile(r"[^A-Za-z0-9_.\[\]]")
_LINE_WIDTH = 500  # LP readers limit line length; long rows wrap on term boundaries


class NameCollisionError(ValueError):
    pass


def _lp_name(name: str) -> str:
    if _VALID.match(name):
        return name
    clean = _BAD_CHARS.sub("_", name)
    if not clean or not (clean[0].isalpha() or clean[0] == "_"):
        clean = "_" + clean
    return clean


def _num(x: float) -> str:
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _terms(coeffs, names) -> list[str]:
    out = []
    for v, a in coeffs.items():
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        out.append(f"{sign} {names[v]}" if mag == 1 else f"{sign} {_num(mag)} {names[v]}")
    if out and out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(head: str, parts: list[str]) -> str:
    lines, cur = [], head
    for p in parts:
        if len(cur) + len(p) + 1 > _LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   "
        cur += " " + p
    lines.append(cur)
    return "\n".join(lines)


def _unique_names(raw: list[str], kind: str, taken: set[str]) -> list[str]:
    out = []
    for name in raw:
        lp = _lp_name(name)
        if lp in taken:
            raise NameCollisionError(f"{kind} name {name!r} collides with another name as {lp!r}")
        taken.add(lp)
        out.append(lp)
    return out


def export_lp_file(problem: MilpProblem, path) -> Path:
    """Write ``problem`` to ``path`` and return the path.

    Names that are not valid LP identifiers are rewritten; if two names end up
    identical a :class:`NameCollisionError` is raised and nothing is written.
    """
    taken: set[str] = set()
    var_names = dict(zip(
        (v.name for v in problem.variables),
        _unique_names([v.name for v in problem.variables], "variable", taken),
    ))
    raw_rows = [con.name or f"c{k + 1}" for k, con in enumerate(problem.constraints)]
    row_names = _unique_names(raw_rows, "constraint", taken)

    obj = problem.objective
    parts = _terms(obj.coeffs, var_names)
    if obj.constant:
        parts.append(("- " if obj.constant < 0 else "+ ") + _num(abs(obj.constant)))
        if parts[0].startswith("+ "):
            parts[0] = parts[0][2:]
    if not parts:
        parts = ["0"]
    lines = [f"\\ Problem: {problem.name}", "Maximize" if obj.sense == MAX else "Minimize"]
    lines.append(_wrap(" obj:", parts))
    if problem.constraints:
        lines.append("Subject To")
        for name, con in zip(row_names, problem.constraints):
            terms = _terms(con.coeffs, var_names) or [_first_var_zero(problem, var_names)]
            terms = terms + [con.relation.replace("==", "="), _num(con.rhs)]
            lines.append(_wrap(f" {name}:", terms))

    bounds = []
    for v in problem.variables:
        n = var_names[v.name]
        if v.is_binary and v.lower == 0 and v.upper == 1:
            continue
        if not v.is_binary and v.lower == 0 and v.upper == math.inf:
            continue
        if v.lower == v.upper:
            bounds.append(f" {n} = {_num(v.lower)}")
        elif v.upper == math.inf:
            bounds.append(f" {n} >= {_num(v.lower)}")
        else:
            bounds.append(f" {_num(v.lower)} <= {n} <= {_num(v.upper)}")
    if bounds or not problem.constraints:
        lines.append("Bounds")
        lines.extend(bounds)
    binaries = [var_names[b] for b in problem.binaries]
    if binaries:
        lines.append("Binaries")
        lines.append(_wrap("", binaries))
    lines.append("End")

    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def _first_var_zero(problem, var_names) -> str:
    if not problem.variables:
        raise ValueError("cannot export an empty constraint without any variable")
    return f"0 {var_names[problem.variables[0].name]}"
