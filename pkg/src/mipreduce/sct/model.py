"""Facility location / allocation MILP for the autologous therapy supply chain.

Each patient's sample travels center -> manufacturing facility -> co-located
hospital.  Material balances tie the flows together with fixed lead times, the
binary E1 vector chooses which facilities exist, and Y1/Y2 choose the route
legs.  The model can be restricted to a subset of facilities, which removes
every variable and constraint indexed by a dropped facility.

Time shifts are written as ``destination[t] = source[t - shift]`` with days
counted from 1; a source before day 1 contributes zero.  Five-index route
variables are only created on the (center, day) pairs a patient can actually
reach, which the fixed arrival day and lead times determine exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..milp import BINARY, MilpProblem, MilpSolution, ProblemBuilder
from .config import DemandProfile, SupplyChainConfig


class HorizonOverflow(ValueError):
    """A feasible route would finish after the last modelled day."""


class SolutionInconsistency(RuntimeError):
    """Costs recomputed from a solution's routes disagree with the MILP objective."""


@dataclass(frozen=True)
class ModelStats:
    constraints: int
    binaries: int
    continuous: int

    def reduction_from(self, full: "ModelStats") -> dict:
        """Fractions 1 - reduced/full for constraints and binaries."""
        return {
            "constraints": 1.0 - self.constraints / full.constraints if full.constraints else 0.0,
            "binaries": 1.0 - self.binaries / full.binaries if full.binaries else 0.0,
        }


@dataclass(frozen=True)
class BuiltModel:
    problem: MilpProblem
    config: SupplyChainConfig
    demand: DemandProfile
    active: tuple[int, ...]
    index: dict = field(repr=False)
    stats: ModelStats
    fixed_facilities: bool = False


@dataclass
class PatientRoute:
    patient: int
    center: str
    facility: str
    hospital: str
    mode_in: str
    mode_out: str
    arrival_day: int
    departure_day: int
    facility_day: int
    release_day: int
    delivery_day: int
    ctm: float
    ttc: float
    trt: int


@dataclass
class SupplyChainSolution:
    established: list[str]
    routes: list[PatientRoute]
    ratio: dict  # facility name -> list of utilisation per day
    atrt: float
    totcost: float


def _n(*parts) -> str:
    return "_".join(str(p) for p in parts)


def resolve_facilities(config: SupplyChainConfig, active: Iterable | None) -> tuple[int, ...]:
    names = config.facility_names
    if active is None:
        return tuple(range(len(names)))
    out = set()
    for a in active:
        if isinstance(a, str):
            if a not in names:
                raise ValueError(f"unknown facility {a!r}")
            out.add(names.index(a))
        else:
            if not 0 <= int(a) < len(names):
                raise ValueError(f"facility index {a} out of range")
            out.add(int(a))
    if not out:
        raise ValueError("the active facility set must not be empty")
    return tuple(sorted(out))


def build_model(
    config: SupplyChainConfig,
    demand: DemandProfile,
    active_facilities: Iterable | None = None,
    fix_established: bool = False,
) -> BuiltModel:
    """Build the MILP restricted to ``active_facilities`` (names or indices).

    With ``fix_established`` every active facility's E1 is fixed to 1, which is
    the fixing alternative to dimension reduction.
    """
    if demand.n_patients == 0:
        raise ValueError("the demand profile has no patients")
    if demand.n_centers != len(config.centers):
        raise ValueError("demand profile and configuration disagree on the number of centers")
    act = resolve_facilities(config, active_facilities)
    cfg = config
    NT = cfg.nt
    NP = demand.n_patients
    C, H, J = len(cfg.centers), len(cfg.hospitals), len(cfg.modes)
    fac = cfg.facilities
    mname = [f.name for f in fac]
    cname = [f"c{c + 1}" for c in range(C)]
    hname = [f"h{h + 1}" for h in range(H)]
    jname = [f"j{j + 1}" for j in range(J)]
    W = cfg.tmfe + cfg.tqc
    u1, u2 = cfg.u1_array(), cfg.u2_array()

    for p, (c, t) in enumerate(demand.arrivals):
        if t + cfg.lead_time_max > NT:
            raise HorizonOverflow(
                f"patient {p + 1} arriving on day {t} can finish on day "
                f"{t + cfg.lead_time_max}, after the horizon NT={NT}")

    b = ProblemBuilder(f"{cfg.name}-NP{NP}-M{''.join(str(m + 1) for m in act)}")
    idx: dict[str, dict] = {k: {} for k in (
        "E1", "X1", "X2", "Y1", "Y2", "LSR", "LSA", "OUTC", "INM", "OUTM", "MSO", "FTD",
        "INH", "CTM", "TTC", "CTT", "STT", "TRT")}
    T = range(1, NT + 1)
    P = range(NP)

    # ------------------------------------------------------------ variables
    for m in act:
        lo = 1.0 if fix_established else 0.0
        idx["E1"][m] = b.add_var(_n("E1", mname[m]), lo, 1.0, BINARY)
    for c in range(C):
        for m in act:
            idx["X1"][c, m] = b.add_binary(_n("X1", cname[c], mname[m]))
    for m in act:
        for h in range(H):
            idx["X2"][m, h] = b.add_binary(_n("X2", mname[m], hname[h]))

    for p in P:
        c_p, t_p = demand.arrivals[p]
        dep = t_p + cfg.tls
        for m in act:
            for j in range(J):
                key = (p, c_p, m, j, dep)
                idx["Y1"][key] = b.add_binary(_n("Y1", f"p{p + 1}", cname[c_p], mname[m], jname[j], f"t{dep}"))
                idx["LSR"][key] = b.add_var(_n("LSR", f"p{p + 1}", cname[c_p], mname[m], jname[j], f"t{dep}"))
                arr = dep + cfg.modes[j].tt1
                idx["LSA"][(p, c_p, m, j, arr)] = b.add_var(
                    _n("LSA", f"p{p + 1}", cname[c_p], mname[m], jname[j], f"t{arr}"))
        # departures from a facility happen W days after one of the possible arrivals
        out_days = sorted({dep + mode.tt1 + W for mode in cfg.modes})
        for m in act:
            for h in range(H):
                for j in range(J):
                    for t in out_days:
                        key = (p, m, h, j, t)
                        idx["Y2"][key] = b.add_binary(_n("Y2", f"p{p + 1}", mname[m], hname[h], jname[j], f"t{t}"))
                        idx["MSO"][key] = b.add_var(_n("MSO", f"p{p + 1}", mname[m], hname[h], jname[j], f"t{t}"))
                        ta = t + cfg.modes[j].tt2
                        idx["FTD"][(p, m, h, j, ta)] = b.add_var(
                            _n("FTD", f"p{p + 1}", mname[m], hname[h], jname[j], f"t{ta}"))

    for p in P:
        for c in range(C):
            for t in T:
                idx["OUTC"][p, c, t] = b.add_var(_n("OUTC", f"p{p + 1}", cname[c], f"t{t}"))
        for m in act:
            for t in T:
                idx["INM"][p, m, t] = b.add_var(_n("INM", f"p{p + 1}", mname[m], f"t{t}"))
                idx["OUTM"][p, m, t] = b.add_var(_n("OUTM", f"p{p + 1}", mname[m], f"t{t}"))
        for h in range(H):
            for t in T:
                idx["INH"][p, h, t] = b.add_var(_n("INH", f"p{p + 1}", hname[h], f"t{t}"))
        for fam in ("CTM", "TTC", "CTT", "STT", "TRT"):
            idx[fam][p] = b.add_var(_n(fam, f"p{p + 1}"))
    atrt = b.add_var("ATRT")
    totcost = b.add_var("TOTCOST")

    # group route variables by their balance rows
    lsr_by = _group(idx["LSR"], lambda k: (k[0], k[1], k[4]))
    lsa_by = _group(idx["LSA"], lambda k: (k[0], k[2], k[4]))
    mso_by = _group(idx["MSO"], lambda k: (k[0], k[1], k[4]))
    ftd_by = _group(idx["FTD"], lambda k: (k[0], k[2], k[4]))

    add = b.add_constraint
    # objective and cost definitions
    add({totcost: 1.0, **{idx["CTM"][p]: -1.0 for p in P}, **{idx["TTC"][p]: -1.0 for p in P}},
        "==", NP * cfg.cqc, "totcost_def")
    for p in P:
        row = {idx["CTM"][p]: 1.0}
        for m in act:
            row[idx["E1"][m]] = -fac[m].fixed_cost / NP
        add(row, "==", cfg.cvm, _n("ctm_def", f"p{p + 1}"))
        row = {idx["TTC"][p]: 1.0}
        for (pp, c, m, j, t), v in idx["Y1"].items():
            if pp == p:
                row[v] = -cfg.modes[j].tt1 * u1[c, m, j]
        for (pp, m, h, j, t), v in idx["Y2"].items():
            if pp == p:
                row[v] = row.get(v, 0.0) - cfg.modes[j].tt2 * u2[m, h, j]
        add(row, "==", 0.0, _n("ttc_def", f"p{p + 1}"))

    # material balances
    for p in P:
        c_p, t_p = demand.arrivals[p]
        for c in range(C):
            for t in T:
                inc = 1.0 if (c == c_p and t - cfg.tls == t_p) else 0.0
                add({idx["OUTC"][p, c, t]: 1.0}, "==", inc, _n("center_out", f"p{p + 1}", cname[c], f"t{t}"))
    for (p, c, m, j, t), v in idx["LSA"].items():
        src = idx["LSR"][(p, c, m, j, t - cfg.modes[j].tt1)]
        add({v: 1.0, src: -1.0}, "==", 0.0, _n("leg1_transit", f"p{p + 1}", cname[c], mname[m], jname[j], f"t{t}"))
    for (p, c, t), v in idx["OUTC"].items():
        row = {v: 1.0}
        for w in lsr_by.get((p, c, t), ()):
            row[w] = -1.0
        add(row, "==", 0.0, _n("center_split", f"p{p + 1}", cname[c], f"t{t}"))
    for (p, m, t), v in idx["INM"].items():
        row = {v: 1.0}
        for w in lsa_by.get((p, m, t), ()):
            row[w] = -1.0
        add(row, "==", 0.0, _n("facility_in", f"p{p + 1}", mname[m], f"t{t}"))
    for (p, m, t), v in idx["OUTM"].items():
        row = {v: 1.0}
        if t - W >= 1:
            row[idx["INM"][p, m, t - W]] = -1.0
        add(row, "==", 0.0, _n("facility_delay", f"p{p + 1}", mname[m], f"t{t}"))
    for (p, m, t), v in idx["OUTM"].items():
        row = {v: 1.0}
        for w in mso_by.get((p, m, t), ()):
            row[w] = -1.0
        add(row, "==", 0.0, _n("facility_split", f"p{p + 1}", mname[m], f"t{t}"))
    for (p, m, h, j, t), v in idx["FTD"].items():
        src = idx["MSO"][(p, m, h, j, t - cfg.modes[j].tt2)]
        add({v: 1.0, src: -1.0}, "==", 0.0, _n("leg2_transit", f"p{p + 1}", mname[m], hname[h], jname[j], f"t{t}"))
    for (p, h, t), v in idx["INH"].items():
        row = {v: 1.0}
        for w in ftd_by.get((p, h, t), ()):
            row[w] = -1.0
        add(row, "==", 0.0, _n("hospital_in", f"p{p + 1}", hname[h], f"t{t}"))

    # capacity: therapies occupying the lines of m during (t - window, t]
    win = cfg.window
    for m in act:
        for t in T:
            row = {idx["INM"][p, m, tau]: 1.0 for p in P for tau in range(max(1, t - win + 1), t + 1)}
            add(row, "<=", float(fac[m].capacity), _n("capacity", mname[m], f"t{t}"))

    # network structure
    for (c, m), v in idx["X1"].items():
        add({v: 1.0, idx["E1"][m]: -1.0}, "<=", 0.0, _n("link1_open", cname[c], mname[m]))
    for (m, h), v in idx["X2"].items():
        add({v: 1.0, idx["E1"][m]: -1.0}, "<=", 0.0, _n("link2_open", mname[m], hname[h]))
    y1_by_p = _group(idx["Y1"], lambda k: k[0])
    y2_by_p = _group(idx["Y2"], lambda k: k[0])
    for p in P:
        add({v: 1.0 for v in y1_by_p.get(p, ())}, "==", 1.0, _n("route1_once", f"p{p + 1}"))
        add({v: 1.0 for v in y2_by_p.get(p, ())}, "==", 1.0, _n("route2_once", f"p{p + 1}"))
    add({idx["E1"][m]: 1.0 for m in act}, "<=", float(cfg.max_facilities), "max_facilities")
    add({v: 1.0 for v in idx["INH"].values()}, "==", float(NP), "demand_met")
    for (p, c, m, j, t), v in idx["Y1"].items():
        add({v: 1.0, idx["X1"][c, m]: -1.0}, "<=", 0.0, _n("route1_link", f"p{p + 1}", cname[c], mname[m], jname[j], f"t{t}"))
    for (p, m, h, j, t), v in idx["Y2"].items():
        add({v: 1.0, idx["X2"][m, h]: -1.0}, "<=", 0.0, _n("route2_link", f"p{p + 1}", mname[m], hname[h], jname[j], f"t{t}"))
    # co-location: a therapy may only return to the hospital paired with its center
    y2_by_ph = _group(idx["Y2"], lambda k: (k[0], k[2]))
    for p in P:
        c_p, t_p = demand.arrivals[p]
        for c in range(C):
            h = cfg.colocation[c]
            rhs = float(t_p) if c == c_p else 0.0
            add({v: 1.0 for v in y2_by_ph.get((p, h), ())}, "<=", rhs, _n("colocation", f"p{p + 1}", hname[h]))
    # flow bounds on established links
    for key, v in idx["Y1"].items():
        f = idx["LSR"][key]
        add({f: 1.0, v: -cfg.fmin}, ">=", 0.0, _n("flow1_min", *_keyname(key, cname, mname, jname, "c")))
        add({f: 1.0, v: -cfg.fmax}, "<=", 0.0, _n("flow1_max", *_keyname(key, cname, mname, jname, "c")))
    for key, v in idx["Y2"].items():
        f = idx["MSO"][key]
        add({f: 1.0, v: -cfg.fmin}, ">=", 0.0, _n("flow2_min", *_keyname(key, hname, mname, jname, "h")))
        add({f: 1.0, v: -cfg.fmax}, "<=", 0.0, _n("flow2_max", *_keyname(key, hname, mname, jname, "h")))

    # timing
    for p in P:
        c_p, t_p = demand.arrivals[p]
        row = {idx["CTT"][p]: 1.0}
        for h in range(H):
            for t in T:
                row[idx["INH"][p, h, t]] = -float(t)
        add(row, "==", 0.0, _n("ctt_def", f"p{p + 1}"))
        add({idx["STT"][p]: 1.0}, "==", float(t_p), _n("stt_def", f"p{p + 1}"))
        add({idx["STT"][p]: 1.0, idx["CTT"][p]: -1.0}, "<=", 0.0, _n("stt_before_ctt", f"p{p + 1}"))
        add({idx["TRT"][p]: 1.0}, "<=", float(cfg.nd), _n("turnaround_limit", f"p{p + 1}"))
        add({idx["TRT"][p]: 1.0, idx["CTT"][p]: -1.0, idx["STT"][p]: 1.0}, "==", 0.0,
            _n("trt_def", f"p{p + 1}"))
    add({atrt: 1.0, **{idx["TRT"][p]: -1.0 / NP for p in P}}, "==", 0.0, "atrt_def")

    b.set_objective({totcost: 1.0}, "min")
    problem = b.build()
    idx["ATRT"] = atrt
    idx["TOTCOST"] = totcost
    stats = ModelStats(problem.n_constraints, len(problem.binaries),
                       problem.n_vars - len(problem.binaries))
    return BuiltModel(problem, cfg, demand, act, idx, stats, fix_established)


def _group(family: dict, keyfn) -> dict:
    out: dict = {}
    for k, v in family.items():
        out.setdefault(keyfn(k), []).append(v)
    return out


def _keyname(key, names_a, mname, jname, kind):
    if kind == "c":
        p, c, m, j, t = key
        return f"p{p + 1}", names_a[c], mname[m], jname[j], f"t{t}"
    p, m, h, j, t = key
    return f"p{p + 1}", mname[m], names_a[h], jname[j], f"t{t}"


def model_stats(built: BuiltModel) -> ModelStats:
    return built.stats


def extract_solution(built: BuiltModel, milp: MilpSolution, rtol: float = 1e-6) -> SupplyChainSolution:
    """Recompute routes, costs and utilisation from a MILP solution.

    Raises :class:`SolutionInconsistency` when the recomputed total cost and the
    solver objective disagree beyond ``rtol``.
    """
    if not milp.values:
        raise ValueError(f"solution with status {milp.status!r} carries no incumbent")
    cfg, demand, idx, x = built.config, built.demand, built.index, milp.values
    NP = demand.n_patients
    W = cfg.tmfe + cfg.tqc
    u1, u2 = cfg.u1_array(), cfg.u2_array()
    established = [m for m in built.active if x[idx["E1"][m]] > 0.5]
    fixed_total = sum(cfg.facilities[m].fixed_cost for m in established)
    routes = []
    for p, (c_p, t_p) in enumerate(demand.arrivals):
        leg1 = [k for k, v in idx["Y1"].items() if k[0] == p and x[v] > 0.5]
        leg2 = [k for k, v in idx["Y2"].items() if k[0] == p and x[v] > 0.5]
        if len(leg1) != 1 or len(leg2) != 1:
            raise SolutionInconsistency(f"patient {p + 1} does not have exactly one route")
        (_, c, m, j1, dep), (_, m2, h, j2, rel) = leg1[0], leg2[0]
        if m2 != m or c != c_p:
            raise SolutionInconsistency(f"patient {p + 1} route legs do not connect")
        fac_day = dep + cfg.modes[j1].tt1
        if rel != fac_day + W:
            raise SolutionInconsistency(f"patient {p + 1} leaves facility on the wrong day")
        delivery = rel + cfg.modes[j2].tt2
        ctm = fixed_total / NP + cfg.cvm
        ttc = cfg.modes[j1].tt1 * u1[c, m, j1] + cfg.modes[j2].tt2 * u2[m, h, j2]
        routes.append(PatientRoute(
            p + 1, cfg.centers[c], cfg.facilities[m].name, cfg.hospitals[h],
            cfg.modes[j1].name, cfg.modes[j2].name, t_p, dep, fac_day, rel, delivery,
            float(ctm), float(ttc), delivery - t_p))
    ratio = {}
    for m in built.active:
        occupancy = [0.0] * cfg.nt
        for r in routes:
            if r.facility == cfg.facilities[m].name:
                for t in range(r.facility_day, r.facility_day + cfg.window):
                    if t <= cfg.nt:
                        occupancy[t - 1] += 1.0
        ratio[cfg.facilities[m].name] = [o / cfg.facilities[m].capacity for o in occupancy]
    totcost = sum(r.ctm + r.ttc for r in routes) + NP * cfg.cqc
    if abs(totcost - milp.objective) > rtol * max(1.0, abs(totcost)):
        raise SolutionInconsistency(
            f"recomputed TOTCOST {totcost!r} differs from objective {milp.objective!r}")
    for r in routes:
        if r.trt < 0 or r.trt > cfg.nd:
            raise SolutionInconsistency(f"patient {r.patient} turnaround {r.trt} violates bounds")
    if any(v > 1.0 + 1e-9 for vals in ratio.values() for v in vals):
        raise SolutionInconsistency("facility utilisation above capacity")
    return SupplyChainSolution(
        [cfg.facilities[m].name for m in established], routes, ratio,
        float(sum(r.trt for r in routes) / NP), float(totcost))


def established_vector(built: BuiltModel, milp: MilpSolution) -> list[int]:
    """0/1 per configured facility (dropped facilities count as 0)."""
    out = [0] * built.config.n_facilities
    for m, v in built.index["E1"].items():
        out[m] = int(milp.values[v] > 0.5)
    return out
