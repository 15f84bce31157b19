"""Supply-chain parameters and demand profiles."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

FEATURE_DAYS = 90


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Facility:
    name: str
    capacity: int  # parallel manufacturing lines
    capital: float  # investment cost attributed over the planning period
    fixed_variable: float  # staff and maintenance cost independent of utilisation

    @property
    def fixed_cost(self) -> float:
        return self.capital + self.fixed_variable


@dataclass(frozen=True)
class TransportMode:
    name: str
    tt1: int  # days, collection center to facility
    tt2: int  # days, facility to hospital


@dataclass(frozen=True)
class SupplyChainConfig:
    """Network, durations and costs of the therapy supply chain.

    ``u1[c][m][j]`` and ``u2[m][h][j]`` are per-day unit transport costs; a leg
    costs its duration times its unit cost.  ``colocation[c]`` is the index of
    the hospital that shares a site with center ``c``.
    """

    facilities: tuple[Facility, ...]
    centers: tuple[str, ...]
    hospitals: tuple[str, ...]
    colocation: tuple[int, ...]
    modes: tuple[TransportMode, ...]
    u1: tuple
    u2: tuple
    cvm: float
    cqc: float
    tls: int
    tmfe: int
    tqc: int
    nd: int = 21
    max_facilities: int = 6
    fmin: float = 0.0
    fmax: float = 1.0
    demand_horizon: int = FEATURE_DAYS
    nt: int | None = None
    center_daily_cap: int = 8
    name: str = "supply-chain"
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "u1", _freeze(self.u1))
        object.__setattr__(self, "u2", _freeze(self.u2))
        object.__setattr__(self, "colocation", tuple(int(h) for h in self.colocation))
        if self.nt is None:
            object.__setattr__(self, "nt", self.demand_horizon + self.lead_time_max)
        self.validate()

    # --------------------------------------------------------------- derived
    @property
    def n_facilities(self) -> int:
        return len(self.facilities)

    @property
    def facility_names(self) -> list[str]:
        return [f.name for f in self.facilities]

    @property
    def window(self) -> int:
        """Days a therapy occupies a manufacturing line (manufacture plus QC)."""
        return max(self.tmfe + self.tqc, 1)

    @property
    def lead_time_max(self) -> int:
        return (self.tls + max(m.tt1 for m in self.modes) + self.tmfe + self.tqc
                + max(m.tt2 for m in self.modes))

    @property
    def lead_time_min(self) -> int:
        return (self.tls + min(m.tt1 for m in self.modes) + self.tmfe + self.tqc
                + min(m.tt2 for m in self.modes))

    def u1_array(self) -> np.ndarray:
        return np.array(self.u1, dtype=float)

    def u2_array(self) -> np.ndarray:
        return np.array(self.u2, dtype=float)

    def validate(self) -> None:
        C, H, M, J = len(self.centers), len(self.hospitals), len(self.facilities), len(self.modes)
        if M == 0 or C == 0 or J == 0:
            raise ConfigError("need at least one facility, center and transport mode")
        names = [f.name for f in self.facilities]
        if len(set(names)) != M:
            raise ConfigError("facility names must be unique")
        for f in self.facilities:
            if f.capacity <= 0:
                raise ConfigError(f"facility {f.name} needs a positive capacity")
        if C != H or sorted(self.colocation) != list(range(H)) or len(self.colocation) != C:
            raise ConfigError("co-location must pair every center with a distinct hospital")
        durations = [self.tls, self.tmfe, self.tqc] + [m.tt1 for m in self.modes] + [
            m.tt2 for m in self.modes]
        if any(d < 0 for d in durations):
            raise ConfigError("durations must be non-negative")
        if self.nd < self.lead_time_min:
            raise ConfigError(
                f"turnaround bound ND={self.nd} is below the fastest route "
                f"({self.lead_time_min} days); every instance would be infeasible")
        if np.shape(self.u1) != (C, M, J) or np.shape(self.u2) != (M, H, J):
            raise ConfigError("transport cost tables have the wrong shape")
        if self.max_facilities < 1:
            raise ConfigError("the facility cap must allow at least one facility")
        if self.center_daily_cap < 1:
            raise ConfigError("center daily capacity must be positive")
        if self.demand_horizon < 1 or self.demand_horizon > FEATURE_DAYS:
            raise ConfigError(f"demand horizon must be in 1..{FEATURE_DAYS}")

    # ------------------------------------------------------------------- io
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "notes": self.notes,
            "facilities": [
                {"name": f.name, "capacity": f.capacity, "capital": f.capital,
                 "fixed_variable": f.fixed_variable} for f in self.facilities],
            "centers": list(self.centers),
            "hospitals": list(self.hospitals),
            "colocation": {self.centers[c]: self.hospitals[h] for c, h in enumerate(self.colocation)},
            "modes": [{"name": m.name, "tt1": m.tt1, "tt2": m.tt2} for m in self.modes],
            "u1": _thaw(self.u1),
            "u2": _thaw(self.u2),
            "cvm": self.cvm, "cqc": self.cqc,
            "tls": self.tls, "tmfe": self.tmfe, "tqc": self.tqc, "nd": self.nd,
            "max_facilities": self.max_facilities, "fmin": self.fmin, "fmax": self.fmax,
            "demand_horizon": self.demand_horizon, "nt": self.nt,
            "center_daily_cap": self.center_daily_cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SupplyChainConfig":
        try:
            centers = tuple(d["centers"])
            hospitals = tuple(d["hospitals"])
            coloc = d["colocation"]
            colocation = tuple(hospitals.index(coloc[c]) for c in centers)
            return cls(
                facilities=tuple(Facility(f["name"], int(f["capacity"]), float(f["capital"]),
                                          float(f["fixed_variable"])) for f in d["facilities"]),
                centers=centers,
                hospitals=hospitals,
                colocation=colocation,
                modes=tuple(TransportMode(m["name"], int(m["tt1"]), int(m["tt2"]))
                            for m in d["modes"]),
                u1=d["u1"], u2=d["u2"],
                cvm=float(d["cvm"]), cqc=float(d["cqc"]),
                tls=int(d["tls"]), tmfe=int(d["tmfe"]), tqc=int(d["tqc"]),
                nd=int(d.get("nd", 21)),
                max_facilities=int(d.get("max_facilities", len(d["facilities"]))),
                fmin=float(d.get("fmin", 0.0)), fmax=float(d.get("fmax", 1.0)),
                demand_horizon=int(d.get("demand_horizon", FEATURE_DAYS)),
                nt=d.get("nt"),
                center_daily_cap=int(d.get("center_daily_cap", 8)),
                name=d.get("name", "supply-chain"),
                notes=d.get("notes", ""),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad supply-chain parameter file: {exc!r}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "SupplyChainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _freeze(x):
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, (list, tuple)):
        return tuple(_freeze(v) for v in x)
    return float(x)


def _thaw(x):
    if isinstance(x, tuple):
        return [_thaw(v) for v in x]
    return x


def builtin_config(name: str = "desk") -> SupplyChainConfig:
    """Load a parameter file shipped with the package (``desk``, ``benchmark``, ``trivial``)."""
    text = resources.files("mipreduce.sct").joinpath("data").joinpath(f"{name}.json").read_text()
    return SupplyChainConfig.from_dict(json.loads(text))


@dataclass(frozen=True)
class DemandProfile:
    """Patient arrivals as (center index, day) pairs, days counted from 1.

    Patients are kept sorted by (day, center) so equal profiles compare equal.
    """

    arrivals: tuple[tuple[int, int], ...]
    n_centers: int
    horizon: int = FEATURE_DAYS
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = tuple(sorted(((int(c), int(t)) for c, t in self.arrivals),
                           key=lambda ct: (ct[1], ct[0])))
        object.__setattr__(self, "arrivals", arr)
        for c, t in arr:
            if not 0 <= c < self.n_centers:
                raise ConfigError(f"center index {c} out of range")
            if not 1 <= t <= self.horizon:
                raise ConfigError(f"arrival day {t} outside 1..{self.horizon}")

    @property
    def n_patients(self) -> int:
        return len(self.arrivals)

    def inc(self, nt: int | None = None) -> np.ndarray:
        """INC[p, c, t] indicator array, with time axis index 0 meaning day 1."""
        nt = nt or self.horizon
        out = np.zeros((self.n_patients, self.n_centers, nt), dtype=np.int8)
        for p, (c, t) in enumerate(self.arrivals):
            out[p, c, t - 1] = 1
        return out

    def center_day_counts(self) -> np.ndarray:
        out = np.zeros((self.n_centers, self.horizon), dtype=int)
        for c, t in self.arrivals:
            out[c, t - 1] += 1
        return out

    def features(self, days: int = FEATURE_DAYS) -> np.ndarray:
        """Total arrivals per day over ``days`` days (zero beyond the horizon)."""
        out = np.zeros(days)
        for _, t in self.arrivals:
            if t <= days:
                out[t - 1] += 1
        return out

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "c", "t"])
            for p, (c, t) in enumerate(self.arrivals):
                w.writerow([p + 1, c + 1, t])

    @classmethod
    def load(cls, path, n_centers: int, horizon: int = FEATURE_DAYS) -> "DemandProfile":
        arrivals = []
        with open(path, newline="") as fh:
            rows = csv.reader(fh)
            header = next(rows, None)
            if header != ["p", "c", "t"]:
                raise ConfigError(f"{path}: expected header p,c,t")
            for lineno, row in enumerate(rows, start=2):
                try:
                    _, c, t = (int(x) for x in row)
                except ValueError:
                    raise ConfigError(f"{path}: malformed row on line {lineno}") from None
                arrivals.append((c - 1, t))
        return cls(tuple(arrivals), n_centers, horizon)
