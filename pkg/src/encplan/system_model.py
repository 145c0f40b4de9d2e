"""Grid domain types, CSV ingestion, validation, and renewable scaling.

CSV schemas (UTF-8, header row, comma-separated):
    buses.csv:      id,candidate_storage(0/1)
    lines.csv:      id,from,to,reactance_ohm,capacity_mw
    generators.csv: id,bus,gmin_mw,gmax_mw,cmin_usd_h,csu_usd,emin_t_h,esu_t,
                    minup_h,mindown_h,seg1_mw,seg1_usd_mwh,seg1_t_mwh,... (<=4 segments)
    timeseries/load_<bus>.csv, timeseries/ren_<bus>.csv: day,hour,mw
All types are immutable after construction (frozen dataclasses + read-only
arrays) and safe to share across threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MAX_SEGMENTS = 4


class ValidationError(ValueError):
    """Input data violates a schema rule or a model invariant."""


@dataclass(frozen=True)
class Bus:
    id: str
    candidate_storage: bool = False


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    reactance: float          # ohm
    capacity: float           # MW

    @property
    def admittance(self) -> float:
        return 1.0 / self.reactance


@dataclass(frozen=True)
class Segment:
    capacity: float           # MW above minimum output
    cost: float               # $/MWh
    emissions: float          # tons/MWh


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    g_min: float
    g_max: float
    segments: tuple[Segment, ...]
    cost_min: float           # $/h while committed
    cost_startup: float       # $
    emis_min: float           # tons/h while committed
    emis_startup: float       # tons
    min_up: int               # h
    min_down: int             # h

    @property
    def commitment_free(self) -> bool:
        """True when always-on is weakly dominant (no commitment costs,
        no minimum output, unit up/down times): the binary can be fixed."""
        return (self.g_min == 0 and self.cost_min == 0 and self.cost_startup == 0
                and self.emis_min == 0 and self.emis_startup == 0
                and self.min_up <= 1 and self.min_down <= 1)


@dataclass(frozen=True)
class StorageSpec:
    duration: float = 4.0             # h, energy/power ratio
    efficiency: float = 0.9           # per-direction, applied symmetrically
    unit_power: float = 25.0          # MW per storage quantum
    cost_energy: float = 0.0          # $/MWh-yr
    cost_power: float = 0.0           # $/MW-yr

    def __post_init__(self):
        if self.duration <= 0:
            raise ValidationError("storage duration must be > 0")
        if not 0 < self.efficiency <= 1:
            raise ValidationError("storage efficiency must be in (0, 1]")
        if self.unit_power <= 0:
            raise ValidationError("storage unit power must be > 0")

    @property
    def unit_energy(self) -> float:
        return self.duration * self.unit_power

    @property
    def effective_price(self) -> float:
        """Amortized $/MW-yr including the energy component."""
        return self.cost_power + self.duration * self.cost_energy

    def with_effective_price(self, price: float) -> "StorageSpec":
        """Split an effective $/MW-yr price across power/energy components."""
        return replace(self, cost_power=price / 2.0,
                       cost_energy=price / (2.0 * self.duration))


@dataclass(frozen=True)
class DailyProfile:
    """One day of per-bus demand and renewable availability, MW by hour."""
    demand: dict            # bus id -> ndarray (T,)
    renewables: dict        # bus id -> ndarray (T,)
    horizon: int

    def __post_init__(self):
        for d in (self.demand, self.renewables):
            for bus, arr in d.items():
                if len(arr) != self.horizon:
                    raise ValidationError(
                        f"series for bus {bus} has length {len(arr)} != horizon")
                if np.any(np.asarray(arr) < 0):
                    raise ValidationError(f"negative series value at bus {bus}")

    def net_load(self) -> np.ndarray:
        total = np.zeros(self.horizon)
        for arr in self.demand.values():
            total += arr
        for arr in self.renewables.values():
            total -= arr
        return total

    def total_demand(self) -> float:
        return float(sum(a.sum() for a in self.demand.values()))


@dataclass(frozen=True)
class EconomicParams:
    carbon_price: float = 0.0          # $/ton
    load_shed_price: float = 10_000.0  # $/MWh
    ren_shed_price: float = 0.0        # $/MWh
    enc_multiplier: float = 1.0        # emissions-neutrality slack factor
    days_per_year: float = 365.0       # annualization of the day expectation
    min_return: float = 0.0            # profit floor for the philanthropic case

    def __post_init__(self):
        if self.carbon_price < 0:
            raise ValidationError("carbon price must be >= 0")
        if self.load_shed_price < 0 or self.ren_shed_price < 0:
            raise ValidationError("shed penalties must be >= 0")
        if self.enc_multiplier < 1.0:
            raise ValidationError("ENC multiplier must be >= 1")


@dataclass(frozen=True)
class PowerSystem:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    demand: dict              # bus id -> ndarray (days, 24)
    renewables: dict          # bus id -> ndarray (days, 24)
    storage: StorageSpec = field(default_factory=StorageSpec)

    def __post_init__(self):
        validate_system(self)
        for d in (self.demand, self.renewables):
            for arr in d.values():
                arr.setflags(write=False)

    @property
    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    @property
    def candidate_buses(self) -> list[str]:
        return [b.id for b in self.buses if b.candidate_storage]

    @property
    def num_days(self) -> int:
        for arr in self.demand.values():
            return arr.shape[0]
        return 0

    def daily_profiles(self) -> list[DailyProfile]:
        """Slice the full time series into per-day profiles."""
        days = self.num_days
        out = []
        for d in range(days):
            out.append(DailyProfile(
                demand={b: np.array(self.demand[b][d]) for b in self.demand},
                renewables={b: np.array(self.renewables[b][d])
                            for b in self.renewables},
                horizon=24,
            ))
        return out

    def renewable_penetration(self) -> float:
        """Annual renewable energy / annual demand energy."""
        dem = sum(float(a.sum()) for a in self.demand.values())
        ren = sum(float(a.sum()) for a in self.renewables.values())
        if dem <= 0:
            raise ValidationError("system has zero total demand")
        return ren / dem


def validate_system(sys: PowerSystem) -> None:
    if not sys.buses:
        raise ValidationError("system needs at least one bus")
    ids = [b.id for b in sys.buses]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate bus ids")
    known = set(ids)
    for ln in sys.lines:
        if ln.from_bus == ln.to_bus:
            raise ValidationError(f"line {ln.id}: from == to")
        for end in (ln.from_bus, ln.to_bus):
            if end not in known:
                raise ValidationError(f"line {ln.id}: unknown bus {end!r}")
        if ln.capacity <= 0:
            raise ValidationError(f"line {ln.id}: capacity must be > 0")
        if ln.reactance <= 0:
            raise ValidationError(f"line {ln.id}: reactance must be > 0")
    gids = [g.id for g in sys.generators]
    if len(set(gids)) != len(gids):
        raise ValidationError("duplicate generator ids")
    for g in sys.generators:
        if g.bus not in known:
            raise ValidationError(f"generator {g.id}: unknown bus {g.bus!r}")
        if g.g_min < 0 or g.g_max < 0:
            raise ValidationError(f"generator {g.id}: negative capacity")
        seg_sum = sum(s.capacity for s in g.segments)
        if abs(g.g_min + seg_sum - g.g_max) > 1e-9 * max(1.0, g.g_max):
            raise ValidationError(
                f"generator {g.id}: gmin + segment capacities != gmax "
                f"({g.g_min} + {seg_sum} != {g.g_max})")
        costs = [s.cost for s in g.segments]
        if any(b > a for a, b in zip(costs[1:], costs)):
            raise ValidationError(
                f"generator {g.id}: segment costs must be nondecreasing")
        if g.min_up < 1 or g.min_down < 1:
            raise ValidationError(f"generator {g.id}: min up/down must be >= 1")
        if any(s.capacity < 0 for s in g.segments):
            raise ValidationError(f"generator {g.id}: negative segment capacity")
    for label, series in (("load", sys.demand), ("ren", sys.renewables)):
        for bus, arr in series.items():
            if bus not in known:
                raise ValidationError(f"{label} series for unknown bus {bus!r}")
            if arr.ndim != 2 or arr.shape[1] != 24:
                raise ValidationError(
                    f"{label} series for bus {bus}: expected (days, 24) shape")
            if np.any(arr < 0):
                raise ValidationError(f"{label} series for bus {bus}: negative value")
    shapes = {a.shape[0] for a in sys.demand.values()} | \
             {a.shape[0] for a in sys.renewables.values()}
    if len(shapes) > 1:
        raise ValidationError(f"time series disagree on day count: {sorted(shapes)}")


# -- CSV ingestion ----------------------------------------------------------

def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        raise ValidationError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _fnum(row, key, path, lineno, default=None):
    raw = (row.get(key) or "").strip()
    if raw == "":
        if default is not None:
            return default
        raise ValidationError(f"{path}:{lineno}: missing value for {key!r}")
    try:
        return float(raw)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: bad number {raw!r} for {key!r}")


def load_system(directory, storage: StorageSpec | None = None) -> PowerSystem:
    """Load and validate a PowerSystem from a directory of CSV files."""
    d = Path(directory)
    buses = []
    for i, row in enumerate(_read_csv(d / "buses.csv"), start=2):
        buses.append(Bus(row["id"].strip(),
                         bool(int(_fnum(row, "candidate_storage", d / "buses.csv", i, 0.0)))))

    lines = []
    lpath = d / "lines.csv"
    for i, row in enumerate(_read_csv(lpath), start=2):
        lines.append(Line(row["id"].strip(), row["from"].strip(), row["to"].strip(),
                          _fnum(row, "reactance_ohm", lpath, i),
                          _fnum(row, "capacity_mw", lpath, i)))

    gens = []
    gpath = d / "generators.csv"
    for i, row in enumerate(_read_csv(gpath), start=2):
        segs = []
        for k in range(1, MAX_SEGMENTS + 1):
            raw = (row.get(f"seg{k}_mw") or "").strip()
            if raw == "":
                continue
            segs.append(Segment(_fnum(row, f"seg{k}_mw", gpath, i),
                                _fnum(row, f"seg{k}_usd_mwh", gpath, i),
                                _fnum(row, f"seg{k}_t_mwh", gpath, i)))
        try:
            gens.append(Generator(
                row["id"].strip(), row["bus"].strip(),
                _fnum(row, "gmin_mw", gpath, i), _fnum(row, "gmax_mw", gpath, i),
                tuple(segs),
                _fnum(row, "cmin_usd_h", gpath, i), _fnum(row, "csu_usd", gpath, i),
                _fnum(row, "emin_t_h", gpath, i), _fnum(row, "esu_t", gpath, i),
                int(_fnum(row, "minup_h", gpath, i)),
                int(_fnum(row, "mindown_h", gpath, i))))
        except ValidationError:
            raise
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"{gpath}:{i}: {exc}")

    tdir = d / "timeseries"
    demand, renew = {}, {}
    if tdir.exists():
        for path in sorted(tdir.glob("*.csv")):
            name = path.stem
            if name.startswith("load_"):
                demand[name[5:]] = _read_series(path)
            elif name.startswith("ren_"):
                renew[name[4:]] = _read_series(path)

    try:
        return PowerSystem(tuple(buses), tuple(lines), tuple(gens),
                           demand, renew, storage or StorageSpec())
    except ValidationError as exc:
        raise ValidationError(f"{d}: {exc}") from exc


def _read_series(path: Path) -> np.ndarray:
    rows = _read_csv(path)
    if len(rows) % 24 != 0:
        raise ValidationError(f"{path}: row count {len(rows)} not a multiple of 24")
    days = len(rows) // 24
    arr = np.zeros((days, 24))
    for i, row in enumerate(rows, start=2):
        day = int(_fnum(row, "day", path, i))
        hour = int(_fnum(row, "hour", path, i))
        if not (0 <= day < days and 0 <= hour < 24):
            raise ValidationError(f"{path}:{i}: day/hour {day},{hour} out of range")
        arr[day, hour] = _fnum(row, "mw", path, i)
    return arr


def save_system(sys: PowerSystem, directory) -> None:
    """Write the system back out in the ingestion schema (exact round trip)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "buses.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "candidate_storage"])
        for b in sys.buses:
            w.writerow([b.id, int(b.candidate_storage)])
    with open(d / "lines.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "from", "to", "reactance_ohm", "capacity_mw"])
        for ln in sys.lines:
            w.writerow([ln.id, ln.from_bus, ln.to_bus,
                        repr(ln.reactance), repr(ln.capacity)])
    with open(d / "generators.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = ["id", "bus", "gmin_mw", "gmax_mw", "cmin_usd_h", "csu_usd",
                "emin_t_h", "esu_t", "minup_h", "mindown_h"]
        for k in range(1, MAX_SEGMENTS + 1):
            head += [f"seg{k}_mw", f"seg{k}_usd_mwh", f"seg{k}_t_mwh"]
        w.writerow(head)
        for g in sys.generators:
            row = [g.id, g.bus, repr(g.g_min), repr(g.g_max), repr(g.cost_min),
                   repr(g.cost_startup), repr(g.emis_min), repr(g.emis_startup),
                   g.min_up, g.min_down]
            for k in range(MAX_SEGMENTS):
                if k < len(g.segments):
                    s = g.segments[k]
                    row += [repr(s.capacity), repr(s.cost), repr(s.emissions)]
                else:
                    row += ["", "", ""]
            w.writerow(row)
    tdir = d / "timeseries"
    tdir.mkdir(exist_ok=True)
    for prefix, series in (("load", sys.demand), ("ren", sys.renewables)):
        for bus, arr in series.items():
            with open(tdir / f"{prefix}_{bus}.csv", "w", newline="",
                      encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["day", "hour", "mw"])
                for day in range(arr.shape[0]):
                    for hour in range(24):
                        w.writerow([day, hour, repr(float(arr[day, hour]))])


def scale_renewables(sys: PowerSystem, target_penetration: float) -> PowerSystem:
    """Scale all renewable series so annual renewable energy / annual demand
    energy equals the target (proportional across buses and hours)."""
    if not 0 < target_penetration <= 1:
        raise ValidationError("target penetration must be in (0, 1]")
    current = sys.renewable_penetration()
    if current == 0:
        raise ValidationError("cannot scale all-zero renewable profiles")
    factor = target_penetration / current
    renew = {b: np.array(a) * factor for b, a in sys.renewables.items()}
    return PowerSystem(sys.buses, sys.lines, sys.generators,
                       {b: np.array(a) for b, a in sys.demand.items()},
                       renew, sys.storage)
