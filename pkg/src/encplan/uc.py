"""Transmission-constrained unit commitment over representative days.

Builds the operator's MILP: commitment logic with cyclic minimum up/down
windows, piecewise-linear generator segments, storage state-of-charge with
cyclic wrap, DC power flow, nodal balance with a load-shed slack, renewable
spill, and the per-day emissions-neutrality constraint (ENC).  The same
builder also emits the investment variant with integer storage-unit counts
per candidate bus (used by the VIU problem and the siting lower level).

Objective bookkeeping keeps operating-cost, shed and emissions terms
separate per day, so the carbon price can be (re)applied idempotently and
per-day emissions recovered exactly from any primal point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .milp import (MilpModel, solve_lp, solve_milp, audit_point,
                   LE, GE, EQ, BINARY, INTEGER, CONTINUOUS)
from .system_model import PowerSystem, EconomicParams, ValidationError

FEAS_AUDIT_TOL = 1e-6
DEFAULT_GAP = 1e-3   # 0.1% optimality gap per solve


@dataclass(frozen=True)
class StorageAllocation:
    """Integer storage-unit counts per bus (zero elsewhere)."""
    units_per_bus: dict

    def __post_init__(self):
        for bus, n in self.units_per_bus.items():
            if n < 0 or n != int(n):
                raise ValidationError(f"allocation at {bus} must be a nonneg integer")

    @staticmethod
    def empty() -> "StorageAllocation":
        return StorageAllocation({})

    def units(self, bus) -> int:
        return int(self.units_per_bus.get(bus, 0))

    @property
    def total_units(self) -> int:
        return int(sum(self.units_per_bus.values()))

    def power_mw(self, bus, spec) -> float:
        return self.units(bus) * spec.unit_power

    def energy_mwh(self, bus, spec) -> float:
        return self.units(bus) * spec.unit_energy

    def total_power_mw(self, spec) -> float:
        return self.total_units * spec.unit_power

    def validate_on(self, system: PowerSystem):
        cand = set(system.candidate_buses)
        for bus, n in self.units_per_bus.items():
            if n > 0 and bus not in cand:
                raise ValidationError(f"storage at non-candidate bus {bus}")

    def as_sorted_items(self):
        return tuple(sorted((b, int(n)) for b, n in self.units_per_bus.items() if n))


def battery_cost(alloc: StorageAllocation, spec) -> float:
    """Annualized storage investment cost for an allocation."""
    return sum(spec.cost_energy * alloc.energy_mwh(b, spec)
               + spec.cost_power * alloc.power_mw(b, spec)
               for b in alloc.units_per_bus)


@dataclass
class UcModel:
    """A built UC/investment MILP plus the index arrays to read it back."""
    milp: MilpModel
    system: PowerSystem
    profiles: list           # DailyProfile per representative day
    probs: np.ndarray        # probability per day
    econ: EconomicParams
    alloc: StorageAllocation | None
    invest: bool
    enc_baselines: list | None
    enc_mode: str
    annualize: bool
    carbon_price: float
    # variable ids
    u: list = field(default_factory=list)     # [a][i] -> (T,) ids
    v: list = field(default_factory=list)
    z: list = field(default_factory=list)
    g: list = field(default_factory=list)     # [a][i][s] -> (T,) ids
    f: list = field(default_factory=list)     # [a][l] -> (T,) ids
    theta: list = field(default_factory=list)  # [a][b] -> (T,) ids
    soc: list = field(default_factory=list)    # [a][bus] -> (T,) ids (dict)
    chg: list = field(default_factory=list)
    dis: list = field(default_factory=list)
    spill: list = field(default_factory=list)  # [a][bus] -> (T,) ids (dict)
    shed: list = field(default_factory=list)
    nunits: dict = field(default_factory=dict)  # bus -> var id (invest mode)
    balance_rows: list = field(default_factory=list)  # [a][b] -> (T,) row ids
    enc_rows: list = field(default_factory=list)
    # objective pieces: per-day lists of (var, coeff)
    cost_terms: list = field(default_factory=list)
    shed_terms: list = field(default_factory=list)
    emis_terms: list = field(default_factory=list)
    batt_terms: list = field(default_factory=list)  # (var, coeff), unweighted

    @property
    def horizon(self) -> int:
        return self.profiles[0].horizon

    @property
    def num_days(self) -> int:
        return len(self.profiles)

    def day_weight(self, a: int) -> float:
        w = float(self.probs[a])
        if self.annualize:
            w *= self.econ.days_per_year
        return w

    def storage_buses(self, a: int) -> list:
        return sorted(self.soc[a])

    def commitment_hint(self) -> dict:
        """All units on all hours, storage units parked: always feasible."""
        hint = {}
        for a in range(self.num_days):
            for i in range(len(self.system.generators)):
                for t in range(self.horizon):
                    hint[int(self.u[a][i][t])] = 1
                    hint[int(self.v[a][i][t])] = 0
                    hint[int(self.z[a][i][t])] = 0
        if self.invest:
            total = getattr(self, "_fixed_total_units", None)
            remaining = 0 if total is None else int(total)
            for bus in sorted(self.nunits):
                j = self.nunits[bus]
                cap = int(self.milp.variables[j].ub)
                take = min(cap, remaining)
                hint[int(j)] = take
                remaining -= take
        return hint


def build_uc(system: PowerSystem, rep_days, econ: EconomicParams,
             alloc: StorageAllocation | None = None,
             enc_baselines=None, enc_mode: str = "daily",
             annualize: bool = False) -> UcModel:
    """UC MILP with a fixed storage allocation (possibly empty)."""
    alloc = alloc or StorageAllocation.empty()
    alloc.validate_on(system)
    return _build(system, rep_days, econ, alloc=alloc, invest=False,
                  enc_baselines=enc_baselines, enc_mode=enc_mode,
                  annualize=annualize)


def build_investment(system: PowerSystem, rep_days, econ: EconomicParams,
                     unit_cap: int | None = None, total_units: int | None = None,
                     enc_baselines=None, enc_mode: str = "daily") -> UcModel:
    """Investment MILP: integer storage units on candidate buses.

    With total_units fixed this is the siting lower level of the heuristic;
    without it, the vertically-integrated utility problem.  Objective is
    annualized (battery cost + days_per_year * expected daily op cost).
    """
    if not system.candidate_buses:
        raise ValidationError("no candidate storage buses")
    return _build(system, rep_days, econ, alloc=None, invest=True,
                  unit_cap=unit_cap, total_units=total_units,
                  enc_baselines=enc_baselines, enc_mode=enc_mode,
                  annualize=True)


def _rep_profiles(rep_days):
    """Accept RepresentativeDay-likes (profile/probability) or (profile, pi)."""
    profiles, probs = [], []
    for rd in rep_days:
        if hasattr(rd, "profile"):
            profiles.append(rd.profile)
            probs.append(rd.probability)
        else:
            p, w = rd
            profiles.append(p)
            probs.append(w)
    probs = np.asarray(probs, dtype=float)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValidationError(f"day probabilities sum to {probs.sum()}, not 1")
    return profiles, probs


def default_unit_cap(system: PowerSystem) -> int:
    """Per-bus integer cap that cannot cut off a useful optimum: enough
    power to cover the system peak single-handedly."""
    peak = 0.0
    for d in range(system.num_days):
        tot = np.zeros(24)
        for b in system.demand:
            tot += system.demand[b][d]
        peak = max(peak, float(tot.max()))
    return max(1, int(math.ceil(peak / system.storage.unit_power)))


def _build(system, rep_days, econ, *, alloc, invest, unit_cap=None,
           total_units=None, enc_baselines=None, enc_mode="daily",
           annualize=False) -> UcModel:
    profiles, probs = _rep_profiles(rep_days)
    T = profiles[0].horizon
    for p in profiles:
        if p.horizon != T:
            raise ValidationError("representative days disagree on horizon")
    if enc_baselines is not None and len(enc_baselines) != len(profiles):
        raise ValidationError("need one ENC baseline per representative day")
    if enc_mode not in ("daily", "aggregate"):
        raise ValidationError(f"bad enc_mode {enc_mode!r}")

    spec = system.storage
    gens = system.generators
    buses = system.bus_ids
    ref_bus = min(buses)
    m = MilpModel("uc")
    ucm = UcModel(m, system, profiles, probs, econ, alloc, invest,
                  list(enc_baselines) if enc_baselines is not None else None,
                  enc_mode, annualize, econ.carbon_price)
    ucm._fixed_total_units = total_units

    if invest:
        cap = unit_cap if unit_cap is not None else default_unit_cap(system)
        for bus in system.candidate_buses:
            ucm.nunits[bus] = m.add_var(f"units[{bus}]", INTEGER, 0, cap)
        if total_units is not None:
            m.add_row({j: 1.0 for j in ucm.nunits.values()}, EQ,
                      float(total_units), "total_units")
        for bus, j in sorted(ucm.nunits.items()):
            ucm.batt_terms.append((j, spec.cost_energy * spec.unit_energy
                                   + spec.cost_power * spec.unit_power))

    def storage_bus_list(a):
        if invest:
            return sorted(ucm.nunits)
        return sorted(b for b in alloc.units_per_bus if alloc.units(b) > 0)

    for a, prof in enumerate(profiles):
        ua, va, za, ga = [], [], [], []
        cost_a, shed_a, emis_a = [], [], []
        # commitment variables
        for i, gen in enumerate(gens):
            if gen.commitment_free:
                uu = [m.add_var(f"u[{a},{gen.id},{t}]", BINARY, 1, 1) for t in range(T)]
                vv = [m.add_var(f"v[{a},{gen.id},{t}]", BINARY, 0, 0) for t in range(T)]
                zz = [m.add_var(f"z[{a},{gen.id},{t}]", BINARY, 0, 0) for t in range(T)]
            else:
                uu = [m.add_var(f"u[{a},{gen.id},{t}]", BINARY) for t in range(T)]
                vv = [m.add_var(f"v[{a},{gen.id},{t}]", BINARY) for t in range(T)]
                zz = [m.add_var(f"z[{a},{gen.id},{t}]", BINARY) for t in range(T)]
            ua.append(np.array(uu))
            va.append(np.array(vv))
            za.append(np.array(zz))
            segs = []
            for s, seg in enumerate(gen.segments):
                gg = [m.add_var(f"g[{a},{gen.id},{s},{t}]", CONTINUOUS, 0, seg.capacity)
                      for t in range(T)]
                segs.append(np.array(gg))
            ga.append(segs)
            for t in range(T):
                cost_a.append((uu[t], gen.cost_min))
                cost_a.append((vv[t], gen.cost_startup))
                emis_a.append((uu[t], gen.emis_min))
                emis_a.append((vv[t], gen.emis_startup))
                for s, seg in enumerate(gen.segments):
                    cost_a.append((int(segs[s][t]), seg.cost))
                    emis_a.append((int(segs[s][t]), seg.emissions))
        ucm.u.append(ua)
        ucm.v.append(va)
        ucm.z.append(za)
        ucm.g.append(ga)

        # commitment logic and cyclic min up/down windows; commitment-free
        # units have u=1, v=z=0 pinned, so their logic rows hold identically
        # and their segment caps reduce to the variable bounds set above
        for i, gen in enumerate(gens):
            if gen.commitment_free:
                continue
            for t in range(T):
                tp = (t - 1) % T
                m.add_row({int(va[i][t]): 1.0, int(za[i][t]): -1.0,
                           int(ua[i][t]): -1.0, int(ua[i][tp]): 1.0},
                          EQ, 0.0, f"commit[{a},{gen.id},{t}]")
            up_w = min(gen.min_up, T)
            dn_w = min(gen.min_down, T)
            for t in range(T):
                window = [int(va[i][(t - k) % T]) for k in range(up_w)]
                coeffs = {}
                for j in window:
                    coeffs[j] = coeffs.get(j, 0.0) + 1.0
                coeffs[int(ua[i][t])] = coeffs.get(int(ua[i][t]), 0.0) - 1.0
                m.add_row(coeffs, LE, 0.0, f"minup[{a},{gen.id},{t}]")
                window = [int(za[i][(t - k) % T]) for k in range(dn_w)]
                coeffs = {}
                for j in window:
                    coeffs[j] = coeffs.get(j, 0.0) + 1.0
                coeffs[int(ua[i][t])] = coeffs.get(int(ua[i][t]), 0.0) + 1.0
                m.add_row(coeffs, LE, 1.0, f"mindown[{a},{gen.id},{t}]")
            # segment caps tied to commitment
            for s, seg in enumerate(gen.segments):
                for t in range(T):
                    m.add_row({int(ga[i][s][t]): 1.0,
                               int(ua[i][t]): -seg.capacity},
                              LE, 0.0, f"segcap[{a},{gen.id},{s},{t}]")

        # storage
        sbuses = storage_bus_list(a)
        soc_a, chg_a, dis_a = {}, {}, {}
        eta = spec.efficiency
        for bus in sbuses:
            if invest:
                e_cap = m.variables[ucm.nunits[bus]].ub * spec.unit_energy
                p_cap = m.variables[ucm.nunits[bus]].ub * spec.unit_power
            else:
                e_cap = alloc.energy_mwh(bus, spec)
                p_cap = alloc.power_mw(bus, spec)
            qq = np.array([m.add_var(f"soc[{a},{bus},{t}]", CONTINUOUS, 0, e_cap)
                           for t in range(T)])
            cc = np.array([m.add_var(f"chg[{a},{bus},{t}]", CONTINUOUS, 0, p_cap)
                           for t in range(T)])
            dd = np.array([m.add_var(f"dis[{a},{bus},{t}]", CONTINUOUS, 0, p_cap)
                           for t in range(T)])
            soc_a[bus], chg_a[bus], dis_a[bus] = qq, cc, dd
            for t in range(T):
                tp = (t - 1) % T
                m.add_row({int(qq[t]): 1.0, int(qq[tp]): -1.0,
                           int(cc[t]): -eta, int(dd[t]): 1.0 / eta},
                          EQ, 0.0, f"soc[{a},{bus},{t}]")
            if invest:
                nj = ucm.nunits[bus]
                for t in range(T):
                    m.add_row({int(qq[t]): 1.0, nj: -spec.unit_energy}, LE, 0.0,
                              f"soccap[{a},{bus},{t}]")
                    m.add_row({int(cc[t]): 1.0, nj: -spec.unit_power}, LE, 0.0,
                              f"chgcap[{a},{bus},{t}]")
                    m.add_row({int(dd[t]): 1.0, nj: -spec.unit_power}, LE, 0.0,
                              f"discap[{a},{bus},{t}]")
        ucm.soc.append(soc_a)
        ucm.chg.append(chg_a)
        ucm.dis.append(dis_a)

        # network
        fa = []
        for l, ln in enumerate(system.lines):
            ff = np.array([m.add_var(f"flow[{a},{ln.id},{t}]", CONTINUOUS,
                                     -ln.capacity, ln.capacity)
                           for t in range(T)])
            fa.append(ff)
        ucm.f.append(fa)
        ta = []
        for b, bus in enumerate(buses):
            if bus == ref_bus:
                th = np.array([m.add_var(f"theta[{a},{bus},{t}]", CONTINUOUS, 0, 0)
                               for t in range(T)])
            else:
                th = np.array([m.add_var(f"theta[{a},{bus},{t}]", CONTINUOUS,
                                         -math.inf, math.inf)
                               for t in range(T)])
            ta.append(th)
        ucm.theta.append(ta)
        bus_pos = {bus: k for k, bus in enumerate(buses)}
        for l, ln in enumerate(system.lines):
            y = ln.admittance
            for t in range(T):
                m.add_row({int(fa[l][t]): 1.0,
                           int(ta[bus_pos[ln.from_bus]][t]): -y,
                           int(ta[bus_pos[ln.to_bus]][t]): y},
                          EQ, 0.0, f"flowdef[{a},{ln.id},{t}]")

        # spill and shed slacks
        spill_a, shed_a_map = {}, {}
        for bus in buses:
            w = prof.renewables.get(bus)
            if w is not None and np.any(w > 0):
                ss = np.array([m.add_var(f"spill[{a},{bus},{t}]", CONTINUOUS,
                                         0, float(w[t])) for t in range(T)])
                spill_a[bus] = ss
                for t in range(T):
                    shed_a.append((int(ss[t]), econ.ren_shed_price))
            d = prof.demand.get(bus)
            if d is not None and np.any(d > 0):
                sl = np.array([m.add_var(f"shed[{a},{bus},{t}]", CONTINUOUS,
                                         0, float(d[t])) for t in range(T)])
                shed_a_map[bus] = sl
                for t in range(T):
                    shed_a.append((int(sl[t]), econ.load_shed_price))
        ucm.spill.append(spill_a)
        ucm.shed.append(shed_a_map)

        # nodal balance
        rows_a = []
        for b, bus in enumerate(buses):
            ids = np.empty(T, dtype=np.int64)
            d = prof.demand.get(bus)
            w = prof.renewables.get(bus)
            for t in range(T):
                coeffs = {}
                for i, gen in enumerate(gens):
                    if gen.bus != bus:
                        continue
                    if gen.g_min:
                        coeffs[int(ua[i][t])] = coeffs.get(int(ua[i][t]), 0.0) + gen.g_min
                    for s in range(len(gen.segments)):
                        coeffs[int(ga[i][s][t])] = 1.0
                if bus in dis_a:
                    coeffs[int(dis_a[bus][t])] = 1.0
                    coeffs[int(chg_a[bus][t])] = -1.0
                for l, ln in enumerate(system.lines):
                    if ln.from_bus == bus:
                        coeffs[int(fa[l][t])] = coeffs.get(int(fa[l][t]), 0.0) - 1.0
                    elif ln.to_bus == bus:
                        coeffs[int(fa[l][t])] = coeffs.get(int(fa[l][t]), 0.0) + 1.0
                if bus in spill_a:
                    coeffs[int(spill_a[bus][t])] = -1.0
                if bus in shed_a_map:
                    coeffs[int(shed_a_map[bus][t])] = 1.0
                rhs = float(d[t] if d is not None else 0.0) \
                    - float(w[t] if w is not None else 0.0)
                ids[t] = m.add_row(coeffs, EQ, rhs, f"balance[{a},{bus},{t}]")
            rows_a.append(ids)
        ucm.balance_rows.append(rows_a)
        ucm.cost_terms.append(cost_a)
        ucm.shed_terms.append(shed_a)
        ucm.emis_terms.append(emis_a)

    # ENC rows
    if enc_baselines is not None:
        chi = econ.enc_multiplier
        if enc_mode == "daily":
            for a in range(len(profiles)):
                coeffs = {}
                for j, c in ucm.emis_terms[a]:
                    coeffs[j] = coeffs.get(j, 0.0) + c
                rid = m.add_row(coeffs, LE, chi * float(enc_baselines[a]), f"enc[{a}]")
                ucm.enc_rows.append(rid)
        else:
            coeffs = {}
            rhs = 0.0
            for a in range(len(profiles)):
                for j, c in ucm.emis_terms[a]:
                    coeffs[j] = coeffs.get(j, 0.0) + probs[a] * c
                rhs += probs[a] * float(enc_baselines[a])
            rid = m.add_row(coeffs, LE, chi * rhs, "enc[aggregate]")
            ucm.enc_rows.append(rid)

    _set_objective(ucm)
    return ucm


def _set_objective(ucm: UcModel) -> None:
    obj: dict[int, float] = {}

    def acc(j, c):
        if c:
            obj[j] = obj.get(j, 0.0) + c

    for a in range(ucm.num_days):
        w = ucm.day_weight(a)
        for j, c in ucm.cost_terms[a]:
            acc(j, w * c)
        for j, c in ucm.shed_terms[a]:
            acc(j, w * c)
        if ucm.carbon_price:
            for j, c in ucm.emis_terms[a]:
                acc(j, w * ucm.carbon_price * c)
    for j, c in ucm.batt_terms:
        acc(j, c)
    ucm.milp.set_obj_vector(obj)


def apply_carbon_price(ucm: UcModel, price: float) -> UcModel:
    """Re-price the objective with a carbon charge on every emissions term.

    Replaces (never accumulates): applying twice equals applying once.
    """
    if price < 0:
        raise ValidationError("carbon price must be >= 0")
    ucm.carbon_price = float(price)
    _set_objective(ucm)
    return ucm


# -- solving and extraction ---------------------------------------------------


@dataclass
class DispatchSolution:
    """Solved commitment/dispatch with prices and per-day accounting."""
    x: np.ndarray
    objective: float                  # model objective (day-expected or annual)
    u: list; v: list; z: list         # [a] -> (I, T) int arrays
    gen_power: list                   # [a] -> (I, T) MW incl. minimum output
    seg_power: list                   # [a][i][s] -> (T,) MW
    flows: list                       # [a] -> (L, T) MW
    soc: list; charge: list; discharge: list   # [a] -> {bus: (T,)}
    spill: list; shed: list           # [a] -> {bus: (T,)}
    lmps: list | None                 # [a] -> (B, T) $/MWh
    emissions_by_day: list            # tons per day
    gen_cost_by_day: list             # $ per day (commitment + energy)
    shed_cost_by_day: list            # $ per day
    total_emissions: float            # probability-weighted tons/day
    expected_gen_cost: float          # probability-weighted $/day
    units: StorageAllocation | None   # resolved allocation (invest mode)
    milp_gap: float
    milp_bound: float
    node_count: int

    def lmp(self, a, bus_pos, t) -> float:
        return float(self.lmps[a][bus_pos][t])


def solve_uc(ucm: UcModel, gap_target: float = DEFAULT_GAP,
             time_limit=None, node_limit=None, with_lmps: bool = True,
             audit: bool = True) -> DispatchSolution:
    """Solve the model to gap and assemble the dispatch solution."""
    res = solve_milp(ucm.milp, gap_target=gap_target, time_limit=time_limit,
                     node_limit=node_limit, hints=[ucm.commitment_hint()])
    if res.x is None:
        raise RuntimeError(f"UC solve failed: status={res.status}")
    return extract_solution(ucm, res, with_lmps=with_lmps, audit=audit)


def extract_solution(ucm: UcModel, res, with_lmps=True, audit=True) -> DispatchSolution:
    x = res.x
    sol = _assemble(ucm, x, res)
    if with_lmps:
        sol.lmps = extract_lmps(ucm, x)
    if audit:
        worst, viol = audit_dispatch(ucm, sol)
        if viol:
            raise RuntimeError(f"dispatch audit failed (worst {worst:.2e}): {viol[:4]}")
    return sol


def _assemble(ucm: UcModel, x: np.ndarray, res) -> DispatchSolution:
    T = ucm.horizon
    gens = ucm.system.generators
    nI = len(gens)
    u_, v_, z_, gp, sp, fl, so, ch, di, spl, shd = [], [], [], [], [], [], [], [], [], [], []
    emis, gcost, scost = [], [], []
    for a in range(ucm.num_days):
        u_.append(np.array([[round(x[j]) for j in ucm.u[a][i]] for i in range(nI)], dtype=int))
        v_.append(np.array([[round(x[j]) for j in ucm.v[a][i]] for i in range(nI)], dtype=int))
        z_.append(np.array([[round(x[j]) for j in ucm.z[a][i]] for i in range(nI)], dtype=int))
        segs = [[x[ucm.g[a][i][s]].copy() for s in range(len(gens[i].segments))]
                for i in range(nI)]
        sp.append(segs)
        gp.append(np.array([gens[i].g_min * u_[a][i]
                            + (np.sum(segs[i], axis=0) if segs[i] else np.zeros(T))
                            for i in range(nI)]))
        fl.append(np.array([x[ucm.f[a][l]] for l in range(len(ucm.system.lines))]))
        so.append({b: x[ids].copy() for b, ids in ucm.soc[a].items()})
        ch.append({b: x[ids].copy() for b, ids in ucm.chg[a].items()})
        di.append({b: x[ids].copy() for b, ids in ucm.dis[a].items()})
        spl.append({b: x[ids].copy() for b, ids in ucm.spill[a].items()})
        shd.append({b: x[ids].copy() for b, ids in ucm.shed[a].items()})
        emis.append(float(sum(c * x[j] for j, c in ucm.emis_terms[a])))
        gcost.append(float(sum(c * x[j] for j, c in ucm.cost_terms[a])))
        scost.append(float(sum(c * x[j] for j, c in ucm.shed_terms[a])))
    units = None
    if ucm.invest:
        units = StorageAllocation({b: int(round(x[j]))
                                   for b, j in ucm.nunits.items()})
    return DispatchSolution(
        x=x, objective=res.objective,
        u=u_, v=v_, z=z_, gen_power=gp, seg_power=sp, flows=fl,
        soc=so, charge=ch, discharge=di, spill=spl, shed=shd, lmps=None,
        emissions_by_day=emis, gen_cost_by_day=gcost, shed_cost_by_day=scost,
        total_emissions=float(np.dot(ucm.probs, emis)),
        expected_gen_cost=float(np.dot(ucm.probs, gcost)),
        units=units, milp_gap=getattr(res, "gap", 0.0),
        milp_bound=getattr(res, "bound", res.objective),
        node_count=getattr(res, "node_count", 0))


def extract_lmps(ucm: UcModel, x: np.ndarray) -> list:
    """Fix every integer variable at its solved value, re-solve the LP, and
    read nodal prices off the balance-row duals (converted to $/MWh)."""
    fixed = ucm.milp.copy()
    for j in fixed.integer_indices():
        fixed.fix_var(j, round(float(x[j])))
    lp = solve_lp(fixed)
    if lp.status != "optimal":
        raise RuntimeError(f"LMP extraction LP came back {lp.status}; "
                           "solver tolerance mismatch")
    lmps = []
    for a in range(ucm.num_days):
        w = ucm.day_weight(a)
        grid = np.zeros((len(ucm.system.buses), ucm.horizon))
        for b in range(len(ucm.system.buses)):
            grid[b] = lp.duals[ucm.balance_rows[a][b]] / w
        lmps.append(grid)
    return lmps


def fixed_commitment_lp(ucm: UcModel, x: np.ndarray):
    """The LP left after pinning integers at their solved values."""
    fixed = ucm.milp.copy()
    for j in fixed.integer_indices():
        fixed.fix_var(j, round(float(x[j])))
    return fixed


def compute_baseline(system: PowerSystem, rep_days, econ: EconomicParams,
                     gap_target: float = DEFAULT_GAP, **solve_kw):
    """No-storage solve with the ENC off: per-day emissions plus the solution."""
    ucm = build_uc(system, rep_days, econ, StorageAllocation.empty())
    sol = solve_uc(ucm, gap_target=gap_target, **solve_kw)
    return sol.emissions_by_day, sol, ucm


# -- audits -------------------------------------------------------------------


def audit_dispatch(ucm: UcModel, sol: DispatchSolution, tol: float = FEAS_AUDIT_TOL):
    """Independent re-check of a dispatch point: every constraint row, bound,
    integrality, per-day emissions accounting, cyclic SOC identity, energy
    conservation, and commitment logic."""
    worst, viol = audit_point(ucm.milp, sol.x, tol)

    eta = ucm.system.storage.efficiency
    for a in range(ucm.num_days):
        # recomputed emissions match stored values
        e = float(sum(c * sol.x[j] for j, c in ucm.emis_terms[a]))
        if abs(e - sol.emissions_by_day[a]) > tol * (1 + abs(e)):
            viol.append(("emissions_recompute", f"day{a}", abs(e - sol.emissions_by_day[a])))
        # cyclic SOC: Q_0 == Q_{T-1} + eta*chg_0 - dis_0/eta (linear identity)
        for bus, q in sol.soc[a].items():
            lhs = q[0]
            rhs = q[-1] + eta * sol.charge[a][bus][0] - sol.discharge[a][bus][0] / eta
            gap = abs(lhs - rhs)
            worst = max(worst, gap)
            if gap > tol:
                viol.append(("cyclic_soc", f"{a}:{bus}", gap))
        # energy conservation summed over buses (flows cancel)
        gen = float(sol.gen_power[a].sum())
        dis = float(sum(arr.sum() for arr in sol.discharge[a].values()))
        chg = float(sum(arr.sum() for arr in sol.charge[a].values()))
        spill = float(sum(arr.sum() for arr in sol.spill[a].values()))
        shed = float(sum(arr.sum() for arr in sol.shed[a].values()))
        dem = sum(float(np.sum(ucm.profiles[a].demand[b]))
                  for b in ucm.profiles[a].demand)
        ren = sum(float(np.sum(ucm.profiles[a].renewables[b]))
                  for b in ucm.profiles[a].renewables)
        bal = gen + dis + (ren - spill) + shed - dem - chg
        worst = max(worst, abs(bal))
        if abs(bal) > tol * (1 + dem):
            viol.append(("energy_conservation", f"day{a}", abs(bal)))
        # commitment logic: v, z binary with no simultaneous start+stop
        both = (sol.v[a] * sol.z[a]).max(initial=0)
        if both > 0:
            viol.append(("startstop_overlap", f"day{a}", float(both)))
    return worst, viol


def audit_enc(ucm: UcModel, sol: DispatchSolution, tol: float = FEAS_AUDIT_TOL):
    """Check per-day emissions against the ENC baselines (daily mode)."""
    if ucm.enc_baselines is None:
        return []
    chi = ucm.econ.enc_multiplier
    out = []
    if ucm.enc_mode == "daily":
        for a in range(ucm.num_days):
            excess = sol.emissions_by_day[a] - chi * ucm.enc_baselines[a]
            out.append(excess <= tol)
    else:
        agg = float(np.dot(ucm.probs, sol.emissions_by_day))
        cap = chi * float(np.dot(ucm.probs, ucm.enc_baselines))
        out.append(agg - cap <= tol)
    return out


def simultaneous_chg_dis_hours(sol: DispatchSolution, tol: float = 1e-6) -> list:
    """Hours where a bus both charges and discharges (legal but flagged)."""
    hits = []
    for a in range(len(sol.charge)):
        for bus in sol.charge[a]:
            mask = (sol.charge[a][bus] > tol) & (sol.discharge[a][bus] > tol)
            for t in np.where(mask)[0]:
                hits.append((a, bus, int(t)))
    return hits
