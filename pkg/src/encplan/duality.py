"""Economic-dispatch duality: the fixed-commitment dispatch LP (TCED), its
machine-derived dual, the profit identity through complementary slackness,
big-M bounds with an activation audit, and the profit-constrained
single-level MILP relaxation of the philanthropic investment problem.

Sign conventions.  The engine's row duals y satisfy y_i >= 0 for >= rows,
y_i <= 0 for <= rows (minimization).  The published dual rows use the same
lambda but flip the state-of-charge dual (kappa) and the flow-definition
dual (beta), and write the emissions dual alpha as -y of the ENC row.  All
extraction here converts to that convention, and the construction in
build_dual_tced is mechanical (from the primal matrix), so the printed rows
can be tested against it rather than transcribed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .milp import (MilpModel, solve_lp, solve_milp, audit_point,
                   LE, GE, EQ, BINARY, INTEGER, CONTINUOUS)
from .system_model import PowerSystem, EconomicParams, DailyProfile, ValidationError
from .uc import StorageAllocation, UcModel, DispatchSolution, battery_cost

DUALITY_TOL = 1e-7


# ---------------------------------------------------------------------------
# TCED primal (single day, fixed commitment, capacities as variable bounds)
# ---------------------------------------------------------------------------


@dataclass
class TcedModel:
    milp: MilpModel
    system: PowerSystem
    profile: DailyProfile
    econ: EconomicParams
    alloc: StorageAllocation
    u: np.ndarray              # (I, T) fixed commitment
    v: np.ndarray
    z: np.ndarray
    constant: float            # committed cost excluded from the LP objective
    committed_emissions: float
    enc_cap: float | None      # rhs of the ENC row (None = ENC off)
    g: list = field(default_factory=list)        # [i][s] -> (T,) ids
    spill: dict = field(default_factory=dict)    # bus -> (T,) ids
    shed: dict = field(default_factory=dict)
    soc: dict = field(default_factory=dict)
    chg: dict = field(default_factory=dict)
    dis: dict = field(default_factory=dict)
    f: list = field(default_factory=list)        # [l] -> (T,) ids
    theta: list = field(default_factory=list)
    soc_rows: dict = field(default_factory=dict)
    balance_rows: list = field(default_factory=list)   # [b] -> (T,) ids
    flowdef_rows: list = field(default_factory=list)
    enc_row: int | None = None

    @property
    def horizon(self):
        return self.profile.horizon


def build_tced(system: PowerSystem, profile: DailyProfile, econ: EconomicParams,
               alloc: StorageAllocation, commitment,
               enc_baseline: float | None = None) -> TcedModel:
    """Dispatch LP for one day at a fixed commitment.

    Every capacity limit that the dual assigns a multiplier to is a variable
    bound here (segment caps become [0, cap*u_t] once u is data), so the
    machine dual produces exactly one dual variable per published multiplier.
    """
    u, v, z = (np.asarray(c, dtype=int) for c in commitment)
    T = profile.horizon
    gens = system.generators
    spec = system.storage
    m = MilpModel("tced")

    constant = 0.0
    committed_emis = 0.0
    for i, gen in enumerate(gens):
        constant += gen.cost_min * u[i].sum() + gen.cost_startup * v[i].sum()
        committed_emis += gen.emis_min * u[i].sum() + gen.emis_startup * v[i].sum()
    constant += econ.carbon_price * committed_emis

    tm = TcedModel(m, system, profile, econ, alloc, u, v, z, constant,
                   committed_emis,
                   None if enc_baseline is None else
                   econ.enc_multiplier * enc_baseline - committed_emis)

    for i, gen in enumerate(gens):
        segs = []
        for s, seg in enumerate(gen.segments):
            ids = np.array([m.add_var(f"g[{gen.id},{s},{t}]", CONTINUOUS,
                                      0.0, seg.capacity * u[i, t])
                            for t in range(T)])
            segs.append(ids)
            for t in range(T):
                m.add_obj(int(ids[t]), seg.cost + econ.carbon_price * seg.emissions)
        tm.g.append(segs)

    sbuses = sorted(b for b in alloc.units_per_bus if alloc.units(b) > 0)
    eta = spec.efficiency
    for bus in sbuses:
        e_cap = alloc.energy_mwh(bus, spec)
        p_cap = alloc.power_mw(bus, spec)
        tm.soc[bus] = np.array([m.add_var(f"soc[{bus},{t}]", CONTINUOUS, 0, e_cap)
                                for t in range(T)])
        tm.chg[bus] = np.array([m.add_var(f"chg[{bus},{t}]", CONTINUOUS, 0, p_cap)
                                for t in range(T)])
        tm.dis[bus] = np.array([m.add_var(f"dis[{bus},{t}]", CONTINUOUS, 0, p_cap)
                                for t in range(T)])

    for l, ln in enumerate(system.lines):
        tm.f.append(np.array([m.add_var(f"flow[{ln.id},{t}]", CONTINUOUS,
                                        -ln.capacity, ln.capacity)
                              for t in range(T)]))
    buses = system.bus_ids
    ref_bus = min(buses)
    for bus in buses:
        lo, hi = (0.0, 0.0) if bus == ref_bus else (-math.inf, math.inf)
        tm.theta.append(np.array([m.add_var(f"theta[{bus},{t}]", CONTINUOUS, lo, hi)
                                  for t in range(T)]))

    for bus in buses:
        w = profile.renewables.get(bus)
        if w is not None and np.any(w > 0):
            ids = np.array([m.add_var(f"spill[{bus},{t}]", CONTINUOUS, 0, float(w[t]))
                            for t in range(T)])
            tm.spill[bus] = ids
            for t in range(T):
                m.add_obj(int(ids[t]), econ.ren_shed_price)
        d = profile.demand.get(bus)
        if d is not None and np.any(d > 0):
            ids = np.array([m.add_var(f"shed[{bus},{t}]", CONTINUOUS, 0, float(d[t]))
                            for t in range(T)])
            tm.shed[bus] = ids
            for t in range(T):
                m.add_obj(int(ids[t]), econ.load_shed_price)

    for bus in sbuses:
        qq, cc, dd = tm.soc[bus], tm.chg[bus], tm.dis[bus]
        rows = np.empty(T, dtype=np.int64)
        for t in range(T):
            tp = (t - 1) % T
            rows[t] = m.add_row({int(qq[t]): 1.0, int(qq[tp]): -1.0,
                                 int(cc[t]): -eta, int(dd[t]): 1.0 / eta},
                                EQ, 0.0, f"soc[{bus},{t}]")
        tm.soc_rows[bus] = rows

    bus_pos = {b: k for k, b in enumerate(buses)}
    for b, bus in enumerate(buses):
        d = profile.demand.get(bus)
        w = profile.renewables.get(bus)
        ids = np.empty(T, dtype=np.int64)
        for t in range(T):
            coeffs = {}
            rhs = float(d[t] if d is not None else 0.0) \
                - float(w[t] if w is not None else 0.0)
            for i, gen in enumerate(gens):
                if gen.bus != bus:
                    continue
                rhs -= gen.g_min * u[i, t]
                for s in range(len(gen.segments)):
                    coeffs[int(tm.g[i][s][t])] = 1.0
            if bus in tm.dis:
                coeffs[int(tm.dis[bus][t])] = 1.0
                coeffs[int(tm.chg[bus][t])] = -1.0
            for l, ln in enumerate(system.lines):
                if ln.from_bus == bus:
                    coeffs[int(tm.f[l][t])] = coeffs.get(int(tm.f[l][t]), 0.0) - 1.0
                elif ln.to_bus == bus:
                    coeffs[int(tm.f[l][t])] = coeffs.get(int(tm.f[l][t]), 0.0) + 1.0
            if bus in tm.spill:
                coeffs[int(tm.spill[bus][t])] = -1.0
            if bus in tm.shed:
                coeffs[int(tm.shed[bus][t])] = 1.0
            ids[t] = m.add_row(coeffs, EQ, rhs, f"balance[{bus},{t}]")
        tm.balance_rows.append(ids)

    for l, ln in enumerate(system.lines):
        y = ln.admittance
        ids = np.empty(T, dtype=np.int64)
        for t in range(T):
            ids[t] = m.add_row({int(tm.f[l][t]): 1.0,
                                int(tm.theta[bus_pos[ln.from_bus]][t]): -y,
                                int(tm.theta[bus_pos[ln.to_bus]][t]): y},
                               EQ, 0.0, f"flowdef[{ln.id},{t}]")
        tm.flowdef_rows.append(ids)

    if tm.enc_cap is not None:
        coeffs = {}
        for i, gen in enumerate(gens):
            for s, seg in enumerate(gen.segments):
                if seg.emissions:
                    for t in range(T):
                        coeffs[int(tm.g[i][s][t])] = seg.emissions
        tm.enc_row = m.add_row(coeffs, LE, tm.enc_cap, "enc")
    return tm


# ---------------------------------------------------------------------------
# mechanical dualization
# ---------------------------------------------------------------------------


@dataclass
class DualMap:
    row_dual: np.ndarray      # primal row -> dual var id
    lb_dual: np.ndarray       # primal var -> dual var id or -1
    ub_dual: np.ndarray


def dual_of_lp(model: MilpModel):
    """Explicit dual of min c'x, rows, bounds.

    Dual vars: one per row (>=0 for >= rows, >=0 with flipped coefficients
    for <= rows, free for equalities) plus one per finite bound.  The dual is
    returned as a minimization model whose objective equals minus the dual
    objective; solve_lp(dual).objective * -1 is the dual optimum.
    """
    dual = MilpModel(f"dual({model.name})")
    nrows = model.num_rows
    nvars = model.num_vars
    row_dual = np.empty(nrows, dtype=np.int64)
    lb_dual = np.full(nvars, -1, dtype=np.int64)
    ub_dual = np.full(nvars, -1, dtype=np.int64)

    fixed = np.array([v.lb == v.ub for v in model.variables])
    fixed_vals = np.array([v.lb if v.lb == v.ub else 0.0
                           for v in model.variables])

    col_coeffs: list[dict[int, float]] = [dict() for _ in range(nvars)]
    for i, r in enumerate(model.rows):
        tag = r.tag or f"row{i}"
        if r.sense == LE:
            # y <= 0 replaced by w = -y >= 0: coefficients and rhs negate
            w = dual.add_var(f"y[{tag}]", CONTINUOUS, 0.0, math.inf)
            sgn = -1.0
        elif r.sense == GE:
            w = dual.add_var(f"y[{tag}]", CONTINUOUS, 0.0, math.inf)
            sgn = 1.0
        else:
            w = dual.add_var(f"y[{tag}]", CONTINUOUS, -math.inf, math.inf)
            sgn = 1.0
        row_dual[i] = w
        # fixed primal columns are substituted out: they shift the rhs
        rhs = r.rhs - float(np.dot(r.coef, fixed_vals[r.idx]))
        dual.add_obj(w, -sgn * rhs)        # maximize b'y == minimize -b'y
        for j, aij in zip(r.idx, r.coef):
            if not fixed[int(j)]:
                col_coeffs[int(j)][w] = col_coeffs[int(j)].get(w, 0.0) + sgn * float(aij)

    for j, var in enumerate(model.variables):
        if var.lb == var.ub:
            # fixed primal var: its column is unconstrained (free mu-nu pair);
            # equivalently no dual row: the term lb*(mu-nu) folds into b'y via
            # substitution, so treat it as data shifted out of the dual
            continue
        if math.isfinite(var.lb):
            mu = dual.add_var(f"lb[{var.name}]", CONTINUOUS, 0.0, math.inf)
            lb_dual[j] = mu
            dual.add_obj(mu, -var.lb)
            col_coeffs[j][mu] = col_coeffs[j].get(mu, 0.0) + 1.0
        if math.isfinite(var.ub):
            nu = dual.add_var(f"ub[{var.name}]", CONTINUOUS, 0.0, math.inf)
            ub_dual[j] = nu
            dual.add_obj(nu, var.ub)
            col_coeffs[j][nu] = col_coeffs[j].get(nu, 0.0) - 1.0

    cvec = model.objective_vector()
    for j, var in enumerate(model.variables):
        if var.lb == var.ub:
            continue
        dual.add_row(col_coeffs[j], EQ, float(cvec[j]), f"col[{var.name}]")
    return dual, DualMap(row_dual, lb_dual, ub_dual)


def _fixed_column_shift(model: MilpModel) -> float:
    """b'y correction for fixed primal variables folded out of the dual."""
    cvec = model.objective_vector()
    shift = 0.0
    for j, var in enumerate(model.variables):
        if var.lb == var.ub and var.lb != 0.0:
            shift += cvec[j] * var.lb
    return shift


def build_dual_tced(tced: TcedModel):
    """Machine-derived dual LP of the TCED; optimum equals the primal optimum.

    Fixed primal columns (reference-bus angles, zeroed commitments) carry no
    dual row, which is also why the published angle row omits the reference
    bus.  Returns (dual_model, dual_map, objective_shift): the dual optimum
    is -solve_lp(dual).objective + shift.
    """
    dual, dmap = dual_of_lp(tced.milp)
    # fixed vars at nonzero values would need a b'y shift; TCED fixes only at 0
    shift = _fixed_column_shift(tced.milp)
    return dual, dmap, shift


def solve_tced_pair(tced: TcedModel):
    """Solve primal and machine dual; return (primal_lp, dual_lp, dual_obj)."""
    p = solve_lp(tced.milp)
    dual, dmap, shift = build_dual_tced(tced)
    d = solve_lp(dual)
    dual_obj = -d.objective + shift if d.is_optimal else math.nan
    return p, d, dual_obj, dual, dmap


# ---------------------------------------------------------------------------
# paper-convention dual solution and the profit identity
# ---------------------------------------------------------------------------


@dataclass
class DualSolution:
    """Multipliers in the published convention, read off a solved TCED."""
    lam: np.ndarray            # (B, T)
    kappa: dict                # bus -> (T,)
    beta: np.ndarray           # (L, T)
    alpha: float
    delta_lo: list             # [i][s] -> (T,)
    delta_hi: list
    phi_lo: dict; phi_hi: dict
    xi_lo: dict; xi_hi: dict
    rho_chg_lo: dict; rho_chg_hi: dict
    rho_dis_lo: dict; rho_dis_hi: dict
    gamma_lo: np.ndarray; gamma_hi: np.ndarray
    shed_lo: dict; shed_hi: dict


def dual_solution_from_primal(tced: TcedModel, lp) -> DualSolution:
    """Extract paper-convention multipliers from the primal LP's duals and
    reduced costs (lower-bound dual = max(d,0), upper = max(-d,0))."""
    if not lp.is_optimal:
        raise ValidationError("TCED LP not optimal")
    y = lp.duals
    d = lp.reduced_costs
    B = len(tced.system.buses)
    T = tced.horizon
    lam = np.array([[y[r] for r in tced.balance_rows[b]] for b in range(B)])
    kappa = {bus: -y[rows] for bus, rows in tced.soc_rows.items()}
    beta = np.array([[-y[r] for r in rows] for rows in
                     (tced.flowdef_rows[l] for l in range(len(tced.system.lines)))])
    alpha = -y[tced.enc_row] if tced.enc_row is not None else 0.0

    def lo(ids):
        return np.maximum(d[ids], 0.0)

    def hi(ids):
        return np.maximum(-d[ids], 0.0)

    return DualSolution(
        lam=lam, kappa=kappa, beta=beta, alpha=float(alpha),
        delta_lo=[[lo(s) for s in segs] for segs in tced.g],
        delta_hi=[[hi(s) for s in segs] for segs in tced.g],
        phi_lo={b: lo(v) for b, v in tced.spill.items()},
        phi_hi={b: hi(v) for b, v in tced.spill.items()},
        xi_lo={b: lo(v) for b, v in tced.soc.items()},
        xi_hi={b: hi(v) for b, v in tced.soc.items()},
        rho_chg_lo={b: lo(v) for b, v in tced.chg.items()},
        rho_chg_hi={b: hi(v) for b, v in tced.chg.items()},
        rho_dis_lo={b: lo(v) for b, v in tced.dis.items()},
        rho_dis_hi={b: hi(v) for b, v in tced.dis.items()},
        gamma_lo=np.array([lo(ids) for ids in tced.f]),
        gamma_hi=np.array([hi(ids) for ids in tced.f]),
        shed_lo={b: lo(v) for b, v in tced.shed.items()},
        shed_hi={b: hi(v) for b, v in tced.shed.items()})


def check_printed_dual_rows(tced: TcedModel, ds: DualSolution, tol=DUALITY_TOL):
    """Residuals of the published dual-feasibility rows at a DualSolution.

    Returns the max |residual| over every row family.
    """
    econ = tced.econ
    T = tced.horizon
    eta = tced.system.storage.efficiency
    bus_pos = {b: k for k, b in enumerate(tced.system.bus_ids)}
    worst = 0.0
    for i, gen in enumerate(tced.system.generators):
        lam_b = ds.lam[bus_pos[gen.bus]]
        for s, seg in enumerate(gen.segments):
            cg = seg.cost + econ.carbon_price * seg.emissions
            r = (ds.alpha * seg.emissions + cg - lam_b
                 - ds.delta_lo[i][s] + ds.delta_hi[i][s])
            worst = max(worst, float(np.abs(r).max()))
    for bus in tced.soc:
        lam_b = ds.lam[bus_pos[bus]]
        kap = ds.kappa[bus]
        r = kap / eta + ds.rho_dis_hi[bus] - ds.rho_dis_lo[bus] - lam_b
        worst = max(worst, float(np.abs(r).max()))
        r = lam_b + ds.rho_chg_hi[bus] - ds.rho_chg_lo[bus] - eta * kap
        worst = max(worst, float(np.abs(r).max()))
        knext = np.roll(kap, -1)
        r = kap - knext + ds.xi_hi[bus] - ds.xi_lo[bus]
        worst = max(worst, float(np.abs(r).max()))
    # theta columns (non-reference buses): sum_l y_l m_lb beta = 0
    ref = min(tced.system.bus_ids)
    for bus in tced.system.bus_ids:
        if bus == ref:
            continue
        acc = np.zeros(T)
        for l, ln in enumerate(tced.system.lines):
            if ln.from_bus == bus:
                acc += ln.admittance * ds.beta[l]
            elif ln.to_bus == bus:
                acc -= ln.admittance * ds.beta[l]
        worst = max(worst, float(np.abs(acc).max()))
    for l, ln in enumerate(tced.system.lines):
        r = (ds.lam[bus_pos[ln.from_bus]] - ds.lam[bus_pos[ln.to_bus]]
             + ds.beta[l] - ds.gamma_lo[l] + ds.gamma_hi[l])
        worst = max(worst, float(np.abs(r).max()))
    for bus, ids in tced.spill.items():
        r = (-ds.lam[bus_pos[bus]] + ds.phi_lo[bus] - ds.phi_hi[bus]
             - econ.ren_shed_price)
        worst = max(worst, float(np.abs(r).max()))
    for bus in tced.shed:
        r = (ds.lam[bus_pos[bus]] + ds.shed_lo[bus] - ds.shed_hi[bus]
             - econ.load_shed_price)
        worst = max(worst, float(np.abs(r).max()))
    return worst


def profit_via_duals(ds: DualSolution, alloc: StorageAllocation, spec) -> float:
    """One day's arbitrage revenue from the complementary-slackness rewrite:
    sum_b sum_t [Qmax xi_hi + Jmax (rho_dis_hi + rho_chg_hi)]."""
    total = 0.0
    for bus in ds.xi_hi:
        qmax = alloc.energy_mwh(bus, spec)
        jmax = alloc.power_mw(bus, spec)
        total += qmax * float(ds.xi_hi[bus].sum())
        total += jmax * float(ds.rho_dis_hi[bus].sum()
                              + ds.rho_chg_hi[bus].sum())
    return total


def profit_via_lmps(tced: TcedModel, lp, ds: DualSolution) -> float:
    """One day's arbitrage revenue as sum lambda (dis - chg) from the primal."""
    bus_pos = {b: k for k, b in enumerate(tced.system.bus_ids)}
    total = 0.0
    for bus in tced.dis:
        lam = ds.lam[bus_pos[bus]]
        total += float(np.dot(lam, lp.x[tced.dis[bus]] - lp.x[tced.chg[bus]]))
    return total


# ---------------------------------------------------------------------------
# big-M bounds
# ---------------------------------------------------------------------------


def compute_bigM(system: PowerSystem, econ: EconomicParams, margin=1.05) -> dict:
    """Per-family dual bounds from cost data.

    The load-shed penalty caps lambda; the ENC shadow price is capped by how
    cheaply emissions can be bought down via shedding (P_load over the
    smallest positive marginal emissions rate).
    """
    segs = [s for g in system.generators for s in g.segments]
    pos_h = [s.emissions for s in segs if s.emissions > 0]
    alpha_cap = econ.load_shed_price / min(pos_h) if pos_h else 0.0
    max_h = max((s.emissions for s in segs), default=0.0)
    max_cg = max((s.cost + econ.carbon_price * s.emissions for s in segs),
                 default=0.0)
    m_lambda = max((s.cost + (econ.carbon_price + alpha_cap) * s.emissions
                    for s in segs), default=0.0) + econ.load_shed_price
    eta = system.storage.efficiency
    stretch = max(eta, 1.0 / eta)
    m = {
        "alpha": alpha_cap * margin,
        "lambda": m_lambda * margin,
        "kappa": m_lambda * stretch * margin,
        "delta_hi": (m_lambda + max_cg + alpha_cap * max_h) * margin,
        "xi_hi": 2 * m_lambda * stretch * margin,
        "rho_hi": (m_lambda + m_lambda * stretch * stretch) * margin,
        "phi_hi": (m_lambda + econ.ren_shed_price) * margin,
        "shed_hi": (m_lambda + econ.load_shed_price) * margin,
    }
    return m


def audit_bigM(duals: list, m: dict, slack: float = 0.01) -> list:
    """Families whose observed dual activity comes within `slack` of its M."""
    hits = []

    def check(name, value):
        cap = m[name]
        if cap > 0 and value >= (1 - slack) * cap:
            hits.append((name, float(value), cap))

    for ds in duals:
        check("lambda", np.abs(ds.lam).max(initial=0.0))
        check("alpha", abs(ds.alpha))
        for bus in ds.kappa:
            check("kappa", np.abs(ds.kappa[bus]).max(initial=0.0))
            check("xi_hi", ds.xi_hi[bus].max(initial=0.0))
            check("rho_hi", max(ds.rho_chg_hi[bus].max(initial=0.0),
                                ds.rho_dis_hi[bus].max(initial=0.0)))
        for i in range(len(ds.delta_hi)):
            for s in range(len(ds.delta_hi[i])):
                check("delta_hi", ds.delta_hi[i][s].max(initial=0.0))
        for bus in ds.phi_hi:
            check("phi_hi", ds.phi_hi[bus].max(initial=0.0))
        for bus in ds.shed_hi:
            check("shed_hi", ds.shed_hi[bus].max(initial=0.0))
    return hits


def calibrated_bigM(system, econ, dual_samples, max_escalations: int = 3) -> dict:
    """Escalate (x10) any family the audit flags, at most three times."""
    m = compute_bigM(system, econ)
    for _ in range(max_escalations):
        hits = audit_bigM(dual_samples, m)
        if not hits:
            return m
        for name, _, _ in hits:
            m[name] *= 10.0
    hits = audit_bigM(dual_samples, m)
    if hits:
        raise RuntimeError(f"big-M escalation exhausted: {hits}")
    return m


# ---------------------------------------------------------------------------
# profit-constrained single-level relaxation of the philanthropic problem
# ---------------------------------------------------------------------------


@dataclass
class PcsleDay:
    u: list; v: list; z: list          # [i] -> (T,) ids (fixed for free units)
    g: list                            # [i][s] -> (T,) ids
    spill: dict; shed: dict
    soc: dict; chg: dict; dis: dict
    f: list; theta: list
    lam: list                          # [b] -> (T,) ids
    kappa: dict; alpha: int | None
    beta: list
    delta_lo: list; delta_hi: list     # [i][s] -> (T,) ids
    phi_lo: dict; phi_hi: dict
    xi_lo: dict; xi_hi: dict
    rho_chg_lo: dict; rho_chg_hi: dict
    rho_dis_lo: dict; rho_dis_hi: dict
    gamma_lo: list; gamma_hi: list
    shed_lo: dict; shed_hi: dict
    aux: list                          # (w_id, bin_id, cont_id) products


@dataclass
class PcsleModel:
    milp: MilpModel
    system: PowerSystem
    profiles: list
    probs: np.ndarray
    econ: EconomicParams
    baselines: list | None
    max_units: int
    nbits: int
    bigm: dict
    bits_q: dict                       # bus -> [ids] energy-side bits
    bits_j: dict                       # bus -> [ids] power-side bits
    days: list = field(default_factory=list)

    def bit_values(self, x, bus) -> int:
        return int(round(sum(2 ** n * x[j] for n, j in enumerate(self.bits_q[bus]))))

    def allocation_from(self, x) -> StorageAllocation:
        return StorageAllocation({b: self.bit_values(x, b)
                                  for b in self.bits_q
                                  if self.bit_values(x, b) > 0})


def bits_needed(max_units: int) -> int:
    if max_units < 1:
        raise ValidationError("max units per bus must be >= 1")
    return max(1, math.ceil(math.log2(max_units + 1)))


def build_pcsle(system: PowerSystem, rep_days, econ: EconomicParams,
                baselines=None, max_units_per_bus: int = 3,
                bigm: dict | None = None) -> PcsleModel:
    """Single-level MILP relaxation of the philanthropic investment problem.

    Commitment binaries move to the upper level; per-day dispatch optimality
    is enforced through explicit dual-feasibility rows and a strong-duality
    equality; the profit floor uses the complementary-slackness rewrite; and
    storage sizes enter through linked binary expansions, with every
    binary-times-dual product replaced by a big-M linearized auxiliary.
    Valid as a lower bound provided the big-M values dominate the true duals
    (see audit_bigM / audit_pcsle_point).
    """
    from .uc import _rep_profiles
    profiles, probs = _rep_profiles(rep_days)
    T = profiles[0].horizon
    gens = system.generators
    spec = system.storage
    cand = system.candidate_buses
    if not cand:
        raise ValidationError("no candidate storage buses")
    if baselines is not None and len(baselines) != len(profiles):
        raise ValidationError("need one ENC baseline per representative day")
    m_fam = bigm or compute_bigM(system, econ)
    nbits = bits_needed(max_units_per_bus)
    eta = spec.efficiency
    D = econ.days_per_year

    m = MilpModel("pcsle")
    pm = PcsleModel(m, system, profiles, probs, econ,
                    list(baselines) if baselines is not None else None,
                    max_units_per_bus, nbits, m_fam, {}, {})

    for bus in cand:
        pm.bits_q[bus] = [m.add_var(f"bitQ[{bus},{n}]", BINARY) for n in range(nbits)]
        pm.bits_j[bus] = [m.add_var(f"bitJ[{bus},{n}]", BINARY) for n in range(nbits)]
        for n in range(nbits):
            m.add_row({pm.bits_q[bus][n]: 1.0, pm.bits_j[bus][n]: -1.0},
                      EQ, 0.0, f"bitlink[{bus},{n}]")
        if max_units_per_bus < 2 ** nbits - 1:
            m.add_row({j: float(2 ** n) for n, j in enumerate(pm.bits_q[bus])},
                      LE, float(max_units_per_bus), f"bitcap[{bus}]")

    unit_price = spec.cost_energy * spec.unit_energy + spec.cost_power * spec.unit_power
    batt_terms = {}
    for bus in cand:
        for n, j in enumerate(pm.bits_q[bus]):
            batt_terms[j] = batt_terms.get(j, 0.0) \
                + 2 ** n * spec.cost_energy * spec.unit_energy
        for n, j in enumerate(pm.bits_j[bus]):
            batt_terms[j] = batt_terms.get(j, 0.0) \
                + 2 ** n * spec.cost_power * spec.unit_power

    obj = dict(batt_terms)

    def aux_product(name, xb, cont, m_pos, m_neg=0.0):
        w = m.add_var(name, CONTINUOUS, -m_neg, m_pos)
        m.add_row({w: 1.0, xb: -m_pos}, LE, 0.0)
        if m_neg:
            m.add_row({w: -1.0, xb: -m_neg}, LE, 0.0)
        m.add_row({w: 1.0, cont: -1.0, xb: m_neg}, LE, m_neg)
        m.add_row({w: -1.0, cont: 1.0, xb: m_pos}, LE, m_pos)
        return w

    profit_terms = {}

    for a, prof in enumerate(profiles):
        wgt = D * float(probs[a])
        day = PcsleDay([], [], [], [], {}, {}, {}, {}, {}, [], [],
                       [], {}, None, [], [], [], {}, {}, {}, {},
                       {}, {}, {}, {}, [], [], {}, {}, [])

        # ---- upper-level commitment + primal dispatch (same as the UC) ----
        for i, gen in enumerate(gens):
            if gen.commitment_free:
                uu = [m.add_var(f"u[{a},{gen.id},{t}]", BINARY, 1, 1) for t in range(T)]
                vv = [m.add_var(f"v[{a},{gen.id},{t}]", BINARY, 0, 0) for t in range(T)]
                zz = [m.add_var(f"z[{a},{gen.id},{t}]", BINARY, 0, 0) for t in range(T)]
            else:
                uu = [m.add_var(f"u[{a},{gen.id},{t}]", BINARY) for t in range(T)]
                vv = [m.add_var(f"v[{a},{gen.id},{t}]", BINARY) for t in range(T)]
                zz = [m.add_var(f"z[{a},{gen.id},{t}]", BINARY) for t in range(T)]
            day.u.append(np.array(uu)); day.v.append(np.array(vv)); day.z.append(np.array(zz))
            segs = []
            for s, seg in enumerate(gen.segments):
                gg = np.array([m.add_var(f"g[{a},{gen.id},{s},{t}]", CONTINUOUS,
                                         0, seg.capacity) for t in range(T)])
                segs.append(gg)
                for t in range(T):
                    obj[int(gg[t])] = obj.get(int(gg[t]), 0.0) + wgt * (
                        seg.cost + econ.carbon_price * seg.emissions)
            day.g.append(segs)
            for t in range(T):
                obj[uu[t]] = obj.get(uu[t], 0.0) + wgt * (
                    gen.cost_min + econ.carbon_price * gen.emis_min)
                obj[vv[t]] = obj.get(vv[t], 0.0) + wgt * (
                    gen.cost_startup + econ.carbon_price * gen.emis_startup)
            if gen.commitment_free:
                continue
            for t in range(T):
                tp = (t - 1) % T
                m.add_row({int(day.v[i][t]): 1.0, int(day.z[i][t]): -1.0,
                           int(day.u[i][t]): -1.0, int(day.u[i][tp]): 1.0},
                          EQ, 0.0, f"commit[{a},{gen.id},{t}]")
            up_w, dn_w = min(gen.min_up, T), min(gen.min_down, T)
            for t in range(T):
                co = {}
                for k in range(up_w):
                    j = int(day.v[i][(t - k) % T])
                    co[j] = co.get(j, 0.0) + 1.0
                co[int(day.u[i][t])] = co.get(int(day.u[i][t]), 0.0) - 1.0
                m.add_row(co, LE, 0.0, f"minup[{a},{gen.id},{t}]")
                co = {}
                for k in range(dn_w):
                    j = int(day.z[i][(t - k) % T])
                    co[j] = co.get(j, 0.0) + 1.0
                co[int(day.u[i][t])] = co.get(int(day.u[i][t]), 0.0) + 1.0
                m.add_row(co, LE, 1.0, f"mindown[{a},{gen.id},{t}]")
            for s, seg in enumerate(gen.segments):
                for t in range(T):
                    m.add_row({int(day.g[i][s][t]): 1.0,
                               int(day.u[i][t]): -seg.capacity}, LE, 0.0,
                              f"segcap[{a},{gen.id},{s},{t}]")

        for bus in cand:
            e_cap = max_units_per_bus * spec.unit_energy
            p_cap = max_units_per_bus * spec.unit_power
            day.soc[bus] = np.array([m.add_var(f"soc[{a},{bus},{t}]", CONTINUOUS,
                                               0, e_cap) for t in range(T)])
            day.chg[bus] = np.array([m.add_var(f"chg[{a},{bus},{t}]", CONTINUOUS,
                                               0, p_cap) for t in range(T)])
            day.dis[bus] = np.array([m.add_var(f"dis[{a},{bus},{t}]", CONTINUOUS,
                                               0, p_cap) for t in range(T)])
            for t in range(T):
                tp = (t - 1) % T
                m.add_row({int(day.soc[bus][t]): 1.0, int(day.soc[bus][tp]): -1.0,
                           int(day.chg[bus][t]): -eta, int(day.dis[bus][t]): 1.0 / eta},
                          EQ, 0.0, f"soc[{a},{bus},{t}]")
                qcap = {int(day.soc[bus][t]): 1.0}
                for n, j in enumerate(pm.bits_q[bus]):
                    qcap[j] = -(2 ** n) * spec.unit_energy
                m.add_row(qcap, LE, 0.0, f"soccap[{a},{bus},{t}]")
                for ids, tagp in ((day.chg, "chgcap"), (day.dis, "discap")):
                    jcap = {int(ids[bus][t]): 1.0}
                    for n, j in enumerate(pm.bits_j[bus]):
                        jcap[j] = -(2 ** n) * spec.unit_power
                    m.add_row(jcap, LE, 0.0, f"{tagp}[{a},{bus},{t}]")

        buses = system.bus_ids
        bus_pos = {b: k for k, b in enumerate(buses)}
        ref_bus = min(buses)
        for l, ln in enumerate(system.lines):
            day.f.append(np.array([m.add_var(f"flow[{a},{ln.id},{t}]", CONTINUOUS,
                                             -ln.capacity, ln.capacity)
                                   for t in range(T)]))
        for bus in buses:
            lo, hi = (0.0, 0.0) if bus == ref_bus else (-math.inf, math.inf)
            day.theta.append(np.array([m.add_var(f"theta[{a},{bus},{t}]",
                                                 CONTINUOUS, lo, hi)
                                       for t in range(T)]))
        for bus in buses:
            w_ = prof.renewables.get(bus)
            if w_ is not None and np.any(w_ > 0):
                ids = np.array([m.add_var(f"spill[{a},{bus},{t}]", CONTINUOUS,
                                          0, float(w_[t])) for t in range(T)])
                day.spill[bus] = ids
                for t in range(T):
                    obj[int(ids[t])] = obj.get(int(ids[t]), 0.0) + wgt * econ.ren_shed_price
            dd = prof.demand.get(bus)
            if dd is not None and np.any(dd > 0):
                ids = np.array([m.add_var(f"shed[{a},{bus},{t}]", CONTINUOUS,
                                          0, float(dd[t])) for t in range(T)])
                day.shed[bus] = ids
                for t in range(T):
                    obj[int(ids[t])] = obj.get(int(ids[t]), 0.0) + wgt * econ.load_shed_price

        for b, bus in enumerate(buses):
            dd = prof.demand.get(bus)
            w_ = prof.renewables.get(bus)
            for t in range(T):
                co = {}
                for i, gen in enumerate(gens):
                    if gen.bus != bus:
                        continue
                    if gen.g_min:
                        co[int(day.u[i][t])] = co.get(int(day.u[i][t]), 0.0) + gen.g_min
                    for s in range(len(gen.segments)):
                        co[int(day.g[i][s][t])] = 1.0
                if bus in day.dis:
                    co[int(day.dis[bus][t])] = 1.0
                    co[int(day.chg[bus][t])] = -1.0
                for l, ln in enumerate(system.lines):
                    if ln.from_bus == bus:
                        co[int(day.f[l][t])] = co.get(int(day.f[l][t]), 0.0) - 1.0
                    elif ln.to_bus == bus:
                        co[int(day.f[l][t])] = co.get(int(day.f[l][t]), 0.0) + 1.0
                if bus in day.spill:
                    co[int(day.spill[bus][t])] = -1.0
                if bus in day.shed:
                    co[int(day.shed[bus][t])] = 1.0
                rhs = float(dd[t] if dd is not None else 0.0) \
                    - float(w_[t] if w_ is not None else 0.0)
                m.add_row(co, EQ, rhs, f"balance[{a},{bus},{t}]")

        for l, ln in enumerate(system.lines):
            y = ln.admittance
            for t in range(T):
                m.add_row({int(day.f[l][t]): 1.0,
                           int(day.theta[bus_pos[ln.from_bus]][t]): -y,
                           int(day.theta[bus_pos[ln.to_bus]][t]): y},
                          EQ, 0.0, f"flowdef[{a},{ln.id},{t}]")

        if baselines is not None:
            co = {}
            for i, gen in enumerate(gens):
                for t in range(T):
                    if gen.emis_min:
                        co[int(day.u[i][t])] = co.get(int(day.u[i][t]), 0.0) + gen.emis_min
                    if gen.emis_startup:
                        co[int(day.v[i][t])] = co.get(int(day.v[i][t]), 0.0) + gen.emis_startup
                for s, seg in enumerate(gen.segments):
                    if seg.emissions:
                        for t in range(T):
                            co[int(day.g[i][s][t])] = seg.emissions
            m.add_row(co, LE, econ.enc_multiplier * float(baselines[a]), f"enc[{a}]")

        # ---- dual variables (published convention) ----
        ml, mk = m_fam["lambda"], m_fam["kappa"]
        day.lam = [np.array([m.add_var(f"lam[{a},{bus},{t}]", CONTINUOUS, -ml, ml)
                             for t in range(T)]) for bus in buses]
        day.kappa = {bus: np.array([m.add_var(f"kap[{a},{bus},{t}]", CONTINUOUS,
                                              -mk, mk) for t in range(T)])
                     for bus in cand}
        day.beta = [np.array([m.add_var(f"beta[{a},{ln.id},{t}]", CONTINUOUS,
                                        -math.inf, math.inf) for t in range(T)])
                    for ln in system.lines]
        day.alpha = (m.add_var(f"alpha[{a}]", CONTINUOUS, 0, m_fam["alpha"])
                     if baselines is not None else None)
        for i, gen in enumerate(gens):
            dlo, dhi = [], []
            for s in range(len(gen.segments)):
                dlo.append(np.array([m.add_var(f"dlo[{a},{gen.id},{s},{t}]",
                                               CONTINUOUS, 0, math.inf)
                                     for t in range(T)]))
                dhi.append(np.array([m.add_var(f"dhi[{a},{gen.id},{s},{t}]",
                                               CONTINUOUS, 0, m_fam["delta_hi"])
                                     for t in range(T)]))
            day.delta_lo.append(dlo); day.delta_hi.append(dhi)
        for bus in day.spill:
            day.phi_lo[bus] = np.array([m.add_var(f"plo[{a},{bus},{t}]", CONTINUOUS,
                                                  0, math.inf) for t in range(T)])
            day.phi_hi[bus] = np.array([m.add_var(f"phi[{a},{bus},{t}]", CONTINUOUS,
                                                  0, m_fam["phi_hi"]) for t in range(T)])
        for bus in day.shed:
            day.shed_lo[bus] = np.array([m.add_var(f"shlo[{a},{bus},{t}]", CONTINUOUS,
                                                   0, math.inf) for t in range(T)])
            day.shed_hi[bus] = np.array([m.add_var(f"shhi[{a},{bus},{t}]", CONTINUOUS,
                                                   0, m_fam["shed_hi"]) for t in range(T)])
        for bus in cand:
            day.xi_lo[bus] = np.array([m.add_var(f"xlo[{a},{bus},{t}]", CONTINUOUS,
                                                 0, math.inf) for t in range(T)])
            day.xi_hi[bus] = np.array([m.add_var(f"xhi[{a},{bus},{t}]", CONTINUOUS,
                                                 0, m_fam["xi_hi"]) for t in range(T)])
            day.rho_chg_lo[bus] = np.array([m.add_var(f"rclo[{a},{bus},{t}]", CONTINUOUS,
                                                      0, math.inf) for t in range(T)])
            day.rho_chg_hi[bus] = np.array([m.add_var(f"rchi[{a},{bus},{t}]", CONTINUOUS,
                                                      0, m_fam["rho_hi"]) for t in range(T)])
            day.rho_dis_lo[bus] = np.array([m.add_var(f"rdlo[{a},{bus},{t}]", CONTINUOUS,
                                                      0, math.inf) for t in range(T)])
            day.rho_dis_hi[bus] = np.array([m.add_var(f"rdhi[{a},{bus},{t}]", CONTINUOUS,
                                                      0, m_fam["rho_hi"]) for t in range(T)])
        for l, ln in enumerate(system.lines):
            day.gamma_lo.append(np.array([m.add_var(f"glo[{a},{ln.id},{t}]", CONTINUOUS,
                                                    0, math.inf) for t in range(T)]))
            day.gamma_hi.append(np.array([m.add_var(f"ghi[{a},{ln.id},{t}]", CONTINUOUS,
                                                    0, math.inf) for t in range(T)]))

        # ---- dual feasibility rows ----
        for i, gen in enumerate(gens):
            lam_b = day.lam[bus_pos[gen.bus]]
            for s, seg in enumerate(gen.segments):
                cg = seg.cost + econ.carbon_price * seg.emissions
                for t in range(T):
                    co = {int(lam_b[t]): -1.0,
                          int(day.delta_lo[i][s][t]): -1.0,
                          int(day.delta_hi[i][s][t]): 1.0}
                    if day.alpha is not None and seg.emissions:
                        co[day.alpha] = seg.emissions
                    m.add_row(co, EQ, -cg, f"dualg[{a},{gen.id},{s},{t}]")
        for bus in cand:
            lam_b = day.lam[bus_pos[bus]]
            for t in range(T):
                m.add_row({int(day.kappa[bus][t]): 1.0 / eta,
                           int(day.rho_dis_hi[bus][t]): 1.0,
                           int(day.rho_dis_lo[bus][t]): -1.0,
                           int(lam_b[t]): -1.0},
                          EQ, 0.0, f"dualdis[{a},{bus},{t}]")
                m.add_row({int(lam_b[t]): 1.0,
                           int(day.rho_chg_hi[bus][t]): 1.0,
                           int(day.rho_chg_lo[bus][t]): -1.0,
                           int(day.kappa[bus][t]): -eta},
                          EQ, 0.0, f"dualchg[{a},{bus},{t}]")
                tn = (t + 1) % T
                m.add_row({int(day.kappa[bus][t]): 1.0,
                           int(day.kappa[bus][tn]): -1.0,
                           int(day.xi_hi[bus][t]): 1.0,
                           int(day.xi_lo[bus][t]): -1.0},
                          EQ, 0.0, f"dualsoc[{a},{bus},{t}]")
        for bus in buses:
            if bus == ref_bus:
                continue
            for t in range(T):
                co = {}
                for l, ln in enumerate(system.lines):
                    if ln.from_bus == bus:
                        co[int(day.beta[l][t])] = co.get(int(day.beta[l][t]), 0.0) \
                            + ln.admittance
                    elif ln.to_bus == bus:
                        co[int(day.beta[l][t])] = co.get(int(day.beta[l][t]), 0.0) \
                            - ln.admittance
                m.add_row(co, EQ, 0.0, f"dualtheta[{a},{bus},{t}]")
        for l, ln in enumerate(system.lines):
            for t in range(T):
                m.add_row({int(day.lam[bus_pos[ln.from_bus]][t]): 1.0,
                           int(day.lam[bus_pos[ln.to_bus]][t]): -1.0,
                           int(day.beta[l][t]): 1.0,
                           int(day.gamma_lo[l][t]): -1.0,
                           int(day.gamma_hi[l][t]): 1.0},
                          EQ, 0.0, f"dualf[{a},{ln.id},{t}]")
        for bus in day.spill:
            lam_b = day.lam[bus_pos[bus]]
            for t in range(T):
                m.add_row({int(lam_b[t]): -1.0,
                           int(day.phi_lo[bus][t]): 1.0,
                           int(day.phi_hi[bus][t]): -1.0},
                          EQ, econ.ren_shed_price, f"dualspill[{a},{bus},{t}]")
        for bus in day.shed:
            lam_b = day.lam[bus_pos[bus]]
            for t in range(T):
                m.add_row({int(lam_b[t]): 1.0,
                           int(day.shed_lo[bus][t]): 1.0,
                           int(day.shed_hi[bus][t]): -1.0},
                          EQ, econ.load_shed_price, f"dualshed[{a},{bus},{t}]")

        # ---- strong duality: variable-part primal cost == dual objective ----
        sd = {}
        for i, gen in enumerate(gens):
            for s, seg in enumerate(gen.segments):
                cg = seg.cost + econ.carbon_price * seg.emissions
                for t in range(T):
                    sd[int(day.g[i][s][t])] = sd.get(int(day.g[i][s][t]), 0.0) + cg
        for bus, ids in day.spill.items():
            for t in range(T):
                sd[int(ids[t])] = sd.get(int(ids[t]), 0.0) + econ.ren_shed_price
        for bus, ids in day.shed.items():
            for t in range(T):
                sd[int(ids[t])] = sd.get(int(ids[t]), 0.0) + econ.load_shed_price
        sd_rhs = 0.0

        def sd_add(j, c):
            sd[j] = sd.get(j, 0.0) + c

        if day.alpha is not None:
            # alpha * (sum E_min u + E_su v - chi E_base): products with u, v
            sd_add(day.alpha, -econ.enc_multiplier * float(baselines[a]))
            for i, gen in enumerate(gens):
                for t in range(T):
                    if gen.emis_min:
                        if gen.commitment_free:
                            sd_add(day.alpha, -gen.emis_min)
                        else:
                            wv = aux_product(f"w_ua[{a},{gen.id},{t}]",
                                             int(day.u[i][t]), day.alpha,
                                             m_fam["alpha"])
                            day.aux.append((wv, int(day.u[i][t]), day.alpha))
                            sd_add(wv, -gen.emis_min)
                    if gen.emis_startup and not gen.commitment_free:
                        wv = aux_product(f"w_va[{a},{gen.id},{t}]",
                                         int(day.v[i][t]), day.alpha,
                                         m_fam["alpha"])
                        day.aux.append((wv, int(day.v[i][t]), day.alpha))
                        sd_add(wv, -gen.emis_startup)
        for l, ln in enumerate(system.lines):
            for t in range(T):
                sd_add(int(day.gamma_lo[l][t]), ln.capacity)
                sd_add(int(day.gamma_hi[l][t]), ln.capacity)
        for i, gen in enumerate(gens):
            for s, seg in enumerate(gen.segments):
                for t in range(T):
                    if gen.commitment_free:
                        sd_add(int(day.delta_hi[i][s][t]), seg.capacity)
                    else:
                        wv = aux_product(f"w_ud[{a},{gen.id},{s},{t}]",
                                         int(day.u[i][t]),
                                         int(day.delta_hi[i][s][t]),
                                         m_fam["delta_hi"])
                        day.aux.append((wv, int(day.u[i][t]),
                                        int(day.delta_hi[i][s][t])))
                        sd_add(wv, seg.capacity)
        for b, bus in enumerate(buses):
            dd = prof.demand.get(bus)
            w_ = prof.renewables.get(bus)
            for t in range(T):
                const = float(dd[t] if dd is not None else 0.0) \
                    - float(w_[t] if w_ is not None else 0.0)
                if const:
                    sd_add(int(day.lam[b][t]), -const)
        for i, gen in enumerate(gens):
            if gen.g_min <= 0:
                continue
            lam_b = day.lam[bus_pos[gen.bus]]
            for t in range(T):
                if gen.commitment_free:
                    sd_add(int(lam_b[t]), gen.g_min)
                else:
                    wv = aux_product(f"w_ul[{a},{gen.id},{t}]",
                                     int(day.u[i][t]), int(lam_b[t]),
                                     m_fam["lambda"], m_fam["lambda"])
                    day.aux.append((wv, int(day.u[i][t]), int(lam_b[t])))
                    sd_add(wv, gen.g_min)
        for bus in cand:
            for t in range(T):
                for n in range(nbits):
                    wq = aux_product(f"w_xq[{a},{bus},{n},{t}]",
                                     pm.bits_q[bus][n], int(day.xi_hi[bus][t]),
                                     m_fam["xi_hi"])
                    day.aux.append((wq, pm.bits_q[bus][n], int(day.xi_hi[bus][t])))
                    coef = (2 ** n) * spec.unit_energy
                    sd_add(wq, coef)
                    profit_terms[wq] = profit_terms.get(wq, 0.0) + wgt * coef
                    for hi_ids, tagp in ((day.rho_chg_hi, "c"), (day.rho_dis_hi, "d")):
                        wj = aux_product(f"w_x{tagp}[{a},{bus},{n},{t}]",
                                         pm.bits_j[bus][n], int(hi_ids[bus][t]),
                                         m_fam["rho_hi"])
                        day.aux.append((wj, pm.bits_j[bus][n], int(hi_ids[bus][t])))
                        coefj = (2 ** n) * spec.unit_power
                        sd_add(wj, coefj)
                        profit_terms[wj] = profit_terms.get(wj, 0.0) + wgt * coefj
        for bus, ids in day.spill.items():
            w_ = prof.renewables[bus]
            for t in range(T):
                if w_[t]:
                    sd_add(int(day.phi_hi[bus][t]), float(w_[t]))
        for bus, ids in day.shed.items():
            dd = prof.demand[bus]
            for t in range(T):
                if dd[t]:
                    sd_add(int(day.shed_hi[bus][t]), float(dd[t]))
        m.add_row(sd, EQ, sd_rhs, f"strong_duality[{a}]")

        pm.days.append(day)

    # ---- profit floor: annualized dual-side revenue covers the battery ----
    pr = dict(profit_terms)
    for j, c in batt_terms.items():
        pr[j] = pr.get(j, 0.0) - c
    m.add_row(pr, GE, econ.min_return, "profit_floor")

    m.set_obj_vector(obj)
    return pm


def audit_pcsle_point(pm: PcsleModel, x, tol: float = 1e-6):
    """Row/bound audit plus the linearization identity w == bit * dual."""
    worst, viol = audit_point(pm.milp, x, tol)
    for day in pm.days:
        for w, xb, cont in day.aux:
            err = abs(x[w] - round(x[xb]) * x[cont])
            worst = max(worst, err)
            if err > tol * (1 + abs(x[cont])):
                viol.append(("bilinear", pm.milp.variables[w].name, err))
    return worst, viol


def embed_heuristic_point(pm: PcsleModel, alloc: StorageAllocation,
                          commitments, gap: float = 1e-9):
    """Map a heuristic solution (allocation + per-day commitments) to a full
    PCSLE assignment, re-solving each day's dispatch LP for exact duals.

    Returns (x, social_cost, profit): feasibility of x under audit proves
    the relaxation admits the point (big-M large enough included).
    """
    m = pm.milp
    x = np.zeros(m.num_vars)
    lb, ub = m.bounds_arrays()
    x[:] = np.where(np.isfinite(lb), lb, 0.0)
    spec = pm.system.storage
    econ = pm.econ
    for bus in pm.bits_q:
        units = alloc.units(bus)
        if units > pm.max_units:
            raise ValidationError(f"allocation at {bus} exceeds the bit budget")
        for n in range(pm.nbits):
            bit = (units >> n) & 1
            x[pm.bits_q[bus][n]] = bit
            x[pm.bits_j[bus][n]] = bit

    total_cost = battery_cost(alloc, spec)
    total_profit = -battery_cost(alloc, spec)
    for a, day in enumerate(pm.days):
        uvz = commitments[a]
        base = None if pm.baselines is None else pm.baselines[a]
        # clip the embedded allocation into the TCED for exact per-day duals
        tced = build_tced(pm.system, pm.profiles[a], econ, alloc, uvz, base)
        lp = solve_lp(tced.milp)
        if not lp.is_optimal:
            raise RuntimeError("embedding TCED came back " + lp.status)
        ds = dual_solution_from_primal(tced, lp)
        bus_pos = {b: k for k, b in enumerate(pm.system.bus_ids)}
        for i in range(len(pm.system.generators)):
            x[day.u[i]] = uvz[0][i]
            x[day.v[i]] = uvz[1][i]
            x[day.z[i]] = uvz[2][i]
            for s in range(len(pm.system.generators[i].segments)):
                x[day.g[i][s]] = lp.x[tced.g[i][s]]
        for bus, ids in day.spill.items():
            x[ids] = lp.x[tced.spill[bus]] if bus in tced.spill else 0.0
        for bus, ids in day.shed.items():
            x[ids] = lp.x[tced.shed[bus]] if bus in tced.shed else 0.0
        for bus in pm.bits_q:
            for store, src in ((day.soc, tced.soc), (day.chg, tced.chg),
                               (day.dis, tced.dis)):
                x[store[bus]] = lp.x[src[bus]] if bus in src else 0.0
        for l in range(len(pm.system.lines)):
            x[day.f[l]] = lp.x[tced.f[l]]
            x[day.beta[l]] = ds.beta[l]
            x[day.gamma_lo[l]] = ds.gamma_lo[l]
            x[day.gamma_hi[l]] = ds.gamma_hi[l]
        for b in range(len(pm.system.bus_ids)):
            x[day.theta[b]] = lp.x[tced.theta[b]]
            x[day.lam[b]] = ds.lam[b]
        for bus in pm.bits_q:
            if bus in ds.kappa:
                x[day.kappa[bus]] = ds.kappa[bus]
                x[day.xi_lo[bus]] = ds.xi_lo[bus]
                x[day.xi_hi[bus]] = ds.xi_hi[bus]
                x[day.rho_chg_lo[bus]] = ds.rho_chg_lo[bus]
                x[day.rho_chg_hi[bus]] = ds.rho_chg_hi[bus]
                x[day.rho_dis_lo[bus]] = ds.rho_dis_lo[bus]
                x[day.rho_dis_hi[bus]] = ds.rho_dis_hi[bus]
            else:
                # no storage sited here: the dual rows still need a consistent
                # assignment; kappa = eta*lambda works, with the rho/xi pairs
                # absorbing the residuals (their products carry zero bits, so
                # neither profit nor strong duality sees them)
                lam_b = ds.lam[bus_pos[bus]]
                eta_ = spec.efficiency
                kap = eta_ * lam_b
                x[day.kappa[bus]] = kap
                x[day.rho_chg_hi[bus]] = np.maximum(eta_ * kap - lam_b, 0.0)
                x[day.rho_chg_lo[bus]] = np.maximum(lam_b - eta_ * kap, 0.0)
                x[day.rho_dis_hi[bus]] = np.maximum(lam_b - kap / eta_, 0.0)
                x[day.rho_dis_lo[bus]] = np.maximum(kap / eta_ - lam_b, 0.0)
                knext = np.roll(kap, -1)
                x[day.xi_lo[bus]] = np.maximum(kap - knext, 0.0)
                x[day.xi_hi[bus]] = np.maximum(knext - kap, 0.0)
        for i, segs in enumerate(day.delta_lo):
            for s in range(len(segs)):
                x[day.delta_lo[i][s]] = ds.delta_lo[i][s]
                x[day.delta_hi[i][s]] = ds.delta_hi[i][s]
        for bus in day.phi_lo:
            x[day.phi_lo[bus]] = ds.phi_lo[bus] if bus in ds.phi_lo else 0.0
            x[day.phi_hi[bus]] = ds.phi_hi[bus] if bus in ds.phi_hi else 0.0
        for bus in day.shed_lo:
            x[day.shed_lo[bus]] = ds.shed_lo[bus] if bus in ds.shed_lo else 0.0
            x[day.shed_hi[bus]] = ds.shed_hi[bus] if bus in ds.shed_hi else 0.0
        if day.alpha is not None:
            x[day.alpha] = ds.alpha
        for w, xb, cont in day.aux:
            x[w] = round(x[xb]) * x[cont]
        wgt = econ.days_per_year * float(pm.probs[a])
        total_cost += wgt * (lp.objective + tced.constant)
        total_profit += wgt * profit_via_duals(ds, alloc, spec)
    return x, total_cost, total_profit


def pcsle_bound(pm: PcsleModel, gap_target=1e-3, node_limit=None,
                time_limit=None, hint=None):
    """Best proven lower bound from a (possibly truncated) PCSLE solve."""
    hints = []
    if hint is not None:
        ints = pm.milp.integer_indices()
        hints.append({int(j): round(float(hint[j])) for j in ints})
    res = solve_milp(pm.milp, gap_target=gap_target, node_limit=node_limit,
                     time_limit=time_limit, hints=hints)
    return res
