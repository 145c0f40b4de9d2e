"""TCED duality, published dual rows, profit identity, big-M, PCSLE."""

import math

import numpy as np
import pytest

from encplan.system_model import (Bus, Generator, Segment, StorageSpec,
                                  PowerSystem, EconomicParams, DailyProfile)
from encplan.uc import build_uc, solve_uc, StorageAllocation
from encplan.duality import (build_tced, build_dual_tced, solve_tced_pair,
                             dual_solution_from_primal, check_printed_dual_rows,
                             profit_via_duals, profit_via_lmps, compute_bigM,
                             audit_bigM, calibrated_bigM, bits_needed,
                             build_pcsle, embed_heuristic_point,
                             audit_pcsle_point, pcsle_bound)
from encplan.investment import run_heuristic
from encplan.uc import compute_baseline
from encplan.milp import solve_lp

from conftest import (one_bus_toy, one_bus_profile, two_bus_congested,
                      two_bus_profile, mini_days, priced)

ALL_ON = lambda n, T: (np.ones((n, T), dtype=int), np.zeros((n, T), dtype=int),
                       np.zeros((n, T), dtype=int))


def test_toy_strong_duality():
    sys_ = one_bus_toy()
    tced = build_tced(sys_, one_bus_profile(), EconomicParams(),
                      StorageAllocation.empty(), ALL_ON(1, 4))
    p, d, dual_obj, _, _ = solve_tced_pair(tced)
    assert p.is_optimal
    assert abs(p.objective - 4000.0) < 1e-7
    assert abs(dual_obj - p.objective) <= 1e-7 * (1 + abs(p.objective))


def test_zero_demand_both_sides_zero():
    sys_ = one_bus_toy()
    prof = DailyProfile({"n1": np.zeros(4)}, {}, 4)
    tced = build_tced(sys_, prof, EconomicParams(),
                      StorageAllocation.empty(), ALL_ON(1, 4))
    p, d, dual_obj, _, _ = solve_tced_pair(tced)
    assert abs(p.objective) < 1e-9
    assert abs(dual_obj) < 1e-9


def test_congested_lambda_matches_primal_duals():
    sys_ = two_bus_congested()
    tced = build_tced(sys_, two_bus_profile(), EconomicParams(),
                      StorageAllocation.empty(), ALL_ON(2, 4))
    p, dlp, dual_obj, dual_model, dmap = solve_tced_pair(tced)
    assert abs(dual_obj - p.objective) <= 1e-7 * (1 + abs(p.objective))
    # lambda from the explicit dual model equals the primal balance duals
    dsol = solve_lp(dual_model)
    for b in range(2):
        for t in range(4):
            row = tced.balance_rows[b][t]
            y_primal = p.duals[row]
            y_dual_lp = dsol.x[dmap.row_dual[row]]
            assert abs(y_primal - y_dual_lp) <= 1e-7
    ds = dual_solution_from_primal(tced, p)
    assert np.allclose(ds.lam[0], 10.0, atol=1e-7)
    assert np.allclose(ds.lam[1], 50.0, atol=1e-7)


def test_printed_dual_rows_on_desk_day(desk):
    econ = EconomicParams(carbon_price=20.0)
    days = mini_days(desk, days=(15,), horizon=8)
    alloc = StorageAllocation({"b3": 1, "b5": 1})
    ucm = build_uc(priced(desk, 20000.0), days, econ, alloc)
    sol = solve_uc(ucm, gap_target=1e-6)
    tced = build_tced(desk, days[0][0], econ, alloc,
                      (sol.u[0], sol.v[0], sol.z[0]))
    p, _, dual_obj, _, _ = solve_tced_pair(tced)
    assert abs(dual_obj - p.objective) <= 1e-7 * (1 + abs(p.objective))
    ds = dual_solution_from_primal(tced, p)
    assert check_printed_dual_rows(tced, ds) <= 1e-7


def test_profit_identity_zero_storage():
    sys_ = two_bus_congested()
    tced = build_tced(sys_, two_bus_profile(), EconomicParams(),
                      StorageAllocation.empty(), ALL_ON(2, 4))
    p = solve_lp(tced.milp)
    ds = dual_solution_from_primal(tced, p)
    assert profit_via_duals(ds, StorageAllocation.empty(), sys_.storage) == 0.0
    assert profit_via_lmps(tced, p, ds) == 0.0


def test_profit_identity_with_storage(desk):
    econ = EconomicParams()
    days = mini_days(desk, days=(15,), horizon=8)
    alloc = StorageAllocation({"b3": 1})
    ucm = build_uc(priced(desk, 20000.0), days, econ, alloc)
    sol = solve_uc(ucm, gap_target=1e-6)
    tced = build_tced(desk, days[0][0], econ, alloc,
                      (sol.u[0], sol.v[0], sol.z[0]))
    p = solve_lp(tced.milp)
    ds = dual_solution_from_primal(tced, p)
    lhs = profit_via_lmps(tced, p, ds)
    rhs = profit_via_duals(ds, alloc, desk.storage)
    assert abs(lhs - rhs) <= 1e-6 * (1 + abs(lhs))
    assert lhs > 0   # the storage unit actually earns on this fixture


def random_micro_system(rng):
    """2-3 buses, 1-2 lines, simple fleet, random flat-ish profiles."""
    nb = int(rng.integers(2, 4))
    buses = tuple(Bus(f"m{i}", candidate_storage=True) for i in range(nb))
    lines = []
    from encplan.system_model import Line
    for i in range(nb - 1):
        lines.append(Line(f"ln{i}", f"m{i}", f"m{i+1}",
                          float(rng.uniform(0.5, 2.0)),
                          float(rng.uniform(30, 80))))
    gens = []
    for i in range(nb):
        cap = float(rng.integers(60, 150))
        gens.append(Generator(
            f"gen{i}", f"m{i}", 0.0, cap,
            (Segment(cap, float(rng.uniform(10, 60)),
                     float(rng.uniform(0.0, 1.0))),), 0, 0, 0, 0, 1, 1))
    T = 6
    demand = {f"m{i}": np.maximum(rng.uniform(10, 60, (1, 24)), 0)
              for i in range(nb)}
    sys_ = PowerSystem(buses, tuple(lines), tuple(gens), demand, {},
                       StorageSpec())
    prof = DailyProfile({b: demand[b][0][:T].copy() for b in demand}, {}, T)
    return sys_, prof


def test_profit_identity_randomized_20_seeds():
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        sys_, prof = random_micro_system(rng)
        bus = sys_.bus_ids[int(rng.integers(len(sys_.buses)))]
        alloc = StorageAllocation({bus: int(rng.integers(1, 3))})
        nI = len(sys_.generators)
        tced = build_tced(sys_, prof, EconomicParams(), alloc,
                          ALL_ON(nI, prof.horizon))
        p = solve_lp(tced.milp)
        assert p.is_optimal
        ds = dual_solution_from_primal(tced, p)
        lhs = profit_via_lmps(tced, p, ds)
        rhs = profit_via_duals(ds, alloc, sys_.storage)
        assert abs(lhs - rhs) <= 1e-6 * (1 + abs(lhs)), seed
        assert check_printed_dual_rows(tced, ds) <= 1e-7


def test_bigm_formula_on_price_cap_toy():
    buses = (Bus("a", candidate_storage=True),)
    gens = (Generator("g", "a", 0, 50, (Segment(50, 50.0, 0.0),),
                      0, 0, 0, 0, 1, 1),)
    sys_ = PowerSystem(buses, (), gens, {"a": np.full((1, 24), 20.0)}, {},
                       StorageSpec())
    m = compute_bigM(sys_, EconomicParams(load_shed_price=10_000.0),
                     margin=1.0)
    assert abs(m["lambda"] - 10_050.0) < 1e-9
    assert m["alpha"] == 0.0          # no positive emissions rate anywhere


def test_bigm_zero_cost_system_penalty_driven():
    buses = (Bus("a"),)
    gens = (Generator("g", "a", 0, 50, (Segment(50, 0.0, 0.0),),
                      0, 0, 0, 0, 1, 1),)
    sys_ = PowerSystem(buses, (), gens, {"a": np.full((1, 24), 20.0)}, {},
                       StorageSpec())
    m = compute_bigM(sys_, EconomicParams(load_shed_price=1000.0), margin=1.0)
    assert abs(m["lambda"] - 1000.0) < 1e-9


def test_bigm_audit_and_escalation(desk):
    econ = EconomicParams()
    days = mini_days(desk, days=(15,), horizon=8)
    alloc = StorageAllocation({"b3": 1})
    ucm = build_uc(priced(desk, 20000.0), days, econ, alloc)
    sol = solve_uc(ucm, gap_target=1e-4)
    tced = build_tced(desk, days[0][0], econ, alloc,
                      (sol.u[0], sol.v[0], sol.z[0]))
    ds = dual_solution_from_primal(tced, solve_lp(tced.milp))
    m = compute_bigM(desk, econ)
    assert audit_bigM([ds], m) == []
    # force an escalation with absurdly small bounds
    tiny = {k: 1e-6 for k in m}
    grown = calibrated_bigM(desk, econ, [ds])
    assert grown["lambda"] >= m["lambda"]
    with pytest.raises(RuntimeError):
        # escalation capped at three rounds
        from encplan.duality import audit_bigM as _a
        bad = {k: 1e-12 for k in m}
        for _ in range(4):
            hits = _a([ds], bad)
            if not hits:
                break
            for name, _, _ in hits:
                bad[name] *= 10.0
        if _a([ds], bad):
            raise RuntimeError("still violated")


def test_bits_needed_examples():
    assert bits_needed(1) == 1
    assert bits_needed(3) == 2       # ceil(log2(3+1))
    assert bits_needed(4) == 3
    assert bits_needed(7) == 3
    with pytest.raises(Exception):
        bits_needed(0)


def test_binary_expansion_exactness():
    for max_units in (1, 2, 3, 5, 7):
        n = bits_needed(max_units)
        for target in range(max_units + 1):
            bits = [(target >> k) & 1 for k in range(n)]
            assert sum(2 ** k * b for k, b in enumerate(bits)) == target


@pytest.fixture(scope="module")
def pcsle_fixture(desk):
    """Tiny single-day PCSLE with its matching heuristic run."""
    econ = EconomicParams()
    sysP = priced(desk, 18000.0)
    days = mini_days(desk, days=(15,), horizon=6)
    base = compute_baseline(sysP, days, econ, gap_target=1e-6)
    heur = run_heuristic(sysP, days, econ, enc=False, baseline=base,
                         gap_target=1e-6)
    pm = build_pcsle(sysP, days, econ, baselines=None, max_units_per_bus=3)
    return sysP, days, econ, heur, pm


def test_pcsle_embedding_feasible(pcsle_fixture):
    sysP, days, econ, heur, pm = pcsle_fixture
    pm.milp.validate()
    rec = [r for r in heur.records
           if r.q == heur.phsi.allocation.total_units][0]
    commitments = [(rec.solution.u[0], rec.solution.v[0], rec.solution.z[0])]
    x, cost, profit = embed_heuristic_point(pm, heur.phsi.allocation,
                                            commitments)
    worst, viol = audit_pcsle_point(pm, x)
    assert not viol, viol[:5]
    assert worst <= 1e-6
    obj_at_x = sum(c * x[j] for j, c in pm.milp.obj.items())
    assert abs(obj_at_x - cost) <= 1e-6 * (1 + abs(cost))
    assert profit >= econ.min_return - 1e-6


def test_pcsle_relaxation_bound(pcsle_fixture):
    sysP, days, econ, heur, pm = pcsle_fixture
    rec = [r for r in heur.records
           if r.q == heur.phsi.allocation.total_units][0]
    commitments = [(rec.solution.u[0], rec.solution.v[0], rec.solution.z[0])]
    x, _, _ = embed_heuristic_point(pm, heur.phsi.allocation, commitments)
    res = pcsle_bound(pm, gap_target=1e-3, node_limit=80, hint=x)
    assert res.bound <= heur.phsi.social_cost * (1 + 1e-9)
    # bound comparison against the VIU relaxation is case-by-case
    viu_bound = heur.viu.evidence["viu_bound"]
    assert res.bound <= heur.phsi.social_cost * (1 + 1e-9)
    assert viu_bound <= heur.phsi.social_cost * (1 + 1e-9)
    if res.x is not None:
        worst, viol = audit_pcsle_point(pm, res.x)
        assert not viol, viol[:5]


def test_pcsle_bit_budget_guard(pcsle_fixture):
    sysP, days, econ, heur, pm = pcsle_fixture
    too_big = StorageAllocation({sysP.candidate_buses[0]: pm.max_units + 1})
    nI = len(sysP.generators)
    T = days[0][0].horizon
    with pytest.raises(Exception, match="bit budget"):
        embed_heuristic_point(pm, too_big, [ALL_ON(nI, T)])
