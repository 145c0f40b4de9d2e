"""Sensitivity sweeps over carbon and storage prices, paired ENC statistics
with the zero-aware signed-rank test, and CSV/SVG reporting.

A sweep cell is (carbon price, effective storage price, enc on/off); one
heuristic run per cell yields the VIU/PhSI/PMSI outcomes together.  Baselines
are computed once per carbon price and shared (storage price cannot affect
the no-storage solve).  Reports are recomputed from the stored cell results,
never from solver logs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import stats

from .system_model import PowerSystem, EconomicParams, ValidationError
from .uc import compute_baseline
from .investment import run_heuristic

PERSPECTIVES = ("VIU", "PhSI", "PMSI")
EXACT_WILCOXON_LIMIT = 25


@dataclass(frozen=True)
class SweepGrid:
    carbon_prices: tuple
    storage_prices: tuple          # effective $/MW-yr
    perspectives: tuple = PERSPECTIVES
    enc_modes: tuple = (False, True)

    def __post_init__(self):
        for name, seq in (("carbon", self.carbon_prices),
                          ("storage", self.storage_prices)):
            vals = list(seq)
            if not vals:
                raise ValidationError(f"empty {name} price axis")
            if sorted(set(vals)) != vals:
                raise ValidationError(f"{name} prices must be ascending, unique")

    def cells(self):
        """Every (carbon, storage, perspective, enc) combination."""
        out = []
        for c in self.carbon_prices:
            for s in self.storage_prices:
                for p in self.perspectives:
                    for e in self.enc_modes:
                        out.append((c, s, p, e))
        return out

    @staticmethod
    def paper_grid() -> "SweepGrid":
        return SweepGrid(tuple(float(c) for c in range(0, 101, 10)),
                         tuple(float(s) for s in range(25_000, 60_001, 2_500)))


@dataclass
class CellResult:
    carbon: float
    storage_price: float
    perspective: str
    enc: bool
    q_units: int
    storage_mw: float
    social_cost: float
    profit: float
    emissions: float
    emissions_by_day: list
    baseline_emissions: float
    baseline_by_day: list
    enc_ok: bool
    error: str = ""


@dataclass(frozen=True)
class PairedSample:
    carbon: float
    storage_price: float
    perspective: str
    with_enc: float
    without_enc: float

    @property
    def delta(self) -> float:
        return self.with_enc - self.without_enc


def _cell_econ(econ: EconomicParams, carbon: float) -> EconomicParams:
    return EconomicParams(
        carbon_price=float(carbon),
        load_shed_price=econ.load_shed_price,
        ren_shed_price=econ.ren_shed_price,
        enc_multiplier=econ.enc_multiplier,
        days_per_year=econ.days_per_year,
        min_return=econ.min_return)


def _priced_system(system: PowerSystem, price: float) -> PowerSystem:
    return PowerSystem(system.buses, system.lines, system.generators,
                       dict(system.demand), dict(system.renewables),
                       system.storage.with_effective_price(float(price)))


def _run_cell(system, rep_days, econ, carbon, price, enc, perspectives,
              gap_target, unit_cap, baseline):
    """One (carbon, price, enc) heuristic run -> CellResult per perspective."""
    cell_econ = _cell_econ(econ, carbon)
    priced = _priced_system(system, price)
    rows = []
    try:
        heur = run_heuristic(priced, rep_days, cell_econ, enc=enc,
                             gap_target=gap_target, unit_cap=unit_cap,
                             baseline=baseline)
        outcomes = {"VIU": heur.viu, "PhSI": heur.phsi, "PMSI": heur.pmsi}
        base_by_day = heur.baseline_emissions
        base_total = float(np.dot(_probs(rep_days), base_by_day))
        for persp in perspectives:
            o = outcomes[persp]
            enc_ok = (not enc) or all(
                e <= cell_econ.enc_multiplier * b + 1e-6
                for e, b in zip(o.emissions_by_day, base_by_day))
            rows.append(CellResult(
                float(carbon), float(price), persp, enc,
                o.allocation.total_units,
                o.allocation.total_power_mw(priced.storage),
                o.social_cost, o.profit, o.total_emissions,
                list(o.emissions_by_day), base_total,
                list(base_by_day), enc_ok))
    except Exception as exc:   # cell isolation by design
        for persp in perspectives:
            rows.append(CellResult(
                float(carbon), float(price), persp, enc,
                0, 0.0, math.nan, math.nan, math.nan, [],
                math.nan, [], False, error=str(exc)))
    return rows


def run_sweep(system: PowerSystem, rep_days, grid: SweepGrid,
              econ: EconomicParams | None = None, gap_target: float = 1e-3,
              unit_cap: int | None = None, progress=None, workers: int = 1) -> list:
    """Full (carbon x storage x enc) sweep; per-cell failures are recorded
    as error rows and the sweep continues.

    Baselines are computed once per carbon price (sequentially) and shared;
    with workers > 1 the independent cells run in a process pool and results
    are merged in deterministic grid order.
    """
    econ = econ or EconomicParams()
    baselines = {}
    for carbon in grid.carbon_prices:
        baselines[carbon] = compute_baseline(
            _priced_system(system, grid.storage_prices[0]),
            rep_days, _cell_econ(econ, carbon), gap_target=gap_target)

    jobs = [(carbon, price, enc)
            for carbon in grid.carbon_prices
            for price in grid.storage_prices
            for enc in grid.enc_modes]

    def run_one(job):
        carbon, price, enc = job
        return _run_cell(system, rep_days, econ, carbon, price, enc,
                         grid.perspectives, gap_target, unit_cap,
                         baselines[carbon])

    results = []
    if workers <= 1:
        for job in jobs:
            results.extend(run_one(job))
            if progress:
                progress(*job)
    else:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(_run_cell, system, rep_days, econ, carbon,
                                price, enc, grid.perspectives, gap_target,
                                unit_cap, baselines[carbon]): (carbon, price, enc)
                    for (carbon, price, enc) in jobs}
            gathered = {}
            for fut in cf.as_completed(futs):
                gathered[futs[fut]] = fut.result()
                if progress:
                    progress(*futs[fut])
        for job in jobs:   # deterministic merge order
            results.extend(gathered[job])
    return results


def _probs(rep_days):
    out = []
    for rd in rep_days:
        out.append(rd.probability if hasattr(rd, "probability") else rd[1])
    return out


def paired_samples(results, value=lambda r: r.storage_mw) -> dict:
    """Per-perspective PairedSample lists keyed by perspective."""
    by_key = {}
    for r in results:
        if r.error:
            continue
        by_key[(r.carbon, r.storage_price, r.perspective, r.enc)] = value(r)
    out = {p: [] for p in PERSPECTIVES}
    seen = set()
    for (carbon, price, persp, enc) in by_key:
        key = (carbon, price, persp)
        if key in seen:
            continue
        seen.add(key)
        if (carbon, price, persp, True) in by_key and \
           (carbon, price, persp, False) in by_key:
            out.setdefault(persp, []).append(PairedSample(
                carbon, price, persp,
                by_key[(carbon, price, persp, True)],
                by_key[(carbon, price, persp, False)]))
    for p in out:
        out[p].sort(key=lambda s: (s.carbon, s.storage_price))
    return out


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank with zeros retained in ranking then dropped (Pratt)
# ---------------------------------------------------------------------------


def _signed_ranks(deltas):
    d = np.asarray(deltas, dtype=float)
    n = len(d)
    ranks = stats.rankdata(np.abs(d))        # midranks over ALL values, zeros in
    nz = d != 0
    return d, ranks, nz


def wilcoxon_pratt(deltas) -> dict:
    """Two-sided signed-rank test; zeros are ranked, then dropped from the
    statistic.  Exact distribution (rank-sum convolution) up to n=25 nonzero
    magnitudes; beyond that a normal approximation with tie and zero
    corrections.  Returns {"statistic": W+, "p_value": p, "n": usable}.
    """
    d, ranks, nz = _signed_ranks(deltas)
    if len(d) == 0:
        raise ValidationError("need at least one delta")
    m = int(nz.sum())
    w_plus = float(ranks[nz & (d > 0)].sum())
    if m == 0:
        return {"statistic": 0.0, "p_value": 1.0, "n": 0}
    if m <= EXACT_WILCOXON_LIMIT:
        p = _exact_two_sided(ranks[nz], w_plus)
    else:
        p = _approx_two_sided(ranks, nz, w_plus)
    return {"statistic": w_plus, "p_value": float(min(1.0, p)), "n": m}


def _exact_two_sided(rnz, w_obs) -> float:
    # distribution of W+ over all sign assignments via convolution on the
    # half-rank lattice (midranks are multiples of 1/2)
    units = np.rint(np.asarray(rnz) * 2).astype(np.int64)
    total = int(units.sum())
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    for u in units:
        nxt = dist.copy()
        nxt[u:] += dist[:len(dist) - u]
        dist = nxt
    dist /= dist.sum()
    w2 = w_obs * 2
    le = dist[:int(math.floor(w2 + 1e-9)) + 1].sum()
    ge = dist[int(math.ceil(w2 - 1e-9)):].sum()
    return 2.0 * min(le, ge)


def _approx_two_sided(ranks, nz, w_plus) -> float:
    n = len(ranks)
    z = n - int(nz.sum())
    mean = (n * (n + 1) / 2 - z * (z + 1) / 2) / 2.0
    var = (n * (n + 1) * (2 * n + 1) - z * (z + 1) * (2 * z + 1)) / 24.0
    _, counts = np.unique(ranks[nz], return_counts=True)
    var -= float(((counts ** 3 - counts) / 48.0).sum())
    if var <= 0:
        return 1.0
    zscore = (w_plus - mean) / math.sqrt(var)
    return float(2.0 * stats.norm.sf(abs(zscore)))


# ---------------------------------------------------------------------------
# report generation
# ---------------------------------------------------------------------------


def write_sweep_csv(results, path, header_comment: str = "") -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["carbon_usd_t", "storage_usd_mw_yr", "perspective", "enc",
                    "q_units", "storage_mw", "social_cost_usd", "profit_usd",
                    "emissions_t_day", "baseline_t_day", "enc_ok", "error"])
        for r in sorted(results, key=lambda r: (r.carbon, r.storage_price,
                                                r.perspective, r.enc)):
            w.writerow([r.carbon, r.storage_price, r.perspective, int(r.enc),
                        r.q_units, repr(r.storage_mw), repr(r.social_cost),
                        repr(r.profit), repr(r.emissions),
                        repr(r.baseline_emissions), int(r.enc_ok), r.error])
    return path


def read_sweep_csv(path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    for row in csv.DictReader(rows):
        out.append(CellResult(
            float(row["carbon_usd_t"]), float(row["storage_usd_mw_yr"]),
            row["perspective"], bool(int(row["enc"])), int(row["q_units"]),
            float(row["storage_mw"]), float(row["social_cost_usd"]),
            float(row["profit_usd"]), float(row["emissions_t_day"]),
            [], float(row["baseline_t_day"]), [], bool(int(row["enc_ok"])),
            row["error"]))
    return out


def emissions_report(results, outdir, make_figures: bool = True) -> dict:
    """Summary tables (+ optional SVG heatmaps) from sweep results.

    Per perspective: mean storage MW with/without the ENC, mean emissions and
    cost deltas (enc-off arm as denominator), Wilcoxon p on storage MW, and
    the ENC audit flag count.  n=1 pairs are flagged instead of tested.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    pairs_mw = paired_samples(results, lambda r: r.storage_mw)
    pairs_em = paired_samples(results, lambda r: r.emissions)
    pairs_cost = paired_samples(results, lambda r: r.social_cost)

    summary = {}
    for persp in PERSPECTIVES:
        mw = pairs_mw.get(persp, [])
        if not mw:
            continue
        em = pairs_em[persp]
        co = pairs_cost[persp]
        em_delta = [100.0 * s.delta / s.without_enc for s in em if s.without_enc]
        cost_delta = [100.0 * s.delta / s.without_enc for s in co if s.without_enc]
        row = {
            "perspective": persp,
            "n_pairs": len(mw),
            "mean_mw_enc_off": float(np.mean([s.without_enc for s in mw])),
            "mean_mw_enc_on": float(np.mean([s.with_enc for s in mw])),
            "mean_emissions_delta_pct": float(np.mean(em_delta)) if em_delta else math.nan,
            "mean_cost_delta_pct": float(np.mean(cost_delta)) if cost_delta else math.nan,
        }
        if len(mw) > 1:
            row["wilcoxon_p_storage"] = wilcoxon_pratt(
                [s.delta for s in mw])["p_value"]
        else:
            row["wilcoxon_p_storage"] = math.nan
            row["flag"] = "n=1: no statistics"
        summary[persp] = row

    enc_rows = [r for r in results if r.enc and not r.error]
    audit = {"enc_cells": len(enc_rows),
             "enc_violations": sum(1 for r in enc_rows if not r.enc_ok)}

    with open(outdir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        cols = ["perspective", "n_pairs", "mean_mw_enc_off", "mean_mw_enc_on",
                "mean_emissions_delta_pct", "mean_cost_delta_pct",
                "wilcoxon_p_storage"]
        w = csv.writer(fh)
        w.writerow(cols)
        for persp in PERSPECTIVES:
            if persp in summary:
                w.writerow([summary[persp].get(c, "") for c in cols])
    (outdir / "audit.json").write_text(json.dumps(audit, indent=1), "utf-8")

    if make_figures:
        _heatmap_figure(results, outdir / "storage_power.svg",
                        lambda r: r.storage_mw, "storage power (MW)")
        _heatmap_figure(results, outdir / "emissions_impact.svg",
                        lambda r: (100.0 * (r.emissions - r.baseline_emissions)
                                   / r.baseline_emissions
                                   if r.baseline_emissions else math.nan),
                        "emissions vs baseline (%)")
    return {"summary": summary, "audit": audit}


def _heatmap_figure(results, path, value, label):
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "encplan"
    import matplotlib.pyplot as plt

    ok = [r for r in results if not r.error]
    carbons = sorted({r.carbon for r in ok})
    prices = sorted({r.storage_price for r in ok})
    lookup = {(r.carbon, r.storage_price, r.perspective, r.enc): value(r)
              for r in ok}

    fig, axes = plt.subplots(3, len(PERSPECTIVES),
                             figsize=(3.2 * len(PERSPECTIVES), 8.0),
                             squeeze=False)
    row_modes = [("no ENC", False), ("ENC", True), ("ENC impact", None)]
    for col, persp in enumerate(PERSPECTIVES):
        for rowi, (title, enc) in enumerate(row_modes):
            grid = np.full((len(prices), len(carbons)), math.nan)
            for i, p in enumerate(prices):
                for j, c in enumerate(carbons):
                    if enc is None:
                        a = lookup.get((c, p, persp, True))
                        b = lookup.get((c, p, persp, False))
                        if a is not None and b is not None:
                            grid[i, j] = a - b
                    else:
                        v = lookup.get((c, p, persp, enc))
                        if v is not None:
                            grid[i, j] = v
            ax = axes[rowi][col]
            im = ax.imshow(grid, origin="lower", aspect="auto",
                           cmap="viridis" if enc is not None else "coolwarm")
            ax.set_title(f"{persp}: {title}", fontsize=9)
            ax.set_xticks(range(len(carbons)), [f"{c:g}" for c in carbons],
                          fontsize=7)
            ax.set_yticks(range(len(prices)), [f"{p/1000:g}k" for p in prices],
                          fontsize=7)
            if rowi == 2:
                ax.set_xlabel("carbon $/t", fontsize=8)
            if col == 0:
                ax.set_ylabel("storage $/MW-yr", fontsize=8)
            fig.colorbar(im, ax=ax, shrink=0.8)
    fig.suptitle(label)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
