"""Command-line entry points: reduce | plan | sweep | verify | desk.

Reproducibility: every run resolves to a RunConfig whose hash (with the
seed) is embedded in all outputs; re-running a command with the same config
produces byte-identical files.  Config files are flat key=value text and any
command-line flag overrides the file.

Exit codes: 0 ok, 1 domain error (bad data, solver failure, failed audit),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, asdict, fields
from pathlib import Path

import numpy as np

from . import __version__
from .system_model import (PowerSystem, StorageSpec, EconomicParams,
                           ValidationError, load_system)
from .scenario import (reduce_days, smooth_boundaries, downsample,
                       export_repdays, import_repdays, RepresentativeDay)
from .uc import build_uc, build_investment, solve_uc, StorageAllocation, \
    compute_baseline, audit_dispatch, audit_enc
from .investment import run_heuristic, verify_pmsi_local, assess_phsi_gap
from .analysis import (SweepGrid, run_sweep, write_sweep_csv, emissions_report,
                       config_hash)
from .milp import export_mps, import_mps


@dataclass
class RunConfig:
    system: str = ""
    k: int = 2
    variance: float = 0.95
    smooth: bool = True
    horizon: int = 24
    unit_power: float = 25.0
    duration: float = 4.0
    efficiency: float = 0.9
    chi: float = 1.0
    pload: float = 10_000.0
    pren: float = 0.0
    days_per_year: float = 365.0
    min_return: float = 0.0
    carbon: float = 0.0
    storage_price: float = 30_000.0
    carbon_prices: str = ""
    storage_prices: str = ""
    enc: str = "off"             # off | on | both (sweep)
    perspective: str = "all"
    seed: int = 0
    gap: float = 1e-3
    solver: str = "builtin"      # builtin | mps-only
    workers: int = 1
    out: str = "out"

    def hash(self) -> str:
        payload = asdict(self)
        for transient in ("out", "workers"):   # not inputs to the computation
            payload.pop(transient, None)
        return config_hash(payload)

    def econ(self) -> EconomicParams:
        return EconomicParams(carbon_price=self.carbon,
                              load_shed_price=self.pload,
                              ren_shed_price=self.pren,
                              enc_multiplier=self.chi,
                              days_per_year=self.days_per_year,
                              min_return=self.min_return)

    def storage_spec(self) -> StorageSpec:
        return StorageSpec(duration=self.duration,
                           efficiency=self.efficiency,
                           unit_power=self.unit_power).with_effective_price(
                               self.storage_price)


def load_config_file(path) -> dict:
    """Flat key=value lines; '#' comments; types coerced via RunConfig."""
    text = Path(path).read_text(encoding="utf-8")
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        raw[k.replace("-", "_")] = v
    out = {}
    typemap = {f.name: f.type for f in fields(RunConfig)}
    for k, v in raw.items():
        if k not in typemap:
            raise ValidationError(f"{path}: unknown config key {k!r}")
        t = typemap[k]
        if t in ("int", int):
            out[k] = int(v)
        elif t in ("float", float):
            out[k] = float(v)
        elif t in ("bool", bool):
            out[k] = v.lower() in ("1", "true", "yes", "on")
        else:
            out[k] = v
    return out


def _parser():
    p = argparse.ArgumentParser(
        prog="encplan",
        description="Emissions-neutral storage investment planning")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="key=value config file")
        sp.add_argument("--system", help="system CSV directory")
        sp.add_argument("--out", help="output file/directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--gap", type=float, help="MILP optimality gap target")
        sp.add_argument("--k", type=int, help="representative day count")
        sp.add_argument("--variance", type=float, help="PCA variance target")
        sp.add_argument("--horizon", type=int,
                        help="hours per representative day (divides 24)")
        sp.add_argument("--unit-power", type=float, dest="unit_power")
        sp.add_argument("--duration", type=float)
        sp.add_argument("--efficiency", type=float)
        sp.add_argument("--chi", type=float)
        sp.add_argument("--pload", type=float)
        sp.add_argument("--pren", type=float)
        sp.add_argument("--days-per-year", type=float, dest="days_per_year")
        sp.add_argument("--min-return", type=float, dest="min_return")
        return sp

    sp = add_common(sub.add_parser("reduce", help="pick representative days"))
    sp.add_argument("--no-smooth", action="store_true",
                    help="skip boundary-hour smoothing")

    sp = add_common(sub.add_parser("plan", help="solve one investment cell"))
    sp.add_argument("--repdays", help="repdays.csv from `reduce`")
    sp.add_argument("--carbon", type=float)
    sp.add_argument("--storage-price", type=float, dest="storage_price")
    sp.add_argument("--enc", choices=["on", "off"])
    sp.add_argument("--perspective",
                    choices=["all", "viu", "phsi", "pmsi"])
    sp.add_argument("--solver", choices=["builtin", "mps-only"])

    sp = add_common(sub.add_parser("sweep", help="price-grid sensitivity run"))
    sp.add_argument("--repdays")
    sp.add_argument("--carbon-prices", dest="carbon_prices",
                    help="comma-separated $/ton values")
    sp.add_argument("--storage-prices", dest="storage_prices",
                    help="comma-separated $/MW-yr values")
    sp.add_argument("--enc", choices=["on", "off", "both"])
    sp.add_argument("--workers", type=int)
    sp.add_argument("--no-figures", action="store_true")

    sp = add_common(sub.add_parser("verify", help="run invariant/audit suites"))

    sp = sub.add_parser("desk", help="write the bundled 5-bus demo dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--days", type=int, default=365)
    sp.add_argument("--seed", type=int, default=2024)
    return p


def make_config(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        base = load_config_file(args.config)
    cfg = RunConfig(**base)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    if getattr(args, "no_smooth", False):
        cfg.smooth = False
    if not cfg.system:
        raise ValidationError("--system (or system= in the config) is required")
    return cfg


def _load_rep_days(cfg: RunConfig, system: PowerSystem, repdays_path=None):
    profiles = system.daily_profiles()
    if repdays_path:
        reps = import_repdays(repdays_path, profiles)
    else:
        reps = reduce_days(profiles, cfg.k, cfg.variance, cfg.seed)
    if cfg.smooth:
        reps = [RepresentativeDay(smooth_boundaries(r.profile), r.probability,
                                  r.member_days, r.source_day) for r in reps]
    if cfg.horizon != 24:
        reps = [RepresentativeDay(downsample(r.profile, cfg.horizon),
                                  r.probability, r.member_days, r.source_day)
                for r in reps]
    return reps


def cmd_reduce(cfg: RunConfig) -> int:
    system = load_system(cfg.system, cfg.storage_spec())
    reps = reduce_days(system.daily_profiles(), cfg.k, cfg.variance, cfg.seed)
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"# config={cfg.hash()} seed={cfg.seed}\n")
    with open(out, "a", newline="", encoding="utf-8") as fh:
        import csv as _csv
        w = _csv.writer(fh)
        w.writerow(["day_index", "probability", "member_days"])
        for r in reps:
            w.writerow([r.source_day, repr(r.probability),
                        ";".join(str(m) for m in r.member_days)])
    print(f"wrote {out} ({len(reps)} representative days)")
    return 0


def _outcome_payload(tag, outcome, cfg, extra=None):
    payload = {
        "config": cfg.hash(),
        "seed": cfg.seed,
        "perspective": tag,
        "allocation": dict(outcome.allocation.units_per_bus),
        "battery_cost_usd": outcome.battery_cost,
        "social_cost_usd": outcome.social_cost,
        "profit_usd": outcome.profit,
        "emissions_t_day": outcome.total_emissions,
        "emissions_by_day": outcome.emissions_by_day,
        "enc_active": outcome.enc_active,
        "evidence": outcome.evidence,
    }
    if extra:
        payload.update(extra)
    return payload


def cmd_plan(cfg: RunConfig, repdays_path=None) -> int:
    system = load_system(cfg.system, cfg.storage_spec())
    reps = _load_rep_days(cfg, system, repdays_path)
    econ = cfg.econ()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)

    if cfg.solver == "mps-only":
        base_model = build_uc(system, reps, econ, StorageAllocation.empty())
        export_mps(base_model.milp, outdir / "baseline_uc.mps")
        viu_model = build_investment(system, reps, econ)
        export_mps(viu_model.milp, outdir / "viu.mps")
        manifest = {"config": cfg.hash(), "seed": cfg.seed,
                    "files": ["baseline_uc.mps", "viu.mps"],
                    "note": "solve externally; no builtin solve requested"}
        (outdir / "manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True), "utf-8")
        print(f"wrote MPS exports to {outdir} (no solve)")
        return 0

    heur = run_heuristic(system, reps, econ, enc=(cfg.enc == "on"),
                         gap_target=cfg.gap)
    outcomes = {"viu": heur.viu, "phsi": heur.phsi, "pmsi": heur.pmsi}
    wanted = outcomes if cfg.perspective == "all" else \
        {cfg.perspective: outcomes[cfg.perspective]}
    for tag, o in wanted.items():
        extra = {}
        if tag == "phsi":
            extra["gap_vs_viu_bound"] = assess_phsi_gap(
                o, heur.viu.evidence["viu_bound"])
        (outdir / f"outcome_{tag}.json").write_text(
            json.dumps(_outcome_payload(tag, o, cfg, extra), indent=1,
                       sort_keys=True), "utf-8")
    import csv as _csv
    with open(outdir / "records.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config={cfg.hash()} seed={cfg.seed}\n")
        w = _csv.writer(fh)
        w.writerow(["q", "social_cost", "net_profit", "emissions_t_day",
                    "allocation"])
        for r in heur.records:
            w.writerow([r.q, repr(r.social_cost), repr(r.net_profit),
                        repr(r.emissions),
                        json.dumps(dict(r.allocation.units_per_bus),
                                   sort_keys=True)])
    print(f"wrote outcomes for {', '.join(wanted)} to {outdir}")
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    if not cfg.carbon_prices or not cfg.storage_prices:
        raise ValidationError("sweep needs --carbon-prices and --storage-prices")
    system = load_system(cfg.system, cfg.storage_spec())
    reps = _load_rep_days(cfg, system, getattr(args, "repdays", None))
    carbons = tuple(float(s) for s in cfg.carbon_prices.split(","))
    prices = tuple(float(s) for s in cfg.storage_prices.split(","))
    enc_modes = {"on": (True,), "off": (False,), "both": (False, True)}[cfg.enc]
    grid = SweepGrid(carbons, prices, enc_modes=enc_modes)
    results = run_sweep(system, reps, grid, cfg.econ(), gap_target=cfg.gap,
                        workers=cfg.workers)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(results, outdir / "sweep.csv",
                    f"config={cfg.hash()} seed={cfg.seed}")
    report = emissions_report(results, outdir / "report",
                              make_figures=not getattr(args, "no_figures", False))
    failures = [r for r in results if r.error]
    if failures:
        (outdir / "failures.json").write_text(json.dumps(
            [{"carbon": r.carbon, "storage": r.storage_price,
              "perspective": r.perspective, "enc": r.enc, "error": r.error}
             for r in failures], indent=1), "utf-8")
        print(f"{len(failures)} cells failed; see failures.json",
              file=sys.stderr)
    print(f"wrote sweep ({len(results)} rows) and report to {outdir}")
    return 1 if failures else 0


def cmd_verify(cfg: RunConfig) -> int:
    """Invariant/audit battery against a system directory."""
    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
            print(f"PASS {name}")
        except Exception as exc:
            checks.append((name, False, str(exc)))
            print(f"FAIL {name}: {exc}")

    system = load_system(cfg.system, cfg.storage_spec())
    profiles = system.daily_profiles()
    k = min(cfg.k, 2)
    reps = reduce_days(profiles, k, cfg.variance, cfg.seed)
    horizon = cfg.horizon if cfg.horizon != 24 else 8
    reps = [RepresentativeDay(downsample(smooth_boundaries(r.profile), horizon),
                              r.probability, r.member_days, r.source_day)
            for r in reps]
    econ = cfg.econ()

    state = {}

    def _solve_base():
        ucm = build_uc(system, reps, econ, StorageAllocation.empty())
        sol = solve_uc(ucm, gap_target=cfg.gap)
        worst, viol = audit_dispatch(ucm, sol)
        if viol:
            raise RuntimeError(f"{len(viol)} violations, worst {worst:.2e}")
        state["base"] = (ucm, sol)

    check("dispatch feasibility + accounting audit", _solve_base)

    def _enc_round():
        ucm, sol = state["base"]
        enc_ucm = build_uc(system, reps, econ, StorageAllocation.empty(),
                           enc_baselines=sol.emissions_by_day)
        enc_sol = solve_uc(enc_ucm, gap_target=cfg.gap)
        if not all(audit_enc(enc_ucm, enc_sol)):
            raise RuntimeError("ENC audit failed on the baseline round trip")

    check("ENC round trip on baselines", _enc_round)

    def _duality():
        from .duality import (build_tced, solve_tced_pair,
                              dual_solution_from_primal,
                              check_printed_dual_rows, profit_via_duals,
                              profit_via_lmps, compute_bigM, audit_bigM)
        ucm, sol = state["base"]
        bus = system.candidate_buses[0] if system.candidate_buses \
            else system.bus_ids[0]
        alloc = StorageAllocation({bus: 1})
        ucm1 = build_uc(system, reps, econ, alloc)
        sol1 = solve_uc(ucm1, gap_target=cfg.gap)
        duals = []
        for a in range(len(reps)):
            tced = build_tced(system, ucm1.profiles[a], econ, alloc,
                              (sol1.u[a], sol1.v[a], sol1.z[a]))
            p, d, dual_obj, _, _ = solve_tced_pair(tced)
            if abs(dual_obj - p.objective) > 1e-7 * (1 + abs(p.objective)):
                raise RuntimeError(f"strong duality gap day {a}")
            ds = dual_solution_from_primal(tced, p)
            if check_printed_dual_rows(tced, ds) > 1e-7:
                raise RuntimeError(f"published dual rows violated day {a}")
            lhs = profit_via_lmps(tced, p, ds)
            rhs = profit_via_duals(ds, alloc, system.storage)
            if abs(lhs - rhs) > 1e-6 * (1 + abs(lhs)):
                raise RuntimeError(f"profit identity broken day {a}")
            duals.append(ds)
        hits = audit_bigM(duals, compute_bigM(system, econ))
        if hits:
            raise RuntimeError(f"big-M audit hits: {hits}")

    check("strong duality + printed rows + profit identity + big-M", _duality)

    def _mps():
        import tempfile
        ucm, _ = state["base"]
        with tempfile.TemporaryDirectory() as td:
            p1 = Path(td) / "m.mps"
            export_mps(ucm.milp, p1)
            m2 = import_mps(p1)
            p2 = Path(td) / "m2.mps"
            export_mps(m2, p2)
            if p1.read_bytes() != p2.read_bytes():
                raise RuntimeError("MPS round trip not byte-identical")

    check("MPS export/import round trip", _mps)

    bad = [c for c in checks if not c[1]]
    print(f"{len(checks) - len(bad)}/{len(checks)} checks passed")
    return 1 if bad else 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "desk":
            from .desk import write_desk_dataset
            write_desk_dataset(args.out, days=args.days, seed=args.seed)
            print(f"wrote desk dataset to {args.out}")
            return 0
        cfg = make_config(args)
        if args.command == "reduce":
            return cmd_reduce(cfg)
        if args.command == "plan":
            return cmd_plan(cfg, getattr(args, "repdays", None))
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        if args.command == "verify":
            return cmd_verify(cfg)
        raise ValidationError(f"unknown command {args.command}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:       # solver/runtime failures are domain errors
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
