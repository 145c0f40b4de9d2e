"""Representative-day selection: PCA + k-means over daily profiles.

Each historical day becomes a feature vector (every bus's load and renewable
series concatenated).  Features are standardized per series, PCA keeps the
smallest component count reaching the variance target, Lloyd's k-means with
k-means++ seeding runs in the reduced space, and each cluster is represented
by its medoid (a real historical day), so clipping negatives is a no-op in
practice.  Fully deterministic for a fixed seed; k-means is single-threaded
on purpose.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .system_model import DailyProfile, ValidationError


@dataclass(frozen=True)
class RepresentativeDay:
    profile: DailyProfile
    probability: float
    member_days: tuple[int, ...]
    source_day: int            # index of the medoid day in the input list

    def __post_init__(self):
        if not 0 <= self.probability <= 1:
            raise ValidationError("probability outside [0, 1]")


@dataclass
class ReductionDiagnostics:
    n_components: int
    explained_variance: float       # cumulative share at n_components
    wcss_trace: list                # within-cluster sum of squares per Lloyd iter
    assignments: np.ndarray


def _feature_matrix(profiles):
    buses_d = sorted(profiles[0].demand)
    buses_r = sorted(profiles[0].renewables)
    T = profiles[0].horizon
    rows = []
    for p in profiles:
        if p.horizon != T:
            raise ValidationError("profiles disagree on horizon")
        parts = [np.asarray(p.demand[b], dtype=float) for b in buses_d]
        parts += [np.asarray(p.renewables[b], dtype=float) for b in buses_r]
        rows.append(np.concatenate(parts) if parts else np.zeros(0))
    return np.array(rows)


def pca_reduce(x: np.ndarray, variance_target: float):
    """Center/standardize columns, project onto the smallest component count
    whose cumulative explained variance reaches the target.

    Returns (z, n_components, explained, mean, scale, components).
    """
    if not 0 < variance_target <= 1:
        raise ValidationError("variance target must be in (0, 1]")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    xs = (x - mean) / scale
    # SVD of the centered matrix; singular values give component variances
    u, s, vt = np.linalg.svd(xs, full_matrices=False)
    var = s ** 2
    total = var.sum()
    if total == 0:
        return np.zeros((x.shape[0], 1)), 1, 1.0, mean, scale, vt[:1]
    cum = np.cumsum(var) / total
    ncomp = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    ncomp = min(ncomp, len(s))
    z = xs @ vt[:ncomp].T
    return z, ncomp, float(cum[ncomp - 1]), mean, scale, vt[:ncomp]


def kmeans_lloyd(z: np.ndarray, k: int, seed, max_iter: int = 300):
    """k-means++ init followed by Lloyd iterations to convergence.

    Returns (assignments, centers, wcss_trace).  The within-cluster sum of
    squares is recorded per iteration and asserted nonincreasing.
    """
    n = z.shape[0]
    if k > n:
        raise ValidationError(f"k={k} exceeds number of days {n}")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, z.shape[1]))
    first = int(rng.integers(n))
    centers[0] = z[first]
    d2 = ((z - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = z[int(rng.integers(n))]
            continue
        probs = d2 / total
        centers[i] = z[int(rng.choice(n, p=probs))]
        d2 = np.minimum(d2, ((z - centers[i]) ** 2).sum(axis=1))

    assign = np.full(n, -1)
    trace = []
    for _ in range(max_iter):
        dist = ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist.argmin(axis=1)
        wcss = float(dist[np.arange(n), new_assign].sum())
        if trace and wcss > trace[-1] + 1e-9 * (1 + trace[-1]):
            raise AssertionError(f"k-means WCSS increased: {trace[-1]} -> {wcss}")
        trace.append(wcss)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for i in range(k):
            members = z[assign == i]
            if len(members):
                centers[i] = members.mean(axis=0)
    return assign, centers, trace


def reduce_days(profiles, k: int, variance_target: float = 0.95,
                seed: int = 0, return_diagnostics: bool = False):
    """Pick k weighted representative days (cluster medoids) from a year."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    n = len(profiles)
    x = _feature_matrix(profiles)
    if len(np.unique(x, axis=0)) < k:
        raise ValidationError(f"k={k} exceeds the number of distinct days")
    z, ncomp, explained, _, _, _ = pca_reduce(x, variance_target)
    assign, centers, trace = kmeans_lloyd(z, k, seed)

    reps = []
    for i in range(k):
        members = np.where(assign == i)[0]
        if len(members) == 0:
            continue
        d2 = ((z[members] - centers[i]) ** 2).sum(axis=1)
        medoid = int(members[int(np.argmin(d2))])
        src = profiles[medoid]
        prof = DailyProfile(
            demand={b: np.clip(np.array(src.demand[b]), 0.0, None)
                    for b in src.demand},
            renewables={b: np.clip(np.array(src.renewables[b]), 0.0, None)
                        for b in src.renewables},
            horizon=src.horizon)
        reps.append(RepresentativeDay(prof, len(members) / n,
                                      tuple(int(m) for m in members), medoid))
    reps.sort(key=lambda r: r.source_day)
    if return_diagnostics:
        return reps, ReductionDiagnostics(ncomp, explained, trace, assign)
    return reps


def smooth_boundaries(day: DailyProfile) -> DailyProfile:
    """Blend first/last-hour loads until the wrap-around net-load step is no
    larger than the biggest interior step.  Load only; renewables untouched;
    total daily energy preserved exactly (the blend is a pairwise exchange).
    """
    if day.horizon < 2:
        raise ValidationError("need at least two hours to smooth")
    net = day.net_load()
    interior = np.abs(np.diff(net))
    max_step = float(interior.max()) if len(interior) else 0.0
    gap = net[-1] - net[0]
    if abs(gap) <= max_step:
        return day

    load_first = sum(float(day.demand[b][0]) for b in day.demand)
    load_last = sum(float(day.demand[b][-1]) for b in day.demand)
    dl = load_last - load_first          # load part of the wrap step
    dw = dl - gap                        # renewable part (fixed)
    # blended loads: L1' = (1-beta)L1 + beta*LT, LT' symmetric, beta in [0, 1/2]
    # wrap step becomes (1-2*beta)*dl - dw; pick the smallest beta meeting the cap
    if dl == 0:
        return day                       # only renewables drive the step
    lo, hi = (dw - max_step) / dl, (dw + max_step) / dl
    if lo > hi:
        lo, hi = hi, lo
    t = min(1.0, hi)                     # t = 1 - 2*beta, want t as large as possible
    if t < max(0.0, lo):                 # cap unreachable: best effort at t in [0,1]
        t = min(1.0, max(0.0, dw / dl))
    beta = (1.0 - t) / 2.0

    new_demand = {}
    for b, arr in day.demand.items():
        a = np.array(arr)
        first, last = a[0], a[-1]
        a[0] = (1 - beta) * first + beta * last
        a[-1] = (1 - beta) * last + beta * first
        new_demand[b] = a
    return DailyProfile(new_demand,
                        {b: np.array(v) for b, v in day.renewables.items()},
                        day.horizon)


def downsample(day: DailyProfile, hours: int) -> DailyProfile:
    """Block-average a profile to a coarser horizon (energy preserved).

    Used for quick audit runs; `hours` must divide the original horizon.
    """
    if day.horizon % hours != 0:
        raise ValidationError(f"{hours} does not divide horizon {day.horizon}")
    k = day.horizon // hours
    if k == 1:
        return day

    def shrink(series):
        return {b: np.asarray(v).reshape(hours, k).mean(axis=1)
                for b, v in series.items()}

    return DailyProfile(shrink(day.demand), shrink(day.renewables), hours)


def export_repdays(reps, path) -> Path:
    """Write day_index,probability,member_days rows (indices into the source year)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day_index", "probability", "member_days"])
        for r in reps:
            w.writerow([r.source_day, repr(r.probability),
                        ";".join(str(m) for m in r.member_days)])
    return path


def import_repdays(path, profiles):
    """Rebuild representative days from an export plus the source profiles."""
    reps = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
        for row in csv.DictReader(lines):
            idx = int(row["day_index"])
            members = tuple(int(s) for s in row["member_days"].split(";") if s)
            reps.append(RepresentativeDay(profiles[idx], float(row["probability"]),
                                          members, idx))
    return reps
