"""PCA + k-means day reduction, boundary smoothing, exports."""

import numpy as np
import pytest

from encplan.scenario import (reduce_days, smooth_boundaries, pca_reduce,
                              kmeans_lloyd, downsample, export_repdays,
                              import_repdays)
from encplan.system_model import DailyProfile, ValidationError


def test_reduce_desk_k5(desk):
    profiles = desk.daily_profiles()
    reps, diag = reduce_days(profiles, 5, 0.95, seed=7, return_diagnostics=True)
    assert len(reps) == 5
    assert abs(sum(r.probability for r in reps) - 1.0) < 1e-12
    for r in reps:
        assert r.probability == len(r.member_days) / 365
    assert diag.explained_variance >= 0.95
    # minimality: one fewer component falls below the target
    x = np.concatenate(
        [[np.concatenate([p.demand[b] for b in sorted(p.demand)]
                         + [p.renewables[b] for b in sorted(p.renewables)])
          for p in profiles]])
    mean = x.mean(axis=0)
    std = np.where(x.std(axis=0) > 0, x.std(axis=0), 1.0)
    xs = (x - mean) / std
    s = np.linalg.svd(xs, compute_uv=False)
    cum = np.cumsum(s ** 2) / (s ** 2).sum()
    assert cum[diag.n_components - 1] >= 0.95
    if diag.n_components > 1:
        assert cum[diag.n_components - 2] < 0.95
    # weighted mean daily load close to the full-year mean
    full = np.mean([p.total_demand() for p in profiles])
    weighted = sum(r.probability * r.profile.total_demand() for r in reps)
    assert abs(weighted - full) / full <= 0.02


def test_pca_reconstruction_bound(desk90):
    profiles = desk90.daily_profiles()
    x = np.array([np.concatenate(
        [p.demand[b] for b in sorted(p.demand)]
        + [p.renewables[b] for b in sorted(p.renewables)]) for p in profiles])
    target = 0.9
    z, ncomp, expl, mean, scale, comps = pca_reduce(x, target)
    xs = (x - mean) / scale
    recon = z @ comps
    residual = ((xs - recon) ** 2).sum()
    total = (xs ** 2).sum()
    assert residual <= (1 - target) * total + 1e-9 * total


def test_kmeans_wcss_monotone_and_deterministic(desk90):
    profiles = desk90.daily_profiles()
    x = np.array([np.concatenate([p.demand[b] for b in sorted(p.demand)])
                  for p in profiles])
    z, *_ = pca_reduce(x, 0.95)
    a1, c1, trace = kmeans_lloyd(z, 4, seed=3)
    assert all(w2 <= w1 + 1e-9 * (1 + w1) for w1, w2 in zip(trace, trace[1:]))
    a2, c2, _ = kmeans_lloyd(z, 4, seed=3)
    assert np.array_equal(a1, a2)
    assert np.array_equal(c1, c2)


def test_reduce_determinism_bit_identical(desk90):
    profiles = desk90.daily_profiles()
    r1 = reduce_days(profiles, 3, 0.95, seed=11)
    r2 = reduce_days(profiles, 3, 0.95, seed=11)
    assert [r.source_day for r in r1] == [r.source_day for r in r2]
    assert [r.member_days for r in r1] == [r.member_days for r in r2]
    for a, b in zip(r1, r2):
        for bus in a.profile.demand:
            assert np.array_equal(a.profile.demand[bus], b.profile.demand[bus])


def test_k1_single_cluster(desk90):
    reps = reduce_days(desk90.daily_profiles(), 1, 0.95, seed=0)
    assert len(reps) == 1
    assert reps[0].probability == 1.0
    assert len(reps[0].member_days) == 90


def test_two_template_recovery():
    rng = np.random.default_rng(3)
    t_low = np.array([100.0] * 12 + [200.0] * 12)
    t_high = np.full(24, 300.0)
    profs, labels = [], []
    for i in range(10):
        base = t_low if i % 2 == 0 else t_high
        labels.append(i % 2)
        noisy = base * (1 + 0.01 * rng.standard_normal(24))
        profs.append(DailyProfile({"x": noisy}, {}, 24))
    reps = reduce_days(profs, 2, 0.95, seed=1)
    got = sorted(sorted(r.member_days) for r in reps)
    want = sorted([sorted(i for i in range(10) if labels[i] == lab)
                   for lab in (0, 1)])
    assert got == want


def test_k_exceeds_distinct_days():
    prof = DailyProfile({"x": np.full(24, 5.0)}, {}, 24)
    with pytest.raises(ValidationError, match="distinct"):
        reduce_days([prof, prof, prof], 2, 0.95, seed=0)


def test_medoids_are_real_days_nonnegative(desk90):
    reps = reduce_days(desk90.daily_profiles(), 3, 0.95, seed=5)
    for r in reps:
        src = desk90.daily_profiles()[r.source_day]
        for bus in src.demand:
            assert np.array_equal(r.profile.demand[bus], src.demand[bus])
            assert np.all(r.profile.demand[bus] >= 0)


def test_smooth_flat_profile_unchanged():
    flat = DailyProfile({"x": np.full(24, 100.0)}, {}, 24)
    out = smooth_boundaries(flat)
    assert np.allclose(out.demand["x"], 100.0)


def test_smooth_reduces_boundary_gap():
    ramp = np.linspace(100.0, 500.0, 24)
    prof = DailyProfile({"x": ramp.copy()}, {}, 24)
    out = smooth_boundaries(prof)
    net = out.net_load()
    max_step = np.abs(np.diff(net)).max()
    assert abs(net[-1] - net[0]) <= max_step + 1e-9
    # energy preserved exactly by the pairwise blend
    assert abs(out.demand["x"].sum() - ramp.sum()) <= 0.005 * ramp.sum()
    assert np.all(out.demand["x"] >= 0)


def test_smooth_constructed_gap_case():
    # netload(1)=100, netload(24)=500, interior steps of 50
    vals = np.concatenate([np.full(12, 100.0), np.full(12, 500.0)])
    vals[11] = 450.0  # max interior step 350... build explicit steps instead
    vals = np.array([100.0 + 50.0 * min(i, 8) for i in range(24)])
    vals[-1] = 500.0
    prof = DailyProfile({"x": vals}, {}, 24)
    out = smooth_boundaries(prof)
    net = out.net_load()
    assert abs(net[-1] - net[0]) <= np.abs(np.diff(net)).max() + 1e-9


def test_smooth_already_smooth_unchanged():
    hours = np.arange(24)
    wave = 100.0 + 10.0 * np.sin(2 * np.pi * hours / 24)
    prof = DailyProfile({"x": wave}, {}, 24)
    out = smooth_boundaries(prof)
    assert np.allclose(out.demand["x"], wave)


def test_downsample_preserves_energy(desk90):
    prof = desk90.daily_profiles()[10]
    small = downsample(prof, 8)
    assert small.horizon == 8
    for bus in prof.demand:
        assert abs(small.demand[bus].sum() * 3 - prof.demand[bus].sum()) < 1e-9


def test_repdays_export_import(desk90, tmp_path):
    profiles = desk90.daily_profiles()
    reps = reduce_days(profiles, 3, 0.95, seed=2)
    path = tmp_path / "repdays.csv"
    export_repdays(reps, path)
    back = import_repdays(path, profiles)
    assert [r.source_day for r in back] == [r.source_day for r in reps]
    assert [r.probability for r in back] == [r.probability for r in reps]
    assert [r.member_days for r in back] == [r.member_days for r in reps]
