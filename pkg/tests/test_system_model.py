"""Ingestion, validation, serialization round trip, renewable scaling."""

import numpy as np
import pytest

from encplan.desk import desk_system, write_desk_dataset
from encplan.system_model import (Bus, Line, Generator, Segment, StorageSpec,
                                  PowerSystem, EconomicParams, DailyProfile,
                                  ValidationError, load_system, save_system,
                                  scale_renewables)


def test_desk_dataset_loads(tmp_path):
    write_desk_dataset(tmp_path / "sys", days=30, seed=1)
    sys_ = load_system(tmp_path / "sys")
    assert len(sys_.buses) == 5
    assert len(sys_.lines) == 6
    assert len(sys_.generators) == 5
    assert sys_.num_days == 30
    assert len(sys_.candidate_buses) == 3


def test_single_bus_empty_lines(tmp_path):
    d = tmp_path / "sys"
    d.mkdir()
    (d / "buses.csv").write_text("id,candidate_storage\nalpha,1\n")
    (d / "lines.csv").write_text("id,from,to,reactance_ohm,capacity_mw\n")
    (d / "generators.csv").write_text(
        "id,bus,gmin_mw,gmax_mw,cmin_usd_h,csu_usd,emin_t_h,esu_t,minup_h,"
        "mindown_h,seg1_mw,seg1_usd_mwh,seg1_t_mwh\n"
        "g1,alpha,0,50,0,0,0,0,1,1,50,30,0.4\n")
    sys_ = load_system(d)
    assert len(sys_.buses) == 1 and not sys_.lines


def test_dangling_bus_reference(tmp_path):
    d = tmp_path / "sys"
    d.mkdir()
    (d / "buses.csv").write_text("id,candidate_storage\nalpha,0\n")
    (d / "lines.csv").write_text("id,from,to,reactance_ohm,capacity_mw\n")
    (d / "generators.csv").write_text(
        "id,bus,gmin_mw,gmax_mw,cmin_usd_h,csu_usd,emin_t_h,esu_t,minup_h,"
        "mindown_h,seg1_mw,seg1_usd_mwh,seg1_t_mwh\n"
        "g1,99,0,50,0,0,0,0,1,1,50,30,0.4\n")
    with pytest.raises(ValidationError, match="99"):
        load_system(d)


def test_missing_file_reports_path(tmp_path):
    with pytest.raises(ValidationError, match="buses.csv"):
        load_system(tmp_path)


def test_round_trip_exact(tmp_path, desk90):
    save_system(desk90, tmp_path / "a")
    back = load_system(tmp_path / "a", desk90.storage)
    assert back.buses == desk90.buses
    assert back.lines == desk90.lines
    assert back.generators == desk90.generators
    for bus in desk90.demand:
        assert np.array_equal(back.demand[bus], desk90.demand[bus])
    for bus in desk90.renewables:
        assert np.array_equal(back.renewables[bus], desk90.renewables[bus])


def test_generator_capacity_identity(desk):
    for g in desk.generators:
        assert g.g_min + sum(s.capacity for s in g.segments) == g.g_max


def test_generator_invariant_violations():
    with pytest.raises(ValidationError, match="gmax"):
        PowerSystem((Bus("a"),), (), (Generator(
            "g", "a", 10, 100, (Segment(50, 20, 0.1),), 0, 0, 0, 0, 1, 1),),
            {}, {})
    with pytest.raises(ValidationError, match="nondecreasing"):
        PowerSystem((Bus("a"),), (), (Generator(
            "g", "a", 0, 100, (Segment(50, 30, 0.1), Segment(50, 20, 0.1)),
            0, 0, 0, 0, 1, 1),), {}, {})
    with pytest.raises(ValidationError, match="min up"):
        PowerSystem((Bus("a"),), (), (Generator(
            "g", "a", 0, 50, (Segment(50, 30, 0.1),), 0, 0, 0, 0, 0, 1),),
            {}, {})


def test_line_validation():
    with pytest.raises(ValidationError, match="from == to"):
        PowerSystem((Bus("a"),), (Line("l", "a", "a", 1.0, 10.0),), (), {}, {})
    with pytest.raises(ValidationError, match="capacity"):
        PowerSystem((Bus("a"), Bus("b")), (Line("l", "a", "b", 1.0, 0.0),),
                    (), {}, {})


def test_negative_series_rejected():
    with pytest.raises(ValidationError, match="negative"):
        PowerSystem((Bus("a"),), (), (),
                    {"a": np.full((1, 24), -1.0)}, {})


def test_scale_renewables_to_30pct(desk):
    scaled = scale_renewables(desk, 0.30)
    assert abs(scaled.renewable_penetration() - 0.30) <= 1e-9
    # proportionality across buses and hours
    f = 0.30 / desk.renewable_penetration()
    for bus in desk.renewables:
        assert np.allclose(scaled.renewables[bus], desk.renewables[bus] * f,
                           rtol=1e-12)


def test_scale_renewables_identity_and_idempotence(desk90):
    current = desk90.renewable_penetration()
    same = scale_renewables(desk90, current)
    for bus in desk90.renewables:
        assert np.allclose(same.renewables[bus], desk90.renewables[bus],
                           rtol=1e-12)
    once = scale_renewables(desk90, 0.25)
    twice = scale_renewables(once, 0.25)
    for bus in once.renewables:
        assert np.allclose(twice.renewables[bus], once.renewables[bus],
                           rtol=1e-12)


def test_scale_renewables_all_zero_errors():
    sys_ = PowerSystem((Bus("a"),), (), (),
                       {"a": np.full((2, 24), 10.0)},
                       {"a": np.zeros((2, 24))})
    with pytest.raises(ValidationError, match="all-zero"):
        scale_renewables(sys_, 0.3)


def test_storage_spec_quantization():
    spec = StorageSpec(duration=4.0, unit_power=25.0)
    assert spec.unit_energy == 4.0 * 25.0
    spec2 = spec.with_effective_price(30_000.0)
    assert abs(spec2.effective_price - 30_000.0) < 1e-9
    with pytest.raises(ValidationError):
        StorageSpec(duration=0.0)
    with pytest.raises(ValidationError):
        StorageSpec(efficiency=1.5)


def test_economic_params_validation():
    with pytest.raises(ValidationError):
        EconomicParams(carbon_price=-1.0)
    with pytest.raises(ValidationError):
        EconomicParams(enc_multiplier=0.5)


def test_daily_profiles_shape(desk90):
    profs = desk90.daily_profiles()
    assert len(profs) == 90
    assert profs[0].horizon == 24
    assert profs[0].total_demand() > 0
