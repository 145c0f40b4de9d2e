"""MPS writer/reader round trips and format details."""

import math

from encplan.milp import (MilpModel, export_mps, import_mps, solve_milp,
                          LE, GE, EQ, BINARY, INTEGER)


def build_mixed_model():
    m = MilpModel("mixed")
    x = m.add_var("commitment_flag[unit7,hour3]", BINARY)
    y = m.add_var("gen_power[unit7,seg0,hour3]", lb=0, ub=123.456789012)
    z = m.add_var("bus_angle[station_b,hour3]", lb=-math.inf)
    w = m.add_var("units[station_b]", INTEGER, lb=0, ub=7)
    free = m.add_var("totally_free", lb=-math.inf, ub=math.inf)
    m.add_obj(x, 1000.0)
    m.add_obj(y, 19.25)
    m.add_obj(w, 3.5)
    m.obj_constant = 42.5
    m.add_row({x: 1, y: -0.05}, LE, 0.0, "seg_cap")
    m.add_row({y: 1, z: 2.5, w: -4}, EQ, 17.125, "balance")
    m.add_row({z: 1, free: 0.25}, GE, -3.0, "angle_floor")
    return m


def test_round_trip_exact_and_byte_identical(tmp_path):
    m = build_mixed_model()
    p1 = tmp_path / "m1.mps"
    export_mps(m, p1)
    assert (tmp_path / "m1.mps.names.json").exists()

    m2 = import_mps(p1)
    p2 = tmp_path / "m2.mps"
    export_mps(m2, p2)
    assert p1.read_bytes() == p2.read_bytes()

    # coefficients representable in 12 significant digits survive bit-exactly
    assert m2.variables[1].ub == 123.456789012
    assert m2.obj[3] == 3.5
    assert m2.rows[1].rhs == 17.125
    assert m2.obj_constant == 42.5
    # sidecar restores long names and kinds
    assert m2.variables[0].name == "commitment_flag[unit7,hour3]"
    assert m2.variables[0].kind in (BINARY, INTEGER)
    assert m2.variables[4].lb == -math.inf and m2.variables[4].ub == math.inf
    assert [r.tag for r in m2.rows] == [r.tag for r in m.rows]

    r1 = solve_milp(m, 1e-9)
    r2 = solve_milp(m2, 1e-9)
    assert abs(r1.objective - r2.objective) < 1e-9


def test_empty_objective_model(tmp_path):
    m = MilpModel("noobj")
    x = m.add_var("x", ub=2.0)
    m.add_row({x: 1.0}, LE, 1.0, "cap")
    p = tmp_path / "noobj.mps"
    export_mps(m, p)
    text = p.read_text()
    assert "OBJ" in text  # N row always declared
    m2 = import_mps(p)
    assert m2.num_vars == 1 and m2.num_rows == 1
    assert m2.obj == {} or all(v == 0.0 for v in m2.obj.values())


def test_orphan_column_gets_zero_obj_entry(tmp_path):
    m = MilpModel()
    m.add_var("used", ub=1.0)
    m.add_var("unused", ub=1.0)
    m.add_obj(0, 1.0)
    m.add_row({0: 1.0}, LE, 1.0, "r")
    p = tmp_path / "orphan.mps"
    export_mps(m, p)
    assert "C0000001  OBJ       0" in p.read_text()
    m2 = import_mps(p)
    assert m2.num_vars == 2


def test_name_mangling_is_deterministic(tmp_path):
    m = build_mixed_model()
    pa = tmp_path / "a.mps"
    pb = tmp_path / "b.mps"
    export_mps(m, pa)
    export_mps(m, pb)
    assert pa.read_bytes() == pb.read_bytes()
    assert (tmp_path / "a.mps.names.json").read_bytes() == \
        (tmp_path / "b.mps.names.json").read_bytes()


def test_fixed_format_field_positions(tmp_path):
    m = build_mixed_model()
    p = tmp_path / "f.mps"
    export_mps(m, p)
    for line in p.read_text().splitlines():
        if line.startswith("    C"):
            # fixed fields: name at col 5-12, row name at 15-22, value at 25+
            assert line[4:12].strip().startswith("C")
            assert len(line[4:12].strip()) == 8
            assert line[14:22].strip()
