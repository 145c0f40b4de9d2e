"""Fixed-format MPS writer and reader.

Names are always mangled to R%07d / C%07d (8 chars, fixed-field safe) with a
deterministic sidecar map `<path>.names.json` recording the original names,
tags and variable kinds.  One coefficient per COLUMNS line keeps every value
field last on its line, so 12-significant-digit values never collide with a
field boundary.  export -> import -> export is byte-identical.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .model import MilpModel, Variable, LE, GE, EQ, CONTINUOUS, BINARY, INTEGER

_SENSE_TO_MPS = {LE: "L", GE: "G", EQ: "E"}
_MPS_TO_SENSE = {"L": LE, "G": GE, "E": EQ}


def _fmt(v: float) -> str:
    s = f"{v:.12G}"
    return s


def _row_name(i: int) -> str:
    return f"R{i:07d}"


def _col_name(j: int) -> str:
    return f"C{j:07d}"


def export_mps(model: MilpModel, path) -> Path:
    """Write the model in fixed-format MPS; returns the written path."""
    path = Path(path)
    lines = []
    lines.append(f"NAME          {model.name[:40]}")
    lines.append("ROWS")
    lines.append(" N  OBJ")
    for i, r in enumerate(model.rows):
        lines.append(f" {_SENSE_TO_MPS[r.sense]}  {_row_name(i)}")
    lines.append("COLUMNS")

    by_col: dict[int, list[tuple[str, float]]] = {j: [] for j in range(model.num_vars)}
    for j, a in sorted(model.obj.items()):
        by_col[j].append(("OBJ", a))
    for i, r in enumerate(model.rows):
        rn = _row_name(i)
        for j, a in zip(r.idx, r.coef):
            by_col[int(j)].append((rn, float(a)))

    in_int = False
    marker = 0
    for j in range(model.num_vars):
        v = model.variables[j]
        is_int = v.kind in (BINARY, INTEGER)
        if is_int and not in_int:
            lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTORG'")
            marker += 1
            in_int = True
        elif not is_int and in_int:
            lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")
            marker += 1
            in_int = False
        entries = by_col[j] or [("OBJ", 0.0)]
        cn = _col_name(j)
        for rn, a in entries:
            lines.append(f"    {cn}  {rn:<8}  {_fmt(a)}")
    if in_int:
        lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")

    lines.append("RHS")
    if model.obj_constant:
        lines.append(f"    RHS       OBJ       {_fmt(-model.obj_constant)}")
    for i, r in enumerate(model.rows):
        if r.rhs != 0.0:
            lines.append(f"    RHS       {_row_name(i):<8}  {_fmt(r.rhs)}")

    lines.append("BOUNDS")
    for j in range(model.num_vars):
        v = model.variables[j]
        cn = _col_name(j)
        lo_inf = v.lb == -math.inf
        up_inf = v.ub == math.inf
        if v.lb == v.ub:
            lines.append(f" FX BND       {cn}  {_fmt(v.lb)}")
            continue
        if lo_inf and up_inf:
            lines.append(f" FR BND       {cn}")
            continue
        if lo_inf:
            lines.append(f" MI BND       {cn}")
        elif v.lb != 0.0:
            lines.append(f" LO BND       {cn}  {_fmt(v.lb)}")
        if not up_inf:
            lines.append(f" UP BND       {cn}  {_fmt(v.ub)}")
    lines.append("ENDATA")

    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {
        "model_name": model.name,
        "rows": {_row_name(i): (r.tag if r.tag is not None else "")
                 for i, r in enumerate(model.rows)},
        "columns": {_col_name(j): {"name": v.name, "kind": v.kind}
                    for j, v in enumerate(model.variables)},
    }
    Path(str(path) + ".names.json").write_text(
        json.dumps(sidecar, indent=1, sort_keys=True), encoding="utf-8")
    return path


def import_mps(path) -> MilpModel:
    """Read an MPS file written by export_mps (plus common variants)."""
    path = Path(path)
    sidecar = None
    sc_path = Path(str(path) + ".names.json")
    if sc_path.exists():
        sidecar = json.loads(sc_path.read_text(encoding="utf-8"))

    model = MilpModel()
    section = None
    obj_row = None
    row_order: list[str] = []
    row_sense: dict[str, str] = {}
    row_coeffs: dict[str, list[tuple[int, float]]] = {}
    row_rhs: dict[str, float] = {}
    row_range: dict[str, float] = {}
    col_index: dict[str, int] = {}
    col_kind: dict[str, str] = {}
    col_entries: dict[str, list[tuple[str, float]]] = {}
    col_order: list[str] = []
    bounds: list[tuple[str, str, float | None]] = []
    in_int = False

    for raw in path.read_text(encoding="utf-8").splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if raw[0] not in " \t":
            word = raw.split()[0].upper()
            if word == "NAME":
                parts = raw.split(None, 1)
                model.name = parts[1].strip() if len(parts) > 1 else "model"
                continue
            section = word
            if section == "ENDATA":
                break
            continue
        f = raw.split()
        if section == "ROWS":
            sense, rn = f[0].upper(), f[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = rn
                continue
            row_order.append(rn)
            row_sense[rn] = _MPS_TO_SENSE[sense]
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1].strip("'") == "MARKER":
                mk = f[-1].strip("'").upper()
                in_int = mk == "INTORG"
                continue
            cn = f[0]
            if cn not in col_index:
                col_index[cn] = len(col_order)
                col_order.append(cn)
                col_kind[cn] = INTEGER if in_int else CONTINUOUS
                col_entries[cn] = []
            for k in range(1, len(f) - 1, 2):
                col_entries[cn].append((f[k], float(f[k + 1])))
        elif section == "RHS":
            for k in range(1, len(f) - 1, 2):
                rn, val = f[k], float(f[k + 1])
                if rn == obj_row:
                    model.obj_constant = -val
                else:
                    row_rhs[rn] = val
        elif section == "RANGES":
            for k in range(1, len(f) - 1, 2):
                row_range[f[k]] = float(f[k + 1])
        elif section == "BOUNDS":
            btype = f[0].upper()
            cn = f[2]
            val = float(f[3]) if len(f) > 3 else None
            bounds.append((btype, cn, val))

    for cn in col_order:
        kind = col_kind[cn]
        name = cn
        if sidecar and cn in sidecar["columns"]:
            name = sidecar["columns"][cn]["name"]
            kind = sidecar["columns"][cn]["kind"]
        model.add_var(name, kind, 0.0, math.inf)

    for btype, cn, val in bounds:
        j = col_index[cn]
        v = model.variables[j]
        if btype == "UP":
            v.ub = val
        elif btype == "LO":
            v.lb = val
        elif btype == "FX":
            v.lb = v.ub = val
        elif btype == "FR":
            v.lb, v.ub = -math.inf, math.inf
        elif btype == "MI":
            v.lb = -math.inf
        elif btype == "PL":
            v.ub = math.inf
        elif btype == "BV":
            v.kind = BINARY
            v.lb, v.ub = 0.0, 1.0

    for cn in col_order:
        j = col_index[cn]
        for rn, a in col_entries[cn]:
            if rn == obj_row:
                model.obj[j] = model.obj.get(j, 0.0) + a
            else:
                row_coeffs.setdefault(rn, []).append((j, a))

    for rn in row_order:
        tag = None
        if sidecar and rn in sidecar["rows"] and sidecar["rows"][rn]:
            tag = sidecar["rows"][rn]
        rhs = row_rhs.get(rn, 0.0)
        model.add_row(row_coeffs.get(rn, []), row_sense[rn], rhs, tag)
        if rn in row_range:
            # ranged row -> add the companion inequality
            r = row_range[rn]
            sense = row_sense[rn]
            if sense == LE:
                model.add_row(row_coeffs.get(rn, []), GE, rhs - abs(r),
                              f"{tag}__range" if tag else None)
            elif sense == GE:
                model.add_row(row_coeffs.get(rn, []), LE, rhs + abs(r),
                              f"{tag}__range" if tag else None)
            else:
                lo, hi = (rhs, rhs + r) if r >= 0 else (rhs + r, rhs)
                model.rows[-1].sense = GE
                model.rows[-1].rhs = lo
                model.add_row(row_coeffs.get(rn, []), LE, hi,
                              f"{tag}__range" if tag else None)

    if sidecar and sidecar.get("model_name"):
        model.name = sidecar["model_name"]
    for j, v in enumerate(model.variables):
        if v.kind == INTEGER and v.lb == 0.0 and v.ub == 1.0 and not sidecar:
            v.kind = BINARY
    return model
