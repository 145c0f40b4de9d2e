"""Constraint-matrix model container shared by the engine and the exporters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"

LE = "<="
GE = ">="
EQ = "=="

_SENSES = (LE, GE, EQ)


class ModelError(ValueError):
    """Raised for structurally invalid models (bad bounds, dangling refs, ...)."""


@dataclass
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf


@dataclass
class Row:
    idx: np.ndarray          # variable indices, int
    coef: np.ndarray         # matching coefficients, float
    sense: str
    rhs: float
    tag: str | None = None


@dataclass
class MilpModel:
    """Linear model: min c'x s.t. rows, bounds, integrality.

    Rows and variables carry tags/names so callers can recover schedules and
    duals without string parsing on the solver side.
    """

    name: str = "model"
    variables: list[Variable] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    obj: dict[int, float] = field(default_factory=dict)
    obj_constant: float = 0.0

    # -- construction -----------------------------------------------------

    def add_var(self, name, kind=CONTINUOUS, lb=0.0, ub=math.inf) -> int:
        if kind == BINARY:
            lb = max(lb, 0.0)
            ub = min(ub, 1.0)
        if lb > ub:
            raise ModelError(f"variable {name}: lb {lb} > ub {ub}")
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        return len(self.variables) - 1

    def add_row(self, coeffs, sense, rhs, tag=None) -> int:
        if sense not in _SENSES:
            raise ModelError(f"bad sense {sense!r}")
        if isinstance(coeffs, dict):
            items = list(coeffs.items())
        else:
            items = list(coeffs)
        # merge duplicate indices deterministically
        acc: dict[int, float] = {}
        for j, a in items:
            acc[int(j)] = acc.get(int(j), 0.0) + float(a)
        idx = np.fromiter(sorted(acc), dtype=np.int64, count=len(acc))
        coef = np.array([acc[int(j)] for j in idx], dtype=float)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.variables)):
            raise ModelError(f"row {tag or len(self.rows)}: variable index out of range")
        if not np.all(np.isfinite(coef)) or not math.isfinite(rhs):
            raise ModelError(f"row {tag or len(self.rows)}: non-finite coefficient")
        self.rows.append(Row(idx, coef, sense, float(rhs), tag))
        return len(self.rows) - 1

    def add_obj(self, var: int, coeff: float) -> None:
        """Accumulate a linear objective term (minimization)."""
        if not math.isfinite(coeff):
            raise ModelError(f"objective coefficient for var {var} not finite")
        self.obj[var] = self.obj.get(var, 0.0) + float(coeff)

    def set_obj_vector(self, coeffs: dict[int, float]) -> None:
        """Replace the whole objective (idempotent re-pricing)."""
        self.obj = {int(j): float(a) for j, a in coeffs.items() if a != 0.0}

    def fix_var(self, var: int, value: float) -> None:
        v = self.variables[var]
        v.lb = float(value)
        v.ub = float(value)

    # -- queries -----------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def integer_indices(self) -> np.ndarray:
        return np.array(
            [j for j, v in enumerate(self.variables) if v.kind in (BINARY, INTEGER)],
            dtype=np.int64,
        )

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, a in self.obj.items():
            c[j] = a
        return c

    def bounds_arrays(self):
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        return lb, ub

    def row_matrix(self):
        """Dense (rows x vars) matrix plus sense list and rhs vector."""
        a = np.zeros((self.num_rows, self.num_vars))
        for i, r in enumerate(self.rows):
            a[i, r.idx] = r.coef
        senses = [r.sense for r in self.rows]
        rhs = np.array([r.rhs for r in self.rows])
        return a, senses, rhs

    def row_by_tag(self, tag: str) -> int:
        for i, r in enumerate(self.rows):
            if r.tag == tag:
                return i
        raise KeyError(tag)

    def var_by_name(self, name: str) -> int:
        for j, v in enumerate(self.variables):
            if v.name == name:
                return j
        raise KeyError(name)

    def copy(self) -> "MilpModel":
        m = MilpModel(self.name)
        m.variables = [Variable(v.name, v.kind, v.lb, v.ub) for v in self.variables]
        m.rows = [Row(r.idx.copy(), r.coef.copy(), r.sense, r.rhs, r.tag) for r in self.rows]
        m.obj = dict(self.obj)
        m.obj_constant = self.obj_constant
        return m

    def validate(self) -> None:
        """Enforce container invariants: finite data, no orphan vars, unique tags/names."""
        names = set()
        for v in self.variables:
            if v.name in names:
                raise ModelError(f"duplicate variable name {v.name}")
            names.add(v.name)
            if not (math.isfinite(v.lb) or v.lb == -math.inf):
                raise ModelError(f"variable {v.name}: bad lb")
            if v.lb > v.ub:
                raise ModelError(f"variable {v.name}: lb > ub")
        referenced = set(self.obj)
        tags = set()
        for r in self.rows:
            referenced.update(int(j) for j in r.idx)
            if r.tag is not None:
                if r.tag in tags:
                    raise ModelError(f"duplicate row tag {r.tag}")
                tags.add(r.tag)
        orphans = [v.name for j, v in enumerate(self.variables)
                   if j not in referenced and v.lb != v.ub]
        if orphans:
            raise ModelError(f"variables never referenced: {orphans[:5]}")


def audit_point(model: MilpModel, x: np.ndarray, tol: float = 1e-6):
    """Re-check a primal point against every row and bound, solver-free.

    Returns (max_violation, list of (kind, ref, violation)) for violations
    beyond tol.  Integrality is checked for binary/integer variables.
    """
    viol = []
    worst = 0.0
    lb, ub = model.bounds_arrays()
    below = lb - x
    above = x - ub
    for j in np.where(below > tol)[0]:
        viol.append(("lb", model.variables[j].name, float(below[j])))
    for j in np.where(above > tol)[0]:
        viol.append(("ub", model.variables[j].name, float(above[j])))
    if len(below) and len(above):
        worst = max(worst, float(below.max(initial=0.0)), float(above.max(initial=0.0)))
    for i, r in enumerate(model.rows):
        act = float(np.dot(r.coef, x[r.idx]))
        if r.sense == LE:
            v = act - r.rhs
        elif r.sense == GE:
            v = r.rhs - act
        else:
            v = abs(act - r.rhs)
        worst = max(worst, v)
        if v > tol:
            viol.append(("row", r.tag or str(i), float(v)))
    for j in model.integer_indices():
        v = abs(x[j] - round(x[j]))
        worst = max(worst, v)
        if v > tol:
            viol.append(("integrality", model.variables[j].name, float(v)))
    return worst, viol
