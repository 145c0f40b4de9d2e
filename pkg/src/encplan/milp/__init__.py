"""Solver-agnostic MILP containers, a desk-scale LP/MILP engine, and MPS I/O.

Scale ceiling: the dense revised simplex targets models up to roughly 20k
nonzeros.  Beyond that, export with :func:`export_mps` and use an external
solver.
"""

from .model import (
    CONTINUOUS,
    BINARY,
    INTEGER,
    LE,
    GE,
    EQ,
    Variable,
    Row,
    MilpModel,
    audit_point,
)
from .simplex import LpSolution, solve_lp
from .branch_bound import MilpSolution, solve_milp
from .mps import export_mps, import_mps

__all__ = [
    "CONTINUOUS",
    "BINARY",
    "INTEGER",
    "LE",
    "GE",
    "EQ",
    "Variable",
    "Row",
    "MilpModel",
    "audit_point",
    "LpSolution",
    "solve_lp",
    "MilpSolution",
    "solve_milp",
    "export_mps",
    "import_mps",
]
