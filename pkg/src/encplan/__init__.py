"""Emissions-neutral energy-storage investment planning.

Transmission-constrained unit commitment with an emissions-neutrality
constraint (ENC), three storage-investment perspectives (vertically
integrated utility, philanthropic, profit-maximizing), a dual-based
single-level relaxation for bound assessment, and a sensitivity/statistics
harness.  Built-in LP/MILP engine; MPS export for external solvers.
"""

__version__ = "0.1.0"

from .milp import MilpModel, LpSolution, MilpSolution, solve_lp, solve_milp

__all__ = [
    "MilpModel",
    "LpSolution",
    "MilpSolution",
    "solve_lp",
    "solve_milp",
    "__version__",
]
