"""Best-first branch-and-bound over the simplex core.

Branching variable: most fractional (ties to lowest index).  Node selection:
best bound (ties FIFO).  Deterministic given the model; the seed argument is
accepted for interface stability but the search uses no randomness.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .model import MilpModel, ModelError
from .simplex import simplex_core, relaxed_arrays

INT_TOL = 1e-6


@dataclass
class MilpSolution:
    status: str                  # optimal | feasible | infeasible | unbounded | unknown
    x: np.ndarray | None
    objective: float             # incumbent objective
    bound: float                 # best proven lower bound
    gap: float
    node_count: int              # nodes explored beyond the root relaxation
    bound_history: list = field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


def solve_milp(model: MilpModel, gap_target: float = 1e-3,
               time_limit: float | None = None, node_limit: int | None = None,
               seed: int = 0, hints=()) -> MilpSolution:
    """Minimize a MilpModel to the requested relative optimality gap.

    hints: iterable of {var_index: int value} assignments covering the integer
    variables; each feasible hint seeds the incumbent (pure speed-up).
    """
    del seed  # deterministic search; kept for interface stability
    if gap_target <= 0:
        raise ModelError("gap_target must be > 0")
    a, senses, b, c, lb0, ub0 = relaxed_arrays(model)
    int_idx = model.integer_indices()
    for j in int_idx:
        if not (math.isfinite(lb0[j]) and math.isfinite(ub0[j])):
            raise ModelError(
                f"integer variable {model.variables[j].name} needs finite bounds")
    const = model.obj_constant
    t0 = time.monotonic()

    def timed_out():
        return time_limit is not None and time.monotonic() - t0 > time_limit

    def run_lp(lb, ub):
        return simplex_core(a, senses, b, c, lb, ub)

    status, x, _, _, obj, _ = run_lp(lb0, ub0)
    if status == "infeasible":
        return MilpSolution("infeasible", None, math.nan, math.nan, math.nan, 0)
    if status == "unbounded":
        return MilpSolution("unbounded", None, math.nan, -math.inf, math.nan, 0)

    inc_x = None
    inc_obj = math.inf

    def try_assignment(values, lb, ub):
        """LP with integers pinned to `values`; returns (obj, x) or None."""
        lbh, ubh = lb.copy(), ub.copy()
        for j, v in values.items():
            v = float(round(v))
            if v < lb[j] - 0.5 or v > ub[j] + 0.5:
                return None
            lbh[j] = ubh[j] = v
        s, xh, _, _, oh, _ = run_lp(lbh, ubh)
        if s != "optimal":
            return None
        return oh, xh

    for hint in hints:
        got = try_assignment(hint, lb0, ub0)
        if got and got[0] < inc_obj - 1e-12:
            inc_obj, inc_x = got[0], got[1]

    frac = _fractional(x, int_idx)
    bound_hist = []
    nodes = 0
    global_bound = obj
    if frac is None:
        got = try_assignment({j: x[j] for j in int_idx}, lb0, ub0)
        if got and got[0] < inc_obj:
            inc_obj, inc_x = got
        gap = _gap(inc_obj, obj)
        return MilpSolution("optimal", inc_x, inc_obj + const, obj + const,
                            gap, 0, [obj + const])

    heap = []
    counter = 0
    heapq.heappush(heap, (obj, counter, (), x))
    limit_hit = False

    while heap:
        node_bound, _, fixes, px = heapq.heappop(heap)
        global_bound = max(global_bound, node_bound)
        bound_hist.append(global_bound + const)
        if inc_x is not None and _gap(inc_obj, global_bound) <= gap_target:
            heapq.heappush(heap, (node_bound, -1, fixes, px))  # unprocessed
            break
        if inc_obj < math.inf and node_bound >= inc_obj - 1e-12:
            continue
        if timed_out() or (node_limit is not None and nodes >= node_limit):
            heapq.heappush(heap, (node_bound, -1, fixes, px))
            limit_hit = True
            break

        # branch on the parent LP solution carried with the node
        j, xj = _branch_var(px, int_idx)
        for child_lo, child_hi in ((None, math.floor(xj + INT_TOL)),
                                   (math.ceil(xj - INT_TOL), None)):
            lb, ub = lb0.copy(), ub0.copy()
            for jj, lo, hi in fixes:
                lb[jj], ub[jj] = max(lb[jj], lo), min(ub[jj], hi)
            nlo = lb[j] if child_lo is None else max(lb[j], child_lo)
            nhi = ub[j] if child_hi is None else min(ub[j], child_hi)
            if nlo > nhi:
                continue
            lb[j], ub[j] = nlo, nhi
            nodes += 1
            s, cx, _, _, cobj, _ = run_lp(lb, ub)
            if s != "optimal":
                continue
            cbound = max(cobj, node_bound)
            if inc_obj < math.inf and cbound >= inc_obj - 1e-12:
                continue
            if _fractional(cx, int_idx) is None:
                got = try_assignment({jj: cx[jj] for jj in int_idx}, lb, ub)
                cand = got if got else (cobj, cx)
                if cand[0] < inc_obj - 1e-12:
                    inc_obj, inc_x = cand
            else:
                counter += 1
                nfixes = fixes + ((j, nlo, nhi),)
                heapq.heappush(heap, (cbound, counter, nfixes, cx))

    if heap:
        pending = min(h[0] for h in heap)
        global_bound = max(global_bound, min(pending, inc_obj))
    else:
        global_bound = inc_obj if inc_x is not None else global_bound
    global_bound = min(global_bound, inc_obj)

    if inc_x is None:
        status = "unknown" if limit_hit else "infeasible"
        return MilpSolution(status, None, math.nan, global_bound + const,
                            math.nan, nodes, bound_hist)
    gap = _gap(inc_obj, global_bound)
    status = "optimal" if gap <= gap_target else "feasible"
    return MilpSolution(status, inc_x, inc_obj + const, global_bound + const,
                        gap, nodes, bound_hist)


def _gap(inc, bound):
    if inc == math.inf:
        return math.inf
    return max(0.0, inc - bound) / max(1.0, abs(inc))


def _fractional(x, int_idx):
    """Indices of fractional integer vars, or None if integral."""
    if len(int_idx) == 0:
        return None
    xi = x[int_idx]
    f = np.abs(xi - np.round(xi))
    bad = f > INT_TOL
    if not bad.any():
        return None
    return int_idx[bad]


def _branch_var(x, int_idx):
    xi = x[int_idx]
    f = xi - np.floor(xi)
    score = np.minimum(f, 1.0 - f)
    j = int(int_idx[int(np.argmax(score))])
    return j, float(x[j])
