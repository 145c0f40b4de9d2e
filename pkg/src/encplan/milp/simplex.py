"""Dense-basis revised simplex for bounded-variable LPs with sparse pricing.

Two-phase primal simplex over the computational form [A | I_slack | I_art].
The basis inverse is dense and maintained by product-form updates with
periodic refactorization (plus a basic-value refresh to cancel drift); the
constraint columns are kept sparse, so pricing costs O(nnz) per iteration.
Nonbasic variables may rest at a bound or "superbasic" at zero inside their
range (how flows and angles start, which keeps the crash point feasible for
the network rows).  Dantzig pricing with a Bland's-rule fallback after a
degenerate streak, so cycling terminates.  Deterministic: no randomization,
ties broken by lowest variable index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .model import MilpModel, LE, GE, ModelError

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
REFACTOR_EVERY = 120
DEGEN_STREAK = 60
MAX_ITERS = 200_000

_BASIC, _AT_LB, _AT_UB, _NB_FREE = 0, 1, 2, 3


class EngineError(RuntimeError):
    """Numerical failure inside the engine (singular basis, iteration cap)."""


@dataclass
class LpSolution:
    status: str                 # optimal | infeasible | unbounded
    x: np.ndarray | None        # structural variable values
    duals: np.ndarray | None    # one per row
    reduced_costs: np.ndarray | None  # structural columns
    objective: float
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


def solve_lp(model: MilpModel, check_integers: bool = True) -> LpSolution:
    """Solve a MilpModel as an LP.

    Integer/binary variables must be fixed (lb == ub) unless
    check_integers=False, in which case they are relaxed.
    """
    if check_integers:
        for j in model.integer_indices():
            v = model.variables[j]
            if v.lb != v.ub:
                raise ModelError(
                    f"solve_lp: integer variable {v.name} not fixed; "
                    "use solve_milp or fix it first"
                )
    a, senses, b = model.row_matrix()
    c = model.objective_vector()
    lb, ub = model.bounds_arrays()
    status, x, y, d, obj, iters = simplex_core(a, senses, b, c, lb, ub)
    if status != "optimal":
        return LpSolution(status, None, None, None, math.nan, iters)
    return LpSolution(status, x, y, d, obj + model.obj_constant, iters)


def simplex_core(a, senses, b, c, lb, ub):
    """Bounded-variable two-phase simplex on raw arrays.

    Returns (status, x_structural, row_duals, reduced_costs, objective, iters).
    On a numerical failure (singular basis, non-finite values) the solve is
    retried once in a conservative mode: frequent refactorization, Bland
    pricing from the start, and a stability-filtered ratio test.
    """
    m = len(senses)
    n = len(c)
    if m == 0:
        return _solve_bounds_only(c, lb, ub)
    try:
        return _simplex_attempt(a, senses, b, c, lb, ub, conservative=False)
    except EngineError:
        return _simplex_attempt(a, senses, b, c, lb, ub, conservative=True)


def _simplex_attempt(a, senses, b, c, lb, ub, conservative):
    m = len(senses)
    n = len(c)

    slack_lb = np.empty(m)
    slack_ub = np.empty(m)
    for i, s in enumerate(senses):
        if s == LE:
            slack_lb[i], slack_ub[i] = 0.0, math.inf
        elif s == GE:
            slack_lb[i], slack_ub[i] = -math.inf, 0.0
        else:
            slack_lb[i], slack_ub[i] = 0.0, 0.0

    ncols = n + m
    cols = np.zeros((m, ncols + m))        # room for artificials
    if n:
        cols[:, :n] = a
    cols[np.arange(m), n + np.arange(m)] = 1.0

    full_lb = np.concatenate([lb, slack_lb, np.zeros(m)])
    full_ub = np.concatenate([ub, slack_ub, np.full(m, math.inf)])

    x = np.zeros(ncols + m)
    vstat = np.full(ncols + m, _AT_LB, dtype=np.int8)

    # crash: zero if the range straddles it (superbasic), else a finite bound
    for j in range(ncols):
        lo, hi = full_lb[j], full_ub[j]
        if lo < 0.0 < hi:
            x[j] = 0.0
            vstat[j] = _NB_FREE
        elif math.isfinite(lo):
            x[j] = lo
            vstat[j] = _AT_LB
        elif math.isfinite(hi):
            x[j] = hi
            vstat[j] = _AT_UB
        else:
            x[j] = 0.0
            vstat[j] = _NB_FREE

    resid = b - cols[:, :n] @ x[:n] if n else b.copy()

    basis = np.empty(m, dtype=np.int64)
    art_used = []
    for i in range(m):
        s = n + i
        v = resid[i]
        aj = ncols + i
        if slack_lb[i] - FEAS_TOL <= v <= slack_ub[i] + FEAS_TOL:
            basis[i] = s
            x[s] = v
            vstat[s] = _BASIC
            # unused artificial: materialized but pinned at zero, so it can
            # only ever be injected as a basis-repair column
            cols[i, aj] = 1.0
            full_lb[aj] = full_ub[aj] = 0.0
        else:
            pin = min(max(v, slack_lb[i]), slack_ub[i])
            if not math.isfinite(pin):
                pin = 0.0
            x[s] = pin
            vstat[s] = _AT_LB if pin == slack_lb[i] else _AT_UB
            r = v - pin
            cols[i, aj] = 1.0 if r >= 0 else -1.0
            x[aj] = abs(r)
            vstat[aj] = _BASIC
            basis[i] = aj
            art_used.append(aj)

    st = _State(cols, full_lb, full_ub, x, vstat, basis, b, conservative)

    iters = 0
    if art_used:
        c1 = np.zeros(ncols + m)
        c1[art_used] = 1.0
        status, it1 = _optimize(st, c1, conservative)
        iters += it1
        if status != "optimal":
            raise EngineError(f"phase 1 ended with status {status}")
        feas_scale = 1.0 + float(np.abs(b).max(initial=0.0))
        if float(c1 @ st.x) > FEAS_TOL * feas_scale:
            return "infeasible", None, None, None, math.nan, iters
        _drive_out_artificials(st, np.array(art_used, dtype=np.int64))
        st.lb[art_used] = 0.0
        st.ub[art_used] = 0.0
        nb_art = [j for j in art_used if st.vstat[j] != _BASIC]
        st.x[nb_art] = 0.0
        st.vstat[nb_art] = _AT_LB

    c2 = np.zeros(ncols + m)
    c2[:n] = c
    status, it2 = _optimize(st, c2, conservative)
    iters += it2
    if status == "unbounded":
        return "unbounded", None, None, None, math.nan, iters

    st.refactor()   # refreshes basic values against the true rhs
    y = st.btran(c2[st.basis])
    d = c2 - st.price(y)
    obj = float(c2[:n] @ st.x[:n])
    out_x = st.x[:n].copy()
    if not (np.all(np.isfinite(out_x)) and np.all(np.isfinite(y))
            and math.isfinite(obj)):
        raise EngineError("non-finite solution values")
    feas_scale = 1.0 + float(np.abs(b).max(initial=0.0))
    bound_viol = float(np.maximum(np.maximum(st.lb - st.x, st.x - st.ub),
                                  0.0).max(initial=0.0))
    row_viol = float(np.abs(st.csc @ st.x - b).max(initial=0.0))
    if max(bound_viol, row_viol) > 1e-6 * feas_scale:
        raise EngineError(
            f"terminated with primal infeasibility {max(bound_viol, row_viol):.2e}")
    return "optimal", out_x, y, d[:n].copy(), obj, iters


def _solve_bounds_only(c, lb, ub):
    """Row-free model: each variable sits at its cheapest bound."""
    x = np.zeros(len(c))
    for j, cj in enumerate(c):
        if cj > 0:
            if not math.isfinite(lb[j]):
                return "unbounded", None, None, None, math.nan, 0
            x[j] = lb[j]
        elif cj < 0:
            if not math.isfinite(ub[j]):
                return "unbounded", None, None, None, math.nan, 0
            x[j] = ub[j]
        else:
            x[j] = lb[j] if math.isfinite(lb[j]) else (
                ub[j] if math.isfinite(ub[j]) else 0.0)
    return "optimal", x, np.zeros(0), c.copy(), float(c @ x), 0


class _State:
    """LU-factored basis with product-form eta updates (refactored
    periodically, which also refreshes the basic values against the rhs)."""

    __slots__ = ("cols", "csc", "csr_t", "lb", "ub", "x", "vstat", "basis",
                 "b", "m", "ncols", "lu", "etas", "pivots", "refactor_every",
                 "trusted", "bdense")

    def __init__(self, cols, lb, ub, x, vstat, basis, b, conservative=False):
        self.cols = cols
        self.csc = scipy.sparse.csc_matrix(cols)
        self.csr_t = self.csc.T.tocsr()
        self.lb = lb
        self.ub = ub
        self.x = x
        self.vstat = vstat
        self.basis = basis
        self.b = b
        self.m = cols.shape[0]
        self.ncols = cols.shape[1]
        self.lu = None
        self.etas = []          # (pivot position, B^-1 a_enter at pivot time)
        self.pivots = 0
        self.refactor_every = 25 if conservative else REFACTOR_EVERY
        self.trusted = False    # first refresh establishes the reference
        self.bdense = None      # dense basis copy for pivot-vector validation
        self.refactor()

    def column(self, j):
        sl = slice(self.csc.indptr[j], self.csc.indptr[j + 1])
        return self.csc.indices[sl], self.csc.data[sl]

    def dense_col(self, j):
        idx, vals = self.column(j)
        out = np.zeros(self.m)
        out[idx] = vals
        return out

    def ftran_col(self, j):
        """B^-1 a_j for a model column."""
        return self.ftran(self.dense_col(j))

    def checked_ftran_col(self, j):
        """B^-1 a_j, validated against B w = a_j; refactors once when the
        eta chain has gone stale, so corrupt pivots never enter the basis."""
        aj = self.dense_col(j)
        w = self.ftran(aj)
        tol = 1e-6 * (1.0 + float(np.abs(aj).max(initial=0.0)))
        if float(np.abs(self.bdense @ w - aj).max(initial=0.0)) > tol:
            self.refactor()
            w = self.ftran(aj)
            if float(np.abs(self.bdense @ w - aj).max(initial=0.0)) > 100 * tol:
                raise EngineError("pivot vector validation failed after refactor")
        return w

    def ftran(self, rhs):
        z = scipy.linalg.lu_solve(self.lu, rhs, check_finite=False)
        for pos, w in self.etas:
            t = z[pos] / w[pos]
            if t != 0.0:
                z -= t * w
            z[pos] = t
        return z

    def btran(self, costs):
        """y solving B^T y = costs."""
        cvec = costs.copy()
        for pos, w in reversed(self.etas):
            cp = cvec[pos]
            cvec[pos] = (cp - (cvec @ w - cp * w[pos])) / w[pos]
        return scipy.linalg.lu_solve(self.lu, cvec, trans=1, check_finite=False)

    def binv_row(self, pos):
        e = np.zeros(self.m)
        e[pos] = 1.0
        return self.btran(e)

    def price(self, y):
        return self.csr_t @ y

    def refactor(self):
        bmat = None
        for attempt in range(6):
            bmat = self.csc[:, self.basis].toarray()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                    self.lu = scipy.linalg.lu_factor(bmat, check_finite=False)
            except (np.linalg.LinAlgError, ValueError,
                    scipy.linalg.LinAlgWarning) as exc:
                if attempt == 5 or not self._repair_basis():
                    raise EngineError(
                        f"singular basis during refactor: {exc}") from exc
                continue
            diag = np.abs(np.diag(self.lu[0]))
            if np.all(np.isfinite(diag)) and \
                    diag.min() > 1e-12 * max(1.0, diag.max()):
                break
            if attempt == 5 or not self._repair_basis():
                raise EngineError("singular basis during refactor")
        self.bdense = bmat
        self.etas = []
        self.pivots = 0
        # refresh basic values against the true rhs to cancel drift; a large
        # jump means the eta-chain updates had gone numerically rotten
        xn = self.x.copy()
        xn[self.basis] = 0.0
        fresh = self.ftran(self.b - self.csc @ xn)
        scale = 1.0 + float(np.abs(self.b).max(initial=0.0))
        if self.trusted and float(np.abs(fresh - self.x[self.basis]).max(initial=0.0)) > 1e-5 * scale:
            raise EngineError("incremental basics drifted; refactor jump")
        self.x[self.basis] = fresh
        self.trusted = True

    def _repair_basis(self) -> bool:
        """Swap numerically dependent basis columns for pinned artificial unit
        columns; displaced variables stay superbasic at their current values,
        so feasibility is untouched.  Returns False if nothing was repairable.
        """
        bmat = self.csc[:, self.basis].toarray()
        # LU with partial pivoting locates the failing elimination steps
        p, l, u = scipy.linalg.lu(bmat, check_finite=False)
        diag = np.abs(np.diag(u))
        bad = np.where(diag <= 1e-12 * max(1.0, diag.max(initial=0.0)))[0]
        if len(bad) == 0:
            return False
        # p maps permuted rows back: row used at elimination step k is
        # argmax of column k in P (P[:, perm_k] structure)
        perm = np.argmax(p, axis=0)
        art0 = self.ncols - self.m
        repaired = False
        for k in bad:
            row = int(perm[k])
            art = art0 + row
            if self.vstat[art] == _BASIC:
                continue
            displaced = self.basis[k]
            self.vstat[displaced] = _NB_FREE   # keeps its current value
            self.basis[k] = art
            self.vstat[art] = _BASIC
            self.x[art] = 0.0
            repaired = True
        return repaired

    def pivot(self, row, col, w):
        """Replace basis[row] by col; w = current B^-1 cols[:, col]."""
        if abs(w[row]) < 1e-11:
            raise EngineError("pivot element too small")
        self.etas.append((row, w.copy()))
        self.basis[row] = col
        self.bdense[:, row] = self.dense_col(col)
        self.pivots += 1
        if self.pivots >= self.refactor_every:
            self.refactor()


def _optimize(st: _State, c: np.ndarray, conservative=False):
    """Run primal iterations to optimality for cost vector c."""
    degen = 0
    bland = conservative
    it = 0
    scale = 1.0 + float(np.abs(c).max(initial=0.0))
    tol = OPT_TOL * scale
    c_sp = c  # dense cost vector
    while True:
        it += 1
        if it > MAX_ITERS:
            raise EngineError("iteration limit exceeded")
        y = st.btran(c_sp[st.basis])
        d = c_sp - st.price(y)

        nb = st.vstat != _BASIC
        movable = st.lb < st.ub
        up = nb & movable & (st.vstat != _AT_UB) & (d < -tol)
        dn = nb & movable & ((st.vstat == _AT_UB) | (st.vstat == _NB_FREE)) & (d > tol)
        viol = np.where(up | dn, np.abs(d), 0.0)
        if not viol.any():
            return "optimal", it
        if bland:
            q = int(np.nonzero(viol)[0][0])
        else:
            q = int(np.argmax(viol))
        t = 1.0 if up[q] else -1.0

        w = st.checked_ftran_col(q)

        xb = st.x[st.basis]
        delta = t * w
        pos_mask = delta > 1e-9
        neg_mask = delta < -1e-9
        room_dn = np.where(pos_mask,
                           (xb - st.lb[st.basis]) / np.where(pos_mask, delta, 1.0),
                           math.inf)
        room_up = np.where(neg_mask,
                           (xb - st.ub[st.basis]) / np.where(neg_mask, delta, 1.0),
                           math.inf)
        room = np.minimum(room_dn, room_up)
        theta_basic = float(room.min()) if st.m else math.inf

        # entering variable reaching its own opposite bound
        flip = (st.ub[q] - st.x[q]) if t > 0 else (st.x[q] - st.lb[q])
        if math.isfinite(flip) and flip < theta_basic - 1e-12:
            st.x[q] += t * flip
            st.x[st.basis] = xb - flip * delta
            st.vstat[q] = _AT_UB if t > 0 else _AT_LB
            degen = 0
            bland = conservative
            continue

        if theta_basic == math.inf:
            return "unbounded", it

        # Harris-style second pass: within a small feasibility window of the
        # strict minimum ratio, take the numerically largest pivot (ties to
        # the lowest variable index) so near-dependent columns stay out of
        # the basis
        adelta = np.abs(delta)
        with np.errstate(invalid="ignore"):
            relaxed = room + 1e-7 / np.where(adelta > 0, adelta, 1.0)
        theta_max = float(relaxed.min())
        cand = np.where(room <= theta_max)[0]
        piv_mag = adelta[cand]
        best = piv_mag.max()
        cand = cand[piv_mag >= 0.5 * best]
        leave_pos = int(cand[np.argmin(st.basis[cand])])
        theta = max(float(room[leave_pos]), 0.0)
        leave_to = _AT_LB if room_dn[leave_pos] <= room_up[leave_pos] else _AT_UB

        st.x[q] += t * theta
        st.x[st.basis] = xb - theta * delta
        leaving = st.basis[leave_pos]
        st.vstat[leaving] = leave_to
        st.x[leaving] = st.lb[leaving] if leave_to == _AT_LB else st.ub[leaving]
        st.vstat[q] = _BASIC
        st.pivot(leave_pos, q, w)

        if theta <= 1e-12:
            degen += 1
            if degen >= DEGEN_STREAK:
                bland = True
        else:
            degen = 0
            bland = conservative


def _drive_out_artificials(st: _State, art: np.ndarray):
    """Pivot basic artificials (at value ~0) out of the basis where possible."""
    is_art = np.zeros(st.ncols, dtype=bool)
    is_art[art] = True
    for pos in range(st.m):
        col = st.basis[pos]
        if not is_art[col]:
            continue
        row = st.price(st.binv_row(pos))
        ok = (np.abs(row) > 1e-9) & ~is_art & (st.vstat != _BASIC) & (st.lb < st.ub)
        js = np.nonzero(ok)[0]
        if js.size:
            j = int(js[0])
            w = st.ftran_col(j)
            st.vstat[j] = _BASIC
            st.vstat[col] = _AT_LB
            st.x[col] = 0.0
            st.pivot(pos, j, w)
        # else: row redundant; artificial stays basic at 0 with fixed bounds


def relaxed_arrays(model: MilpModel):
    """Precompute raw arrays for repeated bound-modified solves (B&B nodes)."""
    a, senses, b = model.row_matrix()
    c = model.objective_vector()
    lb, ub = model.bounds_arrays()
    return a, senses, b, c, lb, ub
