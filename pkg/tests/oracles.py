"""Independent reference implementations used only to check the engine.

Everything here deliberately avoids the encplan.milp code paths: a plain
dense-tableau two-phase simplex with Bland's rule, and exhaustive
enumeration helpers.  Slow and simple on purpose.
"""

import itertools
import math

import numpy as np

LE, GE, EQ = "<=", ">=", "=="


def tableau_solve(a, senses, b, c, lb, ub):
    """Textbook tableau simplex on min c'x, rows a{sense}b, lb<=x<=ub.

    Returns (status, x, objective).  Bounds are rewritten as explicit rows;
    free/shifted variables are substituted so everything is x>=0 standard form.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m0, n0 = a.shape if a.size else (len(senses), len(c))
    m0 = len(senses)
    n0 = len(c)
    rows = [a[i].copy() if a.size else np.zeros(n0) for i in range(m0)]
    rr = list(b)
    ss = list(senses)
    # bounds as rows
    for j in range(n0):
        if math.isfinite(lb[j]) and lb[j] != 0.0 or (not math.isfinite(lb[j])):
            pass
    # column transform bookkeeping: x_j = shift_j + sign_j * z_j  (+ z2 for free)
    shift = np.zeros(n0)
    sign = np.ones(n0)
    extra_free = []  # j with free split
    for j in range(n0):
        if math.isfinite(lb[j]):
            shift[j] = lb[j]
            if math.isfinite(ub[j]):
                e = np.zeros(n0)
                e[j] = 1.0
                rows.append(e)
                rr.append(ub[j])
                ss.append(LE)
        elif math.isfinite(ub[j]):
            shift[j] = ub[j]
            sign[j] = -1.0
        else:
            extra_free.append(j)

    n = n0 + len(extra_free)
    bigA = np.zeros((len(rows), n))
    for i, r in enumerate(rows):
        bigA[i, :n0] = r * sign
        for k, j in enumerate(extra_free):
            bigA[i, n0 + k] = -r[j]
        rr[i] = rr[i] - float(r @ shift)
    cc = np.zeros(n)
    cc[:n0] = c * sign
    for k, j in enumerate(extra_free):
        cc[n0 + k] = -c[j]
    cshift = float(c @ shift)

    status, z, obj = _standard_two_phase(bigA, ss, np.array(rr), cc)
    if status != "optimal":
        return status, None, math.nan
    x = shift + sign * z[:n0]
    for k, j in enumerate(extra_free):
        x[j] -= z[n0 + k]
    return "optimal", x, obj + cshift


def _standard_two_phase(a, senses, b, c):
    """min c'z, a z {sense} b, z >= 0 by full-tableau Bland simplex."""
    m, n = a.shape
    # normalize to b >= 0
    a = a.copy()
    b = b.copy()
    senses = list(senses)
    for i in range(m):
        if b[i] < 0:
            a[i] *= -1
            b[i] *= -1
            senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]
    nslack = sum(1 for s in senses if s != EQ)
    nart = m
    tab = np.zeros((m, n + nslack + nart))
    tab[:, :n] = a
    sj = n
    art0 = n + nslack
    basis = [0] * m
    for i, s in enumerate(senses):
        if s == LE:
            tab[i, sj] = 1.0
            sj += 1
        elif s == GE:
            tab[i, sj] = -1.0
            sj += 1
        tab[i, art0 + i] = 1.0
        basis[i] = art0 + i
    ncols = n + nslack + nart

    def run(costs, tab, rhs, basis, allowed):
        it = 0
        while True:
            it += 1
            if it > 100000:
                raise RuntimeError("oracle iteration cap")
            cb = costs[basis]
            red = costs - cb @ tab
            enter = -1
            for j in range(ncols):  # Bland: first improving index
                if not allowed[j]:
                    continue
                if j in basis:
                    continue
                if red[j] < -1e-9:
                    enter = j
                    break
            if enter < 0:
                return float(cb @ rhs)
            best = math.inf
            leave = -1
            for i in range(m):
                if tab[i, enter] > 1e-9:
                    r = rhs[i] / tab[i, enter]
                    if r < best - 1e-12 or (abs(r - best) <= 1e-12 and
                                            (leave < 0 or basis[i] < basis[leave])):
                        best, leave = r, i
            if leave < 0:
                return -math.inf  # unbounded
            piv = tab[leave, enter]
            tab[leave] /= piv
            rhs[leave] /= piv
            for i in range(m):
                if i != leave and abs(tab[i, enter]) > 0:
                    f = tab[i, enter]
                    tab[i] -= f * tab[leave]
                    rhs[i] -= f * rhs[leave]
            basis[leave] = enter

    rhs = b.copy()
    allowed = np.ones(ncols, dtype=bool)
    costs1 = np.zeros(ncols)
    costs1[art0:] = 1.0
    v1 = run(costs1, tab, rhs, basis, allowed)
    if v1 > 1e-7 * (1 + abs(b).max(initial=0)):
        return "infeasible", None, math.nan
    allowed[art0:] = False
    costs2 = np.zeros(ncols)
    costs2[:n] = c
    # drive artificials out where still basic
    for i in range(m):
        if basis[i] >= art0:
            for j in range(art0):
                if abs(tab[i, j]) > 1e-9 and j not in basis:
                    piv = tab[i, j]
                    tab[i] /= piv
                    rhs[i] /= piv
                    for k in range(m):
                        if k != i:
                            f = tab[k, j]
                            tab[k] -= f * tab[i]
                            rhs[k] -= f * rhs[i]
                    basis[i] = j
                    break
    v2 = run(costs2, tab, rhs, basis, allowed)
    if v2 == -math.inf:
        return "unbounded", None, math.nan
    z = np.zeros(ncols)
    for i, bj in enumerate(basis):
        z[bj] = rhs[i]
    return "optimal", z[:n], float(costs2[:n] @ z[:n])


def tableau_solve_model(model):
    """Oracle solve straight from a MilpModel (reads only its public data)."""
    a, senses, b = model.row_matrix()
    c = model.objective_vector()
    lb, ub = model.bounds_arrays()
    status, x, obj = tableau_solve(a, senses, b, c, lb, ub)
    if status == "optimal":
        obj += model.obj_constant
    return status, x, obj


def enumerate_milp(model):
    """Exhaustive enumeration over all integer assignments (small models).

    Returns (best_objective, best_assignment_dict) by solving the continuous
    rest with the tableau oracle for every integer combination.
    """
    ints = list(model.integer_indices())
    ranges = []
    for j in ints:
        v = model.variables[j]
        ranges.append(range(int(math.ceil(v.lb)), int(math.floor(v.ub)) + 1))
    best = (math.inf, None)
    a, senses, b = model.row_matrix()
    c = model.objective_vector()
    lb, ub = model.bounds_arrays()
    for combo in itertools.product(*ranges):
        lo = lb.copy()
        hi = ub.copy()
        for j, v in zip(ints, combo):
            lo[j] = hi[j] = float(v)
        status, x, obj = tableau_solve(a, senses, b, c, lo, hi)
        if status == "optimal" and obj < best[0] - 1e-12:
            best = (obj + model.obj_constant, dict(zip(ints, combo)))
    return best


def wilcoxon_pratt_bruteforce(deltas):
    """Exact two-sided Wilcoxon signed-rank p with Pratt zero handling,
    by literal enumeration of all sign assignments of the nonzero deltas."""
    d = np.asarray(deltas, dtype=float)
    n = len(d)
    if n == 0 or np.all(d == 0):
        return 1.0
    order = np.argsort(np.abs(d), kind="stable")
    ranks = np.empty(n)
    absd = np.abs(d)[order]
    i = 0
    pos = 1.0
    while i < n:
        j = i
        while j + 1 < n and absd[j + 1] == absd[i]:
            j += 1
        avg = (pos + pos + (j - i)) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        pos += j - i + 1
        i = j + 1
    nz = d != 0
    rnz = ranks[nz]
    signs_obs = d[nz] > 0
    w_obs = float(rnz[signs_obs].sum())
    mvals = []
    mtot = int(nz.sum())
    count_le = 0
    count_ge = 0
    total = 0
    for signs in itertools.product((False, True), repeat=mtot):
        w = float(sum(r for r, s in zip(rnz, signs) if s))
        total += 1
        if w <= w_obs + 1e-12:
            count_le += 1
        if w >= w_obs - 1e-12:
            count_ge += 1
    p = 2.0 * min(count_le, count_ge) / total
    return min(1.0, p)
