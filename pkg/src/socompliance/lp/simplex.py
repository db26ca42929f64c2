"""Two-phase bounded-variable revised simplex.

Rows are turned into equalities ``A x - w = 0`` where the row activity ``w``
carries the relation as bounds. The basis is held as a sparse LU factorisation
plus a product-form eta file, refactorised every ``refactor_every`` pivots.
Pricing is Dantzig's rule with a Harris ratio test; after a run of degenerate
pivots it falls back to Bland's rule until the objective moves again.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import (EQ, GE, INFEASIBLE, ITERATION_LIMIT, LE, OPTIMAL, UNBOUNDED, LinearProgram,
                    LpSolution)

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
DEGENERATE_RUN = 50


class _Basis:
    def __init__(self, M, basis, refactor_every):
        self.M = M
        self.basis = basis
        self.refactor_every = refactor_every
        self.refactor()

    def refactor(self):
        m = len(self.basis)
        B = self.M[:, self.basis].tocsc()
        self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False}) if m else None
        self.etas = []

    def ftran(self, a):
        z = self.lu.solve(np.asarray(a, dtype=float)) if self.lu is not None else np.zeros(0)
        for p, alpha in self.etas:
            zp = z[p] / alpha[p]
            z -= zp * alpha
            z[p] = zp
        return z

    def btran(self, c):
        u = np.array(c, dtype=float)
        for p, alpha in reversed(self.etas):
            up = u[p]
            u[p] = 0.0
            u[p] = (up - np.dot(u, alpha)) / alpha[p]
        return self.lu.solve(u, trans="T") if self.lu is not None else u

    def replace(self, p, q, alpha):
        self.basis[p] = q
        self.etas.append((p, alpha.copy()))
        if len(self.etas) >= self.refactor_every:
            self.refactor()


def _row_bounds(relations, b):
    lo = np.where([r in (GE, EQ) for r in relations], b, -np.inf)
    hi = np.where([r in (LE, EQ) for r in relations], b, np.inf)
    return lo.astype(float), hi.astype(float)


def _solve_unconstrained(lp, c, lo, up):
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0))
    for j, cj in enumerate(c):
        target = up[j] if cj < 0 else lo[j] if cj > 0 else x[j]
        if not np.isfinite(target):
            return LpSolution(UNBOUNDED, -np.inf if lp.sense == "min" else np.inf, x)
        x[j] = target
    return LpSolution(OPTIMAL, lp.evaluate(x), x, np.zeros(0), duality_gap=0.0)


def solve_lp(lp: LinearProgram, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL,
             max_iterations: int | None = None, refactor_every: int = 64) -> LpSolution:
    """Solve ``lp``; returns an optimal basic solution or an infeasible/unbounded status."""
    c, A, relations, b, lo, up = lp.arrays()
    sign = -1.0 if lp.sense == "max" else 1.0
    c = sign * c
    m, n = A.shape
    if m == 0:
        return _solve_unconstrained(lp, c, lo, up)

    wlo, wup = _row_bounds(relations, b)
    lower = np.concatenate([lo, wlo, np.zeros(m)])
    upper = np.concatenate([up, wup, np.full(m, np.inf)])
    x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
    x[n + m:] = 0.0
    Mxw = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
    resid = -(Mxw @ x[:n + m])
    D = np.where(resid >= 0, 1.0, -1.0)
    M = sp.hstack([Mxw, sp.diags(D, format="csc")], format="csc")
    MT = M.T.tocsr()
    N = n + 2 * m
    art = np.arange(n + m, N)
    x[art] = np.abs(resid)

    basis = _Basis(M, list(art), refactor_every)
    is_basic = np.zeros(N, dtype=bool)
    is_basic[art] = True
    if max_iterations is None:
        max_iterations = 50 * (m + n) + 1000
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    state = {"iterations": 0}

    def column(j):
        col = np.zeros(m)
        start, end = M.indptr[j], M.indptr[j + 1]
        col[M.indices[start:end]] = M.data[start:end]
        return col

    def recompute_basics():
        nb = ~is_basic
        rhs = -(M[:, nb] @ x[nb])
        x[basis.basis] = basis.ftran(rhs)

    def run(cost, stop=None):
        """Primal simplex on ``cost``; returns OPTIMAL, UNBOUNDED or ITERATION_LIMIT."""
        degenerate = 0
        bland = False
        while True:
            if stop is not None and stop():
                return OPTIMAL
            if state["iterations"] >= max_iterations:
                return ITERATION_LIMIT
            y = basis.btran(cost[basis.basis])
            d = cost - MT @ y
            d[is_basic] = 0.0
            inc = (~is_basic) & (x < upper) & (d < -opt_tol)
            dec = (~is_basic) & (x > lower) & (d > opt_tol)
            eligible = inc | dec
            if not eligible.any():
                return OPTIMAL
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
            direction = 1.0 if inc[q] else -1.0
            alpha = basis.ftran(column(q))
            delta = direction * alpha
            B = np.asarray(basis.basis)
            xb = x[B]
            lb, ub = lower[B], upper[B]

            # Harris pass 1: ratios against bounds relaxed by the feasibility tolerance
            with np.errstate(divide="ignore", invalid="ignore"):
                down = delta > PIVOT_TOL
                upm = delta < -PIVOT_TOL
                relaxed = np.full(m, np.inf)
                relaxed[down] = (xb[down] - lb[down] + feas_tol) / delta[down]
                relaxed[upm] = (ub[upm] - xb[upm] + feas_tol) / -delta[upm]
                exact = np.full(m, np.inf)
                exact[down] = (xb[down] - lb[down]) / delta[down]
                exact[upm] = (ub[upm] - xb[upm]) / -delta[upm]
            exact = np.maximum(exact, 0.0)
            t_max = relaxed.min()
            flip = upper[q] - lower[q]
            if not np.isfinite(t_max) and not np.isfinite(flip):
                return UNBOUNDED
            p = -1
            if np.isfinite(t_max):
                cand = np.flatnonzero(exact <= t_max)
                if cand.size:
                    if bland:
                        tmin = exact[cand].min()
                        ties = cand[exact[cand] <= tmin + PIVOT_TOL]
                        p = int(ties[np.argmin(B[ties])])
                    else:
                        p = int(cand[np.argmax(np.abs(delta[cand]))])
            theta = exact[p] if p >= 0 else np.inf
            if flip <= theta:
                theta = flip
                p = -1
            state["iterations"] += 1
            x[B] = xb - theta * delta
            x[q] += direction * theta
            if p >= 0:
                leaving = B[p]
                x[leaving] = lower[leaving] if delta[p] > 0 else upper[leaving]
                is_basic[leaving] = False
                is_basic[q] = True
                basis.replace(p, q, alpha)
                if not basis.etas:
                    recompute_basics()
            else:
                x[q] = upper[q] if direction > 0 else lower[q]
            if theta * abs(d[q]) <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False

    # phase 1: drive the artificials to zero
    cost1 = np.zeros(N)
    cost1[art] = 1.0
    infeas_tol = feas_tol * scale
    status = run(cost1, stop=lambda: float(x[art].sum()) <= infeas_tol * 1e-3)
    phase1_iterations = state["iterations"]
    if status == ITERATION_LIMIT:
        return LpSolution(ITERATION_LIMIT, np.nan, x[:n].copy(), iterations=state["iterations"],
                          phase1_iterations=phase1_iterations)
    if float(x[art].sum()) > infeas_tol:
        return LpSolution(INFEASIBLE, np.nan, x[:n].copy(), iterations=state["iterations"],
                          phase1_iterations=phase1_iterations,
                          stats={"infeasibility": float(x[art].sum())})

    upper[art] = 0.0
    x[art] = np.where(is_basic[art], x[art], 0.0)
    _drive_out_artificials(basis, M, x, is_basic, art, lower, upper, column)
    recompute_basics()

    cost2 = np.concatenate([c, np.zeros(2 * m)])
    status = run(cost2)
    xs = x[:n].copy()
    # clip round-off outside bounds
    xs = np.minimum(np.maximum(xs, lo), up)
    if status != OPTIMAL:
        value = -sign * np.inf if status == UNBOUNDED else np.nan
        return LpSolution(status, value, xs, iterations=state["iterations"], phase1_iterations=phase1_iterations)

    y = basis.btran(cost2[basis.basis])
    d = cost2 - MT @ y
    primal = float(np.dot(cost2, x))
    dual = _dual_bound(d, lower, upper, opt_tol)
    gap = abs(primal - dual) / max(1.0, abs(primal))
    return LpSolution(OPTIMAL, lp.evaluate(xs), xs, duals=sign * y, iterations=state["iterations"],
                      phase1_iterations=phase1_iterations, duality_gap=gap,
                      stats={"rows": m, "columns": n, "dual_bound": sign * dual})


def _drive_out_artificials(basis, M, x, is_basic, art, lower, upper, column):
    art_set = set(int(a) for a in art)
    structural = np.flatnonzero(~np.isin(np.arange(M.shape[1]), art))
    for p, j in enumerate(list(basis.basis)):
        if j not in art_set:
            continue
        e = np.zeros(len(basis.basis))
        e[p] = 1.0
        row = basis.btran(e)
        r = M[:, structural].T @ row
        r[is_basic[structural]] = 0.0
        fixed = lower[structural] == upper[structural]
        r[fixed] = 0.0
        k = int(np.argmax(np.abs(r)))
        if abs(r[k]) <= 1e-7:
            continue  # redundant row: the artificial stays basic, fixed at zero
        q = int(structural[k])
        alpha = basis.ftran(column(q))
        is_basic[j] = False
        is_basic[q] = True
        x[j] = 0.0
        basis.replace(p, q, alpha)


def _dual_bound(d, lower, upper, opt_tol):
    """Weak-duality bound: min over the bound box of d.v (valid since M v = 0)."""
    total = 0.0
    for dj, lj, uj in zip(d, lower, upper):
        if abs(dj) <= opt_tol:
            continue
        bound = lj if dj > 0 else uj
        if not np.isfinite(bound):
            return -np.inf
        total += dj * bound
    return total
