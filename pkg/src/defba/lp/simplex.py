"""Dense bounded-variable revised simplex for desk-scale problems.

Two phases with artificial variables, explicit basis inverse with product-form
updates and periodic refactorisation. Pricing is Dantzig's rule until too many
consecutive degenerate pivots occur, then Bland's smallest-index rule.
"""

from __future__ import annotations

import numpy as np

from .program import EQ, GE, LE, LinearProgram, LpSolution, LpStatus

_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64


class _Presolved:
    """Result of removing fixed variables and empty rows/columns."""

    def __init__(self, lp: LinearProgram, feas_tol: float):
        A = lp.A.tocsc()
        n = lp.n_vars
        self.lp = lp
        self.status: LpStatus | None = None
        # an unbounded empty column only matters once the rest is known feasible
        self.unbounded_column = False
        self.x_fixed = np.zeros(n)
        fixed = lp.lower == lp.upper
        self.x_fixed[fixed] = lp.lower[fixed]
        rhs = lp.rhs - A[:, fixed] @ self.x_fixed[fixed] if fixed.any() else lp.rhs.copy()

        col_nnz = np.diff(A.indptr)
        empty_col = (col_nnz == 0) & ~fixed
        for j in np.flatnonzero(empty_col):
            c = lp.objective[j]
            lo, hi = lp.lower[j], lp.upper[j]
            target = hi if c > 0 else lo
            if c != 0 and np.isfinite(target):
                self.x_fixed[j] = target
            else:
                self.unbounded_column |= c != 0
                self.x_fixed[j] = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0)
        self.keep_cols = np.flatnonzero(~fixed & ~empty_col)

        sub = A[:, self.keep_cols].tocsr()
        row_nnz = np.diff(sub.indptr)
        empty_row = row_nnz == 0
        for i in np.flatnonzero(empty_row):
            s, b = lp.senses[i], rhs[i]
            tol = feas_tol * max(1.0, abs(lp.rhs[i]))
            if (s == LE and b < -tol) or (s == GE and b > tol) or (s == EQ and abs(b) > tol):
                self.status = LpStatus.INFEASIBLE
        self.keep_rows = np.flatnonzero(~empty_row)
        self.A = sub[self.keep_rows].toarray()
        self.rhs = rhs[self.keep_rows]
        self.senses = lp.senses[self.keep_rows]
        self.c = lp.objective[self.keep_cols]
        self.lower = lp.lower[self.keep_cols]
        self.upper = lp.upper[self.keep_cols]

    def expand(self, x_sub: np.ndarray) -> np.ndarray:
        x = self.x_fixed.copy()
        x[self.keep_cols] = x_sub
        return x


class _Tableau:
    def __init__(self, A, b, lower, upper, feas_tol, opt_tol, max_iters):
        self.m, self.n = A.shape
        self.A = A
        self.b = b
        self.lo = lower.astype(float).copy()
        self.up = upper.astype(float).copy()
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.max_iters = max_iters
        self.iterations = 0
        self.x = np.zeros(self.n)
        self.state = np.full(self.n, _AT_LOWER, dtype=np.int8)
        self.basis = np.zeros(self.m, dtype=int)
        self.Binv = np.eye(self.m)

    def _nonbasic_start(self, j):
        lo, up = self.lo[j], self.up[j]
        if np.isfinite(lo):
            self.x[j], self.state[j] = lo, _AT_LOWER
        elif np.isfinite(up):
            self.x[j], self.state[j] = up, _AT_UPPER
        else:
            self.x[j], self.state[j] = 0.0, _FREE

    def refactor(self):
        B = self.A[:, self.basis]
        self.Binv = np.linalg.inv(B)
        nonbasic = self.state != _BASIC
        r = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ r

    def run(self, c) -> str:
        """Optimise ``min c x`` from the current basis; returns a status string."""
        degenerate = 0
        bland = False
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iters:
                return "limit"
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            y = c[self.basis] @ self.Binv
            d = c - y @ self.A
            movable = (self.state != _BASIC) & (self.lo < self.up)
            improve = np.zeros(self.n, dtype=bool)
            st = self.state
            improve |= movable & (st == _AT_LOWER) & (d < -self.opt_tol)
            improve |= movable & (st == _AT_UPPER) & (d > self.opt_tol)
            improve |= movable & (st == _FREE) & (np.abs(d) > self.opt_tol)
            cand = np.flatnonzero(improve)
            if cand.size == 0:
                self.y, self.d = y, d
                return "optimal"
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = -1.0 if d[q] > 0 else 1.0

            alpha = self.Binv @ self.A[:, q]
            rate = -direction * alpha
            xb = self.x[self.basis]
            lob, upb = self.lo[self.basis], self.up[self.basis]
            pivot_tol = PIVOT_TOL * max(1.0, np.abs(alpha).max(initial=0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = rate < -pivot_tol
                inc = rate > pivot_tol
                ratio = np.full(self.m, np.inf)
                ratio[dec] = (xb[dec] - lob[dec]) / -rate[dec]
                ratio[inc] = (upb[inc] - xb[inc]) / rate[inc]
            ratio = np.maximum(ratio, 0.0)
            flip = self.up[q] - self.lo[q]
            t_min = ratio.min(initial=np.inf)
            if not np.isfinite(min(flip, t_min)):
                self.ray_var, self.ray_dir, self.ray_alpha = q, direction, alpha
                return "unbounded"
            if flip <= t_min:
                t = flip
                leave = -1
            else:
                t = t_min
                ties = np.flatnonzero(ratio <= t + 1e-12)
                if bland:
                    leave = int(ties[np.argmin(self.basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(alpha[ties]))])
            self.iterations += 1
            since_refactor += 1

            self.x[q] += direction * t
            self.x[self.basis] = xb + rate * t
            if t <= 1e-12:
                degenerate += 1
                if degenerate > 2 * self.n:
                    bland = True
            else:
                degenerate = 0
                bland = False
            if leave < 0:
                self.state[q] = _AT_UPPER if direction > 0 else _AT_LOWER
                continue
            out = self.basis[leave]
            if rate[leave] < 0:
                self.x[out], self.state[out] = self.lo[out], _AT_LOWER
            else:
                self.x[out], self.state[out] = self.up[out], _AT_UPPER
            self.basis[leave] = q
            self.state[q] = _BASIC
            piv = alpha[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[leave] = row


def simplex(lp: LinearProgram, feas_tol: float = 1e-9, opt_tol: float = 1e-9,
            max_iters: int | None = None) -> LpSolution:
    pre = _Presolved(lp, feas_tol)
    if pre.status is not None:
        return LpSolution(pre.status, backend="simplex")
    m, n = pre.A.shape
    if max_iters is None:
        max_iters = 50 * (m + n) + 1000

    # slack columns: A x + s = b
    slack_lo = np.where(pre.senses == GE, -np.inf, 0.0)
    slack_up = np.where(pre.senses == LE, np.inf, 0.0)
    A = np.hstack([pre.A, np.eye(m)])
    lo = np.concatenate([pre.lower, slack_lo])
    up = np.concatenate([pre.upper, slack_up])

    tab = _Tableau(A, pre.rhs.copy(), lo, up, feas_tol, opt_tol, max_iters)
    for j in range(n):
        tab._nonbasic_start(j)
    resid = pre.rhs - pre.A @ tab.x[:n]
    art_cols, basis = [], np.zeros(m, dtype=int)
    for i in range(m):
        s = n + i
        if slack_lo[i] - feas_tol <= resid[i] <= slack_up[i] + feas_tol:
            tab.x[s] = resid[i]
            tab.state[s] = _BASIC
            basis[i] = s
        else:
            bound = slack_lo[i] if resid[i] < slack_lo[i] else slack_up[i]
            tab.x[s] = bound
            tab.state[s] = _AT_LOWER if bound == slack_lo[i] else _AT_UPPER
            art_cols.append((i, 1.0 if resid[i] - bound > 0 else -1.0, abs(resid[i] - bound)))
    n_art = len(art_cols)
    if n_art:
        art = np.zeros((m, n_art))
        for k, (i, sign, _) in enumerate(art_cols):
            art[i, k] = sign
        tab.A = np.hstack([A, art])
        tab.lo = np.concatenate([lo, np.zeros(n_art)])
        tab.up = np.concatenate([up, np.full(n_art, np.inf)])
        tab.x = np.concatenate([tab.x, [v for _, _, v in art_cols]])
        tab.state = np.concatenate([tab.state, np.full(n_art, _BASIC, dtype=np.int8)])
        for k, (i, _, _) in enumerate(art_cols):
            basis[i] = n + m + k
        tab.n = n + m + n_art
    tab.basis = basis
    tab.refactor()

    total = tab.n
    if n_art:
        c1 = np.zeros(total)
        c1[n + m:] = 1.0
        res = tab.run(c1)
        if res == "limit":
            return LpSolution(LpStatus.ITERATION_LIMIT, iterations=tab.iterations, backend="simplex")
        tab.refactor()
        infeas = tab.x[n + m:].sum()
        if infeas > feas_tol * max(1.0, np.abs(pre.rhs).max(initial=0.0)):
            cert = np.zeros(lp.n_rows)
            cert[pre.keep_rows] = -tab.y
            return LpSolution(LpStatus.INFEASIBLE, iterations=tab.iterations, backend="simplex",
                              certificate=cert, info={"phase1_infeasibility": float(infeas)})
        tab.up[n + m:] = 0.0
        tab.x[n + m:] = np.clip(tab.x[n + m:], 0.0, 0.0)
        tab.refactor()

    if pre.unbounded_column:
        return LpSolution(LpStatus.UNBOUNDED, iterations=tab.iterations, backend="simplex")
    c2 = np.zeros(total)
    c2[:n] = -pre.c
    res = tab.run(c2)
    if res == "limit":
        return LpSolution(LpStatus.ITERATION_LIMIT, iterations=tab.iterations, backend="simplex")
    if res == "unbounded":
        ray_full = np.zeros(total)
        ray_full[tab.ray_var] = tab.ray_dir
        ray_full[tab.basis] = -tab.ray_dir * tab.ray_alpha
        ray = np.zeros(lp.n_vars)
        ray[pre.keep_cols] = ray_full[:n]
        return LpSolution(LpStatus.UNBOUNDED, iterations=tab.iterations, backend="simplex",
                          certificate=ray)
    tab.refactor()
    y = c2[tab.basis] @ tab.Binv
    d = c2 - y @ tab.A
    x = pre.expand(tab.x[:n])
    scale = max(1.0, np.abs(lp.rhs).max(initial=0.0))
    if lp.max_violation(x) > 1e3 * feas_tol * scale:
        # basis lost accuracy; let the caller decide what to do
        return LpSolution(LpStatus.ITERATION_LIMIT, iterations=tab.iterations, backend="simplex",
                          info={"message": "numerical trouble: final basis not feasible"})
    duals = np.zeros(lp.n_rows)
    duals[pre.keep_rows] = -y
    reduced = lp.objective - lp.A.T @ duals
    return LpSolution(LpStatus.OPTIMAL, x=x, objective_value=lp.value(x), duals=duals,
                      reduced_costs=reduced, iterations=tab.iterations, backend="simplex",
                      info={"basis": tab.basis.copy(), "phase2_reduced_costs": -d[:n]})
