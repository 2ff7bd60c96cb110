"""Adapter to the HiGHS dual simplex.

``HighsSession`` keeps one HiGHS instance alive so that a sequence of LPs
differing only in variable bounds re-solves from the previous optimal basis.
"""

from __future__ import annotations

import highspy
import numpy as np

from .program import GE, LE, LinearProgram, LpSolution, LpStatus

_STATUS = {
    highspy.HighsModelStatus.kOptimal: LpStatus.OPTIMAL,
    highspy.HighsModelStatus.kInfeasible: LpStatus.INFEASIBLE,
    highspy.HighsModelStatus.kUnbounded: LpStatus.UNBOUNDED,
    highspy.HighsModelStatus.kIterationLimit: LpStatus.ITERATION_LIMIT,
    highspy.HighsModelStatus.kTimeLimit: LpStatus.ITERATION_LIMIT,
}


def _highs_lp(lp: LinearProgram) -> highspy.HighsLp:
    model = highspy.HighsLp()
    model.num_col_ = lp.n_vars
    model.num_row_ = lp.n_rows
    model.col_cost_ = np.asarray(lp.objective, dtype=float)
    model.col_lower_ = np.asarray(lp.lower, dtype=float)
    model.col_upper_ = np.asarray(lp.upper, dtype=float)
    model.row_lower_ = np.where(lp.senses == LE, -np.inf, lp.rhs).astype(float)
    model.row_upper_ = np.where(lp.senses == GE, np.inf, lp.rhs).astype(float)
    A = lp.A.tocsc()
    A.sort_indices()
    model.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    model.a_matrix_.start_ = A.indptr.astype(np.int32)
    model.a_matrix_.index_ = A.indices.astype(np.int32)
    model.a_matrix_.value_ = A.data.astype(float)
    model.sense_ = highspy.ObjSense.kMaximize
    return model


class HighsSession:
    """HiGHS instance bound to one LP; later solves may change bounds only."""

    def __init__(self, lp: LinearProgram, feas_tol: float = 1e-9, opt_tol: float = 1e-9,
                 max_iters: int | None = None):
        self.lp = lp
        self._h = highspy.Highs()
        h = self._h
        h.setOptionValue("output_flag", False)
        h.setOptionValue("solver", "simplex")
        h.setOptionValue("simplex_strategy", 1)  # dual
        h.setOptionValue("primal_feasibility_tolerance", max(feas_tol, 1e-10))
        h.setOptionValue("dual_feasibility_tolerance", max(opt_tol, 1e-10))
        if max_iters is not None:
            h.setOptionValue("simplex_iteration_limit", int(max_iters))
        h.passModel(_highs_lp(lp))
        self._lower = np.array(lp.lower, dtype=float)
        self._upper = np.array(lp.upper, dtype=float)

    def solve(self, lp: LinearProgram | None = None) -> LpSolution:
        """Solve ``lp``, which must share matrix, senses, rhs and objective with the session's."""
        if lp is not None and lp is not self.lp:
            if lp.A is not self.lp.A and (lp.A.shape != self.lp.A.shape
                                          or (lp.A != self.lp.A).nnz):
                raise ValueError("session LPs may differ in bounds only")
            if not (np.array_equal(lp.objective, self.lp.objective)
                    and np.array_equal(lp.rhs, self.lp.rhs)
                    and np.array_equal(lp.senses, self.lp.senses)):
                raise ValueError("session LPs may differ in bounds only")
            changed = np.flatnonzero((lp.lower != self._lower) | (lp.upper != self._upper))
            if changed.size:
                self._h.changeColsBounds(changed.size, changed.astype(np.int32),
                                         lp.lower[changed].astype(float),
                                         lp.upper[changed].astype(float))
                self._lower[changed] = lp.lower[changed]
                self._upper[changed] = lp.upper[changed]
            self.lp = lp
        h = self._h
        h.run()
        iters = int(h.getInfo().simplex_iteration_count)
        model_status = h.getModelStatus()
        if model_status == highspy.HighsModelStatus.kUnboundedOrInfeasible:
            # re-run presolve-free to tell the two apart
            h.setOptionValue("presolve", "off")
            h.run()
            h.setOptionValue("presolve", "choose")
            model_status = h.getModelStatus()
            iters += int(h.getInfo().simplex_iteration_count)
        status = _STATUS.get(model_status)
        if status != LpStatus.OPTIMAL:
            return LpSolution(status or LpStatus.ITERATION_LIMIT, iterations=iters,
                              backend="highs",
                              info={"message": h.modelStatusToString(model_status)})
        sol = h.getSolution()
        x = np.asarray(sol.col_value, dtype=float)
        duals = np.asarray(sol.row_dual, dtype=float)
        reduced = self.lp.objective - self.lp.A.T @ duals
        return LpSolution(LpStatus.OPTIMAL, x=x, objective_value=self.lp.value(x), duals=duals,
                          reduced_costs=reduced, iterations=iters, backend="highs")


def highs(lp: LinearProgram, feas_tol: float = 1e-9, opt_tol: float = 1e-9,
          max_iters: int | None = None) -> LpSolution:
    return HighsSession(lp, feas_tol, opt_tol, max_iters).solve()
