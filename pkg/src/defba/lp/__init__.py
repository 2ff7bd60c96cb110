"""Linear programming layer: problem container, solvers and LP-file export."""

from __future__ import annotations

import logging

from .highs import HighsSession, highs
from .lpformat import to_lp_text, write_lp
from .program import EQ, GE, LE, LinearProgram, LpSolution, LpStatus, dual_objective
from .simplex import simplex

log = logging.getLogger(__name__)

# dense simplex keeps an explicit m x m inverse; beyond this size HiGHS is used
DENSE_LIMIT = 600

BACKENDS = {"simplex": simplex, "highs": highs}


def solve(lp: LinearProgram, *, feas_tol: float = 1e-9, opt_tol: float = 1e-9,
          max_iters: int | None = None, backend: str = "auto") -> LpSolution:
    """Maximise ``lp``. ``backend`` is ``"simplex"``, ``"highs"`` or ``"auto"``."""
    auto = backend == "auto"
    if auto:
        backend = "simplex" if max(lp.n_vars, lp.n_rows) <= DENSE_LIMIT else "highs"
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}") from None
    sol = fn(lp, feas_tol=feas_tol, opt_tol=opt_tol, max_iters=max_iters)
    if auto and backend == "simplex" and "numerical trouble" in sol.info.get("message", ""):
        log.info("dense simplex lost accuracy, retrying with HiGHS")
        backend = "highs"
        sol = highs(lp, feas_tol=feas_tol, opt_tol=opt_tol, max_iters=max_iters)
    log.debug("%s: %d vars, %d rows -> %s after %d iterations", backend, lp.n_vars,
              lp.n_rows, sol.status.value, sol.iterations)
    return sol


class LpSession:
    """Repeated solves of LPs that differ from the first only in variable bounds.

    With HiGHS each solve starts from the previous optimal basis.
    """

    def __init__(self, lp: LinearProgram, *, feas_tol: float = 1e-9, opt_tol: float = 1e-9,
                 max_iters: int | None = None, backend: str = "auto"):
        if backend not in ("auto", *BACKENDS):
            raise ValueError(f"unknown LP backend {backend!r}")
        self._kw = dict(feas_tol=feas_tol, opt_tol=opt_tol, max_iters=max_iters)
        self._backend = backend
        self._highs = None
        if backend == "highs" or (backend == "auto" and max(lp.n_vars, lp.n_rows) > DENSE_LIMIT):
            self._highs = HighsSession(lp, **self._kw)

    def solve(self, lp: LinearProgram) -> LpSolution:
        if self._highs is None:
            return solve(lp, backend=self._backend, **self._kw)
        sol = self._highs.solve(lp)
        log.debug("highs session: %s after %d iterations", sol.status.value, sol.iterations)
        return sol


__all__ = ["EQ", "GE", "LE", "LinearProgram", "LpSession", "LpSolution", "LpStatus",
           "dual_objective", "highs", "simplex", "solve", "to_lp_text", "write_lp", "DENSE_LIMIT"]
