"""Equidistant-grid transcription of the deFBA control problem into an LP.

States (external amounts and scaled macromolecules) live on grid points,
fluxes are piecewise constant on intervals. The dynamics use the implicit
midpoint rule, which is exact for piecewise-constant fluxes without dilution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .constraints import ConstraintSystem
from .lp import EQ, LE, LinearProgram, LpStatus, solve

ROW_CLASSES = ("dynamics", "qssa", "capacity", "composition")


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    h: float
    N: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"step must be positive, got {self.h}")
        if self.N < 1:
            raise ValueError(f"need at least one interval, got N={self.N}")

    @classmethod
    def covering(cls, T: float, h: float, t0: float = 0.0) -> "TimeGrid":
        """Grid with ``N * h == T``; ``h`` must divide ``T`` up to 1e-9 relative."""
        return cls(t0, h, steps(T, h))

    @property
    def points(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.N + 1)

    @property
    def T(self) -> float:
        return self.t0 + self.N * self.h


def steps(T: float, h: float) -> int:
    if not T > 0 or not h > 0:
        raise ValueError(f"times must be positive (T={T}, h={h})")
    n = round(T / h)
    if n < 1 or abs(n * h - T) > 1e-9 * max(abs(T), 1.0):
        raise ValueError(f"step {h} does not divide {T}")
    return int(n)


def horizon_steps(p: float, h: float) -> int:
    """Number of steps of a prediction horizon ``p``, rounded up to whole steps."""
    if not p > 0 or not h > 0:
        raise ValueError(f"times must be positive (p={p}, h={h})")
    return max(1, math.ceil(p / h - 1e-9))


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """LP of one grid together with the index bookkeeping to read it back."""

    system: ConstraintSystem
    grid: TimeGrid
    lp: LinearProgram
    row_class: np.ndarray

    @property
    def n_states(self) -> int:
        return self.system.n_states

    @property
    def n_fluxes(self) -> int:
        return self.system.n_fluxes

    def state_slice(self, k: int) -> slice:
        ns = self.n_states
        return slice(k * ns, (k + 1) * ns)

    def flux_slice(self, k: int) -> slice:
        off = (self.grid.N + 1) * self.n_states
        nr = self.n_fluxes
        return slice(off + k * nr, off + (k + 1) * nr)

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Split a primal vector into ``(Y, P_scaled, V_scaled)`` arrays."""
        ns, N = self.n_states, self.grid.N
        n_y = self.system.scaled.n_y
        states = x[:(N + 1) * ns].reshape(N + 1, ns)
        fluxes = x[(N + 1) * ns:].reshape(N, self.n_fluxes)
        return states[:, :n_y].copy(), states[:, n_y:].copy(), fluxes.copy()

    def with_initial(self, y0: np.ndarray, p0: np.ndarray) -> "DiscreteProblem":
        """Same LP with the fixed initial state replaced."""
        s0 = np.concatenate([y0, p0])
        lower = self.lp.lower.copy()
        upper = self.lp.upper.copy()
        lower[self.state_slice(0)] = s0
        upper[self.state_slice(0)] = s0
        return replace(self, lp=self.lp.with_bounds(lower, upper))

    def restricted(self, classes) -> LinearProgram:
        """LP keeping only the rows of the given classes (for diagnosis)."""
        keep = np.isin(self.row_class, list(classes))
        lp = self.lp
        names = None if lp.row_names is None else [n for n, k in zip(lp.row_names, keep) if k]
        return LinearProgram(lp.objective, lp.A[keep], lp.senses[keep], lp.rhs[keep],
                             lp.lower, lp.upper, lp.objective_offset, lp.var_names, names)


def step_matrices(system: ConstraintSystem, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonals ``(I + h G/2)``, ``(I - h G/2)`` and the constant ``h u`` of one step."""
    sc = system.scaled
    gamma = np.concatenate([sc.dilution, np.zeros(sc.n_p)])
    u = np.concatenate([sc.inflow, np.zeros(sc.n_p)])
    return 1.0 + 0.5 * h * gamma, 1.0 - 0.5 * h * gamma, h * u


def advance(system: ConstraintSystem, h: float, state: np.ndarray, flux: np.ndarray) -> np.ndarray:
    """Exact solution of one implicit-midpoint step for given interval fluxes."""
    plus, minus, hu = step_matrices(system, h)
    return (minus * state + h * (system.dynamics @ flux) + hu) / plus


def discretize(system: ConstraintSystem, grid: TimeGrid,
               initial: tuple[np.ndarray, np.ndarray]) -> DiscreteProblem:
    sc = system.scaled
    y0, p0 = (np.asarray(a, dtype=float) for a in initial)
    if y0.shape != (sc.n_y,) or p0.shape != (sc.n_p,):
        raise ValueError(f"initial state has shapes {y0.shape}, {p0.shape}; "
                         f"expected ({sc.n_y},), ({sc.n_p},)")
    if (y0 < 0).any() or (p0 < 0).any():
        raise ValueError("initial amounts must be nonnegative")
    N, h = grid.N, grid.h
    ns, nr = system.n_states, system.n_fluxes
    n_states_total = (N + 1) * ns
    n_vars = n_states_total + N * nr
    eye_n = sp.identity(N, format="csr")
    shift = sp.eye(N, N + 1, k=1, format="csr")
    left = sp.eye(N, N + 1, k=0, format="csr")

    plus, minus, hu = step_matrices(system, h)
    dyn_states = sp.kron(shift, sp.diags(plus)) - sp.kron(left, sp.diags(minus))
    dyn = sp.hstack([dyn_states, sp.kron(eye_n, -h * system.dynamics)])
    dyn_rhs = np.tile(hu, N)

    qssa = sp.hstack([sp.csr_matrix((N * system.qssa.shape[0], n_states_total)),
                      sp.kron(eye_n, system.qssa)])

    sel_p = sp.hstack([sp.csr_matrix((sc.n_p, sc.n_y)), sp.identity(sc.n_p)])
    n_cap = system.capacity_flux.shape[0]
    cap = sp.hstack([sp.kron(left, -system.capacity_enzyme @ sel_p),
                     sp.kron(eye_n, system.capacity_flux)])

    n_comp = system.composition.shape[0]
    comp = sp.hstack([sp.kron(sp.identity(N + 1), system.composition @ sel_p),
                      sp.csr_matrix(((N + 1) * n_comp, N * nr))])

    A = sp.vstack([dyn, qssa, cap, comp]).tocsr()
    counts = (N * ns, qssa.shape[0], N * n_cap, (N + 1) * n_comp)
    senses = np.array([EQ] * (counts[0] + counts[1]) + [LE] * (counts[2] + counts[3]),
                      dtype=object)
    rhs = np.concatenate([dyn_rhs, np.zeros(counts[1] + counts[2] + counts[3])])
    row_class = np.repeat(np.array(ROW_CLASSES, dtype=object), counts)

    lower = np.concatenate([np.zeros(n_states_total), np.tile(system.flux_lb, N)])
    upper = np.concatenate([np.full(n_states_total, np.inf), np.tile(system.flux_ub, N)])

    b = system.biomass_weights
    weights = np.full(N + 1, h)
    weights[[0, -1]] = 0.5 * h
    objective = np.zeros(n_vars)
    state_obj = np.outer(weights, np.concatenate([np.zeros(sc.n_y), b]))
    objective[:n_states_total] = state_obj.ravel()

    state_names = list(sc.external_ids) + list(sc.macro_ids)
    var_names = [f"{s}@{k}" for k in range(N + 1) for s in state_names]
    var_names += [f"{r}@{k}" for k in range(N) for r in sc.reaction_ids]
    row_names = [f"dyn_{s}@{k}" for k in range(N) for s in state_names]
    row_names += [f"qssa_{x}@{k}" for k in range(N) for x in sc.internal_ids]
    row_names += [f"cap_{c}@{k}" for k in range(N) for c in system.capacity_rows]
    row_names += [f"comp_{c.macromolecule_id}@{k}" for k in range(N + 1)
                  for c in sc.model.composition]

    lp = LinearProgram(objective, A, senses, rhs, lower, upper,
                       var_names=var_names, row_names=row_names)
    prob = DiscreteProblem(system, grid, lp, row_class)
    return prob.with_initial(y0, p0)


def diagnose_infeasibility(problem: DiscreteProblem, **solve_opts) -> str | None:
    """First row class whose addition makes the LP infeasible, or None."""
    active = ["dynamics"]
    for cls in ROW_CLASSES:
        if cls not in active:
            active.append(cls)
        sol = solve(problem.restricted(active).with_objective(np.zeros(problem.lp.n_vars)),
                    **solve_opts)
        if sol.status == LpStatus.INFEASIBLE:
            return cls
    return None


def trapezoid(values: np.ndarray, h: float) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(h * (values.sum() - 0.5 * (values[0] + values[-1])))


__all__ = ["DiscreteProblem", "TimeGrid", "ROW_CLASSES", "advance", "diagnose_infeasibility",
           "discretize", "horizon_steps", "step_matrices", "steps", "trapezoid"]
