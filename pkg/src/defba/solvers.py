"""Full-horizon deFBA and receding-horizon (short-term) deFBA drivers."""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .constraints import ConstraintSystem, KcatAssignment, build_system
from .discretization import (DiscreteProblem, TimeGrid, advance, diagnose_infeasibility,
                             discretize, horizon_steps, trapezoid)
from .lp import LpSession, LpSolution, LpStatus, solve
from .model import MetabolicModel, ReactionKind, ScaledModel, scale

log = logging.getLogger(__name__)


class SolveError(RuntimeError):
    """An LP along the way did not reach optimality."""

    status = LpStatus.INFEASIBLE

    def __init__(self, message: str, *, iteration: int | None = None,
                 time: float | None = None, row_class: str | None = None,
                 scenario: int | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.time = time
        self.row_class = row_class
        self.scenario = scenario


class InfeasibleError(SolveError):
    status = LpStatus.INFEASIBLE


class UnboundedError(SolveError):
    status = LpStatus.UNBOUNDED


class SolverLimitError(SolveError):
    status = LpStatus.ITERATION_LIMIT


class Method(str, enum.Enum):
    DEFBA = "deFBA"
    SDEFBA = "sdeFBA"
    RDEFBA = "rdeFBA"


@dataclass
class Trajectory:
    """Scaled amounts on grid points and fluxes on intervals of one run."""

    grid: TimeGrid
    Y: np.ndarray
    P_scaled: np.ndarray
    V_scaled: np.ndarray
    objective_value: float
    method: Method
    external_ids: tuple[str, ...]
    macro_ids: tuple[str, ...]
    reaction_ids: tuple[str, ...]
    biomass_weights: np.ndarray
    enzyme_mask: np.ndarray
    flux_scale: np.ndarray
    alpha: float
    units: Mapping[str, str]
    scenario_label: str | None = None
    info: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def biomass(self) -> np.ndarray:
        """``b^T P`` on every grid point in scaled units."""
        return self.P_scaled @ self.biomass_weights

    def species(self, sid: str) -> np.ndarray:
        if sid in self.external_ids:
            return self.Y[:, self.external_ids.index(sid)]
        return self.P_scaled[:, self.macro_ids.index(sid)]

    def flux(self, rid: str) -> np.ndarray:
        return self.V_scaled[:, self.reaction_ids.index(rid)]

    def unscaled(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(Y, P, V)`` in the model's raw units."""
        return self.Y, self.P_scaled / self.alpha, self.V_scaled / self.flux_scale

    def to_csv(self, path: str | Path | None = None) -> str:
        """CSV of unscaled amounts and fluxes; fluxes sit on interval-left rows."""
        Y, P, V = self.unscaled()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["time"] + list(self.external_ids) + list(self.macro_ids) + list(self.reaction_ids)
        if self.scenario_label is not None:
            head = ["scenario_label"] + head
        w.writerow(head)
        for k, t in enumerate(self.times):
            row = [_fmt(t)] + [_fmt(v) for v in Y[k]] + [_fmt(v) for v in P[k]]
            row += [_fmt(v) for v in V[k]] if k < len(V) else [""] * V.shape[1]
            if self.scenario_label is not None:
                row = [self.scenario_label] + row
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="ascii")
        return text


def _fmt(v: float) -> str:
    return f"{float(v):.12g}"


@dataclass(frozen=True)
class TrajectoryTable:
    """Raw contents of a trajectory CSV, as read back for auditing."""

    times: np.ndarray
    amounts: dict[str, np.ndarray]
    fluxes: dict[str, np.ndarray]


def read_trajectory_csv(path: str | Path, species_ids, reaction_ids) -> TrajectoryTable:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    col = {name: i for i, name in enumerate(head)}
    missing = [c for c in ["time", *species_ids, *reaction_ids] if c not in col]
    if missing:
        raise ValueError(f"trajectory file lacks columns {missing}")
    times = np.array([float(r[col["time"]]) for r in body])
    amounts = {s: np.array([float(r[col[s]]) for r in body]) for s in species_ids}
    fluxes = {f: np.array([float(r[col[f]]) for r in body[:-1]]) for f in reaction_ids}
    return TrajectoryTable(times, amounts, fluxes)


class PhaseKind(str, enum.Enum):
    STATIONARY = "Stationary"
    LINEAR = "Linear"
    EXPONENTIAL = "Exponential"


@dataclass(frozen=True)
class GrowthPhase:
    start: float
    end: float
    kind: PhaseKind

    def to_dict(self) -> dict:
        return {"start": float(self.start), "end": float(self.end), "kind": self.kind.value}


# changes below this fraction of the total amount count as solver noise
NOISE = 1e-9


def interval_kinds(traj: Trajectory, tol: float = 1e-4) -> list[PhaseKind]:
    P = traj.P_scaled
    B = traj.biomass()
    cat = traj.enzyme_mask
    kinds = []
    for k in range(len(P) - 1):
        a, b = P[k], P[k + 1]
        scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-300)
        dP = b - a
        dB = B[k + 1] - B[k]
        b_scale = max(abs(B[k]), abs(B[k + 1]), 1e-300)
        if np.abs(dP).max(initial=0.0) <= tol * scale and abs(dB) <= tol * b_scale:
            kinds.append(PhaseKind.STATIONARY)
            continue
        limit = tol * np.maximum(np.abs(a), np.abs(b)) + NOISE * scale
        if (np.abs(dP[cat]) <= limit[cat]).all():
            kinds.append(PhaseKind.LINEAR)
        else:
            kinds.append(PhaseKind.EXPONENTIAL)
    return kinds


def classify_phases(traj: Trajectory, tol: float = 1e-4) -> list[GrowthPhase]:
    """Maximal runs of intervals with the same growth mode."""
    kinds = interval_kinds(traj, tol)
    t = traj.times
    phases: list[GrowthPhase] = []
    start = 0
    for k in range(1, len(kinds) + 1):
        if k == len(kinds) or kinds[k] != kinds[start]:
            phases.append(GrowthPhase(float(t[start]), float(t[k]), kinds[start]))
            start = k
    return phases


# -- solving ------------------------------------------------------------------

@dataclass(frozen=True)
class SolveOptions:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    max_iters: int | None = None
    backend: str = "auto"

    def kwargs(self) -> dict:
        return {"feas_tol": self.feas_tol, "opt_tol": self.opt_tol,
                "max_iters": self.max_iters, "backend": self.backend}


def initial_state(scaled: ScaledModel, initial: Mapping[str, float] | None = None
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Scaled ``(Y0, P0)`` from the model file, with optional unscaled overrides."""
    y0 = scaled.initial_external.copy()
    p0 = scaled.initial_macro.copy()
    for sid, value in (initial or {}).items():
        if sid in scaled.external_ids:
            y0[scaled.external_ids.index(sid)] = value
        elif sid in scaled.macro_ids:
            p0[scaled.macro_ids.index(sid)] = scaled.alpha * value
        else:
            raise KeyError(f"{sid!r} is not an external species or macromolecule")
    return y0, p0


def flux_scale(scaled: ScaledModel) -> np.ndarray:
    return np.array([scaled.alpha if k == ReactionKind.BIOMASS else 1.0
                     for k in scaled.reaction_kinds])


def make_trajectory(scaled: ScaledModel, grid: TimeGrid, Y, P, V, objective: float,
                    method: Method, label: str | None = None, info: dict | None = None
                    ) -> Trajectory:
    return Trajectory(grid, Y, P, V, objective, method, scaled.external_ids, scaled.macro_ids,
                      scaled.reaction_ids, scaled.biomass_weights, scaled.enzyme_mask,
                      flux_scale(scaled), scaled.alpha, dict(scaled.model.units), label,
                      info or {})


def check(sol: LpSolution, problem: DiscreteProblem | None = None, *,
          iteration: int | None = None, time: float | None = None,
          opts: SolveOptions = SolveOptions()) -> None:
    """Raise the matching :class:`SolveError` unless ``sol`` is optimal."""
    if sol.optimal:
        return
    where = "" if iteration is None else f" at iteration {iteration} (t={time:g})"
    if sol.status == LpStatus.INFEASIBLE:
        row_class = diagnose_infeasibility(problem, **opts.kwargs()) if problem else None
        extra = f"; first infeasible row class: {row_class}" if row_class else ""
        raise InfeasibleError(f"LP infeasible{where}{extra}", iteration=iteration, time=time,
                              row_class=row_class)
    if sol.status == LpStatus.UNBOUNDED:
        raise UnboundedError(f"LP unbounded{where}; some flux lacks a bound (model error)",
                             iteration=iteration, time=time)
    raise SolverLimitError(f"LP solver stopped early{where}: {sol.info.get('message', '')}",
                           iteration=iteration, time=time)


def _system(model: MetabolicModel | ScaledModel, kcats: KcatAssignment | None):
    scaled = model if isinstance(model, ScaledModel) else scale(model)
    return scaled, build_system(scaled, kcats)


def solve_defba(model: MetabolicModel | ScaledModel, T: float, h: float,
                initial: Mapping[str, float] | None = None,
                kcats: KcatAssignment | None = None,
                opts: SolveOptions = SolveOptions()) -> Trajectory:
    """Single LP over ``[0, T]``."""
    scaled, system = _system(model, kcats)
    grid = TimeGrid.covering(T, h)
    problem = discretize(system, grid, initial_state(scaled, initial))
    sol = solve(problem.lp, **opts.kwargs())
    check(sol, problem, opts=opts)
    Y, P, V = problem.unpack(sol.x)
    return make_trajectory(scaled, grid, Y, P, V, sol.objective_value, Method.DEFBA,
                           info={"lp_iterations": sol.iterations, "backend": sol.backend,
                                 "n_vars": problem.lp.n_vars, "n_rows": problem.lp.n_rows})


def clip_state(state: np.ndarray, feas_tol: float) -> np.ndarray:
    """Zero tiny negative amounts left over from LP round-off."""
    floor = -feas_tol * max(1.0, np.abs(state).max(initial=0.0))
    bad = state < floor
    if bad.any():
        raise InfeasibleError(f"state became negative ({state[bad].min():g})")
    return np.where(state < 0, 0.0, state)


Planner = Callable[[np.ndarray, int], "tuple[np.ndarray, float]"]


def receding_horizon(system: ConstraintSystem, grid: TimeGrid, s0: np.ndarray,
                     plan: Planner, feas_tol: float) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Apply ``plan(state, k) -> (first fluxes, objective)`` on every interval of ``grid``.

    The state handed to iteration ``k + 1`` is exactly the stored grid point.
    """
    ns = system.n_states
    states = np.empty((grid.N + 1, ns))
    fluxes = np.empty((grid.N, system.n_fluxes))
    states[0] = s0
    objectives = []
    for k in range(grid.N):
        v, obj = plan(states[k], k)
        fluxes[k] = v
        objectives.append(obj)
        states[k + 1] = clip_state(advance(system, grid.h, states[k], v), feas_tol)
    return states, fluxes, objectives


def solve_sdefba(model: MetabolicModel | ScaledModel, T: float, p: float, h: float,
                 initial: Mapping[str, float] | None = None,
                 kcats: KcatAssignment | None = None,
                 opts: SolveOptions = SolveOptions()) -> Trajectory:
    """Receding horizon of length ``p``, implementing one interval per iteration."""
    scaled, system = _system(model, kcats)
    grid = TimeGrid.covering(T, h)
    if p < h * (1 - 1e-9):
        raise ValueError(f"horizon {p} is shorter than the step {h}")
    horizon = TimeGrid(0.0, h, horizon_steps(p, h))
    y0, p0 = initial_state(scaled, initial)
    base = discretize(system, horizon, (y0, p0))
    n_y = scaled.n_y
    iterations = []
    session = LpSession(base.lp, **opts.kwargs())

    def plan(state, k):
        problem = base.with_initial(state[:n_y], state[n_y:])
        sol = session.solve(problem.lp)
        check(sol, problem, iteration=k, time=grid.points[k], opts=opts)
        iterations.append(sol.iterations)
        return sol.x[problem.flux_slice(0)], sol.objective_value

    states, fluxes, objectives = receding_horizon(system, grid, np.concatenate([y0, p0]),
                                                  plan, opts.feas_tol)
    P = states[:, n_y:]
    objective = trapezoid(P @ scaled.biomass_weights, h)
    log.info("sdeFBA: %d iterations, horizon %d steps", grid.N, horizon.N)
    return make_trajectory(scaled, grid, states[:, :n_y], P, fluxes, objective, Method.SDEFBA,
                           info={"iteration_objectives": objectives, "lp_iterations": iterations,
                                 "horizon_steps": horizon.N})


__all__ = ["GrowthPhase", "InfeasibleError", "Method", "PhaseKind", "SolveError", "SolveOptions",
           "SolverLimitError", "Trajectory", "UnboundedError", "classify_phases",
           "initial_state", "read_trajectory_csv", "solve_defba", "solve_sdefba"]
