"""Scenario-tree robust short-term deFBA.

Every vertex of the box of uncertain catalytic constants becomes a scenario.
All scenarios share the first interval's fluxes (the decision that is
actually implemented) and branch freely afterwards.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .constraints import KcatAssignment, build_system, with_kcats
from .discretization import DiscreteProblem, TimeGrid, discretize, horizon_steps, trapezoid
from .lp import LinearProgram, LpSession, LpStatus, solve
from .model import MetabolicModel, ScaledModel, scale
from .solvers import (InfeasibleError, Method, SolveOptions, Trajectory, check, initial_state,
                      make_trajectory, receding_horizon)

log = logging.getLogger(__name__)

MAX_UNCERTAIN = 12
DIRECTIONS = ("forward", "backward")


@dataclass(frozen=True)
class UncertaintyEntry:
    reaction_id: str
    direction: str
    d_min: float
    d_max: float

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if not (0 < self.d_min <= self.d_max):
            raise ValueError(f"need 0 < d_min <= d_max for {self.reaction_id}, "
                             f"got [{self.d_min}, {self.d_max}]")


@dataclass(frozen=True)
class UncertaintySet:
    entries: tuple[UncertaintyEntry, ...] = ()
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.entries) > MAX_UNCERTAIN:
            raise ValueError(f"{len(self.entries)} uncertain constants exceed the limit of "
                             f"{MAX_UNCERTAIN}")
        keys = [(e.reaction_id, e.direction) for e in self.entries]
        if len(set(keys)) != len(keys):
            raise ValueError("each constant may appear only once in an uncertainty set")
        if self.weights is not None:
            if len(self.weights) != 2 ** len(self.entries):
                raise ValueError(f"expected {2 ** len(self.entries)} weights, "
                                 f"got {len(self.weights)}")
            if any(not w > 0 for w in self.weights):
                raise ValueError("scenario weights must be positive")

    @property
    def n_scenarios(self) -> int:
        return 2 ** len(self.entries)

    @classmethod
    def from_json(cls, data) -> "UncertaintySet":
        if isinstance(data, Mapping):
            raw, weights = data.get("entries", []), data.get("weights")
        else:
            raw, weights = data, None
        entries = tuple(UncertaintyEntry(e["catalysis_rule"], e.get("direction", "forward"),
                                         float(e["d_min"]), float(e["d_max"])) for e in raw)
        return cls(entries, None if weights is None else tuple(float(w) for w in weights))

    def to_json(self) -> dict:
        out: dict = {"entries": [{"catalysis_rule": e.reaction_id, "direction": e.direction,
                                  "d_min": e.d_min, "d_max": e.d_max} for e in self.entries]}
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out


def load_uncertainty(path: str | Path) -> UncertaintySet:
    with open(path, encoding="utf-8") as fh:
        return UncertaintySet.from_json(json.load(fh))


@dataclass(frozen=True)
class ScenarioTree:
    """Extreme-vertex scenarios; branching happens after the first interval."""

    uncertainty: UncertaintySet
    vertices: np.ndarray
    kcats: tuple[dict[str, tuple[float, float | None]], ...]
    weights: np.ndarray
    robust_horizon: int = 1

    @property
    def n_scenarios(self) -> int:
        return len(self.kcats)

    def label(self, j: int) -> str:
        bits = "".join(str(int(b)) for b in self.vertices[j])
        return f"scenario_{j}" + (f"[{bits}]" if bits else "")


def enumerate_scenarios(uncertainty: UncertaintySet,
                        nominal: Mapping[str, tuple[float, float | None]]) -> ScenarioTree:
    """All ``2^n`` vertices in binary counting order; bit 0 picks ``d_min``.

    The first entry is the most significant bit, so scenario 0 is all ``d_min``.
    """
    for e in uncertainty.entries:
        if e.reaction_id not in nominal:
            raise KeyError(f"no catalysis rule for reaction {e.reaction_id!r}")
        if e.direction == "backward" and nominal[e.reaction_id][1] is None:
            raise ValueError(f"{e.reaction_id} has no backward constant to perturb")
    n = len(uncertainty.entries)
    vertices = np.zeros((2 ** n, n), dtype=np.int8)
    for j, bits in enumerate(itertools.product((0, 1), repeat=n)):
        vertices[j] = bits
    kcats = []
    for bits in vertices:
        assignment = dict(nominal)
        for e, bit in zip(uncertainty.entries, bits):
            kf, kb = assignment[e.reaction_id]
            d = e.d_max if bit else e.d_min
            if e.direction == "forward":
                kf = kf * d
            else:
                kb = kb * d
            assignment[e.reaction_id] = (kf, kb)
        kcats.append(assignment)
    weights = np.ones(len(kcats)) if uncertainty.weights is None else np.array(uncertainty.weights)
    return ScenarioTree(uncertainty, vertices, tuple(kcats), weights)


@dataclass(frozen=True, eq=False)
class CoupledProblem:
    """One LP holding a copy of the horizon problem per scenario.

    Global columns start with the shared first-interval fluxes, followed by
    each scenario's remaining variables.
    """

    problems: tuple[DiscreteProblem, ...]
    columns: tuple[np.ndarray, ...]
    row_blocks: tuple[slice, ...]
    lp: LinearProgram
    shared: np.ndarray

    def with_initial(self, state: np.ndarray) -> "CoupledProblem":
        lower, upper = self.lp.lower.copy(), self.lp.upper.copy()
        for prob, cols in zip(self.problems, self.columns):
            idx = cols[prob.state_slice(0)]
            lower[idx] = state
            upper[idx] = state
        return CoupledProblem(self.problems, self.columns, self.row_blocks,
                              self.lp.with_bounds(lower, upper), self.shared)

    def local(self, x: np.ndarray, j: int) -> np.ndarray:
        return x[self.columns[j]]


def build_coupled(problems: Sequence[DiscreteProblem], weights: np.ndarray) -> CoupledProblem:
    first = problems[0]
    n_local = first.lp.n_vars
    shared_local = np.arange(n_local)[first.flux_slice(0)]
    n_shared = shared_local.size
    own_local = np.setdiff1d(np.arange(n_local), shared_local)
    n_own = own_local.size

    columns, blocks, rows = [], [], []
    objective = np.zeros(n_shared + len(problems) * n_own)
    lower = np.empty_like(objective)
    upper = np.empty_like(objective)
    senses, rhs, names, row_names = [], [], [None] * objective.size, []
    offset = 0
    for j, prob in enumerate(problems):
        if prob.lp.n_vars != n_local:
            raise ValueError("scenario problems must share one layout")
        cols = np.empty(n_local, dtype=int)
        cols[shared_local] = np.arange(n_shared)
        cols[own_local] = n_shared + j * n_own + np.arange(n_own)
        columns.append(cols)
        sel = sp.csr_matrix((np.ones(n_local), (np.arange(n_local), cols)),
                            shape=(n_local, objective.size))
        rows.append(prob.lp.A @ sel)
        blocks.append(slice(offset, offset + prob.lp.n_rows))
        offset += prob.lp.n_rows
        objective[cols] += weights[j] * prob.lp.objective
        lower[cols] = prob.lp.lower
        upper[cols] = prob.lp.upper
        senses.append(prob.lp.senses)
        rhs.append(prob.lp.rhs)
        for local, g in enumerate(cols):
            if names[g] is None:
                names[g] = prob.lp.var_names[local] if g < n_shared else \
                    f"s{j}_{prob.lp.var_names[local]}"
        row_names += [f"s{j}_{r}" for r in prob.lp.row_names]
    lp = LinearProgram(objective, sp.vstack(rows).tocsr(), np.concatenate(senses),
                       np.concatenate(rhs), lower, upper, var_names=names, row_names=row_names)
    return CoupledProblem(tuple(problems), tuple(columns), tuple(blocks), lp,
                          np.arange(n_shared))


@dataclass
class RobustResult:
    trajectory: Trajectory
    scenarios: list[Trajectory]
    tree: ScenarioTree
    iteration_objectives: list[list[float]] = field(default_factory=list)
    first_interval_fluxes: list[np.ndarray] = field(default_factory=list)
    coupled: CoupledProblem | None = None


def solve_rdefba(model: MetabolicModel | ScaledModel, T: float, p: float, h: float,
                 uncertainty: UncertaintySet,
                 initial: Mapping[str, float] | None = None,
                 kcats: KcatAssignment | None = None,
                 opts: SolveOptions = SolveOptions()) -> RobustResult:
    """Receding-horizon solve of the coupled scenario LP.

    ``scenarios`` holds each scenario's plan over the first horizon.
    """
    scaled = model if isinstance(model, ScaledModel) else scale(model)
    nominal = scaled.nominal_kcats()
    if kcats:
        nominal.update(kcats)
    tree = enumerate_scenarios(uncertainty, nominal)
    base_system = build_system(scaled, nominal)
    systems = [with_kcats(base_system, kc) for kc in tree.kcats]

    grid = TimeGrid.covering(T, h)
    if p < h * (1 - 1e-9):
        raise ValueError(f"horizon {p} is shorter than the step {h}")
    horizon = TimeGrid(0.0, h, horizon_steps(p, h))
    y0, p0 = initial_state(scaled, initial)
    problems = [discretize(s, horizon, (y0, p0)) for s in systems]
    coupled = build_coupled(problems, tree.weights)
    log.info("rdeFBA: %d scenarios, coupled LP with %d vars and %d rows",
             tree.n_scenarios, coupled.lp.n_vars, coupled.lp.n_rows)

    n_y = scaled.n_y
    per_iteration: list[list[float]] = []
    first_fluxes: list[np.ndarray] = []
    plans: list[np.ndarray] = []

    session = LpSession(coupled.lp, **opts.kwargs())

    def plan(state, k):
        cp = coupled.with_initial(state)
        sol = session.solve(cp.lp)
        if sol.status == LpStatus.INFEASIBLE:
            bad = _infeasible_scenario(problems, state, n_y, opts)
            raise InfeasibleError(
                f"coupled LP infeasible at iteration {k} (t={grid.points[k]:g})"
                + (f"; scenario {bad} is infeasible on its own" if bad is not None else ""),
                iteration=k, time=grid.points[k], scenario=bad)
        check(sol, iteration=k, time=grid.points[k], opts=opts)
        locals_ = [cp.local(sol.x, j) for j in range(tree.n_scenarios)]
        per_iteration.append([problems[j].lp.value(x) for j, x in enumerate(locals_)])
        v = sol.x[cp.shared]
        first_fluxes.append([x[problems[j].flux_slice(0)] for j, x in enumerate(locals_)])
        if k == 0:
            plans.extend(locals_)
        return v, sol.objective_value

    states, fluxes, objectives = receding_horizon(systems[0], grid, np.concatenate([y0, p0]),
                                                  plan, opts.feas_tol)
    P = states[:, n_y:]
    traj = make_trajectory(scaled, grid, states[:, :n_y], P, fluxes,
                           trapezoid(P @ scaled.biomass_weights, h), Method.RDEFBA,
                           info={"coupled_objectives": objectives,
                                 "n_scenarios": tree.n_scenarios,
                                 "horizon_steps": horizon.N,
                                 "n_vars": coupled.lp.n_vars, "n_rows": coupled.lp.n_rows})
    scenario_trajs = []
    for j, x in enumerate(plans):
        Yj, Pj, Vj = problems[j].unpack(x)
        scenario_trajs.append(make_trajectory(
            scaled, horizon, Yj, Pj, Vj, problems[j].lp.value(x), Method.RDEFBA,
            label=tree.label(j), info={"kcats": tree.kcats[j]}))
    return RobustResult(traj, scenario_trajs, tree, per_iteration,
                        [np.array(f) for f in first_fluxes], coupled)


def _infeasible_scenario(problems, state, n_y, opts) -> int | None:
    for j, prob in enumerate(problems):
        single = prob.with_initial(state[:n_y], state[n_y:])
        if solve(single.lp, **opts.kwargs()).status == LpStatus.INFEASIBLE:
            return j
    return None


__all__ = ["CoupledProblem", "RobustResult", "ScenarioTree", "UncertaintyEntry",
           "UncertaintySet", "build_coupled", "enumerate_scenarios", "load_uncertainty",
           "solve_rdefba"]
