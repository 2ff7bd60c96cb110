"""Re-check an exported trajectory against a model's constraint system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintSystem
from .discretization import step_matrices
from .solvers import TrajectoryTable, flux_scale


@dataclass(frozen=True)
class AuditReport:
    violations: dict[str, float]
    tol: float

    @property
    def ok(self) -> bool:
        return all(v <= self.tol for v in self.violations.values())

    def worst(self) -> tuple[str, float]:
        return max(self.violations.items(), key=lambda kv: kv[1])


def _relative(residual: np.ndarray, magnitude: np.ndarray) -> float:
    if residual.size == 0:
        return 0.0
    return float((np.abs(residual) / (1.0 + magnitude)).max())


def audit_table(system: ConstraintSystem, table: TrajectoryTable, tol: float = 1e-9) -> AuditReport:
    """Largest relative violation per constraint class.

    Each residual is divided by ``1 + sum |terms|`` of its row so that values
    printed with 12 significant digits audit cleanly.
    """
    sc = system.scaled
    Y = np.column_stack([table.amounts[s] for s in sc.external_ids]) if sc.n_y else \
        np.zeros((len(table.times), 0))
    P = sc.alpha * np.column_stack([table.amounts[s] for s in sc.macro_ids])
    V = np.column_stack([table.fluxes[r] for r in sc.reaction_ids]) * flux_scale(sc)
    S = np.hstack([Y, P])
    h = np.diff(table.times)
    if h.size and not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("trajectory times are not equidistant")
    out: dict[str, float] = {}

    if h.size:
        plus, minus, hu = step_matrices(system, float(h[0]))
        flow = h[0] * (V @ system.dynamics.T)
        res = plus * S[1:] - minus * S[:-1] - flow - hu
        mag = np.abs(plus * S[1:]) + np.abs(minus * S[:-1]) + \
            h[0] * (np.abs(V) @ np.abs(system.dynamics).T) + np.abs(hu)
        out["dynamics"] = _relative(res, mag)
        out["qssa"] = _relative(V @ system.qssa.T, np.abs(V) @ np.abs(system.qssa).T)
        cap = V @ system.capacity_flux.T - P[:-1] @ system.capacity_enzyme.T
        cap_mag = np.abs(V) @ np.abs(system.capacity_flux).T + P[:-1] @ system.capacity_enzyme.T
        out["capacity"] = _relative(np.maximum(cap, 0.0), cap_mag)
        lo = np.maximum(system.flux_lb - V, 0.0)
        hi = np.maximum(V - system.flux_ub, 0.0)
        out["flux_bounds"] = _relative(lo + hi, np.abs(V))
    comp = P @ system.composition.T
    out["composition"] = _relative(np.maximum(comp, 0.0), P @ np.abs(system.composition).T)
    out["positivity"] = _relative(np.maximum(-S, 0.0), np.abs(S))
    return AuditReport(out, tol)
