"""Prediction-horizon estimate from a linear upper and an exponential lower biomass bound.

The linear bound assumes the initial enzymes push the largest possible
biomass flux forever; the exponential bound grows the initial composition at
its balanced growth rate. Their integrals start identically (value and slope),
and the horizon is the first later time at which the exponential one catches up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .constraints import ConstraintSystem, KcatAssignment, build_system
from .lp import EQ, LE, LinearProgram, LpStatus, solve
from .model import MetabolicModel, ScaledModel, scale

ROOT_TOL = 1e-10
BRACKET_CAP = 10_000


class HorizonError(RuntimeError):
    pass


class NoExponentialGrowth(HorizonError):
    """Balanced growth is impossible while linear growth is not: no contact time exists."""


def _as_system(model, kcats=None) -> ConstraintSystem:
    if isinstance(model, ConstraintSystem):
        return model
    scaled = model if isinstance(model, ScaledModel) else scale(model)
    return build_system(scaled, kcats)


def _solve(lp: LinearProgram, what: str, **opts):
    sol = solve(lp, **opts)
    if sol.status != LpStatus.OPTIMAL:
        raise HorizonError(f"{what} LP ended with status {sol.status.value}")
    return sol


@dataclass(frozen=True)
class LinearRate:
    flux: np.ndarray
    slope: float


def max_linear_rate(model, p0: np.ndarray, kcats: KcatAssignment | None = None,
                    **opts) -> LinearRate:
    """Largest biomass production rate the enzymes ``p0`` support, nutrients ignored."""
    system = _as_system(model, kcats)
    p0 = np.asarray(p0, dtype=float)
    if (p0 < 0).any():
        raise ValueError("enzyme levels must be nonnegative")
    growth = system.biomass_weights @ system.macro_production
    A = sp.vstack([system.qssa, system.capacity_flux]).tocsr()
    n_q = system.qssa.shape[0]
    senses = np.array([EQ] * n_q + [LE] * system.capacity_flux.shape[0], dtype=object)
    rhs = np.concatenate([np.zeros(n_q), system.capacity_enzyme @ p0])
    lp = LinearProgram(np.asarray(growth).ravel(), A, senses, rhs,
                       system.flux_lb.copy(), system.flux_ub.copy())
    sol = _solve(lp, "maximal linear rate", **opts)
    return LinearRate(sol.x, sol.objective_value)


@dataclass(frozen=True)
class GrowthRate:
    mu: float
    flux: np.ndarray


def max_growth_rate(model, p0: np.ndarray, kcats: KcatAssignment | None = None,
                    **opts) -> GrowthRate:
    """Balanced growth rate of the fixed composition ``p0``."""
    system = _as_system(model, kcats)
    p0 = np.asarray(p0, dtype=float)
    if (p0 < 0).any():
        raise ValueError("enzyme levels must be nonnegative")
    if not system.biomass_weights @ p0 > 0:
        raise ValueError("balanced growth needs positive initial biomass")
    n_r = system.n_fluxes
    n_q = system.qssa.shape[0]
    n_p = system.scaled.n_p
    n_c = system.capacity_flux.shape[0]
    mu_col = sp.csr_matrix(-p0.reshape(-1, 1))
    A = sp.vstack([
        sp.hstack([system.qssa, sp.csr_matrix((n_q, 1))]),
        sp.hstack([system.macro_production, mu_col]),
        sp.hstack([system.capacity_flux, sp.csr_matrix((n_c, 1))]),
    ]).tocsr()
    senses = np.array([EQ] * (n_q + n_p) + [LE] * n_c, dtype=object)
    rhs = np.concatenate([np.zeros(n_q + n_p), system.capacity_enzyme @ p0])
    c = np.zeros(n_r + 1)
    c[-1] = 1.0
    lp = LinearProgram(c, A, senses, rhs, np.append(system.flux_lb, 0.0),
                       np.append(system.flux_ub, np.inf))
    sol = _solve(lp, "balanced growth", **opts)
    return GrowthRate(float(max(sol.x[-1], 0.0)), sol.x[:n_r])


def exponential_integral(b0: float, mu: float, p):
    """Integral of ``b0 * exp(mu t)`` over ``[0, p]``."""
    p = np.asarray(p, dtype=float)
    if mu == 0:
        return b0 * p
    return b0 * np.expm1(mu * p) / mu


def linear_integral(b0: float, slope: float, p, exact: bool = True):
    """Integral of the linear bound; ``exact=False`` drops the factor 1/2 on the square term."""
    p = np.asarray(p, dtype=float)
    return b0 * p + (0.5 if exact else 1.0) * slope * p * p


def contact_gap(b0: float, slope: float, mu: float, p, exact: bool = True):
    """``g(p)``: exponential minus linear integral."""
    return exponential_integral(b0, mu, p) - linear_integral(b0, slope, p, exact)


def contact_time(b0: float, slope: float, mu: float, step: float | None = None,
                 exact_linear_integral: bool = True) -> tuple[float, bool]:
    """Smallest positive root of the gap; ``(0, True)`` when the exponential bound leads from 0."""
    if mu < 0:
        raise ValueError(f"growth rate must be >= 0, got {mu}")
    if b0 <= 0:
        raise ValueError("initial biomass must be positive")
    quad = 0.5 if exact_linear_integral else 1.0
    # g(0) = g'(0) = 0, g''(0) = mu b0 - 2 quad slope and g''' > 0
    if mu * b0 >= 2 * quad * slope:
        return 0.0, True
    if mu == 0:
        raise NoExponentialGrowth("growth rate is zero while linear growth is possible")
    if step is None:
        step = 0.01 / mu
    g = lambda p: float(contact_gap(b0, slope, mu, p, exact_linear_integral))  # noqa: E731
    lo, hi = 0.0, step
    while g(hi) <= 0:
        lo, hi = hi, 2 * hi
        if hi > BRACKET_CAP * step:
            raise HorizonError(f"no contact time below {BRACKET_CAP} steps")
    if lo == 0.0:
        # root inside the first step; g < 0 just right of 0 because g''(0) < 0
        lo = hi / 2
        for _ in range(200):
            if g(lo) < 0:
                break
            lo /= 2
        else:
            return 0.0, True
    root = brentq(g, lo, hi, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root), False


@dataclass(frozen=True)
class HorizonEstimate:
    linear_flux: np.ndarray
    slope: float
    mu_max: float
    growth_flux: np.ndarray
    biomass0: float
    p_up: float
    degenerate: bool
    step: float | None
    exact_linear_integral: bool
    kcats: Mapping[str, tuple[float, float | None]] | None = None

    @property
    def p_grid(self) -> float:
        """``p_up`` rounded up to a whole number of steps (at least one)."""
        if not self.step:
            return self.p_up
        n = max(1, math.ceil(self.p_up / self.step - 1e-9))
        return n * self.step

    def report(self) -> dict:
        return {"linear_slope": self.slope, "mu_max": self.mu_max, "p_up": self.p_up,
                "p_grid": self.p_grid, "degenerate": self.degenerate,
                "biomass0": self.biomass0, "exact_linear_integral": self.exact_linear_integral}


def estimate_horizon(model: MetabolicModel | ScaledModel, step: float | None = None,
                     kcats: KcatAssignment | None = None,
                     p0: np.ndarray | None = None,
                     exact_linear_integral: bool = True, **opts) -> HorizonEstimate:
    """Horizon recommendation for the model's initial state and given constants."""
    system = _as_system(model, kcats)
    if p0 is None:
        p0 = system.scaled.initial_macro
    lin = max_linear_rate(system, p0, **opts)
    growth = max_growth_rate(system, p0, **opts)
    b0 = float(system.biomass_weights @ p0)
    p_up, degenerate = contact_time(b0, lin.slope, growth.mu, step, exact_linear_integral)
    return HorizonEstimate(lin.flux, lin.slope, growth.mu, growth.flux, b0, p_up, degenerate,
                           step, exact_linear_integral, dict(kcats) if kcats else None)


@dataclass(frozen=True)
class BalancedComposition:
    mu: float
    amounts: dict[str, float]
    flux: np.ndarray


def balanced_composition(model: MetabolicModel | ScaledModel, total_biomass: float,
                         kcats: KcatAssignment | None = None, rel_tol: float = 1e-10,
                         **opts) -> BalancedComposition:
    """Composition with total mass ``total_biomass`` (unscaled) that grows fastest.

    External species that are absent at the start (no amount, no inflow) may
    not be consumed. Bisection on the growth rate; for fixed rate the
    composition and fluxes enter linearly, so each probe is a feasibility LP.
    """
    system = _as_system(model, kcats)
    sc = system.scaled
    n_r, n_p = system.n_fluxes, sc.n_p
    n_q = system.qssa.shape[0]
    n_c = system.capacity_flux.shape[0]
    n_b = system.composition.shape[0]
    b = sc.biomass_weights
    absent = (sc.initial_external == 0) & (sc.inflow == 0)
    no_uptake = sc.block("y")[np.flatnonzero(absent)]
    n_a = no_uptake.shape[0]

    def probe(mu: float):
        A = sp.vstack([
            sp.hstack([system.qssa, sp.csr_matrix((n_q, n_p))]),
            sp.hstack([system.macro_production, -mu * sp.identity(n_p)]),
            sp.csr_matrix(np.concatenate([np.zeros(n_r), b])[None, :]),
            sp.hstack([system.capacity_flux, -system.capacity_enzyme]),
            sp.hstack([sp.csr_matrix((n_b, n_r)), system.composition]),
            sp.hstack([-no_uptake, sp.csr_matrix((n_a, n_p))]),
        ]).tocsr()
        senses = np.array([EQ] * (n_q + n_p + 1) + [LE] * (n_c + n_b + n_a), dtype=object)
        rhs = np.zeros(A.shape[0])
        rhs[n_q + n_p] = sc.alpha * total_biomass
        lp = LinearProgram(np.zeros(n_r + n_p), A, senses, rhs,
                           np.concatenate([system.flux_lb, np.zeros(n_p)]),
                           np.concatenate([system.flux_ub, np.full(n_p, np.inf)]))
        return solve(lp, **opts)

    if not probe(0.0).optimal:
        raise HorizonError("no admissible composition even without growth")
    lo, hi = 0.0, 1.0
    while probe(hi).optimal:
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            raise HorizonError("growth rate unbounded")
    while hi - lo > rel_tol * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if probe(mid).optimal:
            lo = mid
        else:
            hi = mid
    sol = probe(lo)
    p = np.clip(sol.x[n_r:], 0.0, None)
    p[p < 1e-12 * p.max(initial=0.0)] = 0.0
    amounts = {m: float(v / sc.alpha) for m, v in zip(sc.macro_ids, p)}
    return BalancedComposition(lo, amounts, sol.x[:n_r])


__all__ = ["BalancedComposition", "GrowthRate", "HorizonError", "HorizonEstimate",
           "LinearRate", "NoExponentialGrowth", "balanced_composition", "contact_gap",
           "contact_time", "estimate_horizon", "exponential_integral", "linear_integral",
           "max_growth_rate", "max_linear_rate"]
