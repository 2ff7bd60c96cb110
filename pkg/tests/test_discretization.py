import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_model
from defba.constraints import build_system
from defba.discretization import (ROW_CLASSES, TimeGrid, advance, diagnose_infeasibility,
                                  discretize, horizon_steps, step_matrices, steps, trapezoid)
from defba.lp import solve
from defba.model import scale
from defba.solvers import initial_state


def test_grid_covering():
    g = TimeGrid.covering(3.0, 0.05)
    assert g.N == 60
    assert g.T == pytest.approx(3.0)
    assert g.points[-1] == pytest.approx(3.0)


def test_steps_requires_divisor():
    assert steps(3.0, 0.1) == 30
    with pytest.raises(ValueError):
        steps(3.0, 0.7)


@pytest.mark.parametrize("p,h,n", [(3.9, 0.1, 39), (29.9, 0.5, 60), (0.01, 0.5, 1), (2.0, 0.5, 4)])
def test_horizon_steps_round_up(p, h, n):
    assert horizon_steps(p, h) == n


def test_trapezoid():
    assert trapezoid([1.0, 3.0, 5.0], 0.5) == pytest.approx(0.5 * (0.5 + 3 + 2.5))
    assert trapezoid([2.0], 1.0) == 0.0


@pytest.fixture(scope="module")
def ex1_problem(ex1):
    system = build_system(scale(ex1))
    y0, p0 = initial_state(system.scaled)
    prob = discretize(system, TimeGrid.covering(1.0, 0.1), (y0, p0))
    return system, prob, solve(prob.lp)


def test_row_layout(ex1_problem):
    system, prob, _ = ex1_problem
    N = prob.grid.N
    counts = {c: int((prob.row_class == c).sum()) for c in ROW_CLASSES}
    assert counts == {"dynamics": N * system.n_states, "qssa": N * system.qssa.shape[0],
                      "capacity": N * system.capacity_flux.shape[0], "composition": 0}
    assert prob.lp.n_vars == (N + 1) * system.n_states + N * system.n_fluxes


def test_solution_follows_step_map(ex1_problem):
    """States of the optimal LP point are reproduced by stepping with its fluxes."""
    system, prob, sol = ex1_problem
    Y, P, V = prob.unpack(sol.x)
    S = np.hstack([Y, P])
    for k in range(prob.grid.N):
        np.testing.assert_allclose(advance(system, prob.grid.h, S[k], V[k]), S[k + 1],
                                   rtol=1e-9, atol=1e-12)


def test_objective_is_trapezoid_of_biomass(ex1_problem):
    system, prob, sol = ex1_problem
    _, P, _ = prob.unpack(sol.x)
    assert sol.objective_value == pytest.approx(
        trapezoid(P @ system.biomass_weights, prob.grid.h), rel=1e-12)


def test_initial_state_fixed(ex1_problem):
    system, prob, sol = ex1_problem
    Y, P, _ = prob.unpack(sol.x)
    np.testing.assert_array_equal(P[0], system.scaled.initial_macro)
    other = prob.with_initial(Y[0], 2 * P[0])
    Y2, P2, _ = other.unpack(solve(other.lp).x)
    np.testing.assert_array_equal(P2[0], 2 * P[0])


def test_capacity_uses_left_endpoint(ex1_problem):
    system, prob, sol = ex1_problem
    _, P, V = prob.unpack(sol.x)
    load = V @ system.capacity_flux.T.toarray()
    avail = P[:-1] @ system.capacity_enzyme.T.toarray()
    assert (load <= avail * (1 + 1e-9) + 1e-12).all()


@settings(max_examples=40, deadline=None)
@given(h=st.floats(0.01, 1.0), v=st.lists(st.floats(0, 5), min_size=6, max_size=6))
def test_step_exact_without_dilution(h, v):
    """With no dilution and constant fluxes one step is the exact solution."""
    system = build_system(scale(chain_model()))
    flux = np.array(v)
    state = np.concatenate([[100.0], [0.5, 0.5]])
    np.testing.assert_allclose(advance(system, h, state, flux),
                               state + h * (system.dynamics @ flux), rtol=1e-13, atol=1e-13)


def test_aerated_oxygen(core):
    """Oxygen inflow against dilution: fixed point u/gamma and second-order accuracy."""
    system = build_system(scale(core))
    sc = system.scaled
    i = sc.external_ids.index("O2_ext")
    u, gamma = sc.inflow[i], sc.dilution[i]
    assert u / gamma == pytest.approx(50.0)
    zero = np.zeros(system.n_fluxes)
    errors = []
    for h in (0.5, 0.25, 0.125):
        state = np.zeros(system.n_states)
        n = round(10 / h)
        for _ in range(n):
            state = advance(system, h, state, zero)
        exact = u / gamma * (1 - math.exp(-gamma * 10))
        errors.append(abs(state[i] - exact))
    assert errors[0] / errors[1] == pytest.approx(4, rel=0.05)
    assert errors[1] / errors[2] == pytest.approx(4, rel=0.05)
    # the discrete map keeps the continuous equilibrium up to round-off
    state = np.zeros(system.n_states)
    state[i] = 50.0
    assert advance(system, 0.5, state, zero)[i] == pytest.approx(50.0, rel=1e-15)
    plus, minus, hu = step_matrices(system, 0.5)
    np.testing.assert_allclose([plus[i], minus[i], hu[i]], [1.1, 0.9, 10.0], rtol=1e-15)


def test_rejects_negative_initial(ex1):
    system = build_system(scale(ex1))
    with pytest.raises(ValueError):
        discretize(system, TimeGrid(0, 0.1, 3), (np.array([-1.0]), np.array([0.1, 0.1])))


def test_diagnose_composition(core):
    system = build_system(scale(core))
    sc = system.scaled
    y0, p0 = initial_state(sc)
    p0 = p0.copy()
    p0[sc.macro_ids.index("S")] = 0.0
    prob = discretize(system, TimeGrid(0, 0.5, 4), (y0, p0))
    assert diagnose_infeasibility(prob) == "composition"
