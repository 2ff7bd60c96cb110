import itertools
from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from defba.lp import (EQ, GE, LE, LinearProgram, LpSession, LpStatus, dual_objective, solve,
                      to_lp_text, write_lp)


def vertex_optimum(lp: LinearProgram):
    """Best vertex of a bounded LP by trying every set of n active constraints.

    Returns ``None`` when no vertex is feasible.
    """
    A = lp.A.toarray()
    n = lp.n_vars
    cons = []  # (row, rhs) meaning row @ x == rhs when active
    for i in range(lp.n_rows):
        cons.append((A[i], lp.rhs[i]))
    eye = np.eye(n)
    for j in range(n):
        cons.append((eye[j], lp.lower[j]))
        cons.append((eye[j], lp.upper[j]))
    best = None
    for subset in itertools.combinations(range(len(cons)), n):
        M = np.array([cons[k][0] for k in subset])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.array([cons[k][1] for k in subset]))
        if lp.max_violation(x) > 1e-8:
            continue
        val = lp.objective @ x
        if best is None or val > best:
            best = val
    return best


@st.composite
def bounded_lps(draw):
    n = draw(st.integers(1, 3))
    m = draw(st.integers(0, 3))
    coef = st.integers(-4, 4)
    A = np.array([[draw(coef) for _ in range(n)] for _ in range(m)], dtype=float).reshape(m, n)
    senses = np.array([draw(st.sampled_from([LE, EQ, GE])) for _ in range(m)], dtype=object)
    rhs = np.array([draw(st.integers(-5, 5)) for _ in range(m)], dtype=float)
    lower = np.array([draw(st.integers(-4, 2)) for _ in range(n)], dtype=float)
    upper = lower + np.array([draw(st.integers(0, 5)) for _ in range(n)], dtype=float)
    c = np.array([draw(coef) for _ in range(n)], dtype=float)
    return LinearProgram(c, sp.csr_matrix(A), senses, rhs, lower, upper)


@pytest.mark.parametrize("backend", ["simplex", "highs"])
@settings(max_examples=250, deadline=None)
@given(lp=bounded_lps())
def test_matches_vertex_enumeration(backend, lp):
    expect = vertex_optimum(lp)
    sol = solve(lp, backend=backend)
    if expect is None:
        assert sol.status == LpStatus.INFEASIBLE
    else:
        assert sol.status == LpStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(expect, rel=1e-9, abs=1e-9)
        assert lp.max_violation(sol.x) <= 1e-9


@st.composite
def free_lps(draw):
    """Mixed finite and infinite bounds, so all three outcomes occur."""
    n = draw(st.integers(1, 5))
    m = draw(st.integers(0, 5))
    fl = st.floats(-3, 3, allow_nan=False).map(lambda v: round(v, 2))
    A = np.array([[draw(fl) if draw(st.booleans()) else 0.0 for _ in range(n)]
                  for _ in range(m)]).reshape(m, n)
    senses = np.array([draw(st.sampled_from([LE, EQ, GE])) for _ in range(m)], dtype=object)
    rhs = np.array([draw(fl) for _ in range(m)])
    lower = np.array([draw(st.sampled_from([-np.inf, -1.0, 0.0])) for _ in range(n)])
    upper = np.array([draw(st.sampled_from([np.inf, 1.0, 2.5])) for _ in range(n)])
    return LinearProgram(np.array([draw(fl) for _ in range(n)]), sp.csr_matrix(A), senses,
                         rhs, lower, upper)


@settings(max_examples=300, deadline=None)
@given(lp=free_lps())
def test_backends_agree(lp):
    a = solve(lp, backend="simplex")
    b = solve(lp, backend="highs")
    assert a.status == b.status
    if a.optimal:
        assert a.objective_value == pytest.approx(b.objective_value, rel=1e-8, abs=1e-8)


@pytest.mark.parametrize("backend", ["simplex", "highs"])
@settings(max_examples=200, deadline=None)
@given(lp=free_lps())
def test_zero_duality_gap(backend, lp):
    sol = solve(lp, backend=backend)
    if not sol.optimal:
        return
    assert lp.max_violation(sol.x) <= 1e-9
    dual = dual_objective(lp, sol.duals, sol.reduced_costs)
    assert dual == pytest.approx(sol.objective_value, rel=1e-8, abs=1e-8)
    # sign of duals matches the row sense for a maximisation
    assert (sol.duals[lp.senses == LE] >= -1e-9).all()
    assert (sol.duals[lp.senses == GE] <= 1e-9).all()


def test_small_known_lp():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  ->  (1.6, 1.2)
    lp = LinearProgram.from_rows(2, [1, 1], [({0: 1, 1: 2}, "<=", 4), ({0: 3, 1: 1}, "<=", 6)])
    for backend in ("simplex", "highs"):
        sol = solve(lp, backend=backend)
        np.testing.assert_allclose(sol.x, [1.6, 1.2], atol=1e-12)
        assert sol.objective_value == pytest.approx(2.8)


def test_unbounded_and_infeasible():
    unb = LinearProgram.from_rows(2, [1, 0], [({0: 1, 1: -1}, "<=", 1)])
    inf = LinearProgram.from_rows(1, [1], [({0: 1}, ">=", 2), ({0: 1}, "<=", 1)])
    for backend in ("simplex", "highs"):
        assert solve(unb, backend=backend).status == LpStatus.UNBOUNDED
        assert solve(inf, backend=backend).status == LpStatus.INFEASIBLE


def test_invalid_bounds_rejected():
    with pytest.raises(ValueError):
        LinearProgram(np.zeros(1), sp.csr_matrix((0, 1)), np.array([], dtype=object),
                      np.zeros(0), np.array([np.inf]), np.array([np.inf]))


def test_unknown_backend():
    lp = LinearProgram.from_rows(1, [1], [({0: 1}, "<=", 1)])
    with pytest.raises(ValueError):
        solve(lp, backend="cplex")


def test_auto_uses_highs_above_dense_limit():
    n = 700
    lp = LinearProgram(np.ones(n), sp.identity(n, format="csr"),
                       np.array([LE] * n, dtype=object), np.ones(n), np.zeros(n),
                       np.full(n, np.inf))
    sol = solve(lp)
    assert sol.backend == "highs"
    assert sol.objective_value == pytest.approx(n)


def test_iteration_limit_reported():
    n = 30
    rng = np.random.default_rng(0)
    A = sp.csr_matrix(rng.random((n, n)))
    lp = LinearProgram(rng.random(n), A, np.array([LE] * n, dtype=object), np.ones(n),
                       np.zeros(n), np.full(n, np.inf))
    assert solve(lp, backend="simplex", max_iters=1).status == LpStatus.ITERATION_LIMIT


def test_session_matches_fresh_solves():
    rng = np.random.default_rng(3)
    n, m = 40, 30
    A = sp.csr_matrix(rng.normal(size=(m, n)))
    base = LinearProgram(rng.normal(size=n), A, np.array([LE] * m, dtype=object),
                         rng.random(m) + 1, np.full(n, -1.0), np.full(n, 1.0))
    session = LpSession(base, backend="highs")
    for _ in range(5):
        # x = 0 stays feasible because every rhs is positive
        lp = base.with_bounds(-rng.random(n), rng.random(n) + 0.1)
        warm = session.solve(lp)
        cold = solve(lp, backend="highs")
        assert warm.status == cold.status == LpStatus.OPTIMAL
        assert warm.objective_value == pytest.approx(cold.objective_value, rel=1e-9)
        assert lp.max_violation(warm.x) <= 1e-9
    with pytest.raises(ValueError):
        session.solve(base.with_objective(-base.objective))


def test_lp_text(tmp_path):
    lp = LinearProgram.from_rows(2, [1, -2], [({0: 1, 1: 1}, "<=", 4), ({0: 1}, ">=", 1)],
                                 bounds=[(0, 3), (None, 5)])
    lp = replace(lp, var_names=["a b", "y"])
    text = to_lp_text(lp)
    assert text.startswith("\\") or text.startswith("Maximize")
    for section in ("Maximize", "Subject To", "Bounds", "End"):
        assert section in text
    assert "a_b" in text
    write_lp(lp, tmp_path / "x.lp")
    assert (tmp_path / "x.lp").read_text() == text
