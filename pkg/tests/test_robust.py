import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_model
from defba.constraints import build_system
from defba.model import scale
from defba.robust import (MAX_UNCERTAIN, UncertaintyEntry, UncertaintySet, enumerate_scenarios,
                          load_uncertainty, solve_rdefba)
from defba.solvers import solve_sdefba

CHAIN_REACTIONS = ("up", "r0", "r1", "r2", "pE", "pQ")


@st.composite
def uncertainty_sets(draw):
    rids = draw(st.lists(st.sampled_from(CHAIN_REACTIONS), unique=True, max_size=5))
    entries = []
    for rid in rids:
        lo = draw(st.floats(0.1, 2.0))
        entries.append(UncertaintyEntry(rid, "forward", lo, lo * draw(st.floats(1.0, 3.0))))
    return UncertaintySet(tuple(entries))


@settings(max_examples=60, deadline=None)
@given(u=uncertainty_sets())
def test_scenario_count_law(u):
    model = chain_model()
    nominal = scale(model).nominal_kcats()
    tree = enumerate_scenarios(u, nominal)
    n = len(u.entries)
    assert tree.n_scenarios == 2 ** n == u.n_scenarios
    assert len({tuple(v) for v in tree.vertices}) == 2 ** n
    assert not tree.vertices[0].any()
    for j, bits in enumerate(tree.vertices):
        # binary counting order, first entry most significant
        assert int("".join(map(str, bits)) or "0", 2) == j
        for e, bit in zip(u.entries, bits):
            d = e.d_max if bit else e.d_min
            assert tree.kcats[j][e.reaction_id][0] == pytest.approx(nominal[e.reaction_id][0] * d)
        untouched = set(nominal) - {e.reaction_id for e in u.entries}
        assert all(tree.kcats[j][r] == nominal[r] for r in untouched)
    assert tree.label(0) == "scenario_0" + (f"[{'0' * n}]" if n else "")


def test_backward_direction():
    nominal = scale(chain_model()).nominal_kcats()
    u = UncertaintySet((UncertaintyEntry("r0", "backward", 0.5, 2.0),))
    tree = enumerate_scenarios(u, nominal)
    kf, kb = nominal["r0"]
    assert tree.kcats[0]["r0"] == (kf, kb * 0.5)
    assert tree.kcats[1]["r0"] == (kf, kb * 2.0)
    with pytest.raises(ValueError):
        enumerate_scenarios(UncertaintySet((UncertaintyEntry("up", "backward", 1, 2),)), nominal)


def test_uncertainty_validation():
    with pytest.raises(ValueError):
        UncertaintyEntry("x", "sideways", 1, 2)
    with pytest.raises(ValueError):
        UncertaintyEntry("x", "forward", 2, 1)
    with pytest.raises(ValueError):
        UncertaintySet(tuple(UncertaintyEntry(f"r{i}", "forward", 1, 2)
                             for i in range(MAX_UNCERTAIN + 1)))
    e = UncertaintyEntry("x", "forward", 1, 2)
    with pytest.raises(ValueError):
        UncertaintySet((e, e))
    with pytest.raises(ValueError):
        UncertaintySet((e,), weights=(1.0,))
    with pytest.raises(KeyError):
        enumerate_scenarios(UncertaintySet((e,)), {"y": (1.0, None)})


def test_uncertainty_json_round_trip(tmp_path):
    u = UncertaintySet((UncertaintyEntry("V_A", "forward", 0.8, 1.2),
                        UncertaintyEntry("V_E", "forward", 0.8, 1.2)), weights=(1, 2, 3, 4))
    path = tmp_path / "u.json"
    path.write_text(json.dumps(u.to_json()))
    assert load_uncertainty(path) == u
    # a bare list is accepted too
    path.write_text(json.dumps(u.to_json()["entries"]))
    assert load_uncertainty(path).entries == u.entries


EX1_U = UncertaintySet(tuple(UncertaintyEntry(r, "forward", 0.8, 1.2)
                             for r in ("V_A", "V_E", "V_M")))


@pytest.fixture(scope="module")
def ex1_robust(ex1):
    return solve_rdefba(ex1, 1.0, 1.0, 0.1, EX1_U)


def test_non_anticipativity_bitwise(ex1_robust):
    for per_scenario in ex1_robust.first_interval_fluxes:
        for j in range(1, len(per_scenario)):
            assert np.array_equal(per_scenario[j], per_scenario[0])
    plans = ex1_robust.scenarios
    for j in range(1, len(plans)):
        assert np.array_equal(plans[j].V_scaled[0], plans[0].V_scaled[0])
    # the implemented flux is that shared value
    assert np.array_equal(ex1_robust.trajectory.V_scaled[0], ex1_robust.first_interval_fluxes[0][0])


def test_robust_fluxes_fit_every_scenario(ex1, ex1_robust):
    sc = scale(ex1)
    traj = ex1_robust.trajectory
    for kc in ex1_robust.tree.kcats:
        system = build_system(sc, kc)
        load = traj.V_scaled @ system.capacity_flux.T.toarray()
        avail = traj.P_scaled[:-1] @ system.capacity_enzyme.T.toarray()
        assert (load - avail <= 1e-9 * (1 + avail)).all()


def test_scenarios_diverge_after_first_interval(ex1_robust):
    plans = ex1_robust.scenarios
    assert any(not np.allclose(p.V_scaled[1:], plans[0].V_scaled[1:]) for p in plans[1:])
    assert [p.scenario_label for p in plans][:2] == ["scenario_0[000]", "scenario_1[001]"]


def test_weight_invariance(ex1, ex1_robust):
    scaled_u = UncertaintySet(EX1_U.entries, weights=(3.0,) * 8)
    other = solve_rdefba(ex1, 1.0, 1.0, 0.1, scaled_u)
    np.testing.assert_allclose(other.trajectory.P_scaled, ex1_robust.trajectory.P_scaled,
                               rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(other.trajectory.info["coupled_objectives"],
                               3 * np.array(ex1_robust.trajectory.info["coupled_objectives"]),
                               rtol=1e-9)


def test_empty_uncertainty_is_sdefba(ex1):
    robust = solve_rdefba(ex1, 1.0, 0.5, 0.1, UncertaintySet())
    plain = solve_sdefba(ex1, 1.0, 0.5, 0.1)
    assert robust.tree.n_scenarios == 1
    np.testing.assert_allclose(robust.trajectory.P_scaled, plain.P_scaled, rtol=1e-9, atol=1e-12)


def test_coupled_layout(ex1_robust):
    cp = ex1_robust.coupled
    n_shared = cp.shared.size
    n_local = cp.problems[0].lp.n_vars
    assert cp.lp.n_vars == n_shared + 8 * (n_local - n_shared)
    assert cp.lp.n_rows == 8 * cp.problems[0].lp.n_rows
    for j, cols in enumerate(cp.columns):
        assert np.array_equal(cols[cp.problems[j].flux_slice(0)], cp.shared)
