import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_model
from defba.model import (BUNDLED_MODELS, CatalysisRule, ModelError, Reaction, ReactionKind,
                         Species, SpeciesKind, load_model, model_from_dict, model_to_dict,
                         save_model, scale, unscale, validate)


@pytest.mark.parametrize("name", BUNDLED_MODELS)
def test_bundled_models_validate(name):
    assert validate(load_model(name)) == []


def test_examples_path_resolves_to_bundled(ex1):
    assert load_model("examples/enzymatic_growth") == ex1


@pytest.mark.parametrize("name", BUNDLED_MODELS)
def test_json_round_trip(name, tmp_path):
    model = load_model(name)
    save_model(model, tmp_path / "m.json")
    assert load_model(tmp_path / "m.json") == model


def _rules(model):
    return {d.rule for d in validate(model)}


def test_dangling_species(chain):
    bad = replace(chain, reactions=chain.reactions + (
        Reaction("x", ReactionKind.METABOLIC, {"A0": -1, "ghost": 1}),))
    assert "dangling-species" in _rules(bad)


def test_duplicate_ids(chain):
    assert "unique-id" in _rules(replace(chain, species=chain.species + chain.species[:1]))


def test_exchange_touching_macromolecule(chain):
    bad = replace(chain, reactions=chain.reactions + (
        Reaction("x", ReactionKind.EXCHANGE, {"N": -1, "E": 1}),))
    assert "reaction-class" in _rules(bad)


def test_metabolic_touching_external(chain):
    bad = replace(chain, reactions=chain.reactions + (
        Reaction("x", ReactionKind.METABOLIC, {"N": -1, "A0": 1}),))
    assert "reaction-class" in _rules(bad)


def test_missing_backward_kcat():
    model = chain_model()
    rules = tuple(CatalysisRule(c.enzyme_id, c.reaction_id, c.kcat_forward, None)
                  for c in model.catalysis)
    assert "kcat" in _rules(replace(model, catalysis=rules))


def test_nonpositive_kcat(chain):
    rules = (CatalysisRule("E", "up", 0.0),) + chain.catalysis[1:]
    assert "kcat" in _rules(replace(chain, catalysis=rules))


def test_isozymes_rejected(chain):
    rules = chain.catalysis + (CatalysisRule("Q", "up", 1.0),)
    assert "isozyme" in _rules(replace(chain, catalysis=rules))


def test_alpha_below_one(chain):
    assert "alpha" in _rules(replace(chain, alpha=0.5))


def test_bad_time_unit(chain):
    assert "units" in _rules(replace(chain, units={"time": "s"}))


def test_macromolecule_without_weight(chain):
    species = tuple(replace(s, molecular_weight=None) if s.id == "Q" else s
                    for s in chain.species)
    assert "molecular-weight" in _rules(replace(chain, species=species))


def test_inflow_on_internal(chain):
    species = tuple(replace(s, inflow=1.0) if s.id == "A0" else s for s in chain.species)
    assert "external-dynamics" in _rules(replace(chain, species=species))


def test_scale_refuses_invalid_model(chain):
    with pytest.raises(ModelError) as err:
        scale(replace(chain, alpha=0.0))
    assert err.value.diagnostics


def test_json_kind_case_insensitive(chain):
    data = model_to_dict(chain)
    for s in data["species"]:
        s["kind"] = s["kind"].upper()
    assert model_from_dict(json.loads(json.dumps(data))) == chain


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(1.0, 1e4))
def test_scaling_round_trip(alpha):
    model = replace(chain_model(), alpha=alpha)
    back = unscale(scale(model))
    for r0, r1 in zip(model.reactions, back.reactions):
        assert r0.id == r1.id
        for sid, c in r0.stoichiometry.items():
            assert math.isclose(r1.stoichiometry[sid], c, rel_tol=1e-12)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(1.0, 1e4))
def test_scaling_block_rule(alpha):
    """Biomass columns shrink by alpha off the macromolecule rows; nothing else moves."""
    model = replace(chain_model(), alpha=alpha)
    raw = scale(replace(model, alpha=1.0)).stoichiometry.toarray()
    sc = scale(model)
    S = sc.stoichiometry.toarray()
    n_non_macro = sc.n_y + sc.n_x
    biomass = np.array([k == ReactionKind.BIOMASS for k in sc.reaction_kinds])
    expect = raw.copy()
    expect[:n_non_macro, biomass] /= alpha
    np.testing.assert_allclose(S, expect, rtol=1e-14)
    np.testing.assert_allclose(sc.initial_macro, alpha * np.array([0.05, 0.05]))
    np.testing.assert_array_equal(sc.capacity_scale, np.where(biomass, 1.0, alpha))


def test_ex1_scaled_values(ex1):
    sc = scale(ex1)
    assert sc.alpha == 100
    np.testing.assert_allclose(sc.initial_macro, [0.1, 0.1])
    np.testing.assert_allclose(sc.biomass_weights, [100, 150])


def test_with_kcats_replaces_only_named(ex1):
    m = ex1.with_kcats({"V_E": (0.5, None)})
    kc = {c.reaction_id: c.kcat_forward for c in m.catalysis}
    assert kc == {"V_A": 150, "V_E": 0.5, "V_M": 2}


def test_with_initial(ex1):
    m = ex1.with_initial({"E": 0.5})
    assert m.species_by_id()["E"].initial_amount == 0.5
    assert m.species_by_id()["M"].initial_amount == ex1.species_by_id()["M"].initial_amount


def test_species_defaults():
    s = Species("x", SpeciesKind.EXTERNAL)
    assert (s.inflow, s.dilution, s.initial_amount) == (0.0, 0.0, 0.0)
