"""Regenerate the bundled model files in src/defba/data.

The core carbon network's initial macromolecule amounts are the balanced
growth composition at nominal constants, scaled to 0.005 g total biomass.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from defba.model import (CatalysisRule, CompositionRule, MetabolicModel, Reaction,  # noqa: E402
                         ReactionKind, Species, SpeciesKind, bundled_model_path, save_model)

EXT, INT, MAC = SpeciesKind.EXTERNAL, SpeciesKind.INTERNAL, SpeciesKind.MACROMOLECULE
EXCHANGE, METABOLIC, BIOMASS = ReactionKind.EXCHANGE, ReactionKind.METABOLIC, ReactionKind.BIOMASS


def enzymatic_growth() -> MetabolicModel:
    alpha = 100.0
    species = (
        Species("N", EXT, initial_amount=1e6),
        Species("A", INT),
        # 0.1 mol in scaled units
        Species("E", MAC, molecular_weight=100.0, is_enzyme=True, initial_amount=0.1 / alpha),
        Species("M", MAC, molecular_weight=150.0, initial_amount=0.1 / alpha),
    )
    reactions = (
        Reaction("V_A", EXCHANGE, {"N": -1, "A": 1}),
        Reaction("V_E", BIOMASS, {"N": -100, "A": -100, "E": 1}),
        Reaction("V_M", BIOMASS, {"N": -100, "A": -100, "M": 1}),
    )
    catalysis = (
        CatalysisRule("E", "V_A", 150.0),
        CatalysisRule("E", "V_E", 1.0),
        CatalysisRule("E", "V_M", 2.0),
    )
    return MetabolicModel(species, reactions, catalysis, (), alpha,
                          {"time": "h", "amount": "mol"}, "enzymatic_growth")


CORE_MACRO = {
    # id: (b [g/mol], H, ATP, C, F, kcat [1/min])
    "T_C1": (4, 400, 1600, 0, 0, 2.5),
    "T_C2": (15, 1500, 6000, 0, 0, 0.67),
    "T_F": (4, 400, 1600, 0, 0, 2.5),
    "T_H": (4, 400, 1600, 0, 0, 2.5),
    "E_B": (5, 500, 2000, 0, 0, 2),
    "E_C": (5, 500, 2000, 0, 0, 2),
    "E_D": (10, 1000, 4000, 0, 0, 1),
    "E_E": (10, 1000, 4000, 0, 0, 1),
    "E_F": (20, 2000, 8000, 0, 0, 0.5),
    "E_G": (5, 500, 2000, 0, 0, 2),
    "E_H": (40, 4000, 16000, 0, 0, 0.25),
    "E_N": (5, 500, 2000, 0, 0, 2),
    "E_T": (5, 500, 2000, 0, 0, 2),
    "R": (60, 4500, 21000, 1500, 0, 0.2),
    "S": (7.5, 250, 1500, 250, 250, 3),
}

CORE_REACTIONS = [
    # id, kind, stoichiometry, reversible, catalyst, kcat
    ("v_Carb1", EXCHANGE, {"Carb1": -1, "A": 1}, False, "T_C1", 3000),
    ("v_Carb2", EXCHANGE, {"Carb2": -1, "A": 1}, False, "T_C2", 2000),
    ("v_F", EXCHANGE, {"F_ext": -1, "F": 1}, False, "T_F", 3000),
    ("v_H", EXCHANGE, {"H": -1, "H_ext": 1}, False, "T_H", 3000),
    ("v_O2", EXCHANGE, {"O2_ext": -1, "O2": 1}, False, "S", 1000),
    ("v_D", EXCHANGE, {"D": -1, "D_ext": 1}, True, "S", 1000),
    ("v_E", EXCHANGE, {"E": -1, "E_ext": 1}, True, "S", 1000),
    ("r_B", METABOLIC, {"A": -1, "ATP": -1, "B": 1}, False, "E_B", 1800),
    ("r_C", METABOLIC, {"B": -1, "C": 1, "ATP": 2, "NADH": 2}, False, "E_C", 1800),
    ("r_D", METABOLIC, {"C": -1, "ATP": 2, "D": 3}, True, "E_D", 1800),
    ("r_E", METABOLIC, {"C": -1, "NADH": -4, "E": 3}, True, "E_E", 1800),
    ("r_F", METABOLIC, {"B": -1, "F": 1}, False, "E_F", 1800),
    ("r_G", METABOLIC, {"C": -1, "G": 1}, False, "E_G", 1800),
    ("r_H", METABOLIC, {"G": -1, "ATP": -1, "NADH": -2, "H": 1}, True, "E_H", 1800),
    ("r_N", METABOLIC, {"G": -1, "C": 0.8, "NADH": 2}, False, "E_N", 1800),
    ("r_T", METABOLIC, {"O2": -1, "NADH": -1, "ATP": 1}, False, "E_T", 1800),
]


def core_carbon(initial_macro: dict[str, float] | None = None) -> MetabolicModel:
    initial_macro = initial_macro or {}
    ext = {"Carb1": 2.0, "Carb2": 30.0, "F_ext": 0.0, "H_ext": 0.0, "O2_ext": 50.0,
           "D_ext": 0.0, "E_ext": 0.0}
    species = [Species(sid, EXT, initial_amount=v,
                       inflow=20.0 if sid == "O2_ext" else 0.0,
                       dilution=0.4 if sid == "O2_ext" else 0.0)
               for sid, v in ext.items()]
    species += [Species(sid, INT) for sid in
                ("A", "B", "C", "D", "E", "F", "G", "H", "O2", "ATP", "NADH")]
    species += [Species(m, MAC, molecular_weight=float(v[0]), is_enzyme=m != "S",
                        initial_amount=initial_macro.get(m, 0.0))
                for m, v in CORE_MACRO.items()]
    reactions, catalysis = [], []
    for rid, kind, st, rev, cat, k in CORE_REACTIONS:
        reactions.append(Reaction(rid, kind, st, rev))
        catalysis.append(CatalysisRule(cat, rid, float(k), float(k) if rev else None))
    for m, (_, h, atp, c, f, k) in CORE_MACRO.items():
        st = {"H": -h, "ATP": -atp, m: 1}
        if c:
            st["C"] = -c
        if f:
            st["F"] = -f
        reactions.append(Reaction(f"p_{m}", BIOMASS, st))
        catalysis.append(CatalysisRule("R", f"p_{m}", float(k)))
    return MetabolicModel(tuple(species), tuple(reactions), tuple(catalysis),
                          (CompositionRule("S", 0.35, "mass"),), 100.0,
                          {"time": "min", "amount": "mol"}, "core_carbon")


def main() -> None:
    save_model(enzymatic_growth(), bundled_model_path("enzymatic_growth"))
    from defba.horizon import balanced_composition

    draft = core_carbon()
    comp = balanced_composition(draft, total_biomass=0.005)
    save_model(core_carbon(comp.amounts), bundled_model_path("core_carbon"))
    print(f"balanced growth rate {comp.mu:.6g} 1/{draft.units['time']}")


if __name__ == "__main__":
    main()
