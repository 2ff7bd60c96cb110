import pytest

from defba.model import (CatalysisRule, CompositionRule, MetabolicModel, Reaction, ReactionKind,
                         Species, SpeciesKind, load_model)

EXT, INT, MAC = SpeciesKind.EXTERNAL, SpeciesKind.INTERNAL, SpeciesKind.MACROMOLECULE


@pytest.fixture(scope="session")
def ex1():
    return load_model("enzymatic_growth")


@pytest.fixture(scope="session")
def core():
    return load_model("core_carbon")


def chain_model(reversible=(True, False, True), kcats=None, alpha=10.0, composition=False):
    """Nutrient N taken up into a chain of metabolites and built into one enzyme E.

    One enzyme catalyses every step; ``reversible`` flags the metabolic steps.
    """
    n = len(reversible)
    species = [Species("N", EXT, initial_amount=100.0),
               *[Species(f"A{i}", INT) for i in range(n + 1)],
               Species("E", MAC, molecular_weight=2.0, is_enzyme=True, initial_amount=0.05),
               Species("Q", MAC, molecular_weight=3.0, initial_amount=0.05)]
    reactions = [Reaction("up", ReactionKind.EXCHANGE, {"N": -1, "A0": 1})]
    for i, rev in enumerate(reversible):
        reactions.append(Reaction(f"r{i}", ReactionKind.METABOLIC,
                                  {f"A{i}": -1, f"A{i + 1}": 1}, reversible=rev))
    reactions.append(Reaction("pE", ReactionKind.BIOMASS, {f"A{n}": -2, "E": 1}))
    reactions.append(Reaction("pQ", ReactionKind.BIOMASS, {f"A{n}": -3, "Q": 1}))
    kcats = kcats or {}
    rules = [CatalysisRule("E", "up", *kcats.get("up", (5.0, None)))]
    for i, rev in enumerate(reversible):
        kf, kb = kcats.get(f"r{i}", (4.0 + i, 3.0 + i if rev else None))
        rules.append(CatalysisRule("E", f"r{i}", kf, kb))
    rules.append(CatalysisRule("E", "pE", *kcats.get("pE", (1.0, None))))
    rules.append(CatalysisRule("E", "pQ", *kcats.get("pQ", (1.5, None))))
    comp = (CompositionRule("Q", 0.2, "mass"),) if composition else ()
    return MetabolicModel(tuple(species), tuple(reactions), tuple(rules), comp, alpha,
                          {"time": "h", "amount": "mol"}, "chain")


@pytest.fixture
def chain():
    return chain_model()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
