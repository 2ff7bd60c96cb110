"""Metabolic network data model, validation and the macromolecule scaling transform."""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp


class ModelError(ValueError):
    """Raised when a model is used that does not pass validation."""

    def __init__(self, diagnostics: Sequence["Diagnostic"]):
        self.diagnostics = list(diagnostics)
        lines = "\n".join(f"  {d}" for d in self.diagnostics)
        super().__init__(f"model failed validation:\n{lines}")


class SpeciesKind(str, enum.Enum):
    EXTERNAL = "external"
    INTERNAL = "internal"
    MACROMOLECULE = "macromolecule"


class ReactionKind(str, enum.Enum):
    EXCHANGE = "exchange"
    METABOLIC = "metabolic"
    BIOMASS = "biomass"


@dataclass(frozen=True)
class Species:
    id: str
    kind: SpeciesKind
    molecular_weight: float | None = None
    is_enzyme: bool = False
    inflow: float = 0.0
    dilution: float = 0.0
    initial_amount: float = 0.0


@dataclass(frozen=True)
class Reaction:
    id: str
    kind: ReactionKind
    stoichiometry: Mapping[str, float]
    reversible: bool = False
    lower_bound: float | None = None
    upper_bound: float = math.inf

    @property
    def lb(self) -> float:
        if self.lower_bound is not None:
            return self.lower_bound
        return -math.inf if self.reversible else 0.0


@dataclass(frozen=True)
class CatalysisRule:
    enzyme_id: str
    reaction_id: str
    kcat_forward: float
    kcat_backward: float | None = None


@dataclass(frozen=True)
class CompositionRule:
    """Minimal share ``min_fraction`` of total biomass held by one macromolecule.

    ``basis="amount"`` compares ``min_fraction * b^T P`` with the amount of the
    macromolecule; ``basis="mass"`` compares it with its mass ``b_s * P_s``.
    """

    macromolecule_id: str
    min_fraction: float
    basis: str = "amount"


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.subject}: {self.message}"


@dataclass(frozen=True)
class MetabolicModel:
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]
    catalysis: tuple[CatalysisRule, ...] = ()
    composition: tuple[CompositionRule, ...] = ()
    alpha: float = 1.0
    units: Mapping[str, str] = field(default_factory=lambda: {"time": "h", "amount": "mol"})
    name: str = ""

    def species_by_id(self) -> dict[str, Species]:
        return {s.id: s for s in self.species}

    def reaction_by_id(self) -> dict[str, Reaction]:
        return {r.id: r for r in self.reactions}

    def ids_of_kind(self, kind: SpeciesKind) -> list[str]:
        return [s.id for s in self.species if s.kind == kind]

    def with_kcats(self, kcats: Mapping[str, tuple[float, float | None]]) -> "MetabolicModel":
        """Copy of the model with catalytic constants replaced per reaction id."""
        rules = []
        for rule in self.catalysis:
            if rule.reaction_id in kcats:
                kf, kb = kcats[rule.reaction_id]
                rule = CatalysisRule(rule.enzyme_id, rule.reaction_id, kf, kb)
            rules.append(rule)
        return _replace(self, catalysis=tuple(rules))

    def with_initial(self, amounts: Mapping[str, float]) -> "MetabolicModel":
        species = tuple(
            Species(s.id, s.kind, s.molecular_weight, s.is_enzyme, s.inflow, s.dilution,
                    float(amounts.get(s.id, s.initial_amount)))
            for s in self.species
        )
        return _replace(self, species=species)


def _replace(model: MetabolicModel, **changes) -> MetabolicModel:
    from dataclasses import replace

    return replace(model, **changes)


MAX_REVERSIBLE_PER_ENZYME = 16


def validate(model: MetabolicModel) -> list[Diagnostic]:
    """Check every model invariant; an empty list means the model is usable."""
    diags: list[Diagnostic] = []

    def add(rule: str, subject: str, message: str) -> None:
        diags.append(Diagnostic(rule, subject, message))

    for sid, n in Counter(s.id for s in model.species).items():
        if n > 1:
            add("unique-id", sid, f"species id used {n} times")
    for rid, n in Counter(r.id for r in model.reactions).items():
        if n > 1:
            add("unique-id", rid, f"reaction id used {n} times")
    if set(s.id for s in model.species) & set(r.id for r in model.reactions):
        for shared in sorted(set(s.id for s in model.species) & set(r.id for r in model.reactions)):
            add("unique-id", shared, "id used for both a species and a reaction")

    species = model.species_by_id()
    reactions = model.reaction_by_id()

    if not (model.alpha >= 1.0):
        add("alpha", "model", f"scaling factor must be >= 1, got {model.alpha}")
    time_unit = model.units.get("time")
    if time_unit not in ("h", "min"):
        add("units", "model", f"time unit must be 'h' or 'min', got {time_unit!r}")

    for s in model.species:
        if s.kind == SpeciesKind.MACROMOLECULE:
            if s.molecular_weight is None or not (s.molecular_weight > 0):
                add("molecular-weight", s.id, "macromolecules need a molecular weight > 0")
        elif s.molecular_weight is not None:
            add("molecular-weight", s.id, "molecular weight is only defined for macromolecules")
        if s.is_enzyme and s.kind != SpeciesKind.MACROMOLECULE:
            add("enzyme-kind", s.id, "only macromolecules can be enzymes")
        if s.kind != SpeciesKind.EXTERNAL and (s.inflow != 0 or s.dilution != 0):
            add("external-dynamics", s.id, "inflow/dilution are only allowed on external species")
        if s.inflow < 0 or s.dilution < 0:
            add("external-dynamics", s.id, "inflow and dilution must be >= 0")
        if not (s.initial_amount >= 0) or not math.isfinite(s.initial_amount):
            add("initial-amount", s.id, "initial amount must be finite and >= 0")

    for r in model.reactions:
        for sid, coeff in r.stoichiometry.items():
            if sid not in species:
                add("dangling-species", r.id, f"unknown species {sid!r}")
            elif not math.isfinite(coeff):
                add("stoichiometry", r.id, f"non-finite coefficient for {sid!r}")
        lb, ub = r.lb, r.upper_bound
        if lb > ub:
            add("flux-bounds", r.id, f"lower bound {lb} exceeds upper bound {ub}")
        if not (lb <= 0 <= ub):
            add("flux-bounds", r.id, "zero flux must lie within the bounds")
        if not r.reversible and lb < 0:
            add("flux-bounds", r.id, "irreversible reactions need a lower bound of 0")
        kinds = {sid: species[sid].kind for sid in r.stoichiometry if sid in species}
        touches_ext = any(k == SpeciesKind.EXTERNAL for k in kinds.values())
        touches_mac = any(k == SpeciesKind.MACROMOLECULE for k in kinds.values())
        if r.kind == ReactionKind.EXCHANGE:
            if not touches_ext:
                add("reaction-class", r.id, "exchange reactions must touch an external species")
            if touches_mac:
                add("reaction-class", r.id, "only biomass reactions may change macromolecules")
        elif r.kind == ReactionKind.BIOMASS:
            if not touches_mac:
                add("reaction-class", r.id, "biomass reactions must touch a macromolecule")
        elif r.kind == ReactionKind.METABOLIC:
            if touches_ext:
                add("reaction-class", r.id, "metabolic reactions may not touch external species")
            if touches_mac:
                add("reaction-class", r.id, "only biomass reactions may change macromolecules")

    seen_reactions: dict[str, str] = {}
    rev_count: Counter[str] = Counter()
    for rule in model.catalysis:
        subject = f"{rule.enzyme_id}->{rule.reaction_id}"
        enzyme = species.get(rule.enzyme_id)
        if enzyme is None:
            add("dangling-species", subject, f"unknown catalyst {rule.enzyme_id!r}")
        elif enzyme.kind != SpeciesKind.MACROMOLECULE:
            add("catalyst-kind", subject, "catalysts must be macromolecules")
        reaction = reactions.get(rule.reaction_id)
        if reaction is None:
            add("dangling-reaction", subject, f"unknown reaction {rule.reaction_id!r}")
        if not (rule.kcat_forward > 0):
            add("kcat", subject, "kcat_forward must be > 0")
        if reaction is not None and reaction.reversible:
            rev_count[rule.enzyme_id] += 1
            if rule.kcat_backward is None:
                add("kcat", subject, "reversible reaction needs kcat_backward")
            elif not (rule.kcat_backward > 0):
                add("kcat", subject, "kcat_backward must be > 0")
        elif rule.kcat_backward is not None and reaction is not None:
            add("kcat", subject, "kcat_backward given for an irreversible reaction")
        if rule.reaction_id in seen_reactions:
            add("isozyme", subject,
                f"reaction already catalyzed by {seen_reactions[rule.reaction_id]!r}")
        else:
            seen_reactions[rule.reaction_id] = rule.enzyme_id
    for enzyme_id, n in rev_count.items():
        if n > MAX_REVERSIBLE_PER_ENZYME:
            add("row-explosion", enzyme_id,
                f"{n} reversible reactions exceed the limit of {MAX_REVERSIBLE_PER_ENZYME}")

    total = 0.0
    for rule in model.composition:
        target = species.get(rule.macromolecule_id)
        if target is None:
            add("dangling-species", rule.macromolecule_id, "composition rule target unknown")
        elif target.kind != SpeciesKind.MACROMOLECULE:
            add("composition", rule.macromolecule_id, "composition target must be a macromolecule")
        if not (0 < rule.min_fraction < 1):
            add("composition", rule.macromolecule_id, "composition fraction out of (0,1)")
        if rule.basis not in ("amount", "mass"):
            add("composition", rule.macromolecule_id, f"unknown basis {rule.basis!r}")
        total += rule.min_fraction
    if total > 1 + 1e-12:
        add("composition", "model", f"composition fractions sum > 1 ({total:g})")

    return diags


def stoichiometric_matrix(model: MetabolicModel) -> tuple[list[str], list[str], sp.csr_matrix]:
    """Raw stoichiometry with rows ordered external, internal, macromolecule."""
    rows = (model.ids_of_kind(SpeciesKind.EXTERNAL) + model.ids_of_kind(SpeciesKind.INTERNAL)
            + model.ids_of_kind(SpeciesKind.MACROMOLECULE))
    index = {sid: i for i, sid in enumerate(rows)}
    ri, ci, vals = [], [], []
    for j, r in enumerate(model.reactions):
        for sid, coeff in r.stoichiometry.items():
            if coeff != 0:
                ri.append(index[sid])
                ci.append(j)
                vals.append(float(coeff))
    mat = sp.csr_matrix((vals, (ri, ci)), shape=(len(rows), len(model.reactions)))
    return rows, [r.id for r in model.reactions], mat


@dataclass(frozen=True, eq=False)
class ScaledModel:
    """Model in scaled coordinates: amounts ``alpha * P`` and fluxes ``alpha * V_p``.

    ``stoichiometry`` has rows external, internal, macromolecule. Biomass
    columns are divided by alpha on non-macromolecule rows; macromolecule rows
    are unchanged because both sides of their balance carry the factor.
    """

    model: MetabolicModel
    alpha: float
    external_ids: tuple[str, ...]
    internal_ids: tuple[str, ...]
    macro_ids: tuple[str, ...]
    reaction_ids: tuple[str, ...]
    reaction_kinds: tuple[ReactionKind, ...]
    reversible: np.ndarray
    stoichiometry: sp.csr_matrix
    capacity_scale: np.ndarray
    flux_lb: np.ndarray
    flux_ub: np.ndarray
    biomass_weights: np.ndarray
    enzyme_mask: np.ndarray
    inflow: np.ndarray
    dilution: np.ndarray
    initial_external: np.ndarray
    initial_macro: np.ndarray

    @property
    def n_y(self) -> int:
        return len(self.external_ids)

    @property
    def n_x(self) -> int:
        return len(self.internal_ids)

    @property
    def n_p(self) -> int:
        return len(self.macro_ids)

    @property
    def n_r(self) -> int:
        return len(self.reaction_ids)

    @property
    def time_unit(self) -> str:
        return self.model.units.get("time", "h")

    def block(self, rows: str) -> sp.csr_matrix:
        """Row block ``'y'``, ``'x'`` or ``'p'`` of the scaled stoichiometry."""
        start = {"y": 0, "x": self.n_y, "p": self.n_y + self.n_x}[rows]
        size = {"y": self.n_y, "x": self.n_x, "p": self.n_p}[rows]
        return self.stoichiometry[start:start + size]

    def nominal_kcats(self) -> dict[str, tuple[float, float | None]]:
        return {c.reaction_id: (c.kcat_forward, c.kcat_backward) for c in self.model.catalysis}

    def scale_amounts(self, macro_amounts: np.ndarray) -> np.ndarray:
        return self.alpha * np.asarray(macro_amounts, dtype=float)


def scale(model: MetabolicModel) -> ScaledModel:
    diags = validate(model)
    if diags:
        raise ModelError(diags)
    alpha = float(model.alpha)
    rows, cols, raw = stoichiometric_matrix(model)
    ext = model.ids_of_kind(SpeciesKind.EXTERNAL)
    internal = model.ids_of_kind(SpeciesKind.INTERNAL)
    macro = model.ids_of_kind(SpeciesKind.MACROMOLECULE)
    kinds = tuple(r.kind for r in model.reactions)
    is_biomass = np.array([k == ReactionKind.BIOMASS for k in kinds])

    n_non_macro = len(ext) + len(internal)
    col_factor = np.where(is_biomass, 1.0 / alpha, 1.0)
    scaled = raw.tocoo()
    factor = np.where(scaled.row < n_non_macro, col_factor[scaled.col], 1.0)
    scaled = sp.csr_matrix((scaled.data * factor, (scaled.row, scaled.col)), shape=raw.shape)

    lb = np.array([r.lb for r in model.reactions], dtype=float)
    ub = np.array([r.upper_bound for r in model.reactions], dtype=float)
    flux_factor = np.where(is_biomass, alpha, 1.0)
    by_id = model.species_by_id()
    return ScaledModel(
        model=model,
        alpha=alpha,
        external_ids=tuple(ext),
        internal_ids=tuple(internal),
        macro_ids=tuple(macro),
        reaction_ids=tuple(cols),
        reaction_kinds=kinds,
        reversible=np.array([r.reversible for r in model.reactions], dtype=bool),
        stoichiometry=scaled,
        capacity_scale=np.where(is_biomass, 1.0, alpha),
        flux_lb=lb * flux_factor,
        flux_ub=ub * flux_factor,
        biomass_weights=np.array([by_id[m].molecular_weight for m in macro], dtype=float),
        enzyme_mask=np.array([by_id[m].is_enzyme for m in macro], dtype=bool),
        inflow=np.array([by_id[y].inflow for y in ext], dtype=float),
        dilution=np.array([by_id[y].dilution for y in ext], dtype=float),
        initial_external=np.array([by_id[y].initial_amount for y in ext], dtype=float),
        initial_macro=alpha * np.array([by_id[m].initial_amount for m in macro], dtype=float),
    )


def unscale(scaled: ScaledModel) -> MetabolicModel:
    """Rebuild a raw model from scaled matrices (inverse of :func:`scale`)."""
    alpha = scaled.alpha
    rows = scaled.external_ids + scaled.internal_ids + scaled.macro_ids
    n_non_macro = scaled.n_y + scaled.n_x
    is_biomass = np.array([k == ReactionKind.BIOMASS for k in scaled.reaction_kinds])
    coo = scaled.stoichiometry.tocoo()
    stoich: list[dict[str, float]] = [{} for _ in scaled.reaction_ids]
    for i, j, v in zip(coo.row, coo.col, coo.data):
        if i < n_non_macro and is_biomass[j]:
            v = v * alpha
        stoich[j][rows[i]] = float(v)
    flux_factor = np.where(is_biomass, alpha, 1.0)
    lb = scaled.flux_lb / flux_factor
    ub = scaled.flux_ub / flux_factor
    old = scaled.model.reaction_by_id()
    reactions = []
    for j, rid in enumerate(scaled.reaction_ids):
        orig = old[rid]
        lower = None if orig.lower_bound is None else float(lb[j])
        reactions.append(Reaction(rid, scaled.reaction_kinds[j], stoich[j],
                                  bool(scaled.reversible[j]), lower, float(ub[j])))
    return _replace(scaled.model, reactions=tuple(reactions))


# -- JSON model files ---------------------------------------------------------

def _num(value) -> float | None:
    if value is None:
        return None
    return float(value)


def model_from_dict(data: Mapping) -> MetabolicModel:
    species = tuple(
        Species(
            id=s["id"],
            kind=SpeciesKind(s["kind"].lower()),
            molecular_weight=_num(s.get("molecular_weight")),
            is_enzyme=bool(s.get("is_enzyme", False)),
            inflow=float(s.get("inflow", 0.0)),
            dilution=float(s.get("dilution", 0.0)),
            initial_amount=float(s.get("initial_amount", 0.0)),
        )
        for s in data["species"]
    )
    reactions = []
    for r in data["reactions"]:
        ub = r.get("upper_bound")
        reactions.append(Reaction(
            id=r["id"],
            kind=ReactionKind(r["kind"].lower()),
            stoichiometry={k: float(v) for k, v in r["stoichiometry"].items()},
            reversible=bool(r.get("reversible", False)),
            lower_bound=_num(r.get("lower_bound")),
            upper_bound=math.inf if ub is None else float(ub),
        ))
    catalysis = tuple(
        CatalysisRule(c["enzyme_id"], c["reaction_id"], float(c["kcat_forward"]),
                      _num(c.get("kcat_backward")))
        for c in data.get("catalysis", [])
    )
    composition = tuple(
        CompositionRule(c["macromolecule_id"], float(c["min_fraction"]), c.get("basis", "amount"))
        for c in data.get("composition", [])
    )
    units = dict(data.get("units", {"time": "h"}))
    units.setdefault("amount", "mol")
    return MetabolicModel(species, tuple(reactions), catalysis, composition,
                          float(data.get("alpha", 1.0)), units, data.get("name", ""))


def model_to_dict(model: MetabolicModel) -> dict:
    def bound(x: float | None):
        return None if x is None or math.isinf(x) else x

    species = []
    for s in model.species:
        entry = {"id": s.id, "kind": s.kind.value}
        if s.molecular_weight is not None:
            entry["molecular_weight"] = s.molecular_weight
        if s.is_enzyme:
            entry["is_enzyme"] = True
        if s.inflow:
            entry["inflow"] = s.inflow
        if s.dilution:
            entry["dilution"] = s.dilution
        if s.initial_amount:
            entry["initial_amount"] = s.initial_amount
        species.append(entry)
    reactions = []
    for r in model.reactions:
        entry = {"id": r.id, "kind": r.kind.value, "stoichiometry": dict(r.stoichiometry),
                 "reversible": r.reversible}
        if r.lower_bound is not None:
            entry["lower_bound"] = bound(r.lower_bound)
        if not math.isinf(r.upper_bound):
            entry["upper_bound"] = r.upper_bound
        reactions.append(entry)
    catalysis = []
    for c in model.catalysis:
        entry = {"enzyme_id": c.enzyme_id, "reaction_id": c.reaction_id,
                 "kcat_forward": c.kcat_forward}
        if c.kcat_backward is not None:
            entry["kcat_backward"] = c.kcat_backward
        catalysis.append(entry)
    composition = [{"macromolecule_id": c.macromolecule_id, "min_fraction": c.min_fraction,
                    "basis": c.basis} for c in model.composition]
    out = {"species": species, "reactions": reactions, "catalysis": catalysis,
           "composition": composition, "alpha": model.alpha, "units": dict(model.units)}
    if model.name:
        out = {"name": model.name, **out}
    return out


BUNDLED_MODELS = ("enzymatic_growth", "core_carbon")


def bundled_model_path(name: str) -> Path:
    return Path(__file__).with_name("data") / f"{name}.json"


def load_model(path: str | Path) -> MetabolicModel:
    """Read a model file; bare bundled names like ``core_carbon`` also resolve."""
    p = Path(path)
    if not p.exists() and p.stem in BUNDLED_MODELS and p.parent in (Path("."), Path("examples")):
        p = bundled_model_path(p.stem)
    with open(p, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def save_model(model: MetabolicModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")
