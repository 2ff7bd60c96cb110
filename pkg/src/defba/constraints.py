"""Assembly of the deFBA constraint blocks for one set of catalytic constants."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .model import MAX_REVERSIBLE_PER_ENZYME, ScaledModel

KcatAssignment = Mapping[str, tuple[float, "float | None"]]


class CapacityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """All matrix blocks of one deFBA instance in scaled coordinates.

    Rows of ``dynamics`` are external species followed by macromolecules;
    ``capacity_flux @ V - capacity_enzyme @ P <= 0`` is the enzyme capacity,
    ``composition @ P <= 0`` the biomass composition constraint.
    """

    scaled: ScaledModel
    dynamics: sp.csr_matrix
    qssa: sp.csr_matrix
    capacity_flux: sp.csr_matrix
    capacity_enzyme: sp.csr_matrix
    capacity_rows: tuple[str, ...]
    composition: sp.csr_matrix
    flux_lb: np.ndarray
    flux_ub: np.ndarray

    @property
    def n_states(self) -> int:
        return self.scaled.n_y + self.scaled.n_p

    @property
    def n_fluxes(self) -> int:
        return self.scaled.n_r

    @property
    def biomass_weights(self) -> np.ndarray:
        return self.scaled.biomass_weights

    @property
    def macro_production(self) -> sp.csr_matrix:
        return self.dynamics[self.scaled.n_y:]


def build_qssa(scaled: ScaledModel) -> sp.csr_matrix:
    """Quasi-steady-state rows for the internal metabolites."""
    return scaled.block("x").tocsr()


def build_capacity(scaled: ScaledModel,
                   kcats: KcatAssignment | None = None) -> tuple[sp.csr_matrix, sp.csr_matrix, list[str]]:
    """Linearised enzyme capacity rows ``(H_c, H_E, row labels)``.

    Each enzyme contributes one row per sign pattern of its reversible
    reactions. ``kcats`` overrides the model's constants per reaction id.
    """
    nominal = scaled.nominal_kcats()
    if kcats:
        unknown = set(kcats) - set(nominal)
        if unknown:
            raise CapacityError(f"kcat given for uncatalysed reactions: {sorted(unknown)}")
        nominal.update(kcats)
    r_index = {rid: j for j, rid in enumerate(scaled.reaction_ids)}
    p_index = {pid: i for i, pid in enumerate(scaled.macro_ids)}

    by_enzyme: dict[str, list[str]] = {}
    for rule in scaled.model.catalysis:
        by_enzyme.setdefault(rule.enzyme_id, []).append(rule.reaction_id)

    rows, cols, vals = [], [], []
    e_rows, e_cols = [], []
    labels: list[str] = []
    n_row = 0
    for enzyme in scaled.macro_ids:
        reactions = by_enzyme.get(enzyme)
        if not reactions:
            continue
        rev = [rid for rid in reactions if scaled.reversible[r_index[rid]]]
        if len(rev) > MAX_REVERSIBLE_PER_ENZYME:
            raise CapacityError(
                f"{enzyme} catalyses {len(rev)} reversible reactions "
                f"(limit {MAX_REVERSIBLE_PER_ENZYME})")
        coeff_fwd: dict[str, float] = {}
        coeff_bwd: dict[str, float] = {}
        for rid in reactions:
            kf, kb = nominal[rid]
            j = r_index[rid]
            if not kf > 0:
                raise CapacityError(f"kcat_forward of {rid} must be > 0, got {kf}")
            coeff_fwd[rid] = scaled.capacity_scale[j] / kf
            if scaled.reversible[j]:
                if kb is None:
                    raise CapacityError(f"reversible reaction {rid} lacks kcat_backward")
                if not kb > 0:
                    raise CapacityError(f"kcat_backward of {rid} must be > 0, got {kb}")
                coeff_bwd[rid] = -scaled.capacity_scale[j] / kb
        for signs in itertools.product((1, -1), repeat=len(rev)):
            pattern = dict(zip(rev, signs))
            for rid in reactions:
                rows.append(n_row)
                cols.append(r_index[rid])
                vals.append(coeff_bwd[rid] if pattern.get(rid, 1) < 0 else coeff_fwd[rid])
            e_rows.append(n_row)
            e_cols.append(p_index[enzyme])
            tag = "".join("+" if s > 0 else "-" for s in signs)
            labels.append(f"{enzyme}[{tag}]" if tag else enzyme)
            n_row += 1

    h_c = sp.csr_matrix((vals, (rows, cols)), shape=(n_row, scaled.n_r))
    h_e = sp.csr_matrix((np.ones(n_row), (e_rows, e_cols)), shape=(n_row, scaled.n_p))
    return h_c, h_e, labels


def build_composition(scaled: ScaledModel) -> sp.csr_matrix:
    """One row ``psi * b^T - w * e_s^T`` per composition rule (``w = 1`` or ``b_s``)."""
    b = scaled.biomass_weights
    p_index = {pid: i for i, pid in enumerate(scaled.macro_ids)}
    rules = scaled.model.composition
    out = np.zeros((len(rules), scaled.n_p))
    for k, rule in enumerate(rules):
        s = p_index[rule.macromolecule_id]
        out[k] = rule.min_fraction * b
        out[k, s] -= b[s] if rule.basis == "mass" else 1.0
    return sp.csr_matrix(out)


def build_dynamics(scaled: ScaledModel) -> sp.csr_matrix:
    return sp.vstack([scaled.block("y"), scaled.block("p")]).tocsr()


def build_system(scaled: ScaledModel, kcats: KcatAssignment | None = None) -> ConstraintSystem:
    h_c, h_e, labels = build_capacity(scaled, kcats)
    return ConstraintSystem(
        scaled=scaled,
        dynamics=build_dynamics(scaled),
        qssa=build_qssa(scaled),
        capacity_flux=h_c,
        capacity_enzyme=h_e,
        capacity_rows=tuple(labels),
        composition=build_composition(scaled),
        flux_lb=scaled.flux_lb.copy(),
        flux_ub=scaled.flux_ub.copy(),
    )


def with_kcats(system: ConstraintSystem, kcats: KcatAssignment) -> ConstraintSystem:
    """Same system with only the capacity block rebuilt for other constants."""
    h_c, h_e, labels = build_capacity(system.scaled, kcats)
    from dataclasses import replace

    return replace(system, capacity_flux=h_c, capacity_enzyme=h_e, capacity_rows=tuple(labels))
