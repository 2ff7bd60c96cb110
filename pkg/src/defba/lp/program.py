from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "==", ">="
_SENSES = {"<=": LE, "<": LE, "=": EQ, "==": EQ, ">=": GE, ">": GE}


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``max objective @ x + offset`` s.t. ``A x (senses) rhs`` and ``lower <= x <= upper``."""

    objective: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    objective_offset: float = 0.0
    var_names: Sequence[str] | None = None
    row_names: Sequence[str] | None = None

    def __post_init__(self):
        n = len(self.objective)
        m = len(self.rhs)
        if self.A.shape != (m, n):
            raise ValueError(f"constraint matrix has shape {self.A.shape}, expected {(m, n)}")
        if len(self.senses) != m:
            raise ValueError("one sense per constraint row required")
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("one bound pair per variable required")
        bad = set(np.unique(self.senses)) - {LE, EQ, GE}
        if bad:
            raise ValueError(f"unknown constraint senses {bad}")
        for name, arr in (("objective", self.objective), ("rhs", self.rhs),
                          ("coefficients", self.A.data)):
            if np.isnan(arr).any():
                raise ValueError(f"NaN in {name}")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise ValueError("NaN in variable bounds")
        if np.isposinf(self.lower).any() or np.isneginf(self.upper).any():
            raise ValueError("lower bounds must be < +inf and upper bounds > -inf")
        if (self.lower > self.upper).any():
            j = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"variable {j} has lower bound above upper bound")

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @classmethod
    def from_rows(cls, n_vars: int, objective: Mapping[int, float] | Sequence[float],
                  rows: Iterable[tuple[Mapping[int, float], str, float]],
                  bounds: Sequence[tuple[float | None, float | None]] | None = None,
                  ) -> "LinearProgram":
        """Build from sparse rows ``({index: coeff}, sense, rhs)``; default bounds ``[0, inf)``."""
        if isinstance(objective, Mapping):
            c = np.zeros(n_vars)
            for j, v in objective.items():
                c[j] = v
        else:
            c = np.asarray(objective, dtype=float)
        ri, ci, vals, senses, rhs = [], [], [], [], []
        for i, (coeffs, sense, b) in enumerate(rows):
            for j, v in coeffs.items():
                if not 0 <= j < n_vars:
                    raise ValueError(f"row {i} references variable {j} outside 0..{n_vars - 1}")
                ri.append(i)
                ci.append(j)
                vals.append(float(v))
            senses.append(_SENSES[sense])
            rhs.append(float(b))
        A = sp.csr_matrix((vals, (ri, ci)), shape=(len(rhs), n_vars))
        if bounds is None:
            lo, hi = np.zeros(n_vars), np.full(n_vars, np.inf)
        else:
            lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds], dtype=float)
            hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=float)
        return cls(c, A, np.array(senses, dtype=object), np.array(rhs, dtype=float), lo, hi)

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "LinearProgram":
        return replace(self, lower=lower, upper=upper)

    def with_objective(self, objective: np.ndarray, offset: float = 0.0) -> "LinearProgram":
        return replace(self, objective=objective, objective_offset=offset)

    def row_violation(self, x: np.ndarray) -> np.ndarray:
        """Per-row amount by which ``x`` violates its constraint (0 if satisfied)."""
        ax = self.A @ x
        viol = np.zeros(self.n_rows)
        le = self.senses == LE
        ge = self.senses == GE
        eq = self.senses == EQ
        viol[le] = np.maximum(ax[le] - self.rhs[le], 0.0)
        viol[ge] = np.maximum(self.rhs[ge] - ax[ge], 0.0)
        viol[eq] = np.abs(ax[eq] - self.rhs[eq])
        return viol

    def max_violation(self, x: np.ndarray) -> float:
        rows = self.row_violation(x)
        bnd = np.maximum(self.lower - x, 0.0) + np.maximum(x - self.upper, 0.0)
        return float(max(rows.max(initial=0.0), bnd.max(initial=0.0)))

    def value(self, x: np.ndarray) -> float:
        return float(self.objective @ x + self.objective_offset)


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective_value: float = float("nan")
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    backend: str = ""
    certificate: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


def dual_objective(lp: LinearProgram, duals: np.ndarray, reduced_costs: np.ndarray,
                   tol: float = 1e-9) -> float:
    """Dual bound for the maximisation problem from row duals and reduced costs."""
    value = float(lp.rhs @ duals) + lp.objective_offset
    z = np.where(np.abs(reduced_costs) > tol, reduced_costs, 0.0)
    up = np.where(z > 0, lp.upper, 0.0)
    lo = np.where(z < 0, lp.lower, 0.0)
    with np.errstate(invalid="ignore"):
        contrib = np.where(z > 0, z * up, 0.0) + np.where(z < 0, z * lo, 0.0)
    return value + float(np.nansum(contrib))
