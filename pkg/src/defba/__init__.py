"""Dynamic enzyme-cost flux balance analysis with receding-horizon and robust variants."""

from .constraints import ConstraintSystem, build_system
from .horizon import estimate_horizon
from .model import MetabolicModel, load_model, scale, validate
from .robust import UncertaintyEntry, UncertaintySet, solve_rdefba
from .solvers import (SolveOptions, Trajectory, classify_phases, solve_defba, solve_sdefba)

__all__ = ["ConstraintSystem", "MetabolicModel", "SolveOptions", "Trajectory",
           "UncertaintyEntry", "UncertaintySet", "build_system", "classify_phases",
           "estimate_horizon", "load_model", "scale", "solve_defba", "solve_rdefba",
           "solve_sdefba", "validate"]
