"""Goal-oriented uncertainty quantification and sensitivity bounds for Markov models."""

from .divergence import (AnalyticCGF, DiscreteDist, EmpiricalCGF, GoalDivergence, SolverError,
                         xi_bounds)
from .static_sensitivity import Estimate, FisherMatrix, ParametricFamily

__version__ = "0.1.0"

__all__ = ["AnalyticCGF", "DiscreteDist", "EmpiricalCGF", "GoalDivergence", "SolverError",
           "xi_bounds", "Estimate", "FisherMatrix", "ParametricFamily"]
