"""Numerical laboratory for the lattice parabolic Anderson model.

Two independent estimators of directed-polymer partition functions — an
exponential splitting scheme for the semidiscrete stochastic heat equation
and a Feynman-Kac path Monte Carlo — share one reproducible counter-based
noise environment, plus experiments probing factorization, lower tails,
attraction to the global solution, and the stationary profile distribution.
"""

__version__ = "0.1.0"

from .box import Box, unit
from .errors import (ConfigError, CoverageError, InvariantError, PamlabError,
                     ResourceError, UsageError)
from .evolution import (EvolutionPlan, LatticeField, adjoint_sweep,
                        backward_partition, make_plan, point_to_point_field,
                        solve_cauchy, suggested_radius)
from .kernels import KernelTable, discrete_kernel, kernel_table, ratio_extremes
from .noise import NoiseField
from .polymer import McEstimate, mc_point_to_line, mc_point_to_point
from .profiles import FunctionClassSpec, builtin_profile, class_check, metric_d

__all__ = [
    "Box", "unit", "ConfigError", "CoverageError", "InvariantError",
    "PamlabError", "ResourceError", "UsageError", "EvolutionPlan",
    "LatticeField", "adjoint_sweep", "backward_partition", "make_plan",
    "point_to_point_field", "solve_cauchy", "suggested_radius", "KernelTable",
    "discrete_kernel", "kernel_table", "ratio_extremes", "NoiseField",
    "McEstimate", "mc_point_to_line", "mc_point_to_point",
    "FunctionClassSpec", "builtin_profile", "class_check", "metric_d",
]
