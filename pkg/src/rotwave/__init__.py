"""Rotating focusing Schrodinger equation with partial harmonic confinement.

Spectral grids, energy functionals, the radial ground profile, constrained
minimizers and Strang-split dynamics, plus a configuration-driven runner.
"""

from .grid import ComplexField, Grid, GridSpec, NonFiniteFieldError, build_grid
from .functionals import EnergyBreakdown, ModelParams, evaluate, sigma_gamma_norm, symmetry_distance
from .qsolver import RadialProfile, ShootingError, critical_mass, sharp_gn_constant, solve_ground_profile
from .minimizer import (
    InitKind,
    MinimizeSpec,
    MinimizerResult,
    Status,
    analytic_bounds,
    minimize_global,
    minimize_local_ball,
    nonexistence_probe,
)
from .dynamics import EvolutionTrace, Method, StabilityReport, propagate, stability_experiment

__version__ = "0.1.0"

__all__ = [
    "ComplexField",
    "Grid",
    "GridSpec",
    "NonFiniteFieldError",
    "build_grid",
    "EnergyBreakdown",
    "ModelParams",
    "evaluate",
    "sigma_gamma_norm",
    "symmetry_distance",
    "RadialProfile",
    "ShootingError",
    "critical_mass",
    "sharp_gn_constant",
    "solve_ground_profile",
    "InitKind",
    "MinimizeSpec",
    "MinimizerResult",
    "Status",
    "analytic_bounds",
    "minimize_global",
    "minimize_local_ball",
    "nonexistence_probe",
    "EvolutionTrace",
    "Method",
    "StabilityReport",
    "propagate",
    "stability_experiment",
]
