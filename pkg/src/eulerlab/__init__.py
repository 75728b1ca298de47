"""Numerical laboratory for steady two-dimensional ideal flows on disks and annuli."""

from .elliptic import BoundaryData, solve_poisson, solve_semilinear
from .evolve import EvolutionConfig, evolve
from .fields import Grid, ScalarField, VectorField
from .monotone import DistributionFunction, MonotoneProfile

__all__ = ["BoundaryData", "DistributionFunction", "EvolutionConfig", "Grid", "MonotoneProfile",
           "ScalarField", "VectorField", "evolve", "solve_poisson", "solve_semilinear"]
__version__ = "0.1.0"
