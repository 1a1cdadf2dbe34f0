"""Spectral statistics of the Hermitian and non-Hermitian Wilson random
matrix ensembles: orthogonal/skew-orthogonal polynomials, Pfaffian kernels,
Monte Carlo sampling and microscopic-limit evaluations."""

from .params import Branch, EnsembleParams, DerivedScales, derive_scales
from .weights import WeightContext, SpectralPoint, PointKind

__all__ = [
    "Branch",
    "EnsembleParams",
    "DerivedScales",
    "derive_scales",
    "WeightContext",
    "SpectralPoint",
    "PointKind",
]

__version__ = "0.1.0"
