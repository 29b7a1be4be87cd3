"""Numerical lab for the Hilbert-Einstein-Dirac functional on tori and unimodular Lie groups."""

from .clifford import CliffordAlgebra, build_clifford
from .functional import apriori_bounds, el_residuals, energy, energy_momentum
from .lattice import LatticeGeometry, build_lattice_metric
from .liegroup import LieGroupGeometry
from .spinors import covariant_derivative, dirac

__version__ = "0.1.0"

__all__ = [
    "CliffordAlgebra",
    "LatticeGeometry",
    "LieGroupGeometry",
    "apriori_bounds",
    "build_clifford",
    "build_lattice_metric",
    "covariant_derivative",
    "dirac",
    "el_residuals",
    "energy",
    "energy_momentum",
]
