"""B-spline finite element discretization of the model problems."""
from .assembly import (Discretization, assemble, discretization, energy_error,
                       energy_error_direct, energy_functional, load_1d, mass_1d,
                       prolongation, prolongation_1d, reference_solve, stiffness_1d)
from .bspline import ders_basis_funs, knot_vector, n_basis
from .problem import Manufactured, ProblemSpec, manufactured
from .quadrature import gauss_legendre, gauss_legendre_unit

__all__ = [
    "Discretization", "assemble", "discretization", "energy_error", "energy_error_direct",
    "energy_functional", "load_1d", "mass_1d", "prolongation", "prolongation_1d",
    "reference_solve", "stiffness_1d", "ders_basis_funs", "knot_vector", "n_basis",
    "Manufactured", "ProblemSpec", "manufactured", "gauss_legendre", "gauss_legendre_unit",
]
