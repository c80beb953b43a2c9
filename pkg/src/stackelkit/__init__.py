"""Stäckel-separable geodesic flows: construction, verification and numerical checks."""

__version__ = "0.1.0"

from .scalarfield import Backend, Chart, ScalarField, parse_expression
from .phase_poly import MomentaPolynomial, PhaseState, poisson_bracket, is_zero
from .tensorcalc import CombinationSpec, Metric, QuadraticIntegral, killing_residual, quadratic_to_poly
from .stackel import StackelMatrix, StackelSystem, stackel_integrals, validate_stackel

__all__ = [
    "Backend", "Chart", "ScalarField", "parse_expression",
    "MomentaPolynomial", "PhaseState", "poisson_bracket", "is_zero",
    "CombinationSpec", "Metric", "QuadraticIntegral", "killing_residual", "quadratic_to_poly",
    "StackelMatrix", "StackelSystem", "stackel_integrals", "validate_stackel",
]
