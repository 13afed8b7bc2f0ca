"""Pair correlations, diffraction and spectral diagnostics for 1D inflation tilings."""

from .quadratic import QuadElement, parse_quad, quad, TAU, SQRT2, SQRT5, SILVER
from .inflation import (
    InflationRule,
    load_rule,
    parse_rule,
    perron_data,
    displacement_sets,
    substitution_matrix,
)

__version__ = "0.1.0"
