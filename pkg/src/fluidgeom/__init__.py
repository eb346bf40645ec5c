"""Fluid dynamics and isometric embeddings of surfaces: geometry engine, fluid
dictionary, initial-data marching, developable surfaces, convex integration and
continuum-mechanics extensions."""
from . import constraint, developable, elasto, errors, fluid, geometry, grid, nash_kuiper
from .errors import FluidGeomError, ValidationError
from .geometry import FundamentalForm, Immersion, MetricField, SymmetricField
from .grid import Grid2D, Jet, ScalarField

__version__ = "0.1.0"

__all__ = [
    "FluidGeomError",
    "FundamentalForm",
    "Grid2D",
    "Immersion",
    "Jet",
    "MetricField",
    "ScalarField",
    "SymmetricField",
    "ValidationError",
    "constraint",
    "developable",
    "elasto",
    "errors",
    "fluid",
    "geometry",
    "grid",
    "nash_kuiper",
]
