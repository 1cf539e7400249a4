"""Numerical and exact tools for the Fefferman measure of real hypersurfaces in C^2."""

from .core_calculus import Jet2Ambient, Jet2Graph, ScalarField, bordered_hessian_M, graph_mu, jet_of
from .measures import (
    MeasureReport,
    RadialSurface,
    CircularSurface,
    circular_measures,
    fefferman_graph,
    fefferman_radial,
    iso_quotient,
    radial_measures,
    volume_radial,
)
from .quadrature import make_grid, make_sphere_grid

__version__ = "0.1.0"
SCHEMA_ID = "fefferman-lab/v1"
