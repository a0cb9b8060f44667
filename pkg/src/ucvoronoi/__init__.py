"""Voronoi cells of general sites in lp spaces, with stability certificates."""

from .errors import *  # noqa: F401,F403
from .space import NormedSpace, check_strong_triangle, clarkson_angle, modulus_of_convexity, norm
from .world import Ball, Box, Polytope, boundary_distance, world_from_dict
from .sites import (
    BoxSite,
    Configuration,
    Disc,
    Points,
    Segment,
    Union,
    eta,
    hausdorff,
    rho_estimate,
    set_distance,
    site_distance,
    site_from_dict,
)

__version__ = "0.1.0"
