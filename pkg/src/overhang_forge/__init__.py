"""Grow printable support under overhangs by evolving a level set.

The part is a signed distance field on a regular grid (negative inside).  Its
downward-facing, too-steep regions are pushed outward until every point of the
surface can be printed without further support; what was added is the support.
"""

from .cases import CASES
from .evolution import EvolutionReport, EvolveConfig, StopReason, added_volume, run, step
from .grid import GridSpec, ScalarField, make_field
from .mesh import Contour2D, TriangleMesh, load_mesh, read_mesh
from .mesh_sdf import mesh_to_sdf
from .printability import Label, SpeedParams, classify, speed, surface_printable, theta_of_normal, v1, v2
from .reinit import reinitialize
from .surface import extract_surface, naive_projection_support, split_support

__version__ = "0.1.0"

__all__ = [
    "CASES", "Contour2D", "EvolutionReport", "EvolveConfig", "GridSpec", "Label", "ScalarField", "SpeedParams",
    "StopReason", "TriangleMesh", "added_volume", "classify", "extract_surface", "load_mesh", "make_field",
    "mesh_to_sdf", "naive_projection_support", "read_mesh", "reinitialize", "run", "speed", "split_support",
    "step", "surface_printable", "theta_of_normal", "v1", "v2",
]
