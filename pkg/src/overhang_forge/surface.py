"""Zero level set extraction, model/support split and the naive support baseline."""

from __future__ import annotations

import numpy as np
from skimage import measure

from .grid import ScalarField
from .mesh import Contour2D, Region, TriangleMesh
from .printability import SpeedParams


class NoCrossingError(ValueError):
    """The field never changes sign, so it has no zero level set."""


def _check_crossings(field: ScalarField) -> None:
    if not field.has_surface():
        raise NoCrossingError("field has no zero crossings")


def _snap_to_edges(u: np.ndarray, verts: np.ndarray) -> np.ndarray:
    # marching cubes works in float32; redo the edge interpolation in double
    idx = np.asarray(verts, dtype=np.float64)
    near = np.rint(idx)
    # every vertex lies on a grid edge: two coordinates are integral, the free one is not
    dev = np.abs(idx - near)
    free = np.argmax(dev, axis=1)
    rows = np.arange(len(idx))
    on_node = dev[rows, free] == 0.0
    base = near.astype(np.int64)
    base[rows, free] = np.floor(idx[rows, free]).astype(np.int64)
    base[rows, free] = np.minimum(base[rows, free], np.asarray(u.shape)[free] - 2)
    nxt = base.copy()
    nxt[rows, free] += 1
    u0 = u[tuple(base.T)]
    u1 = u[tuple(nxt.T)]
    crossing = (u0 < 0) != (u1 < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(crossing & (u0 != u1), u0 / (u0 - u1), idx[rows, free] - base[rows, free])
    out = base.astype(np.float64)
    out[rows, free] += t
    out[on_node] = near[on_node]
    return out


def extract_surface(field: ScalarField, region: Region | None = None) -> TriangleMesh | Contour2D:
    """Triangle mesh (3D, marching cubes) or closed polylines (2D, marching squares).

    Triangles are wound so their normals point out of ``u < 0``.  In 2D the
    field is padded with a positive rim so loops touching the grid boundary
    still close.
    """
    _check_crossings(field)
    g = field.grid
    u = field.values
    if g.dim == 3:
        verts, faces, _, _ = measure.marching_cubes(u, level=0.0, gradient_direction="descent",
                                                    allow_degenerate=False)
        verts = _snap_to_edges(u, verts)
        verts = verts * np.asarray(g.spacing) + np.asarray(g.origin)
        return TriangleMesh(verts, faces, region=region)
    rim = float(np.abs(u).max()) + 1.0
    padded = np.pad(u, 1, constant_values=rim)
    loops = []
    for c in measure.find_contours(padded, 0.0):
        pts = (c - 1.0) * np.asarray(g.spacing) + np.asarray(g.origin)
        if len(np.unique(pts, axis=0)) >= 3:
            loops.append(pts)
    return Contour2D(loops, region=region)


def _empty_like(field: ScalarField, region: Region) -> TriangleMesh | Contour2D:
    if field.grid.dim == 3:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), region=region)
    return Contour2D([], region=region)


def support_field(field0: ScalarField, field_final: ScalarField) -> ScalarField:
    """Level-set function of the added region ``{u_final < 0 <= u0}``."""
    if field0.grid != field_final.grid:
        raise ValueError("fields live on different grids")
    worst = field_final.values - field0.values
    if np.any(worst > 0):
        node = np.unravel_index(int(np.argmax(worst)), worst.shape)
        raise ValueError(f"final field exceeds initial field at node {tuple(int(i) for i in node)} "
                         f"by {worst.max():.3g}; the region did not grow monotonically")
    return field0.with_values(np.maximum(field_final.values, -field0.values))


def split_support(field0: ScalarField, field_final: ScalarField):
    """Surfaces of the original model and of the added support, tagged by region."""
    sup = support_field(field0, field_final)
    model = extract_surface(field0, Region.MODEL)
    support = extract_surface(sup, Region.SUPPORT) if sup.has_surface() else _empty_like(sup, Region.SUPPORT)
    return model, support


def naive_projection_support(field0: ScalarField, params: SpeedParams) -> float:
    """Volume of the dense scaffold under the part.

    Counts nodes outside the part that have a part node somewhere above them in
    the same vertical column and sit above the plate, times the cell volume.
    """
    u = field0.values
    inside = u < 0
    z = field0.grid.vertical()
    # inside anywhere strictly above: reverse cumulative or along the last axis, shifted by one
    above = np.flip(np.logical_or.accumulate(np.flip(inside, axis=-1), axis=-1), axis=-1)
    above = np.concatenate([above[..., 1:], np.zeros_like(above[..., :1])], axis=-1)
    mask = ~inside & above & (z > params.z_min)
    return float(np.count_nonzero(mask) * field0.grid.cell_volume)
