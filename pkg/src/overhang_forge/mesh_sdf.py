"""Signed distance fields from closed triangle meshes.

The magnitude is the exact distance to the nearest triangle (through the BVH)
inside a band around the surface; farther nodes are filled by fast sweeping.
The sign comes from ray parity along the three grid axes, with a vote over
random rays wherever the axis rays graze an edge or disagree.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from .bvh import TriangleBVH
from .grid import GridSpec, ScalarField
from .mesh import TriangleMesh
from .reinit import _sweep

# fraction of axis rays allowed to see an odd number of crossings
MAX_INCONSISTENCY = 1e-3
EXACT_BAND_CELLS = 6
FALLBACK_RAYS = 7


class WatertightError(ValueError):
    """Ray parity shows the mesh does not enclose a volume."""


@nb.njit(cache=True)
def _project_hit(tri, px, py, tol):
    # 0: miss, 1: clean hit, 2: grazing (on an edge or vertex in projection)
    ax, ay = tri[0, 0], tri[0, 1]
    bx, by = tri[1, 0], tri[1, 1]
    cx, cy = tri[2, 0], tri[2, 1]
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if abs(area) < 1e-300:
        return 0, 0.0
    w0 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
    w1 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
    w2 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if area < 0:
        w0, w1, w2, area = -w0, -w1, -w2, -area
    lo = min(w0, min(w1, w2))
    if lo < -tol * area:
        return 0, 0.0
    z = (w0 * tri[0, 2] + w1 * tri[1, 2] + w2 * tri[2, 2]) / area
    if lo <= tol * area:
        return 2, z
    return 1, z


@nb.njit(cache=True)
def _column_parity(tris, xs, ys, zs, tol):
    """Inside flags from rays along the last axis, one ray per (x, y) column.

    A grazing hit at height ``g`` only spoils parity on one side of it: nodes
    below every graze count clean hits from below, nodes above every graze
    count them from above.  ``node_clean`` marks nodes with a trustworthy flag.
    """
    nx, ny, nz = len(xs), len(ys), len(zs)
    x0, dx = xs[0], xs[1] - xs[0]
    y0, dy = ys[0], ys[1] - ys[0]
    counts = np.zeros((nx, ny), dtype=np.int64)
    grazing = np.zeros((nx, ny), dtype=np.bool_)
    graze_lo = np.full((nx, ny), np.inf)
    graze_hi = np.full((nx, ny), -np.inf)
    for pass_no in range(2):
        if pass_no == 1:
            offsets = np.zeros(nx * ny + 1, dtype=np.int64)
            for i in range(nx):
                for j in range(ny):
                    offsets[i * ny + j + 1] = offsets[i * ny + j] + counts[i, j]
            hits = np.empty(offsets[-1])
            fill = offsets[:-1].copy()
        for t in range(tris.shape[0]):
            tri = tris[t]
            i0 = max(0, int(np.ceil((min(tri[0, 0], min(tri[1, 0], tri[2, 0])) - x0) / dx)))
            i1 = min(nx - 1, int(np.floor((max(tri[0, 0], max(tri[1, 0], tri[2, 0])) - x0) / dx)))
            j0 = max(0, int(np.ceil((min(tri[0, 1], min(tri[1, 1], tri[2, 1])) - y0) / dy)))
            j1 = min(ny - 1, int(np.floor((max(tri[0, 1], max(tri[1, 1], tri[2, 1])) - y0) / dy)))
            for i in range(i0, i1 + 1):
                for j in range(j0, j1 + 1):
                    kind, z = _project_hit(tri, xs[i], ys[j], tol)
                    if kind == 2 and pass_no == 0:
                        grazing[i, j] = True
                        graze_lo[i, j] = min(graze_lo[i, j], z)
                        graze_hi[i, j] = max(graze_hi[i, j], z)
                    elif kind == 1:
                        if pass_no == 0:
                            counts[i, j] += 1
                        else:
                            hits[fill[i * ny + j]] = z
                            fill[i * ny + j] += 1
    inside = np.zeros((nx, ny, nz), dtype=np.bool_)
    node_clean = np.zeros((nx, ny, nz), dtype=np.bool_)
    margin = tol * (zs[-1] - zs[0])
    for i in range(nx):
        for j in range(ny):
            seg = np.sort(hits[offsets[i * ny + j]:offsets[i * ny + j + 1]])
            below = 0
            for k in range(nz):
                while below < len(seg) and seg[below] < zs[k]:
                    below += 1
                if zs[k] < graze_lo[i, j] - margin:
                    inside[i, j, k] = below % 2 == 1
                    node_clean[i, j, k] = True
                elif zs[k] > graze_hi[i, j] + margin:
                    inside[i, j, k] = (len(seg) - below) % 2 == 1
                    node_clean[i, j, k] = True
    return inside, counts, grazing, node_clean


@nb.njit(cache=True)
def _ray_crossings(origin, direction, tris):
    ox, oy, oz = origin[0], origin[1], origin[2]
    dx, dy, dz = direction[0], direction[1], direction[2]
    n = 0
    for t in range(tris.shape[0]):
        ax, ay, az = tris[t, 0, 0], tris[t, 0, 1], tris[t, 0, 2]
        e1x, e1y, e1z = tris[t, 1, 0] - ax, tris[t, 1, 1] - ay, tris[t, 1, 2] - az
        e2x, e2y, e2z = tris[t, 2, 0] - ax, tris[t, 2, 1] - ay, tris[t, 2, 2] - az
        px, py, pz = dy * e2z - dz * e2y, dz * e2x - dx * e2z, dx * e2y - dy * e2x
        det = e1x * px + e1y * py + e1z * pz
        if abs(det) < 1e-300:
            continue
        sx, sy, sz = ox - ax, oy - ay, oz - az
        u = (sx * px + sy * py + sz * pz) / det
        if u < 0.0 or u > 1.0:
            continue
        qx, qy, qz = sy * e1z - sz * e1y, sz * e1x - sx * e1z, sx * e1y - sy * e1x
        v = (dx * qx + dy * qy + dz * qz) / det
        if v < 0.0 or u + v > 1.0:
            continue
        if (e2x * qx + e2y * qy + e2z * qz) / det > 0.0:
            n += 1
    return n


@nb.njit(cache=True)
def _random_ray_vote(points, directions, tris):
    out = np.zeros(points.shape[0], dtype=np.bool_)
    for p in range(points.shape[0]):
        odd = 0
        for r in range(directions.shape[0]):
            odd += _ray_crossings(points[p], directions[r], tris) % 2
        out[p] = 2 * odd > directions.shape[0]
    return out


def inside_by_parity(mesh: TriangleMesh, grid: GridSpec, seed: int = 0) -> tuple[np.ndarray, dict]:
    """Inside/outside flag per node and a small diagnostics dict.

    Raises :class:`WatertightError` when more than ``MAX_INCONSISTENCY`` of
    the clean axis rays cross the mesh an odd number of times.
    """
    tris = mesh.corners()
    axes = grid.axes()
    votes, clean = [], []
    odd = probes = 0
    for ray_axis in range(3):
        perm = [a for a in range(3) if a != ray_axis] + [ray_axis]
        t = np.ascontiguousarray(tris[:, :, perm])
        inside, counts, grazing, node_clean = _column_parity(t, axes[perm[0]], axes[perm[1]], axes[perm[2]],
                                                             1e-9)
        back = np.argsort(perm)
        ok = ~grazing
        odd += int(np.count_nonzero(counts[ok] % 2))
        probes += int(np.count_nonzero(ok))
        votes.append(inside.transpose(back))
        clean.append(node_clean.transpose(back))
    frac = odd / max(probes, 1)
    if frac > MAX_INCONSISTENCY:
        raise WatertightError(
            f"{odd} of {probes} axis rays ({frac:.2%}) cross the mesh an odd number of times; "
            "the mesh is not closed")
    votes = np.stack(votes)
    clean = np.stack(clean)
    n_clean = clean.sum(axis=0)
    n_in = (votes & clean).sum(axis=0)
    unanimous = (n_in == 0) | (n_in == n_clean)
    settled = (n_clean >= 2) & unanimous
    inside = n_in * 2 > n_clean
    todo = np.argwhere(~settled)
    if len(todo):
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(FALLBACK_RAYS, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = grid.positions()[tuple(todo.T)]
        inside[tuple(todo.T)] = _random_ray_vote(np.ascontiguousarray(pts), dirs, tris)
    return inside, {"odd_rays": odd, "axis_rays": probes, "fallback_nodes": len(todo)}


def mesh_to_sdf(mesh: TriangleMesh, grid: GridSpec, band_cells: int = EXACT_BAND_CELLS) -> ScalarField:
    """Signed distance to a closed mesh, negative inside.

    Nodes within ``band_cells`` cells of the surface carry the exact distance;
    the rest of the grid is filled by fast sweeping from that band.
    """
    if grid.dim != 3:
        raise ValueError("mesh_to_sdf needs a 3D grid")
    if mesh.is_empty:
        raise ValueError("mesh has no triangles")
    lo, hi = mesh.bounds()
    if np.any(lo <= np.asarray(grid.origin)) or np.any(hi >= np.asarray(grid.upper)):
        raise ValueError(f"grid {grid.origin}..{grid.upper} does not enclose mesh bounds {lo}..{hi}")
    inside, _ = inside_by_parity(mesh, grid)
    bvh = TriangleBVH(mesh.corners())
    band = band_cells * max(grid.spacing)
    dist = bvh.distance(grid.positions().reshape(-1, 3), max_distance=band).reshape(grid.shape)
    fixed = np.isfinite(dist)
    if not fixed.any():
        dist = bvh.distance(grid.positions().reshape(-1, 3)).reshape(grid.shape)
    elif not fixed.all():
        h = grid.spacing
        _sweep(dist, fixed, h[0], h[1], h[2], 8, 1e-9 * grid.h_min)
    return ScalarField(grid, np.where(inside, -dist, dist))
