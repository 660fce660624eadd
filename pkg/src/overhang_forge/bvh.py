"""Bounding volume hierarchy for exact point-to-triangle distance queries."""

from __future__ import annotations

import numba as nb
import numpy as np

LEAF_SIZE = 4


class TriangleBVH:
    """Median-split AABB tree over a triangle soup ``(n, 3, 3)``.

    The tree is built once and is read-only afterwards, so queries from several
    threads are safe.
    """

    def __init__(self, corners: np.ndarray):
        corners = np.ascontiguousarray(corners, dtype=np.float64)
        if corners.ndim != 3 or corners.shape[1:] != (3, 3) or len(corners) == 0:
            raise ValueError("need a non-empty (n, 3, 3) triangle array")
        n = len(corners)
        tmin = corners.min(axis=1)
        tmax = corners.max(axis=1)
        centroids = corners.mean(axis=1)
        order = np.arange(n)
        bmin, bmax, left, right, start, count = [], [], [], [], [], []

        def new_node(lo, hi):
            idx = order[lo:hi]
            bmin.append(tmin[idx].min(axis=0))
            bmax.append(tmax[idx].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(lo)
            count.append(hi - lo)
            return len(bmin) - 1

        stack = [(new_node(0, n), 0, n)]
        while stack:
            node, lo, hi = stack.pop()
            if hi - lo <= LEAF_SIZE:
                continue
            idx = order[lo:hi]
            c = centroids[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            mid = (hi - lo) // 2
            part = np.argpartition(c[:, axis], mid)
            order[lo:hi] = idx[part]
            mid += lo
            a = new_node(lo, mid)
            b = new_node(mid, hi)
            left[node], right[node], count[node] = a, b, 0
            stack.append((a, lo, mid))
            stack.append((b, mid, hi))

        self.corners = corners[order]
        self.order = order
        self.bmin = np.asarray(bmin)
        self.bmax = np.asarray(bmax)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.start = np.asarray(start, dtype=np.int64)
        self.count = np.asarray(count, dtype=np.int64)

    def distance(self, points: np.ndarray, max_distance: float = np.inf) -> np.ndarray:
        """Unsigned distance from each point in ``(m, 3)`` to the nearest triangle.

        Points farther than ``max_distance`` from every triangle get ``inf``.
        """
        pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        out = np.empty(len(pts))
        _query(pts, self.corners, self.bmin, self.bmax, self.left, self.right, self.start, self.count,
               max_distance * max_distance, out)
        return np.sqrt(out)


@nb.njit(cache=True)
def _edge_dist2(px, py, pz, ax, ay, az, bx, by, bz):
    ex, ey, ez = bx - ax, by - ay, bz - az
    ee = ex * ex + ey * ey + ez * ez
    t = 0.0
    if ee > 0.0:
        t = min(max(((px - ax) * ex + (py - ay) * ey + (pz - az) * ez) / ee, 0.0), 1.0)
    dx, dy, dz = px - ax - t * ex, py - ay - t * ey, pz - az - t * ez
    return dx * dx + dy * dy + dz * dz


@nb.njit(cache=True)
def point_triangle_dist2(px, py, pz, tri):
    """Squared distance from a point to a triangle (closest-feature regions)."""
    ax, ay, az = tri[0, 0], tri[0, 1], tri[0, 2]
    bx, by, bz = tri[1, 0], tri[1, 1], tri[1, 2]
    cx, cy, cz = tri[2, 0], tri[2, 1], tri[2, 2]
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        qx, qy, qz = ax, ay, az
    else:
        bpx, bpy, bpz = px - bx, py - by, pz - bz
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        if d3 >= 0.0 and d4 <= d3:
            qx, qy, qz = bx, by, bz
        else:
            vc = d1 * d4 - d3 * d2
            if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                v = d1 / (d1 - d3)
                qx, qy, qz = ax + v * abx, ay + v * aby, az + v * abz
            else:
                cpx, cpy, cpz = px - cx, py - cy, pz - cz
                d5 = abx * cpx + aby * cpy + abz * cpz
                d6 = acx * cpx + acy * cpy + acz * cpz
                if d6 >= 0.0 and d5 <= d6:
                    qx, qy, qz = cx, cy, cz
                else:
                    vb = d5 * d2 - d1 * d6
                    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                        w = d2 / (d2 - d6)
                        qx, qy, qz = ax + w * acx, ay + w * acy, az + w * acz
                    else:
                        va = d3 * d6 - d5 * d4
                        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                            qx, qy, qz = bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)
                        elif va + vb + vc <= 0.0:
                            # zero-area triangle: nearest of its three edges
                            return min(_edge_dist2(px, py, pz, ax, ay, az, bx, by, bz),
                                       _edge_dist2(px, py, pz, bx, by, bz, cx, cy, cz),
                                       _edge_dist2(px, py, pz, cx, cy, cz, ax, ay, az))
                        else:
                            denom = 1.0 / (va + vb + vc)
                            v = vb * denom
                            w = vc * denom
                            qx = ax + abx * v + acx * w
                            qy = ay + aby * v + acy * w
                            qz = az + abz * v + acz * w
    dx, dy, dz = px - qx, py - qy, pz - qz
    return dx * dx + dy * dy + dz * dz


@nb.njit(cache=True)
def _box_dist2(px, py, pz, lo, hi):
    d = 0.0
    if px < lo[0]:
        d += (lo[0] - px) ** 2
    elif px > hi[0]:
        d += (px - hi[0]) ** 2
    if py < lo[1]:
        d += (lo[1] - py) ** 2
    elif py > hi[1]:
        d += (py - hi[1]) ** 2
    if pz < lo[2]:
        d += (lo[2] - pz) ** 2
    elif pz > hi[2]:
        d += (pz - hi[2]) ** 2
    return d


@nb.njit(cache=True)
def _query(pts, tris, bmin, bmax, left, right, start, count, cap2, out):
    stack = np.empty(128, dtype=np.int64)
    for q in range(pts.shape[0]):
        px, py, pz = pts[q, 0], pts[q, 1], pts[q, 2]
        best = cap2
        stack[0] = 0
        top = 1
        found = False
        while top > 0:
            top -= 1
            node = stack[top]
            if _box_dist2(px, py, pz, bmin[node], bmax[node]) >= best:
                continue
            if count[node] > 0:
                for t in range(start[node], start[node] + count[node]):
                    d = point_triangle_dist2(px, py, pz, tris[t])
                    if d < best:
                        best = d
                        found = True
            else:
                a, b = left[node], right[node]
                da = _box_dist2(px, py, pz, bmin[a], bmax[a])
                db = _box_dist2(px, py, pz, bmin[b], bmax[b])
                # nearer child is popped first
                if da < db:
                    stack[top] = b
                    stack[top + 1] = a
                else:
                    stack[top] = a
                    stack[top + 1] = b
                top += 2
        out[q] = best if found else np.inf


def _segment_dist2(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    num = np.einsum("ij,ij->i", p - a, ab)
    den = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.divide(num, den, out=np.zeros_like(num), where=den > 0), 0.0, 1.0)
    d = p - (a + t[:, None] * ab)
    return np.einsum("ij,ij->i", d, d)


def brute_force_distance(points: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Distance to the nearest of all triangles, no index.

    Uses plane projection plus edge distances, a different formulation from
    :func:`point_triangle_dist2`, so the two can check each other.
    """
    corners = np.asarray(corners, dtype=np.float64)
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    n = np.cross(b - a, c - a)
    n2 = np.einsum("ij,ij->i", n, n)
    out = np.empty(len(points))
    for i, p in enumerate(np.asarray(points, dtype=np.float64).reshape(-1, 3)):
        pp = np.broadcast_to(p, a.shape)
        dot = np.einsum("ij,ij->i", pp - a, n)
        s = np.divide(dot, n2, out=np.zeros_like(dot), where=n2 > 0)
        proj = pp - s[:, None] * n
        # inside test via signed sub-triangle areas
        w0 = np.einsum("ij,ij->i", np.cross(b - proj, c - proj), n)
        w1 = np.einsum("ij,ij->i", np.cross(c - proj, a - proj), n)
        w2 = np.einsum("ij,ij->i", np.cross(a - proj, b - proj), n)
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0) & (n2 > 0)
        plane = s * s * n2
        edges = np.minimum(np.minimum(_segment_dist2(pp, a, b), _segment_dist2(pp, b, c)),
                           _segment_dist2(pp, c, a))
        out[i] = np.sqrt(np.min(np.where(inside, np.minimum(plane, edges), edges)))
    return out
