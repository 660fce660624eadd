"""Analytic signed distance functions for test shapes.

Every function returned here maps a point array of shape ``(..., dim)`` to
values of shape ``(...)``: negative inside, zero on the boundary, positive
outside.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

SDF = Callable[[np.ndarray], np.ndarray]


def sdf_sphere(center: Sequence[float], radius: float) -> SDF:
    """Sphere (3D) or circle (2D)."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    c = np.asarray(center, dtype=float)

    def f(p):
        p = np.asarray(p, dtype=float)
        return np.linalg.norm(p - c, axis=-1) - radius

    return f


def sdf_box(lo: Sequence[float], hi: Sequence[float]) -> SDF:
    """Axis-aligned box, exact inside and outside."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValueError(f"box needs min < max componentwise, got {lo} and {hi}")
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)

    def f(p):
        q = np.abs(np.asarray(p, dtype=float) - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    return f


def sdf_union(*parts: SDF) -> SDF:
    """Pointwise minimum: sign-correct, exact only outside the union."""
    if not parts:
        raise ValueError("union of nothing")

    def f(p):
        out = parts[0](p)
        for g in parts[1:]:
            out = np.minimum(out, g(p))
        return out

    return f


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and 0 not in (d1, d2, d3, d4):
        return True

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    return ((d1 == 0 and on_segment(q1, q2, p1)) or (d2 == 0 and on_segment(q1, q2, p2))
            or (d3 == 0 and on_segment(p1, p2, q1)) or (d4 == 0 and on_segment(p1, p2, q2)))


def validate_polygon(polygon: Sequence[Sequence[float]]) -> np.ndarray:
    """Return the polygon as an ``(n, 2)`` array without the closing vertex.

    Raises ``ValueError`` for fewer than 3 distinct vertices or a
    self-intersecting boundary.
    """
    pts = np.asarray(polygon, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("polygon must be a sequence of 2D points")
    if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(np.unique(pts, axis=0)) < 3 or len(pts) < 3:
        raise ValueError("polygon needs at least 3 distinct vertices")
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_intersect(a, b, pts[j], pts[(j + 1) % n]):
                raise ValueError(f"polygon is self-intersecting (edges {i} and {j})")
    area2 = np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
    if abs(area2) < 1e-14:
        raise ValueError("polygon has zero area")
    return pts


def sdf_2d_profile(polygon: Sequence[Sequence[float]]) -> SDF:
    """Signed distance to a simple closed polygon (even-odd inside test)."""
    pts = validate_polygon(polygon)
    a = pts
    b = np.roll(pts, -1, axis=0)
    ab = b - a
    ab_len2 = np.einsum("ij,ij->i", ab, ab)

    def f(p):
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, 2)
        dist2 = np.full(len(flat), np.inf)
        inside = np.zeros(len(flat), dtype=bool)
        for k in range(len(a)):
            ap = flat - a[k]
            t = np.clip(ap @ ab[k] / ab_len2[k], 0.0, 1.0)
            d = ap - t[:, None] * ab[k]
            dist2 = np.minimum(dist2, np.einsum("ij,ij->i", d, d))
            ya, yb = a[k, 1], b[k, 1]
            straddles = (ya > flat[:, 1]) != (yb > flat[:, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                x_cross = a[k, 0] + (flat[:, 1] - ya) * ab[k, 0] / (yb - ya)
            inside ^= straddles & (flat[:, 0] < x_cross)
        d = np.sqrt(dist2)
        return np.where(inside, -d, d).reshape(p.shape[:-1])

    return f


def sdf_plane_z(height: float) -> SDF:
    """Half-space below ``z = height`` (last coordinate), handy in tests."""

    def f(p):
        return np.asarray(p, dtype=float)[..., -1] - height

    return f
