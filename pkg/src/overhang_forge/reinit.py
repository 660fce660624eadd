"""Reinitialization of a level-set field to a signed distance function.

Nodes touching the zero level set are anchored (their value is rescaled by the
local gradient magnitude) and everything else is recomputed by fast sweeping
of ``|grad u| = 1`` outward from the anchors.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from .grid import ScalarField
from .operators import GRADIENT_FLOOR, central_gradient


class NoSurfaceError(ValueError):
    """The field has no zero level set (it is uniformly one sign)."""


@nb.njit(cache=True)
def _solve_local(a, h, ndim_used):
    # a, h: candidate neighbour values and spacings, already sorted by a
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    u = np.inf
    for k in range(ndim_used):
        w = 1.0 / (h[k] * h[k])
        s0 += w
        s1 += a[k] * w
        s2 += a[k] * a[k] * w
        disc = s1 * s1 - s0 * (s2 - 1.0)
        if disc < 0.0:
            break
        u = (s1 + np.sqrt(disc)) / s0
        if k + 1 >= ndim_used or u <= a[k + 1]:
            break
    return u


@nb.njit(cache=True)
def _sweep(dist, fixed, hx, hy, hz, max_iter, tol, cap=np.inf):
    nx, ny, nz = dist.shape
    a = np.empty(3)
    h = np.empty(3)
    order_a = np.empty(3)
    order_h = np.empty(3)
    for _ in range(max_iter):
        change = 0.0
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    if nz == 1 and sz == -1:
                        continue
                    for ii in range(nx):
                        i = ii if sx == 1 else nx - 1 - ii
                        for jj in range(ny):
                            j = jj if sy == 1 else ny - 1 - jj
                            for kk in range(nz):
                                k = kk if sz == 1 else nz - 1 - kk
                                if fixed[i, j, k]:
                                    continue
                                ax = np.inf
                                if i > 0:
                                    ax = dist[i - 1, j, k]
                                if i < nx - 1 and dist[i + 1, j, k] < ax:
                                    ax = dist[i + 1, j, k]
                                ay = np.inf
                                if j > 0:
                                    ay = dist[i, j - 1, k]
                                if j < ny - 1 and dist[i, j + 1, k] < ay:
                                    ay = dist[i, j + 1, k]
                                az = np.inf
                                if k > 0:
                                    az = dist[i, j, k - 1]
                                if k < nz - 1 and dist[i, j, k + 1] < az:
                                    az = dist[i, j, k + 1]
                                if ax >= cap and ay >= cap and az >= cap:
                                    continue
                                a[0] = ax
                                a[1] = ay
                                a[2] = az
                                h[0] = hx
                                h[1] = hy
                                h[2] = hz
                                # insertion sort by candidate value
                                for p in range(3):
                                    order_a[p] = a[p]
                                    order_h[p] = h[p]
                                for p in range(1, 3):
                                    q = p
                                    while q > 0 and order_a[q - 1] > order_a[q]:
                                        ta = order_a[q - 1]
                                        order_a[q - 1] = order_a[q]
                                        order_a[q] = ta
                                        th = order_h[q - 1]
                                        order_h[q - 1] = order_h[q]
                                        order_h[q] = th
                                        q -= 1
                                used = 0
                                for p in range(3):
                                    if order_a[p] < np.inf:
                                        used += 1
                                if used == 0:
                                    continue
                                cand = _solve_local(order_a, order_h, used)
                                old = dist[i, j, k]
                                if cand < old:
                                    dist[i, j, k] = cand
                                    if old == np.inf:
                                        change = np.inf
                                    elif old - cand > change:
                                        change = old - cand
        if change <= tol:
            break
    return dist


def interface_anchors(field: ScalarField, renormalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Mask of nodes adjacent to a sign change and their distance estimates.

    With ``renormalize=False`` the anchors keep ``|u|`` unchanged, which leaves
    every zero crossing exactly where it was.
    """
    u = field.values
    inside = u < 0
    anchor = np.zeros(u.shape, dtype=bool)
    axis_dist = np.full(u.shape, np.inf)
    for a, h in enumerate(field.grid.spacing):
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        cross = inside[lo] != inside[hi]
        anchor[lo] |= cross
        anchor[hi] |= cross
        ulo, uhi = u[lo], u[hi]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(cross, ulo / (ulo - uhi), np.nan)
        d_lo = np.where(cross, frac * h, np.inf)
        d_hi = np.where(cross, (1.0 - frac) * h, np.inf)
        axis_dist[lo] = np.minimum(axis_dist[lo], d_lo)
        axis_dist[hi] = np.minimum(axis_dist[hi], d_hi)
    if not renormalize:
        return anchor, np.where(anchor, np.abs(u), np.inf)
    grad = central_gradient(field)
    gnorm = np.sqrt(np.sum(grad * grad, axis=0))
    est = np.abs(u) / np.maximum(gnorm, GRADIENT_FLOOR)
    est = np.minimum(est, axis_dist)
    return anchor, np.where(anchor, est, np.inf)


def reinitialize(field: ScalarField, band_width: float = np.inf, max_iter: int = 8,
                 renormalize_anchors: bool = True) -> ScalarField:
    """Signed distance field with the same zero level set as ``field``.

    Values beyond ``band_width`` are clipped to ``+-band_width``.  The sign of
    every node is preserved.  Anchor nodes next to the interface are divided
    by the local gradient magnitude unless ``renormalize_anchors`` is false.
    """
    u = field.values
    if not field.has_surface():
        raise NoSurfaceError("field has no sign change, nothing to reinitialize")
    anchor, dist = interface_anchors(field, renormalize_anchors)
    spacing = list(field.grid.spacing)
    if field.grid.dim == 2:
        dist3 = dist.reshape(dist.shape + (1,)).copy()
        fixed3 = anchor.reshape(anchor.shape + (1,))
        spacing.append(1.0)
    else:
        dist3 = dist.copy()
        fixed3 = anchor
    tol = 1e-9 * field.grid.h_min
    _sweep(dist3, fixed3, spacing[0], spacing[1], spacing[2], max_iter, tol, band_width)
    dist = dist3.reshape(u.shape)
    if np.isfinite(band_width):
        dist = np.minimum(dist, band_width)
    out = np.where(u < 0, -dist, dist)
    return ScalarField(field.grid, out)
