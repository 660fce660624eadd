"""Finite-difference operators on level-set fields.

Field-wide versions return arrays shaped like the grid; the per-node
functions take a multi-index and evaluate the same stencils locally.  The
``*_at`` helpers evaluate at a batch of node indices and are used for surface
sampling, where only the nodes next to the zero level set matter.
"""

from __future__ import annotations

from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .grid import ScalarField

GRADIENT_FLOOR = 1e-6


def _offset(dim: int, axis: int, step: int) -> tuple[int, ...]:
    off = [0] * dim
    off[axis] = step
    return tuple(off)


def _curvature_from(get: Callable[[tuple[int, ...]], np.ndarray], spacing: Sequence[float]) -> np.ndarray:
    """div(grad u / |grad u|) from a value accessor ``get(offset)``."""
    dim = len(spacing)
    zero = (0,) * dim
    c = get(zero)
    first = []
    second = []
    for a, h in enumerate(spacing):
        up = get(_offset(dim, a, 1))
        dn = get(_offset(dim, a, -1))
        first.append((up - dn) / (2.0 * h))
        second.append((up - 2.0 * c + dn) / (h * h))
    g2 = sum(d * d for d in first)
    num = sum(second[a] * (g2 - first[a] * first[a]) for a in range(dim))
    for a, b in combinations(range(dim), 2):
        pp = [0] * dim
        pp[a], pp[b] = 1, 1
        pm = [0] * dim
        pm[a], pm[b] = 1, -1
        mp = [0] * dim
        mp[a], mp[b] = -1, 1
        mm = [0] * dim
        mm[a], mm[b] = -1, -1
        cross = (get(tuple(pp)) - get(tuple(pm)) - get(tuple(mp)) + get(tuple(mm))) / (
            4.0 * spacing[a] * spacing[b]
        )
        num = num - 2.0 * first[a] * first[b] * cross
    gnorm = np.sqrt(g2)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = num / (gnorm * gnorm * gnorm)
    return np.where(gnorm < GRADIENT_FLOOR, 0.0, kappa)


# ---------------------------------------------------------------- field-wide


def central_gradient(field: ScalarField) -> np.ndarray:
    """Gradient with shape ``(dim,) + counts``.

    Second-order central differences inside, first-order one-sided on the
    faces of the grid.
    """
    grads = np.gradient(field.values, *field.grid.spacing, edge_order=1)
    if field.grid.dim == 1:
        grads = [grads]
    return np.stack(grads)


def upwind_gradient_magnitude(field: ScalarField, outward: bool = True) -> np.ndarray:
    """Godunov approximation of ``|grad u|`` for motion along the normal.

    For outward motion (non-negative speed) each axis contributes
    ``max(D-, 0)**2 + min(D+, 0)**2``.  Differences that would reach past a
    grid face are taken as zero.
    """
    u = field.values
    total = np.zeros_like(u)
    for a, h in enumerate(field.grid.spacing):
        d = np.diff(u, axis=a) / h
        pad_lo = [(0, 0)] * u.ndim
        pad_hi = [(0, 0)] * u.ndim
        pad_lo[a] = (1, 0)
        pad_hi[a] = (0, 1)
        dminus = np.pad(d, pad_lo)
        dplus = np.pad(d, pad_hi)
        if outward:
            total += np.maximum(dminus, 0.0) ** 2 + np.minimum(dplus, 0.0) ** 2
        else:
            total += np.minimum(dminus, 0.0) ** 2 + np.maximum(dplus, 0.0) ** 2
    return np.sqrt(total)


def curvature(field: ScalarField) -> np.ndarray:
    """Mean curvature (sum of principal curvatures) at every node.

    Nodes on the grid faces and nodes with ``|grad u|`` below the gradient
    floor get 0.
    """
    u = field.values
    counts = field.grid.counts
    dim = field.grid.dim

    def get(off):
        return u[tuple(slice(1 + o, n - 1 + o) for o, n in zip(off, counts))]

    out = np.zeros_like(u)
    out[(slice(1, -1),) * dim] = _curvature_from(get, field.grid.spacing)
    return out


# ------------------------------------------------------------ batch of nodes


def _as_index_array(idx, dim: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx.reshape(1, dim)
    return idx


def gradient_at(field: ScalarField, idx: np.ndarray) -> np.ndarray:
    """Central gradient at node indices ``idx`` of shape ``(m, dim)``; returns ``(m, dim)``."""
    u = field.values
    counts = np.asarray(field.grid.counts)
    idx = _as_index_array(idx, field.grid.dim)
    out = np.empty(idx.shape, dtype=np.float64)
    for a, h in enumerate(field.grid.spacing):
        lo = np.maximum(idx[:, a] - 1, 0)
        hi = np.minimum(idx[:, a] + 1, counts[a] - 1)
        ilo = idx.copy()
        ilo[:, a] = lo
        ihi = idx.copy()
        ihi[:, a] = hi
        out[:, a] = (u[tuple(ihi.T)] - u[tuple(ilo.T)]) / ((hi - lo) * h)
    return out


def curvature_at(field: ScalarField, idx: np.ndarray) -> np.ndarray:
    """Mean curvature at node indices ``idx``; 0 on grid faces."""
    u = field.values
    counts = np.asarray(field.grid.counts)
    idx = _as_index_array(idx, field.grid.dim)
    interior = np.all((idx > 0) & (idx < counts - 1), axis=1)
    safe = np.clip(idx, 1, counts - 2)

    def get(off):
        return u[tuple((safe + np.asarray(off)).T)]

    kappa = _curvature_from(get, field.grid.spacing)
    return np.where(interior, kappa, 0.0)


# ------------------------------------------------------------- single nodes


def gradient_central(field: ScalarField, node: Sequence[int]) -> np.ndarray:
    return gradient_at(field, np.asarray(node))[0]


def gradient_upwind_magnitude(field: ScalarField, node: Sequence[int], speed_sign: float = 1.0) -> float:
    u = field.values
    node = tuple(int(i) for i in node)
    total = 0.0
    for a, h in enumerate(field.grid.spacing):
        n = field.grid.counts[a]
        c = u[node]
        dminus = dplus = 0.0
        if node[a] > 0:
            lo = list(node)
            lo[a] -= 1
            dminus = (c - u[tuple(lo)]) / h
        if node[a] < n - 1:
            hi = list(node)
            hi[a] += 1
            dplus = (u[tuple(hi)] - c) / h
        if speed_sign >= 0:
            total += max(dminus, 0.0) ** 2 + min(dplus, 0.0) ** 2
        else:
            total += min(dminus, 0.0) ** 2 + max(dplus, 0.0) ** 2
    return float(np.sqrt(total))


def mean_curvature(field: ScalarField, node: Sequence[int]) -> float:
    return float(curvature_at(field, np.asarray(node))[0])
