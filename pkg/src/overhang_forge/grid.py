"""Regular Cartesian grids and the scalar fields sampled on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Node-centred regular grid in 2D or 3D.

    Node ``(i, j[, k])`` sits at ``origin + index * spacing``.  Arrays sampled
    on the grid use ``indexing="ij"`` so axis 0 is x and the last axis is the
    vertical one (y in 2D, z in 3D).
    """

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "spacing", tuple(float(v) for v in self.spacing))
        object.__setattr__(self, "counts", tuple(int(v) for v in self.counts))
        if len(self.counts) not in (2, 3):
            raise ValueError(f"grid must be 2D or 3D, got {len(self.counts)} axes")
        if not len(self.origin) == len(self.spacing) == len(self.counts):
            raise ValueError("origin, spacing and counts must have the same length")
        if any(not np.isfinite(s) or s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be strictly positive, got {self.spacing}")
        if any(n < 3 for n in self.counts):
            raise ValueError(f"every axis needs at least 3 nodes, got {self.counts}")

    @classmethod
    def from_box(cls, lo: Sequence[float], hi: Sequence[float], counts: Sequence[int]) -> "GridSpec":
        """Grid whose first and last nodes lie on the faces of the box ``[lo, hi]``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        counts = tuple(int(n) for n in counts)
        if len(counts) != lo.size or lo.size != hi.size:
            raise ValueError("box corners and counts must have the same dimension")
        if np.any(hi <= lo):
            raise ValueError(f"box must have hi > lo on every axis, got lo={lo}, hi={hi}")
        if any(n < 3 for n in counts):
            raise ValueError(f"every axis needs at least 3 nodes, got {counts}")
        spacing = (hi - lo) / (np.asarray(counts) - 1)
        return cls(tuple(lo), tuple(spacing), counts)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + s * (n - 1) for o, s, n in zip(self.origin, self.spacing, self.counts))

    def axes(self) -> list[np.ndarray]:
        return [o + s * np.arange(n) for o, s, n in zip(self.origin, self.spacing, self.counts)]

    def vertical(self) -> np.ndarray:
        """Node heights along the last axis."""
        return self.axes()[-1]

    def node_position(self, index: Sequence[int]) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(index) * np.asarray(self.spacing)

    def positions(self) -> np.ndarray:
        """All node positions, shape ``counts + (dim,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "spacing": list(self.spacing), "counts": list(self.counts)}


@dataclass(frozen=True)
class ScalarField:
    """Level-set values sampled at the nodes of ``grid``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.counts:
            if values.size != self.grid.size:
                raise ValueError(
                    f"field has {values.size} values, grid {self.grid.counts} needs {self.grid.size}"
                )
            values = values.reshape(self.grid.counts)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def has_surface(self) -> bool:
        inside = self.values < 0
        return bool(inside.any() and not inside.all())


def make_field(grid: GridSpec, init: Callable[[np.ndarray], np.ndarray | float]) -> ScalarField:
    """Sample ``init`` at every node of ``grid``.

    ``init`` receives the node positions as an array of shape ``(..., dim)``
    and must return values broadcastable to the grid shape.
    """
    pts = grid.positions()
    values = np.broadcast_to(np.asarray(init(pts), dtype=np.float64), grid.counts).copy()
    bad = ~np.isfinite(values)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(
            f"init produced non-finite value {values[idx]} at node {idx} "
            f"(position {grid.node_position(idx).tolist()})"
        )
    return ScalarField(grid, values)
