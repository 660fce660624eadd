"""Bundled test objects and the grid/parameter sets they are run with.

Coordinates of the procedural shapes:

* ``sphere``: unit sphere at the origin, build plate at ``z = -1`` (touching
  the south pole).
* ``cross``: vertical post ``[-0.25, 0.25]^2 x [-1.5, 1.5]`` standing on the
  plate at ``z = -1.5``, crossed by two horizontal bars of section 0.5 at
  ``z in [0, 0.5]`` reaching ``+-1.5`` along x and y.
* ``dog-like``: box torso on four legs (plate at ``z = -1.2``), neck, head,
  tail and a snout whose underside sits ``DOG_SNOUT_GAP`` above the lower jaw.
* ``two-overhang-2d``: polygon below, a stem on the plate ``y = 0.5`` with a
  lower arm hanging left and a higher arm hanging right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .grid import GridSpec, ScalarField, make_field
from .reinit import reinitialize
from .shapes import sdf_2d_profile, sdf_box, sdf_sphere, sdf_union

TWO_OVERHANG_PROFILE = [
    (2.5, 0.5), (3.5, 0.5), (3.5, 6.5), (5.2, 6.5), (5.2, 8.0),
    (2.5, 8.0), (2.5, 5.0), (0.8, 5.0), (0.8, 4.0), (2.5, 4.0),
]

# 1.5 cells of the 100^3 grid on [-2, 2]^3
DOG_SNOUT_GAP = 1.5 * 4.0 / 99


def sphere_sdf():
    return sdf_sphere((0.0, 0.0, 0.0), 1.0)


def cross_sdf():
    return sdf_union(
        sdf_box((-0.25, -0.25, -1.5), (0.25, 0.25, 1.5)),
        sdf_box((-1.5, -0.25, 0.0), (1.5, 0.25, 0.5)),
        sdf_box((-0.25, -1.5, 0.0), (0.25, 1.5, 0.5)),
    )


def dog_sdf(gap: float = DOG_SNOUT_GAP):
    plate = -1.2
    legs = [
        sdf_box((x0, y0, plate), (x0 + 0.2, y0 + 0.2, -0.25))
        for x0 in (-0.95, 0.35)
        for y0 in (-0.3, 0.1)
    ]
    jaw_top = 0.55
    return sdf_union(
        sdf_box((-1.0, -0.3, -0.35), (0.6, 0.3, 0.25)),  # torso
        *legs,
        sdf_box((0.35, -0.15, 0.1), (0.7, 0.15, 0.7)),  # neck
        sdf_box((0.45, -0.22, 0.45), (1.0, 0.22, 1.0)),  # head
        sdf_box((1.0, -0.14, jaw_top + gap), (1.5, 0.14, 0.85)),  # snout
        sdf_box((1.0, -0.12, 0.35), (1.35, 0.12, jaw_top)),  # lower jaw
        sdf_box((0.5, -0.2, 1.0), (0.62, -0.08, 1.25)),  # ears
        sdf_box((0.5, 0.08, 1.0), (0.62, 0.2, 1.25)),
        sdf_box((-1.55, -0.06, 0.05), (-1.0, 0.06, 0.17)),  # tail
    )


@dataclass(frozen=True)
class Case:
    name: str
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]
    A: float
    B: float
    z_min: float
    alpha: float = math.pi / 4

    def grid(self, counts: tuple[int, ...] | None = None) -> GridSpec:
        return GridSpec.from_box(self.lo, self.hi, counts or self.counts)

    def field(self, grid: GridSpec | None = None) -> ScalarField:
        grid = grid or self.grid()
        f = make_field(grid, SHAPES[self.name]())
        # pointwise-min unions are only distance-like outside
        return reinitialize(f) if self.name in ("cross", "dog-like", "two-overhang-2d") else f


SHAPES = {
    "sphere": sphere_sdf,
    "cross": cross_sdf,
    "dog-like": dog_sdf,
    "two-overhang-2d": lambda: sdf_2d_profile(TWO_OVERHANG_PROFILE),
}

CASES = {
    "sphere": Case("sphere", (-2.0,) * 3, (2.0,) * 3, (100,) * 3, A=0.7, B=0.3, z_min=-1.0),
    "cross": Case("cross", (-2.0,) * 3, (2.0,) * 3, (100,) * 3, A=1.5, B=0.5, z_min=-1.5),
    "dog-like": Case("dog-like", (-2.0,) * 3, (2.0,) * 3, (100,) * 3, A=1.5, B=0.5, z_min=-1.2),
    "two-overhang-2d": Case("two-overhang-2d", (0.0, 0.0), (6.0, 10.0), (120, 200), A=6.0, B=0.4, z_min=0.5),
}

# names accepted by ``reproduce``
REPRODUCE_CASES = {"sphere": "sphere", "cross": "cross", "dog": "dog-like", "2d": "two-overhang-2d"}
