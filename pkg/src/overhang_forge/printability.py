"""Overhang classification and the outward normal speed that removes overhangs.

Gravity points along the negative vertical axis.  The overhang angle of a
surface point is the angle between gravity and the outward normal, so 0 means
a face looking straight down.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .grid import ScalarField
from .operators import GRADIENT_FLOOR, curvature_at, gradient_at
from .reinit import NoSurfaceError


class Label(str, enum.Enum):
    UNPRINTABLE = "Unprintable"
    MODIFIABLE = "Modifiable"
    SAFE = "Safe"


@dataclass(frozen=True)
class SpeedParams:
    """Model parameters of the overhang-fixing speed.

    ``A`` weights the overhang term (scaled by depth below ``z_max``), ``B`` the
    concave-curvature term.  ``z_max`` may be left as ``None`` and filled from
    the initial surface with :meth:`with_top_from`.
    """

    A: float
    B: float
    alpha: float = math.pi / 4
    z_min: float = 0.0
    z_max: Optional[float] = None
    eps_n3: float = 1e-3
    eps_print: float = 1e-2

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi / 2:
            raise ValueError(f"alpha must lie in (0, pi/2), got {self.alpha}")
        if self.A < 0 or self.B < 0:
            raise ValueError(f"A and B must be non-negative, got A={self.A}, B={self.B}")
        if self.A == 0 and self.B == 0:
            raise ValueError("A and B cannot both be zero")
        if self.eps_n3 < 0 or self.eps_print < 0:
            raise ValueError("tolerances must be non-negative")
        if self.z_max is not None and not self.z_min < self.z_max:
            raise ValueError(f"need z_min < z_max, got {self.z_min} and {self.z_max}")

    def with_top_from(self, field: ScalarField) -> "SpeedParams":
        return replace(self, z_max=surface_top(field))

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "alpha_rad": self.alpha,
            "alpha_deg": math.degrees(self.alpha),
            "z_min": self.z_min,
            "z_max": self.z_max,
            "eps_n3": self.eps_n3,
            "eps_print": self.eps_print,
        }


@dataclass(frozen=True)
class SurfaceSample:
    position: np.ndarray
    normal: np.ndarray
    theta: float
    curvature: float
    label: Label


def gravity(dim: int) -> np.ndarray:
    g = np.zeros(dim)
    g[-1] = -1.0
    return g


def theta_of_normal(normal) -> float:
    n = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("overhang angle of a zero-length normal is undefined")
    cos_t = -n[-1] / norm
    return float(np.arccos(np.clip(cos_t, -1.0, 1.0)))


def classify(theta: float, alpha: float) -> Label:
    if theta < alpha:
        return Label.UNPRINTABLE
    if theta >= math.pi / 2:
        return Label.SAFE
    return Label.MODIFIABLE


def v1(theta, alpha):
    """Overhang term ``(cos theta - cos alpha)+``."""
    return np.maximum(np.cos(theta) - math.cos(alpha), 0.0)


def v2(kappa):
    """Concave-curvature term ``max(-kappa, 0)``."""
    return np.maximum(-np.asarray(kappa, dtype=float), 0.0)


def speed(position, normal, kappa: float, params: SpeedParams) -> float:
    """Normal speed at a single surface point."""
    if params.z_max is None:
        raise ValueError("params.z_max is unset; call with_top_from() first")
    position = np.asarray(position, dtype=float)
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    z = position[-1]
    if not (n[-1] < -params.eps_n3 and z > params.z_min):
        return 0.0
    theta = theta_of_normal(n)
    depth = max(params.z_max - z, 0.0)
    return float(params.A * depth * v1(theta, params.alpha) + params.B * v2(kappa))


# ------------------------------------------------------------ surface sampling


@dataclass
class SurfaceSamples:
    """Zero-crossing samples of a field, one per grid edge with a sign change."""

    positions: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    theta: np.ndarray

    def __len__(self):
        return len(self.positions)

    def labels(self, alpha: float) -> list[Label]:
        return [classify(t, alpha) for t in self.theta]

    def to_list(self, alpha: float) -> list[SurfaceSample]:
        return [
            SurfaceSample(p, n, float(t), float(k), classify(t, alpha))
            for p, n, t, k in zip(self.positions, self.normals, self.theta, self.curvature)
        ]


def crossing_edges(field: ScalarField):
    """Yield ``(axis, lower_node_indices, fraction)`` for every sign-changing edge."""
    u = field.values
    inside = u < 0
    for a in range(field.grid.dim):
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        cross = inside[tuple(lo)] != inside[tuple(hi)]
        idx = np.argwhere(cross)
        if len(idx) == 0:
            continue
        nxt = idx.copy()
        nxt[:, a] += 1
        u0 = u[tuple(idx.T)]
        u1 = u[tuple(nxt.T)]
        yield a, idx, u0 / (u0 - u1)


def sample_surface(field: ScalarField, with_curvature: bool = True) -> SurfaceSamples:
    """Linearly interpolated zero crossings with interpolated normals."""
    grid = field.grid
    origin = np.asarray(grid.origin)
    spacing = np.asarray(grid.spacing)
    pos, nrm, kap = [], [], []
    for a, idx, t in crossing_edges(field):
        nxt = idx.copy()
        nxt[:, a] += 1
        p = origin + idx * spacing
        p[:, a] += t * spacing[a]
        g = (1 - t)[:, None] * gradient_at(field, idx) + t[:, None] * gradient_at(field, nxt)
        pos.append(p)
        nrm.append(g)
        if with_curvature:
            kap.append((1 - t) * curvature_at(field, idx) + t * curvature_at(field, nxt))
    if not pos:
        raise NoSurfaceError("field has no zero crossing")
    positions = np.concatenate(pos)
    grads = np.concatenate(nrm)
    gnorm = np.linalg.norm(grads, axis=1)
    normals = grads / np.maximum(gnorm, GRADIENT_FLOOR)[:, None]
    theta = np.arccos(np.clip(-normals[:, -1], -1.0, 1.0))
    kappa = np.concatenate(kap) if with_curvature else np.zeros(len(positions))
    return SurfaceSamples(positions, normals, kappa, theta)


def violations(samples: SurfaceSamples, params: SpeedParams, plate_band: float) -> np.ndarray:
    """Per-sample ``(cos theta - cos alpha)+`` on downward faces above the plate band."""
    z = samples.positions[:, -1]
    counted = (samples.normals[:, -1] < -params.eps_n3) & (z > params.z_min + plate_band)
    return np.where(counted, v1(samples.theta, params.alpha), 0.0)


def max_violation(field: ScalarField, params: SpeedParams) -> float:
    samples = sample_surface(field, with_curvature=False)
    viol = violations(samples, params, field.grid.spacing[-1])
    return float(viol.max()) if len(viol) else 0.0


def surface_printable(field: ScalarField, params: SpeedParams) -> tuple[bool, float, list[SurfaceSample]]:
    """Check every zero-crossing sample of ``field`` for printability.

    Returns ``(printable, max_violation, samples)``.  Samples within one cell of
    the build plate are not counted since they rest on it.
    """
    samples = sample_surface(field)
    viol = violations(samples, params, field.grid.spacing[-1])
    worst = float(viol.max()) if len(viol) else 0.0
    return worst <= params.eps_print, worst, samples.to_list(params.alpha)


def surface_top(field: ScalarField) -> float:
    """Highest zero-crossing height of the field."""
    top = -np.inf
    spacing = field.grid.spacing
    origin = field.grid.origin
    dim = field.grid.dim
    for a, idx, t in crossing_edges(field):
        z = origin[-1] + idx[:, -1] * spacing[-1]
        if a == dim - 1:
            z = z + t * spacing[-1]
        top = max(top, float(z.max()))
    if not np.isfinite(top):
        raise NoSurfaceError("field has no zero crossing")
    return top
