"""Explicit upwind time integration of the overhang-fixing level-set motion.

The level set solves ``u_t + v |grad u| = 0`` with the non-negative speed of
:mod:`overhang_forge.printability`, so ``u`` only ever decreases and the
object only grows.  The run stops as soon as every zero-crossing sample is
printable.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable, Optional

import numba as nb
import numpy as np

from .grid import ScalarField
from .operators import GRADIENT_FLOOR, central_gradient, curvature, upwind_gradient_magnitude
from .printability import SpeedParams
from .reinit import reinitialize

log = logging.getLogger(__name__)

SPEED_EPS = 1e-12
NARROW_BAND_CELLS = 6.0
# the front travels under one cell per step, so this outlasts a reinit interval
REINIT_BAND_CELLS = 24.0


class NumericalInstabilityError(RuntimeError):
    """A time step produced a non-finite value."""

    def __init__(self, message: str, node: tuple[int, ...] | None = None):
        super().__init__(message)
        self.node = node


class StopReason(str, enum.Enum):
    PRINTABLE = "Printable"
    MAX_STEPS = "MaxSteps"
    TIME_CAP = "TimeCap"


@dataclass(frozen=True)
class EvolveConfig:
    params: SpeedParams
    cfl: float = 0.5
    max_steps: int = 20000
    t_final_cap: float = np.inf
    reinit_every: int = 20
    snapshot_every: int = 0
    parabolic_safety: float = 0.25
    check_every: int = 1
    narrow_band: bool = False
    # Test hook: replace the overhang speed by this constant everywhere.
    constant_speed: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.reinit_every < 1:
            raise ValueError("reinit_every must be at least 1")
        if self.check_every < 1:
            raise ValueError("check_every must be at least 1")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be non-negative")
        if self.parabolic_safety <= 0:
            raise ValueError("parabolic_safety must be positive")
        if not self.t_final_cap > 0:
            raise ValueError("t_final_cap must be positive")


@dataclass
class EvolutionReport:
    steps_taken: int
    sim_time: float
    stop_reason: StopReason
    max_violation_history: list[float]
    added_volume: float
    wall_time: float
    dt_history: list[float] = dc_field(default_factory=list)

    @property
    def final_violation(self) -> float:
        return self.max_violation_history[-1]

    def to_dict(self) -> dict:
        return {
            "steps_taken": self.steps_taken,
            "sim_time": self.sim_time,
            "stop_reason": self.stop_reason.value,
            "final_max_violation": self.final_violation,
            "added_volume": self.added_volume,
            "wall_time": self.wall_time,
        }


# --------------------------------------------------------------------- kernel


@nb.njit(cache=True)
def _gradient_kernel(u, hx, hy, hz, gx, gy, gz):
    # central inside, one-sided on faces; a 2D field has ny == 1 and gy == 0
    nx, ny, nz = u.shape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if i == 0:
                    gx[i, j, k] = (u[1, j, k] - u[0, j, k]) / hx
                elif i == nx - 1:
                    gx[i, j, k] = (u[i, j, k] - u[i - 1, j, k]) / hx
                else:
                    gx[i, j, k] = (u[i + 1, j, k] - u[i - 1, j, k]) / (2.0 * hx)
                if ny == 1:
                    gy[i, j, k] = 0.0
                elif j == 0:
                    gy[i, j, k] = (u[i, 1, k] - u[i, 0, k]) / hy
                elif j == ny - 1:
                    gy[i, j, k] = (u[i, j, k] - u[i, j - 1, k]) / hy
                else:
                    gy[i, j, k] = (u[i, j + 1, k] - u[i, j - 1, k]) / (2.0 * hy)
                if k == 0:
                    gz[i, j, k] = (u[i, j, 1] - u[i, j, 0]) / hz
                elif k == nz - 1:
                    gz[i, j, k] = (u[i, j, k] - u[i, j, k - 1]) / hz
                else:
                    gz[i, j, k] = (u[i, j, k + 1] - u[i, j, k - 1]) / (2.0 * hz)


@nb.njit(cache=True)
def _violation_kernel(u, gx, gy, gz, z0, hz, cos_alpha, eps_n3, z_floor):
    # max (cos theta - cos alpha)+ over zero crossings on grid edges
    nx, ny, nz = u.shape
    worst = 0.0
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                c = u[i, j, k]
                for axis in range(3):
                    i2, j2, k2 = i, j, k
                    if axis == 0:
                        i2 += 1
                    elif axis == 1:
                        j2 += 1
                    else:
                        k2 += 1
                    if i2 >= nx or j2 >= ny or k2 >= nz:
                        continue
                    d = u[i2, j2, k2]
                    if (c < 0.0) == (d < 0.0):
                        continue
                    t = c / (c - d)
                    z = z0 + (k + t) * hz if axis == 2 else z0 + k * hz
                    if not z > z_floor:
                        continue
                    ex = (1.0 - t) * gx[i, j, k] + t * gx[i2, j2, k2]
                    ey = (1.0 - t) * gy[i, j, k] + t * gy[i2, j2, k2]
                    ez = (1.0 - t) * gz[i, j, k] + t * gz[i2, j2, k2]
                    en = max(np.sqrt(ex * ex + ey * ey + ez * ez), 1e-6)
                    n3 = ez / en
                    if n3 < -eps_n3:
                        v = min(-n3, 1.0) - cos_alpha
                        if v > worst:
                            worst = v
    return worst


def _gradients(u3, hx, hy, hz):
    gx = np.empty_like(u3)
    gy = np.empty_like(u3)
    gz = np.empty_like(u3)
    _gradient_kernel(u3, hx, hy, hz, gx, gy, gz)
    return gx, gy, gz


def fast_max_violation(field: ScalarField, params: SpeedParams) -> float:
    """Same quantity as :func:`printability.max_violation`, fused into one pass."""
    grid = field.grid
    u3, (hx, hy, hz) = _as_3d(np.ascontiguousarray(field.values), grid.spacing)
    gx, gy, gz = _gradients(u3, hx, hy, hz)
    return float(_violation_kernel(u3, gx, gy, gz, grid.origin[-1], hz, math.cos(params.alpha),
                                   params.eps_n3, params.z_min + hz))


@nb.njit(cache=True)
def _edge_speed(u, gx, gy, gz, i, j, k, i2, j2, k2, cos_alpha, eps_n3):
    # v1 at the zero crossing between two nodes, from interpolated gradients
    c = u[i, j, k]
    d = u[i2, j2, k2]
    if (c < 0.0) == (d < 0.0):
        return 0.0
    t = c / (c - d)
    ex = (1.0 - t) * gx[i, j, k] + t * gx[i2, j2, k2]
    ey = (1.0 - t) * gy[i, j, k] + t * gy[i2, j2, k2]
    ez = (1.0 - t) * gz[i, j, k] + t * gz[i2, j2, k2]
    en = np.sqrt(ex * ex + ey * ey + ez * ez)
    if en < 1e-6:
        return 0.0
    n3 = ez / en
    if not n3 < -eps_n3:
        return 0.0
    return max(-n3 - cos_alpha, 0.0)


@nb.njit(cache=True)
def _speed_kernel(u, gx, gy, gz, hx, hy, hz, z0, A, B, cos_alpha, z_min, z_max, eps_n3,
                  kappa_cap, band, adv, curv, grad_up):
    nx, ny, nz = u.shape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                c = u[i, j, k]
                # upwind |grad u| for outward motion
                s = 0.0
                dm = (c - u[i - 1, j, k]) / hx if i > 0 else 0.0
                dp = (u[i + 1, j, k] - c) / hx if i < nx - 1 else 0.0
                s += max(dm, 0.0) ** 2 + min(dp, 0.0) ** 2
                if ny > 1:
                    dm = (c - u[i, j - 1, k]) / hy if j > 0 else 0.0
                    dp = (u[i, j + 1, k] - c) / hy if j < ny - 1 else 0.0
                    s += max(dm, 0.0) ** 2 + min(dp, 0.0) ** 2
                dm = (c - u[i, j, k - 1]) / hz if k > 0 else 0.0
                dp = (u[i, j, k + 1] - c) / hz if k < nz - 1 else 0.0
                s += max(dm, 0.0) ** 2 + min(dp, 0.0) ** 2
                grad_up[i, j, k] = np.sqrt(s)

                adv[i, j, k] = 0.0
                curv[i, j, k] = 0.0
                z = z0 + k * hz
                if z <= z_min or abs(c) > band:
                    continue
                gn = np.sqrt(gx[i, j, k] ** 2 + gy[i, j, k] ** 2 + gz[i, j, k] ** 2)
                n3 = gz[i, j, k] / gn if gn >= 1e-6 else 0.0
                v1 = max(-n3 - cos_alpha, 0.0) if n3 < -eps_n3 else 0.0
                # a node touching the zero set also answers for the crossings on its
                # edges; otherwise a sharp downward ridge between two nodes that each
                # look printable would never move
                if i > 0:
                    v1 = max(v1, _edge_speed(u, gx, gy, gz, i, j, k, i - 1, j, k, cos_alpha, eps_n3))
                if i < nx - 1:
                    v1 = max(v1, _edge_speed(u, gx, gy, gz, i, j, k, i + 1, j, k, cos_alpha, eps_n3))
                if ny > 1 and j > 0:
                    v1 = max(v1, _edge_speed(u, gx, gy, gz, i, j, k, i, j - 1, k, cos_alpha, eps_n3))
                if ny > 1 and j < ny - 1:
                    v1 = max(v1, _edge_speed(u, gx, gy, gz, i, j, k, i, j + 1, k, cos_alpha, eps_n3))
                if k > 0:
                    v1 = max(v1, _edge_speed(u, gx, gy, gz, i, j, k, i, j, k - 1, cos_alpha, eps_n3))
                if k < nz - 1:
                    v1 = max(v1, _edge_speed(u, gx, gy, gz, i, j, k, i, j, k + 1, cos_alpha, eps_n3))
                if v1 > 0.0 and z_max > z:
                    adv[i, j, k] = A * (z_max - z) * v1
                if not n3 < -eps_n3:
                    continue
                interior = 0 < i < nx - 1 and 0 < k < nz - 1 and (ny == 1 or 0 < j < ny - 1)
                if B > 0.0 and interior:
                    # same stencil as operators.curvature, restricted to active axes
                    ux = (u[i + 1, j, k] - u[i - 1, j, k]) / (2.0 * hx)
                    uz = (u[i, j, k + 1] - u[i, j, k - 1]) / (2.0 * hz)
                    uxx = (u[i + 1, j, k] - 2.0 * c + u[i - 1, j, k]) / (hx * hx)
                    uzz = (u[i, j, k + 1] - 2.0 * c + u[i, j, k - 1]) / (hz * hz)
                    uxz = (u[i + 1, j, k + 1] - u[i + 1, j, k - 1] - u[i - 1, j, k + 1]
                           + u[i - 1, j, k - 1]) / (4.0 * hx * hz)
                    if ny > 1:
                        uy = (u[i, j + 1, k] - u[i, j - 1, k]) / (2.0 * hy)
                        uyy = (u[i, j + 1, k] - 2.0 * c + u[i, j - 1, k]) / (hy * hy)
                        uxy = (u[i + 1, j + 1, k] - u[i + 1, j - 1, k] - u[i - 1, j + 1, k]
                               + u[i - 1, j - 1, k]) / (4.0 * hx * hy)
                        uyz = (u[i, j + 1, k + 1] - u[i, j + 1, k - 1] - u[i, j - 1, k + 1]
                               + u[i, j - 1, k - 1]) / (4.0 * hy * hz)
                        g2 = ux * ux + uy * uy + uz * uz
                        num = (uxx * (g2 - ux * ux) + uyy * (g2 - uy * uy) + uzz * (g2 - uz * uz)
                               - 2.0 * ux * uy * uxy - 2.0 * ux * uz * uxz - 2.0 * uy * uz * uyz)
                    else:
                        g2 = ux * ux + uz * uz
                        num = uxx * (g2 - ux * ux) + uzz * (g2 - uz * uz) - 2.0 * ux * uz * uxz
                    gc = np.sqrt(g2)
                    if gc >= 1e-6:
                        kappa = num / (gc * gc * gc)
                        if kappa < -kappa_cap:
                            kappa = -kappa_cap
                        if kappa < 0.0:
                            curv[i, j, k] = -B * kappa


def _as_3d(values: np.ndarray, spacing) -> tuple[np.ndarray, tuple[float, float, float]]:
    if values.ndim == 2:
        return values.reshape(values.shape[0], 1, values.shape[1]), (spacing[0], 1.0, spacing[1])
    return values, tuple(spacing)


def speed_components(field: ScalarField, params: SpeedParams, narrow_band: bool = False):
    """Overhang speed, curvature speed and upwind ``|grad u|`` at every node."""
    grid = field.grid
    u3, (hx, hy, hz) = _as_3d(np.ascontiguousarray(field.values), grid.spacing)
    gx, gy, gz = _gradients(u3, hx, hy, hz)
    adv = np.empty_like(u3)
    curv = np.empty_like(u3)
    gup = np.empty_like(u3)
    band = NARROW_BAND_CELLS * grid.h_min if narrow_band else np.inf
    _speed_kernel(u3, gx, gy, gz, hx, hy, hz, grid.origin[-1], params.A, params.B, math.cos(params.alpha),
                  params.z_min, params.z_max, params.eps_n3, 1.0 / grid.h_min, band, adv, curv, gup)
    shape = field.values.shape
    return adv.reshape(shape), curv.reshape(shape), gup.reshape(shape)


def speed_components_reference(field: ScalarField, params: SpeedParams):
    """Plain numpy version of :func:`speed_components` (no band), for cross-checks."""
    grid = field.grid
    u = field.values
    grad = central_gradient(field)
    gn = np.sqrt(np.sum(grad * grad, axis=0))
    z = np.broadcast_to(grid.vertical(), u.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        n3 = grad[-1] / gn
    cos_a = math.cos(params.alpha)
    moving = (gn >= GRADIENT_FLOOR) & (n3 < -params.eps_n3) & (z > params.z_min)
    v1 = np.where(moving, np.maximum(-n3 - cos_a, 0.0), 0.0)
    # crossing edges lend their interpolated-normal v1 to both end nodes
    for axis in range(u.ndim):
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        a, b = u[lo], u[hi]
        cross = (a < 0) != (b < 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(cross, a / (a - b), 0.0)
            g = (1.0 - t) * grad[(slice(None),) + lo] + t * grad[(slice(None),) + hi]
            en = np.sqrt(np.sum(g * g, axis=0))
            e3 = g[-1] / en
        ev = np.where(cross & (en >= GRADIENT_FLOOR) & (e3 < -params.eps_n3), np.maximum(-e3 - cos_a, 0.0), 0.0)
        v1[lo] = np.maximum(v1[lo], ev)
        v1[hi] = np.maximum(v1[hi], ev)
    v1 = np.where(z > params.z_min, v1, 0.0)
    adv = params.A * np.maximum(params.z_max - z, 0.0) * v1
    kappa = np.maximum(curvature(field), -1.0 / grid.h_min)
    curv = np.where(moving, params.B * np.maximum(-kappa, 0.0), 0.0)
    return adv, curv, upwind_gradient_magnitude(field)


def time_step(field: ScalarField, config: EvolveConfig, max_adv: float) -> float:
    h = field.grid.h_min
    if config.constant_speed is not None:
        return config.cfl * h / (abs(config.constant_speed) + SPEED_EPS)
    hyperbolic = config.cfl * h / (max_adv + SPEED_EPS)
    parabolic = config.parabolic_safety * h * h / (config.params.B + SPEED_EPS)
    return min(hyperbolic, parabolic)


def step(field: ScalarField, config: EvolveConfig, dt_max: float = np.inf) -> tuple[ScalarField, float, float]:
    """Advance one explicit upwind step; returns ``(new_field, dt, max_speed)``."""
    params = config.params
    if config.constant_speed is not None:
        v = np.full(field.values.shape, float(config.constant_speed))
        gup = upwind_gradient_magnitude(field, outward=config.constant_speed >= 0)
        max_adv = abs(config.constant_speed)
    else:
        if params.z_max is None:
            raise ValueError("params.z_max is unset; call with_top_from() first")
        adv, curv, gup = speed_components(field, params, config.narrow_band)
        max_adv = float(adv.max())
        v = adv + curv
    dt = min(time_step(field, config, max_adv), dt_max)
    new = field.values - dt * v * gup
    if not np.all(np.isfinite(new)):
        node = tuple(int(i) for i in np.argwhere(~np.isfinite(new))[0])
        raise NumericalInstabilityError(
            f"non-finite value at node {node} after step with dt={dt:g}; "
            "check cfl and the gradient floor", node
        )
    return ScalarField(field.grid, new), dt, float(v.max())


def added_volume(field0: ScalarField, field_final: ScalarField) -> float:
    """Volume (area in 2D) of nodes that are inside the final field only."""
    if field0.grid != field_final.grid:
        raise ValueError("fields live on different grids")
    grown = (field_final.values < 0) & (field0.values >= 0)
    return float(np.count_nonzero(grown) * field0.grid.cell_volume)


Observer = Callable[[int, float, ScalarField, float], None]


def run(field0: ScalarField, config: EvolveConfig, observer: Optional[Observer] = None,
        check_monotone: bool = False) -> tuple[ScalarField, EvolutionReport]:
    """Evolve until the surface is printable, ``max_steps`` or ``t_final_cap``.

    ``observer(step, sim_time, field, max_violation)`` is called for the
    initial field and after every step, synchronously; it must not modify the
    field.  ``max_violation`` is the latest checked value.
    """
    start = time.perf_counter()
    if not field0.has_surface():
        from .reinit import NoSurfaceError

        raise NoSurfaceError("initial field has no zero level set")
    params = config.params
    if params.z_max is None and config.constant_speed is None:
        params = params.with_top_from(field0)
        config = replace(config, params=params)
    checking = config.constant_speed is None

    def violation(f):
        return fast_max_violation(f, params) if checking else float("nan")

    above_plate = field0.grid.vertical() > params.z_min
    band = REINIT_BAND_CELLS * field0.grid.h_min
    u = field0
    t = 0.0
    hist = [violation(u)]
    dts: list[float] = []
    if observer is not None:
        observer(0, t, u, hist[-1])
    if checking and hist[-1] <= params.eps_print:
        report = EvolutionReport(0, 0.0, StopReason.PRINTABLE, hist, 0.0, time.perf_counter() - start, dts)
        return u, report

    reason = StopReason.MAX_STEPS
    steps = 0
    checked = True
    for steps in range(1, config.max_steps + 1):
        new, dt, _ = step(u, config, dt_max=config.t_final_cap - t)
        if steps % config.reinit_every == 0 and new.has_surface():
            # anchors stay frozen so the front cannot shift; min keeps u non-increasing
            redone = reinitialize(new, band_width=band, renormalize_anchors=False)
            new = new.with_values(np.where(above_plate, np.minimum(redone.values, new.values), new.values))
        if check_monotone and np.any(new.values > u.values):
            node = tuple(int(i) for i in np.argwhere(new.values > u.values)[0])
            raise AssertionError(f"u increased at node {node} in step {steps}")
        u = new
        t += dt
        dts.append(dt)
        checked = checking and steps % config.check_every == 0
        if checked:
            hist.append(violation(u))
        if observer is not None:
            observer(steps, t, u, hist[-1])
        if checked and hist[-1] <= params.eps_print:
            reason = StopReason.PRINTABLE
            break
        if t >= config.t_final_cap:
            reason = StopReason.TIME_CAP
            break
    if checking and not checked:
        hist.append(violation(u))
    log.info("evolution stopped after %d steps (t=%.4g): %s, max violation %.3g",
             steps, t, reason.value, hist[-1])
    report = EvolutionReport(
        steps_taken=steps,
        sim_time=t,
        stop_reason=reason,
        max_violation_history=hist,
        added_volume=added_volume(field0, u),
        wall_time=time.perf_counter() - start,
        dt_history=dts,
    )
    return u, report
