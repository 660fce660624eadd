import math

import numpy as np
import pytest

from overhang_forge import evolution
from overhang_forge.evolution import (EvolveConfig, NumericalInstabilityError, StopReason, added_volume,
                                      fast_max_violation, run, speed_components,
                                      speed_components_reference, step)
from overhang_forge.grid import GridSpec, make_field
from overhang_forge.printability import SpeedParams, max_violation
from overhang_forge.shapes import sdf_box, sdf_sphere, sdf_union

from conftest import sphere_field


def _sphere_params(f, **kw):
    base = dict(A=1.0, B=0.3, z_min=-1.5)
    base.update(kw)
    return SpeedParams(**base).with_top_from(f)


def test_zero_speed_step_is_identity():
    # solid below a plane: every normal points up, so v = 0 everywhere
    g = GridSpec.from_box((-1,) * 3, (1,) * 3, (21,) * 3)
    f = make_field(g, lambda q: q[..., 2] - 0.33)
    p = SpeedParams(A=3.0, B=2.0, z_min=-1.0).with_top_from(f)
    new, dt, vmax = step(f, EvolveConfig(params=p))
    assert vmax == 0.0 and dt > 0
    np.testing.assert_array_equal(new.values, f.values)


def test_step_never_increases_u_and_keeps_plate(sphere40):
    p = _sphere_params(sphere40, z_min=-0.5)
    new, _, _ = step(sphere40, EvolveConfig(params=p))
    assert np.all(new.values <= sphere40.values)
    below = sphere40.grid.vertical() <= p.z_min
    np.testing.assert_array_equal(np.broadcast_to(below, new.values.shape) & (new.values != sphere40.values),
                                  False)


def test_step_requires_top():
    f = sphere_field(20)
    with pytest.raises(ValueError):
        step(f, EvolveConfig(params=SpeedParams(A=1, B=0)))


def test_constant_speed_moves_sphere_radius():
    f = sphere_field(81, r=0.7, dim=2)
    cfg = EvolveConfig(params=SpeedParams(A=1, B=0), constant_speed=1.0, t_final_cap=0.3, reinit_every=10)
    out, rep = run(f, cfg)
    assert rep.stop_reason is StopReason.TIME_CAP
    assert rep.sim_time == pytest.approx(0.3)
    area = np.count_nonzero(out.values < 0) * f.grid.cell_volume
    assert math.sqrt(area / math.pi) == pytest.approx(1.0, abs=f.grid.h_min)


def test_kernel_matches_numpy_reference():
    g = GridSpec.from_box((-2,) * 3, (2,) * 3, (36,) * 3)
    f = make_field(g, sdf_union(sdf_sphere((0.2, 0, 0.3), 0.8), sdf_box((-1.2, -0.3, -0.4), (0.5, 0.3, -0.1))))
    p = _sphere_params(f, A=1.3, B=0.4, z_min=-1.2)
    for a, b in zip(speed_components(f, p), speed_components_reference(f, p)):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_kernel_matches_reference_in_2d():
    f = sphere_field(50, r=0.9, dim=2)
    p = _sphere_params(f, z_min=-1.0)
    for a, b in zip(speed_components(f, p), speed_components_reference(f, p)):
        np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("dim", [2, 3])
def test_fast_violation_matches_sample_based(dim):
    f = sphere_field(44, r=1.1, dim=dim, center=(0.1,) * dim)
    p = _sphere_params(f, z_min=-1.7)
    assert fast_max_violation(f, p) == pytest.approx(max_violation(f, p), abs=1e-12)


def test_narrow_band_limits_speed(sphere40):
    p = _sphere_params(sphere40)
    adv, curv, _ = speed_components(sphere40, p, narrow_band=True)
    far = np.abs(sphere40.values) > evolution.NARROW_BAND_CELLS * sphere40.grid.h_min
    assert np.all(adv[far] == 0) and np.all(curv[far] == 0)


def test_curvature_term_fills_downward_notch():
    # inverted L: the arm's underside meets the stem in a concave corner at (1, 1)
    g = GridSpec.from_box((-1, -1), (3, 3), (81, 81))
    f = make_field(g, sdf_union(sdf_box((0, -0.5), (1, 2)), sdf_box((0, 1), (2, 2))))
    p = SpeedParams(A=0.0, B=1.0, z_min=-0.5).with_top_from(f)
    cfg = EvolveConfig(params=p, max_steps=40)
    out, rep = run(f, cfg)
    assert rep.stop_reason is StopReason.MAX_STEPS

    def at(x, y):
        i, j = round((x + 1) / g.spacing[0]), round((y + 1) / g.spacing[1])
        return f.values[i, j], out.values[i, j]

    before, after = at(1.05, 0.95)
    assert after < before - 0.1
    # flat underside far from the corner barely feels the diffusion
    before, after = at(1.8, 0.95)
    assert after == pytest.approx(before, abs=1e-3)


def test_hemisphere_is_printable_at_step_zero():
    g = GridSpec.from_box((-2,) * 3, (2,) * 3, (40,) * 3)
    z0 = g.axes()[2][14]
    f = make_field(g, lambda q: np.maximum(sdf_sphere((0, 0, z0), 1.0)(q), z0 - q[..., 2]))
    out, rep = run(f, EvolveConfig(params=SpeedParams(A=1, B=0.5, z_min=z0)))
    assert rep.steps_taken == 0 and rep.stop_reason is StopReason.PRINTABLE
    assert rep.added_volume == 0.0
    assert out is f


def test_sphere_run_monotone_and_printable():
    f = sphere_field(40)
    p = SpeedParams(A=0.7, B=0.3, z_min=-1.0)
    seen = []
    out, rep = run(f, EvolveConfig(params=p), observer=lambda k, t, u, v: seen.append((k, v)),
                   check_monotone=True)
    assert rep.stop_reason is StopReason.PRINTABLE
    assert rep.final_violation <= p.eps_print
    assert np.all(out.values <= f.values)
    assert seen[0][0] == 0 and seen[-1][0] == rep.steps_taken
    assert len(seen) == rep.steps_taken + 1
    assert rep.added_volume == pytest.approx(added_volume(f, out))
    assert rep.added_volume > 0


def test_max_steps_stop():
    f = sphere_field(40)
    _, rep = run(f, EvolveConfig(params=SpeedParams(A=0.7, B=0.3, z_min=-1.0), max_steps=3))
    assert rep.stop_reason is StopReason.MAX_STEPS and rep.steps_taken == 3
    assert len(rep.dt_history) == 3


def test_added_volume_of_shell():
    g = GridSpec.from_box((-2,) * 3, (2,) * 3, (90,) * 3)
    a = make_field(g, sdf_sphere((0, 0, 0), 1.0))
    b = make_field(g, sdf_sphere((0, 0, 0), 1.1))
    assert added_volume(a, b) == pytest.approx(4 * math.pi / 3 * (1.1 ** 3 - 1.0), rel=0.05)
    assert added_volume(a, a) == 0.0


def test_added_volume_grid_mismatch():
    with pytest.raises(ValueError):
        added_volume(sphere_field(20), sphere_field(21))


def test_non_finite_step_raises(monkeypatch, sphere40):
    def broken(field, params, narrow_band=False):
        grad = np.ones(field.values.shape)
        grad[3, 4, 5] = np.nan
        return np.full_like(grad, 0.1), np.zeros_like(grad), grad

    monkeypatch.setattr(evolution, "speed_components", broken)
    with pytest.raises(NumericalInstabilityError) as err:
        step(sphere40, EvolveConfig(params=_sphere_params(sphere40)))
    assert err.value.node == (3, 4, 5)


@pytest.mark.parametrize("kw", [dict(cfl=0.0), dict(cfl=1.5), dict(max_steps=0), dict(reinit_every=0),
                                dict(check_every=0), dict(t_final_cap=0.0), dict(snapshot_every=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        EvolveConfig(params=SpeedParams(A=1, B=0), **kw)


def test_time_step_respects_both_limits(sphere40):
    p = _sphere_params(sphere40, A=2.0, B=5.0)
    cfg = EvolveConfig(params=p)
    h = sphere40.grid.h_min
    dt = evolution.time_step(sphere40, cfg, max_adv=3.0)
    assert dt == pytest.approx(min(0.5 * h / 3.0, 0.25 * h * h / 5.0), rel=1e-9)
