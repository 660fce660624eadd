import numpy as np
import pytest
from hypothesis import given, strategies as st

from overhang_forge.grid import GridSpec, make_field
from overhang_forge.printability import crossing_edges
from overhang_forge.reinit import NoSurfaceError, interface_anchors, reinitialize
from overhang_forge.shapes import sdf_box, sdf_sphere, sdf_union

from conftest import sphere_field


def _crossings(field):
    """Zero-crossing positions keyed by (axis, node index)."""
    out = {}
    for axis, idx, frac in crossing_edges(field):
        for i, t in zip(map(tuple, idx), frac):
            out[(axis, i)] = t
    return out


def test_sphere_sdf_is_a_fixed_point_at_the_interface():
    f = sphere_field(100)
    r = reinitialize(f)
    anchors, _ = interface_anchors(f)
    h = f.grid.h_min
    assert np.abs(r.values - f.values)[anchors].max() < 1e-3 * h
    near = np.abs(f.values) < 3 * h
    # first-order sweeping away from the anchors
    assert np.abs(r.values - f.values)[near].max() < 0.2 * h


def test_scaled_sdf_is_renormalized():
    f = sphere_field(60)
    scaled = f.with_values(3.0 * f.values)
    r = reinitialize(scaled)
    h = f.grid.h_min
    band = np.abs(f.values) < 2 * h
    assert np.abs(r.values - f.values)[band].max() < 0.2 * h
    # crossings do not move
    a, b = _crossings(scaled), _crossings(r)
    assert a.keys() == b.keys()
    assert max(abs(a[k] - b[k]) for k in a) * h < 0.5 * h


def test_gradient_close_to_one_in_band():
    g = GridSpec.from_box((-2,) * 3, (2,) * 3, (60,) * 3)
    f = make_field(g, sdf_union(sdf_box((-1, -0.3, -0.3), (1, 0.3, 0.3)), sdf_sphere((0, 0, 0.5), 0.6)))
    r = reinitialize(f.with_values(0.4 * f.values))
    grad = np.gradient(r.values, *g.spacing)
    gn = np.sqrt(sum(x * x for x in grad))
    band = (np.abs(r.values) > g.h_min) & (np.abs(r.values) < 4 * g.h_min)
    assert np.median(np.abs(gn[band] - 1.0)) < 0.05


def test_uniform_field_rejected():
    g = GridSpec.from_box((0, 0), (1, 1), (5, 5))
    with pytest.raises(NoSurfaceError):
        reinitialize(make_field(g, lambda p: np.ones(p.shape[:-1])))


def test_band_clipping():
    f = sphere_field(40)
    r = reinitialize(f, band_width=0.3)
    assert r.values.max() <= 0.3 and r.values.min() >= -0.3


def test_frozen_anchors_keep_crossings_exactly():
    f = sphere_field(40)
    warped = f.with_values(f.values * (1.0 + 0.5 * f.grid.positions()[..., 0] ** 2))
    r = reinitialize(warped, renormalize_anchors=False)
    a, b = _crossings(warped), _crossings(r)
    assert a.keys() == b.keys()
    assert max(abs(a[k] - b[k]) for k in a) < 1e-12


@given(st.floats(0.3, 1.2), st.floats(-0.5, 0.5), st.floats(0.2, 5.0))
def test_sign_preserved_everywhere(r, cx, scale):
    g = GridSpec.from_box((-2, -2), (2, 2), (33, 33))
    f = make_field(g, sdf_sphere((cx, 0.1), r))
    f = f.with_values(scale * f.values)
    out = reinitialize(f)
    np.testing.assert_array_equal(out.values < 0, f.values < 0)


def test_input_not_modified(sphere40):
    before = sphere40.values.copy()
    reinitialize(sphere40)
    np.testing.assert_array_equal(before, sphere40.values)
