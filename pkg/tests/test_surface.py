import math

import numpy as np
import pytest
from scipy.interpolate import RegularGridInterpolator

from overhang_forge.bvh import TriangleBVH
from overhang_forge.grid import GridSpec, make_field
from overhang_forge.mesh import Contour2D, Region, TriangleMesh
from overhang_forge.mesh_sdf import mesh_to_sdf
from overhang_forge.printability import SpeedParams
from overhang_forge.shapes import sdf_box, sdf_sphere
from overhang_forge.surface import (NoCrossingError, extract_surface, naive_projection_support, split_support,
                                    support_field)

from conftest import sphere_field


def test_sphere_vertices_near_radius_and_outward():
    f = sphere_field(50)
    mesh = extract_surface(f, Region.MODEL)
    assert isinstance(mesh, TriangleMesh) and mesh.region is Region.MODEL
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(r - 1.0).max() < f.grid.h_min
    # outward winding gives positive enclosed volume
    assert mesh.volume() == pytest.approx(4 * math.pi / 3, rel=0.02)


def test_interpolated_field_vanishes_at_vertices():
    f = sphere_field(40, r=0.9, center=(0.05, -0.1, 0.2))
    mesh = extract_surface(f)
    interp = RegularGridInterpolator(f.grid.axes(), f.values)
    resid = np.abs(interp(mesh.vertices))
    assert resid.max() < 1e-6 * np.ptp(f.values)


def test_plane_is_flat():
    g = GridSpec.from_box((-1,) * 3, (1,) * 3, (21,) * 3)
    mesh = extract_surface(make_field(g, lambda p: p[..., 2] - 0.33))
    np.testing.assert_allclose(mesh.vertices[:, 2], 0.33, atol=1e-12)


def test_circle_perimeter_2d():
    f = sphere_field(120, r=1.2, dim=2)
    c = extract_surface(f)
    assert isinstance(c, Contour2D) and len(c.polylines) == 1
    assert c.perimeter() == pytest.approx(2 * math.pi * 1.2, rel=0.02)


def test_contour_touching_boundary_closes():
    g = GridSpec.from_box((0, 0), (1, 1), (21, 21))
    c = extract_surface(make_field(g, lambda p: p[..., 1] - 0.5))
    loop = c.polylines[0]
    np.testing.assert_allclose(loop[0], loop[-1])


def test_no_crossing():
    g = GridSpec.from_box((0, 0, 0), (1, 1, 1), (5, 5, 5))
    with pytest.raises(NoCrossingError):
        extract_surface(make_field(g, lambda p: np.ones(p.shape[:-1])))


def test_split_support_of_unchanged_field_is_empty(sphere40):
    model, support = split_support(sphere40, sphere40)
    assert not model.is_empty and support.is_empty
    assert support.region is Region.SUPPORT


def test_split_support_of_shell():
    g = GridSpec.from_box((-2,) * 3, (2,) * 3, (70,) * 3)
    a = make_field(g, sdf_sphere((0, 0, 0), 1.0))
    b = make_field(g, sdf_sphere((0, 0, 0), 1.3))
    _, support = split_support(a, b)
    # the shell's boundary has an inner and an outer sphere; both face out of the shell
    assert support.volume() == pytest.approx(4 * math.pi / 3 * (1.3 ** 3 - 1.0), rel=0.05)


def test_support_field_rejects_shrinking(sphere40):
    grown = sphere40.with_values(sphere40.values - 0.1)
    grown.values[3, 5, 7] = sphere40.values[3, 5, 7] + 1.0
    with pytest.raises(ValueError, match=r"node \(3, 5, 7\)"):
        support_field(sphere40, grown)


def _naive_by_columns(field, z_min):
    # straightforward per-column count
    u = field.values
    z = field.grid.axes()[-1]
    total = 0
    for col in np.ndindex(u.shape[:-1]):
        line = u[col]
        for k in range(len(z)):
            if line[k] >= 0 and z[k] > z_min and np.any(line[k + 1:] < 0):
                total += 1
    return total * field.grid.cell_volume


def test_naive_support_matches_column_count_and_analytic():
    f = sphere_field(60)
    p = SpeedParams(A=1, B=0, z_min=-1.0)
    v = naive_projection_support(f, p)
    assert v == pytest.approx(_naive_by_columns(f, -1.0), rel=1e-12)
    # cylinder under the unit sphere minus the lower hemisphere
    assert v == pytest.approx(math.pi - 2 * math.pi / 3, rel=0.08)


def test_naive_support_converges_at_fine_grid():
    v = naive_projection_support(sphere_field(100), SpeedParams(A=1, B=0, z_min=-1.0))
    assert v == pytest.approx(math.pi / 3, rel=0.05)


def test_naive_support_zero_for_supported_shapes():
    g = GridSpec.from_box((-2,) * 3, (2,) * 3, (41,) * 3)
    cube = make_field(g, sdf_box((-1, -1, -1), (1, 1, 1)))
    assert naive_projection_support(cube, SpeedParams(A=1, B=0, z_min=-1.0)) == 0.0
    z0 = g.axes()[2][12]
    hemi = make_field(g, lambda q: np.maximum(sdf_sphere((0, 0, z0), 1.0)(q), z0 - q[..., 2]))
    assert naive_projection_support(hemi, SpeedParams(A=1, B=0, z_min=z0)) == 0.0


def test_surface_round_trip_through_mesh_sdf():
    f = sphere_field(40, r=0.9, center=(0.1, 0.0, -0.1))
    h = f.grid.h_min
    first = extract_surface(f)
    again = extract_surface(mesh_to_sdf(first, f.grid))
    # symmetric Hausdorff distance between the two triangle surfaces, sampled at vertices
    d1 = TriangleBVH(again.corners()).distance(first.vertices).max()
    d2 = TriangleBVH(first.corners()).distance(again.vertices).max()
    assert max(d1, d2) <= 2 * h
