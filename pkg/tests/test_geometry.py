import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from voidgap.errors import BadScale, BadShape, DegenerateMesh, VoidEscapesCell
from voidgap.geometry import (CrossSection, VoidShape, icosphere, make_cell, read_triangle_soup,
                              rescale_period, signed_mesh_volume, void_measure,
                              write_triangle_soup)


def test_disk_ball_cell_clearance():
    cell = make_cell(CrossSection.disk(1.0), VoidShape.ball(1.0), (0, 0, 0.5), 0.1, "neumann")
    assert cell.clearance == pytest.approx(0.4, abs=1e-9)


def test_void_too_large_escapes():
    with pytest.raises(VoidEscapesCell):
        make_cell(CrossSection.disk(1.0), VoidShape.ball(1.0), (0, 0, 0.5), 0.6, "neumann")


def test_cuboid_in_square_is_valid():
    cell = make_cell(CrossSection.rectangle(1, 1), VoidShape.cuboid(1, 1, 1), (0.5, 0.5, 0.5), 0.2)
    assert cell.clearance == pytest.approx(0.3, abs=1e-9)


def test_bad_inputs():
    with pytest.raises(BadShape):
        CrossSection.disk(-1.0)
    with pytest.raises(BadShape):
        VoidShape.ellipsoid(1.0, 0.0, 1.0)
    with pytest.raises(BadScale):
        make_cell(CrossSection.disk(1.0), VoidShape.ball(1.0), (0, 0, 0.5), 0.0)
    with pytest.raises(BadScale):
        rescale_period(CrossSection.disk(1.0), 0.0)


def test_polygon_orientation_and_self_intersection():
    cw = CrossSection.polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert cw.area == pytest.approx(1.0)
    with pytest.raises(BadShape):
        CrossSection.polygon([(0, 0), (1, 1), (1, 0), (0, 1)])


def test_rescale_period_examples():
    assert rescale_period(CrossSection.disk(1.0), 2.0).dims == (0.5,)
    sq = rescale_period(CrossSection.rectangle(1, 1), 2.0)
    assert sq.dims == (0.5, 0.5)
    assert sq.area == pytest.approx(0.25)


@given(st.floats(0.1, 10.0), st.floats(0.2, 5.0))
def test_rescale_round_trip(l, r):
    cs = CrossSection.disk(r)
    back = rescale_period(rescale_period(cs, l), 1.0 / l)
    assert back.dims[0] == pytest.approx(r, rel=1e-14)
    assert rescale_period(cs, l).area == pytest.approx(cs.area / l ** 2, rel=1e-12)


def test_void_measures():
    assert void_measure(VoidShape.ball(1.0)) == pytest.approx(4 * math.pi / 3)
    assert void_measure(VoidShape.ellipsoid(1, 1, 0.5)) == pytest.approx(2.0944, abs=1e-4)
    V, F = icosphere(3)
    mesh = VoidShape.from_mesh(V, F)
    assert void_measure(mesh) == pytest.approx(4 * math.pi / 3, rel=0.01)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_volume_rotation_invariant(seed):
    R = Rotation.random(random_state=seed).as_matrix()
    V, F = icosphere(2)
    V = V * np.array([1.0, 0.7, 0.4])
    rotated = VoidShape.from_mesh(V @ R.T, F)
    assert void_measure(rotated) == pytest.approx(signed_mesh_volume(V, F), rel=1e-12)
    assert VoidShape.ellipsoid(1, 0.7, 0.4).rotated(R).volume == pytest.approx(
        VoidShape.ellipsoid(1, 0.7, 0.4).volume)


def test_mesh_orientation_is_fixed_automatically():
    V, F = icosphere(1)
    flipped = VoidShape.from_mesh(V, F[:, ::-1])
    assert flipped.volume > 0


def test_open_mesh_rejected():
    V, F = icosphere(1)
    with pytest.raises(DegenerateMesh):
        VoidShape.from_mesh(V, F[:-1])


def test_mesh_must_contain_origin():
    V, F = icosphere(1)
    with pytest.raises(BadShape):
        VoidShape.from_mesh(V + 3.0, F)


def test_triangle_soup_round_trip(tmp_path):
    V, F = icosphere(1)
    path = tmp_path / "ball.tri"
    write_triangle_soup(path, V, F)
    void = read_triangle_soup(path)
    assert void.volume == pytest.approx(signed_mesh_volume(V, F), rel=1e-12)


def test_mesh_membership_matches_analytic():
    V, F = icosphere(3)
    mesh = VoidShape.from_mesh(V, F)
    pts = np.array([[0, 0, 0], [0.5, 0.2, 0.1], [0.0, 0.0, 1.05], [0.8, 0.8, 0.0]])
    assert mesh.contains(pts).tolist() == [True, True, False, False]


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-0.3, 0.3), y=st.floats(-0.3, 0.3), z=st.floats(0.1, 0.9), eps=st.floats(0.01, 0.5))
def test_make_cell_iff_surface_inside(x, y, z, eps):
    cs, void = CrossSection.disk(0.5), VoidShape.ellipsoid(1.0, 0.6, 0.8)
    pts = np.array([x, y, z]) + eps * void.surface_samples()
    inside = bool(np.all(cs.distance_to_boundary(pts[:, :2]) > 0)
                  and np.all((pts[:, 2] > 0) & (pts[:, 2] < 1)))
    try:
        cell = make_cell(cs, void, (x, y, z), eps)
        assert inside and cell.clearance > 0
    except VoidEscapesCell:
        assert not inside
