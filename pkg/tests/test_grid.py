import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roadrti.errors import ValidationError
from roadrti.grid import (GridSpec, Link, Sensor, SensorLayout, box_intersection_length,
                          chord_matrix, enumerate_links, focal_distance_matrices,
                          focal_distances, link_chords, segment_length_in_voxel, voxel_center)

coord = st.floats(-3.0, 8.0, allow_nan=False)
point = st.tuples(coord, coord, coord)
grids = st.builds(GridSpec, st.integers(1, 5), st.integers(1, 4), st.integers(1, 3),
                  st.floats(0.2, 2.0), st.floats(0.2, 2.0), st.floats(0.2, 2.0),
                  st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)))


def link(p0, p1, i=0):
    return Link(i, 0, 1, tuple(map(float, p0)), tuple(map(float, p1)))


def test_voxel_centers_x_fastest():
    g = GridSpec(2, 1, 1, 1, 1, 1)
    assert np.allclose(voxel_center(g, 0), (0.5, 0.5, 0.5))
    assert np.allclose(voxel_center(g, 1), (1.5, 0.5, 0.5))
    assert np.allclose(voxel_center(GridSpec(2, 2, 1, 1, 1, 1), 2), (0.5, 1.5, 0.5))


def test_voxel_center_out_of_range():
    with pytest.raises(IndexError):
        voxel_center(GridSpec(2, 2, 1, 1, 1, 1), 4)


@given(grids)
def test_index_round_trip(g):
    for n in range(g.n_voxels):
        assert g.ravel(*g.unravel(n)) == n
    assert np.allclose(g.centers(), [voxel_center(g, n) for n in range(g.n_voxels)])


def test_grid_validation():
    with pytest.raises(ValidationError):
        GridSpec(0, 1, 1, 1, 1, 1)
    with pytest.raises(ValidationError):
        GridSpec(1, 1, 1, 1, -1, 1)


def test_grid_dict_round_trip():
    g = GridSpec(3, 2, 1, 0.5, 2.0, 1.0, (1.0, -2.0, 0.0))
    assert GridSpec.from_dict(g.to_dict()) == g


def _square(topology):
    pos = [(0, 0, 0), (0, 4, 0), (2, 0, 0), (2, 4, 0)]
    sides = ["L", "R", "L", "R"]
    return SensorLayout(tuple(Sensor(i, p, s) for i, (p, s) in enumerate(zip(pos, sides))), topology)


def test_link_counts():
    assert len(enumerate_links(_square("full_mesh"))) == 6
    assert len(enumerate_links(_square("cross_road"))) == 4
    from roadrti.experiments import roadside_layout
    links = enumerate_links(roadside_layout())
    assert len(links) == 81
    assert [l.link_id for l in links] == list(range(81))


def test_cross_road_needs_balanced_sides():
    s = (Sensor(0, (0, 0, 0), "L"), Sensor(1, (0, 1, 0), "L"), Sensor(2, (0, 4, 0), "R"))
    with pytest.raises(ValidationError):
        enumerate_links(SensorLayout(s, "cross_road"))
    s = (Sensor(0, (0, 0, 0)), Sensor(1, (0, 4, 0), "R"))
    with pytest.raises(ValidationError):
        enumerate_links(SensorLayout(s, "cross_road"))


def test_layout_rejects_duplicates_and_singletons():
    with pytest.raises(ValidationError):
        SensorLayout((Sensor(0, (0, 0, 0)), Sensor(0, (1, 0, 0))))
    with pytest.raises(ValidationError):
        SensorLayout((Sensor(0, (0, 0, 0)),))


def test_layout_dict_round_trip():
    lay = _square("cross_road")
    assert SensorLayout.from_dict(lay.to_dict()) == lay


def test_focal_distances_examples():
    l = link((0, 0, 0), (4, 0, 0))
    assert focal_distances(l, (2, 0, 0)) == pytest.approx((2, 2))
    assert focal_distances(l, (2, 3, 0)) == pytest.approx((math.sqrt(13), math.sqrt(13)))
    assert focal_distances(l, (0, 0, 0)) == pytest.approx((0, 4))


def test_segment_length_examples(unit_grid):
    assert segment_length_in_voxel(unit_grid, 0, link((-1, .5, .5), (2, .5, .5))) == pytest.approx(1.0)
    assert segment_length_in_voxel(unit_grid, 0, link((0, 0, .5), (1, 1, .5))) == pytest.approx(math.sqrt(2))
    assert segment_length_in_voxel(unit_grid, 0, link((0, 2, 0), (1, 3, 0))) == 0.0


def test_face_lying_segment_goes_to_upper_voxel():
    g = GridSpec(1, 2, 1, 1, 1, 1)
    l = link((0.2, 1.0, 0.5), (0.8, 1.0, 0.5))
    assert segment_length_in_voxel(g, 0, l) == 0.0
    assert segment_length_in_voxel(g, 1, l) == pytest.approx(0.6)
    assert chord_matrix(g, [l]).sum() == pytest.approx(0.6)


@given(grids, point, point)
def test_chord_conservation(g, p0, p1):
    if math.dist(p0, p1) < 1e-6:
        return
    l = link(p0, p1)
    _, lengths = link_chords(g, l)
    total = box_intersection_length(g, l)
    assert lengths.sum() == pytest.approx(total, rel=1e-9, abs=1e-12)


@given(grids, point, point)
def test_chords_match_per_voxel_clipping(g, p0, p1):
    if math.dist(p0, p1) < 1e-6:
        return
    l = link(p0, p1)
    row = chord_matrix(g, [l])[0]
    ref = [segment_length_in_voxel(g, n, l) for n in range(g.n_voxels)]
    assert np.allclose(row, ref, atol=1e-9)


@given(grids, point, point)
def test_endpoint_swap_symmetry(g, p0, p1):
    if math.dist(p0, p1) < 1e-6:
        return
    l = link(p0, p1)
    r = l.reversed()
    assert np.allclose(chord_matrix(g, [l]), chord_matrix(g, [r]), atol=1e-12)
    d1, d2, d = focal_distance_matrices(g, [l])
    e1, e2, e = focal_distance_matrices(g, [r])
    assert np.allclose(d1 + d2, e1 + e2) and np.allclose(d, e)


@given(grids, point, point)
def test_triangle_inequality(g, p0, p1):
    d1, d2, d = focal_distance_matrices(g, [link(p0, p1)])
    assert np.all(d1 + d2 >= d - 1e-12)
