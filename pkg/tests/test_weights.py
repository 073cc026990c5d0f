import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roadrti.errors import ValidationError
from roadrti.grid import GridSpec, Link, chord_matrix
from roadrti.weights import (MAGNITUDES, SELECTIONS, MagnitudeModel, SelectionModel,
                             build_weight_matrix, lambda_tilde, magnitude_matrix,
                             selection_matrix)


def link(p0, p1, i=0):
    return Link(i, 0, 1, tuple(map(float, p0)), tuple(map(float, p1)))


coord = st.floats(-2.0, 6.0, allow_nan=False)
links_st = st.lists(st.tuples(st.tuples(coord, coord, coord), st.tuples(coord, coord, coord))
                    .filter(lambda pq: math.dist(*pq) > 1e-3), min_size=1, max_size=5)
GRID = GridSpec(4, 3, 2, 1.0, 1.0, 1.0)


def test_lambda_tilde_examples():
    l = link((0, 0, 0), (4, 0, 0))
    assert lambda_tilde(l, (1, 0, 0)) == pytest.approx(0)
    assert lambda_tilde(l, (2, 1.5, 0)) == pytest.approx(2 * math.sqrt(6.25) - 4)
    assert lambda_tilde(l, (2, 1.5, 0)) == pytest.approx(1.0)
    assert lambda_tilde(l, (0, 0, 0)) == pytest.approx(0)


def test_selection_examples():
    g = GridSpec(3, 1, 1, 1, 1, 1)
    on = link((-1, 0.5, 0.5), (4, 0.5, 0.5))
    assert selection_matrix(g, [on], SelectionModel("ellipse", 1e-6)).all()
    miss = link((-1, 3, 0.5), (4, 3, 0.5))
    assert not selection_matrix(g, [miss], SelectionModel("line")).any()
    assert selection_matrix(g, [miss], SelectionModel("all")).all()


def test_magnitude_examples():
    g = GridSpec(1, 1, 1, 1, 1, 1)
    l4 = link((-1.5, .5, .5), (2.5, .5, .5))
    assert magnitude_matrix(g, [l4], MagnitudeModel("nesh"))[0, 0] == pytest.approx(0.5)
    assert magnitude_matrix(g, [l4], MagnitudeModel("nesh-line"))[0, 0] == pytest.approx(0.5)
    assert magnitude_matrix(g, [l4], MagnitudeModel("expdec"))[0, 0] == pytest.approx(1.0)


def test_build_examples():
    g = GridSpec(1, 1, 1, 1, 1, 1)
    w = build_weight_matrix(g, [link((-1, .5, .5), (2, .5, .5))])
    assert w.values.tolist() == [[pytest.approx(1.0)]]
    two = [link((-1.5, .5, .5), (2.5, .5, .5), 0), link((-4, .5, .5), (5, .5, .5), 1)]
    w = build_weight_matrix(g, two, SelectionModel("all"), MagnitudeModel("nesh"))
    assert np.allclose(w.values[:, 0], [0.5, 1 / 3])


def test_invarea_floor_keeps_weights_finite():
    g = GridSpec(3, 1, 1, 1, 1, 1)
    l = link((-1, 0.5, 0.5), (4, 0.5, 0.5))   # passes through every voxel center
    w = magnitude_matrix(g, [l], MagnitudeModel("invarea"))
    lt, d = 1e-3, 5.0
    expect = 1 / (math.pi / 4 * (d + lt) * math.sqrt(2 * d * lt + lt * lt))
    assert np.all(np.isfinite(w)) and np.allclose(w, expect)


def test_all_zero_matrix_is_an_error():
    g = GridSpec(1, 1, 1, 1, 1, 1)
    with pytest.raises(ValidationError):
        build_weight_matrix(g, [link((5, 5, 5), (6, 6, 6))])


def test_normalize_matches_line_norm(road):
    from roadrti.experiments import roadside_layout
    from roadrti.grid import enumerate_links
    grid = road[0]
    links = enumerate_links(roadside_layout())
    ref = np.linalg.norm(build_weight_matrix(grid, links).values)
    for mag in MAGNITUDES:
        w = build_weight_matrix(grid, links, SelectionModel("ellipse", 0.5), MagnitudeModel(mag),
                                normalize=True)
        assert np.linalg.norm(w.values) == pytest.approx(ref, rel=1e-12)
        assert w.provenance["scale"] == w.scale


def test_bad_models():
    with pytest.raises(ValidationError):
        SelectionModel("ellipse", 0.0)
    with pytest.raises(ValidationError):
        MagnitudeModel("expdec", sigma_lambda=0)
    with pytest.raises(ValidationError):
        SelectionModel("cone")


@given(links_st, st.floats(0.01, 2.0), st.floats(0.0, 2.0))
def test_ellipse_monotone_in_lambda(pairs, lam, extra):
    ls = [link(p, q, i) for i, (p, q) in enumerate(pairs)]
    small = selection_matrix(GRID, ls, SelectionModel("ellipse", lam))
    big = selection_matrix(GRID, ls, SelectionModel("ellipse", lam + extra))
    assert np.all(small <= big)


@given(links_st)
def test_line_selection_is_positive_chord(pairs):
    ls = [link(p, q, i) for i, (p, q) in enumerate(pairs)]
    assert np.array_equal(selection_matrix(GRID, ls, SelectionModel("line")) == 1,
                          chord_matrix(GRID, ls) > 0)


@given(links_st, st.sampled_from(SELECTIONS), st.sampled_from(MAGNITUDES))
def test_weights_nonnegative_finite_and_masked(pairs, sel, mag):
    ls = [link(p, q, i) for i, (p, q) in enumerate(pairs)]
    s = selection_matrix(GRID, ls, SelectionModel(sel, 0.3))
    try:
        w = build_weight_matrix(GRID, ls, SelectionModel(sel, 0.3), MagnitudeModel(mag)).values
    except ValidationError:
        return
    assert np.all(np.isfinite(w)) and np.all(w >= 0)
    assert np.all(w[s == 0] == 0)
