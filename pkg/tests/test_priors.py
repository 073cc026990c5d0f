import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roadrti.errors import SingularSystemError, ValidationError
from roadrti.grid import GridSpec
from roadrti.priors import (AVERAGED_FWD_BCK, SUM_OF_SQUARED_DIFFS, alpha_from_prior,
                            alpha_from_prior_approx, build_q, correlation_coefficient,
                            covariance_prior, difference_operators, effective_prior_covariance,
                            q_from_operators, tridiagonal_inverse_covariance)

grids = st.builds(GridSpec, st.integers(1, 5), st.integers(1, 4), st.integers(1, 3),
                  st.just(1.0), st.just(1.0), st.just(1.0))


def line(n):
    return GridSpec(n, 1, 1, 1.0, 1.0, 1.0)


def test_averaged_q_three_voxels():
    q = build_q(line(3)).q
    assert np.array_equal(q, [[1.5, -1, 0], [-1, 2, -1], [0, -1, 1.5]]) or \
        np.allclose(q, [[1.5, -1, 0], [-1, 2, -1], [0, -1, 1.5]], atol=1e-15)


def test_interior_q_two_voxels():
    assert np.allclose(build_q(line(2), SUM_OF_SQUARED_DIFFS).q, [[1, -1], [-1, 1]])


def test_constant_vector_has_zero_interior_differences():
    dx, dy, dz = difference_operators(GridSpec(4, 3, 2, 1, 1, 1), SUM_OF_SQUARED_DIFFS)
    one = np.ones(24)
    for d in (dx, dy, dz):
        assert np.allclose(d @ one, 0)


def test_single_voxel_dimension_gives_empty_operator():
    dx, dy, dz = difference_operators(GridSpec(3, 1, 1, 1, 1, 1))
    assert dy.shape == (0, 3) and dz.shape == (0, 3)


def test_unknown_construction():
    with pytest.raises(ValidationError):
        difference_operators(line(3), "bogus")


@given(grids, st.sampled_from([AVERAGED_FWD_BCK, SUM_OF_SQUARED_DIFFS]))
def test_q_symmetric_psd(g, construction):
    q = build_q(g, construction).q
    assert np.array_equal(q, q.T)
    ev = np.linalg.eigvalsh(q)
    assert ev.min() >= -1e-10
    if construction == AVERAGED_FWD_BCK and g.n_voxels > 1:
        assert ev.min() > 0


@given(grids, st.data())
def test_restricted_q_equals_submatrix(g, data):
    """Dropping columns of every D and rebuilding gives the principal submatrix of Q."""
    reg = build_q(g)
    keep = np.flatnonzero(data.draw(st.lists(st.booleans(), min_size=g.n_voxels,
                                             max_size=g.n_voxels)))
    sub = reg.restricted(keep)
    assert np.allclose(sub.q, reg.q[np.ix_(keep, keep)], atol=1e-14)
    assert np.allclose(sub.q, q_from_operators([d[:, keep] for d in reg.ops], keep.size))


def test_covariance_examples():
    g = GridSpec(3, 1, 1, 1.3, 1.0, 1.0)
    cp = covariance_prior(g, 2.0, 1.3)
    assert np.allclose(np.diag(cp.cov), 2.0)
    assert cp.cov[0, 1] == pytest.approx(2.0 * math.exp(-1))
    np.linalg.cholesky(cp.cov)


def test_covariance_pd_up_to_500_voxels():
    cp = covariance_prior(GridSpec(10, 10, 5, 0.5, 0.5, 0.5), 1.0, 1.3)
    np.linalg.cholesky(cp.cov)


def test_correlation_coefficient_value():
    assert correlation_coefficient(0.1, 1.3) == pytest.approx(0.9260, abs=5e-5)


def test_alpha_from_prior():
    c = 0.9260
    assert alpha_from_prior(1.0, 1.0, c) == pytest.approx(1 / (1 - c * c))
    # the rounded 7.018 for this case sits 0.02% from the direct evaluation
    assert alpha_from_prior(1.0, 1.0, c) == pytest.approx(7.018, rel=5e-4)
    assert alpha_from_prior(3.0, 2.0, 0.0) == pytest.approx(1.5)
    with pytest.raises(ValidationError):
        alpha_from_prior(1, 1, 1.0)


def test_alpha_approximation_tracks_exact_for_long_correlation():
    exact = alpha_from_prior(1.0, 1.0, correlation_coefficient(0.01, 1.3))
    assert alpha_from_prior_approx(1.0, 1.0, 0.01, 1.3) == pytest.approx(exact, rel=0.01)


def test_effective_covariance_round_trip():
    g = line(6)
    cp = covariance_prior(g, 1.5, 2.0)
    sn2 = 4.0
    q = sn2 * np.linalg.inv(cp.cov)
    out = effective_prior_covariance(q, 1.0, sn2)
    assert np.allclose(out, cp.cov, atol=1e-9)
    assert np.abs(out - out.T).max() <= 1e-12


def test_effective_covariance_center_bias():
    out = effective_prior_covariance(build_q(line(9)).q, 7.0, 1.0)
    d = np.diag(out)
    assert d[4] > d[0] and d[4] > d[-1]


def test_effective_covariance_singular():
    with pytest.raises(SingularSystemError):
        effective_prior_covariance(build_q(line(4), SUM_OF_SQUARED_DIFFS).q, 1.0, 1.0)


def test_tridiagonal_inverse_matches_dense_inverse():
    g = GridSpec(7, 1, 1, 0.1, 1, 1)
    c = correlation_coefficient(0.1, 1.3)
    cp = covariance_prior(g, 2.0, 1.3)
    assert np.allclose(tridiagonal_inverse_covariance(7, 3.0, 2.0, c), 3.0 * np.linalg.inv(cp.cov),
                       rtol=1e-8, atol=1e-8)


def test_alpha_q_approximates_prior_precision_on_interior_rows():
    n, sn2, sx2 = 12, 1.0, 1.0
    c = correlation_coefficient(0.1, 1.3)
    prec = tridiagonal_inverse_covariance(n, sn2, sx2, c)
    aq = alpha_from_prior(sn2, sx2, c) * build_q(line(n)).q
    inner = slice(1, n - 1)
    rel = np.linalg.norm(aq[inner] - prec[inner]) / np.linalg.norm(prec[inner])
    assert rel < 0.1
