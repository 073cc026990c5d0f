import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roadrti.errors import DivergenceError, SingularSystemError, ValidationError
from roadrti.estimators import (SolverConfig, apply_negative_policy, nnls_bruteforce_oracle,
                                objective, solve, solve_constrained_iterative, solve_generic,
                                solve_map_exponential, solve_map_gaussian, solve_pgm,
                                solve_regularized_ls)
from roadrti.experiments import random_nnls_instance
from roadrti.grid import GridSpec
from roadrti.priors import build_q, identity_q
from roadrti.simulate import make_scene, Box, simulate_measurement

I2 = np.eye(2)
Y = np.array([-3.0, 2.0])
TINY = 1e-12


def cfg(**kw):
    return SolverConfig(**{"alpha": 0.0, **kw})


def test_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig(alpha=-1)
    with pytest.raises(ValidationError):
        SolverConfig(neg_policy="clip")
    with pytest.raises(ValidationError):
        SolverConfig(mu=0.0)
    with pytest.raises(ValidationError):
        SolverConfig(max_iters=0)


def test_generic_identity_and_bias():
    assert np.allclose(solve_generic(I2, Y).x, Y)
    # beta adds to W^T y
    assert np.allclose(solve_generic(I2, Y, 0.0, None, 0.5).x, Y + 0.5)
    assert np.allclose(solve_generic(np.eye(1), np.array([1.0]), 1.0, np.eye(1), 0.0).x, [0.5])


def test_noiseless_full_rank_recovers_scene():
    from roadrti.experiments import line_weights, perimeter_grid, perimeter_layout, perimeter_scene
    g = perimeter_grid()
    w = line_weights(g, perimeter_layout())
    sc = perimeter_scene(g)
    x = solve_regularized_ls(w, simulate_measurement(w, sc), 0.0).x
    assert np.abs(x - sc.x).max() < 1e-9


@given(st.integers(0, 10_000))
def test_normal_equations_hold(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(3, 12), rng.integers(1, 4)
    n = min(n, m)
    w = rng.normal(size=(m, n))
    y = rng.normal(size=m)
    x = solve_generic(w, y).x
    assert np.linalg.norm(w.T @ (w @ x - y)) <= 1e-8 * max(np.linalg.norm(w.T @ y), 1e-300) + 1e-12


def test_rank_deficient_alpha_zero_gives_min_norm():
    w = np.array([[1.0, 1.0]])
    est = solve_generic(w, np.array([2.0]))
    assert np.allclose(est.x, [1, 1])
    assert est.provenance["method"] == "min-norm-qr"


def test_singular_with_alpha_raises():
    # W and Q share the null vector (1, 1)
    w = np.array([[1.0, -1.0]])
    q = build_q(GridSpec(2, 1, 1, 1, 1, 1), "sum_of_squared_diffs")
    with pytest.raises(SingularSystemError) as err:
        solve_generic(w, np.array([1.0]), 1.0, q)
    assert err.value.rank == 1


def test_map_gaussian_scalar_and_equivalence(rng):
    est = solve_map_gaussian(np.eye(1), np.zeros(1), np.eye(1), 1.0, mean=5.0)
    assert est.x[0] == pytest.approx(2.5)
    g = GridSpec(5, 1, 1, 0.5, 1, 1)
    from roadrti.priors import covariance_prior
    cov = covariance_prior(g, 2.0, 1.3).cov
    w = rng.uniform(0, 1, (8, 5))
    y = rng.normal(size=8)
    sn2 = 3.0
    q = sn2 * np.linalg.inv(cov)
    a = solve_map_gaussian(w, y, cov, sn2, 0.0).x
    b = solve_regularized_ls(w, y, 1.0, q).x
    assert np.allclose(a, b, atol=1e-9)


def test_map_gaussian_rejects_non_pd():
    with pytest.raises(ValidationError):
        solve_map_gaussian(np.eye(2), np.zeros(2), np.array([[1, 2], [2, 1.0]]), 1.0)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0.1, 5))
def test_map_gaussian_monotone_in_mean(m1, dm, y):
    a = solve_map_gaussian(np.eye(1), np.array([y]), np.eye(1), 1.0, m1).x[0]
    b = solve_map_gaussian(np.eye(1), np.array([y]), np.eye(1), 1.0, m1 + dm).x[0]
    assert b >= a - 1e-12


def test_map_exponential_bias():
    est = solve_map_exponential(np.eye(2), np.array([3.0, 1.0]), 2.0, 4.0)
    assert np.allclose(est.x, [2.5, 0.5])
    with pytest.raises(SingularSystemError):
        solve_map_exponential(np.array([[1.0, 1.0]]), np.ones(1), 1.0, 1.0)
    with pytest.raises(ValidationError):
        solve_map_exponential(np.eye(1), np.ones(1), 1.0, 0.0)


def test_truncation_toy():
    assert np.allclose(apply_negative_policy(I2, Y, cfg(neg_policy="trunc-x")).x, [0, 2])
    assert np.allclose(apply_negative_policy(I2, Y, cfg(neg_policy="trunc-y")).x, [0, 2])
    pos = np.array([1.0, 2.0])
    ref = solve_generic(I2, pos).x
    for p in ("trunc-x", "trunc-y"):
        est = apply_negative_policy(I2, pos, cfg(neg_policy=p))
        assert np.array_equal(est.x, ref)
        assert est.provenance["neg_policy"] == p


def test_iterative_toy():
    est = solve_constrained_iterative(I2, Y, cfg(alpha=TINY))
    assert est.active_set == (0,)
    assert np.allclose(est.x, [0, 2], atol=1e-9)
    pos = np.array([1.0, 2.0])
    est = solve_constrained_iterative(I2, pos, cfg(alpha=TINY))
    assert est.active_set == ()
    assert np.allclose(est.x, solve_generic(I2, pos, TINY, None).x)


def test_iterative_reports_singular_iteration():
    w = np.array([[1.0, -1.0]])
    q = build_q(GridSpec(2, 1, 1, 1, 1, 1), "sum_of_squared_diffs")
    with pytest.raises(SingularSystemError) as err:
        solve_constrained_iterative(w, np.array([1.0]), cfg(alpha=1.0), q)
    assert err.value.iteration == 0


@given(st.integers(0, 10_000))
def test_iterative_descent_step(seed):
    """Each re-solve is no worse than truncating the previous iterate."""
    w, y, alpha, beta, q = random_nnls_instance(np.random.default_rng(seed))
    est = solve_constrained_iterative(w, y, SolverConfig(alpha=alpha, beta=beta, max_iters=6), q)
    tr = est.provenance["trace"]
    for prev, cur in zip(tr, tr[1:]):
        assert cur["cost"] <= prev["truncated_cost"] + 1e-9 * max(1, abs(prev["truncated_cost"]))


def test_pgm_toy_converges():
    est = solve_pgm(I2, Y, cfg(mu=0.25, pgm_iters=200), x0=np.zeros(2))
    assert np.allclose(est.x, [0, 2], atol=1e-9)


def test_pgm_fixed_point_at_optimum(rng):
    w, y, alpha, beta, q = random_nnls_instance(rng)
    opt = nnls_bruteforce_oracle(w, y, alpha, q, beta)
    est = solve_pgm(w, y, SolverConfig(alpha=alpha, beta=beta, pgm_iters=5), q, x0=opt.x)
    assert np.allclose(est.x, opt.x, atol=1e-9)


def test_pgm_explicit_large_step_diverges():
    w = np.array([[3.0, 1.0], [1.0, 2.0]])
    with pytest.raises(DivergenceError):
        solve_pgm(w, np.array([1.0, -1.0]), cfg(mu=10.0), x0=np.ones(2))


@given(st.integers(0, 10_000))
def test_pgm_cost_non_increasing(seed):
    w, y, alpha, beta, q = random_nnls_instance(np.random.default_rng(seed))
    est = solve_pgm(w, y, SolverConfig(alpha=alpha, beta=beta, pgm_iters=100), q)
    h = np.array(est.cost_history)
    assert np.all(np.diff(h) <= 1e-9 * np.maximum(1, np.abs(h[:-1])))


def test_oracle_examples():
    assert np.allclose(nnls_bruteforce_oracle(I2, np.array([-1.0, 2.0])).x, [0, 2])
    pos = np.array([1.0, 2.0])
    assert np.allclose(nnls_bruteforce_oracle(I2, pos).x, solve_generic(I2, pos).x)
    with pytest.raises(ValidationError):
        nnls_bruteforce_oracle(np.ones((2, 13)), np.ones(2))


@given(st.integers(0, 10_000))
def test_nonnegativity_and_oracle_dominance(seed):
    w, y, alpha, beta, q = random_nnls_instance(np.random.default_rng(seed))
    base = SolverConfig(alpha=alpha, beta=beta)
    opt = nnls_bruteforce_oracle(w, y, alpha, q, beta)
    assert np.all(opt.x >= 0)
    for p in ("trunc-x", "iterative", "pgm"):
        est = solve(w, y, dataclasses.replace(base, neg_policy=p), q)
        assert np.all(est.x >= 0)
        assert opt.cost <= est.cost + 1e-9 * max(1, abs(est.cost))
    ty = solve(w, y, dataclasses.replace(base, neg_policy="trunc-y"), q).x
    assert opt.cost <= objective(w, y, np.maximum(ty, 0), alpha, q.q, beta) + 1e-9


def test_identity_regularizer_shrinks():
    est = solve_constrained_iterative(I2, np.array([2.0, 4.0]), cfg(alpha=1.0), identity_q(2))
    assert np.allclose(est.x, [1, 2])


def test_sidecar_is_json_ready():
    import json
    est = solve(I2, Y, cfg(alpha=0.1))
    json.dumps(est.sidecar())
