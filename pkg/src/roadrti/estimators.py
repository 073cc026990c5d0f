"""Image estimators: regularized least squares, MAP variants and the
nonnegativity-handling pipelines.

Every solver minimizes (or approximates the constrained minimum of)

    f(x) = ||W x - y||^2 + alpha x^T Q x - 2 beta sum(x)

whose unconstrained minimizer is (W^T W + alpha Q)^-1 (W^T y + beta 1).
``beta < 0`` realizes the exponential-prior bias, beta = -sigma_n^2 / m.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import DivergenceError, NumericError, SingularSystemError, ValidationError
from .priors import RegularizerQ

log = logging.getLogger(__name__)

NEG_POLICIES = ("none", "trunc-x", "trunc-y", "iterative", "pgm")
ORACLE_MAX_VOXELS = 12
# squared pivot ratio below which a Cholesky factor is treated as singular
SINGULAR_RCOND = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 1.0
    beta: float = 0.0
    prior_mean: float = 0.0
    sigma_n2: float = 16.0
    neg_policy: str = "iterative"
    max_iters: int = 3
    mu: float | None = None
    pgm_iters: int = 50
    tol: float = 1e-9
    q_construction: str = "averaged_fwd_bck"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")
        if self.neg_policy not in NEG_POLICIES:
            raise ValidationError(f"unknown negative-data policy {self.neg_policy!r}")
        if self.max_iters < 1 or self.pgm_iters < 1:
            raise ValidationError("iteration limits must be >= 1")
        if self.mu is not None and not self.mu > 0:
            raise ValidationError("PGM step mu must be > 0")


@dataclass
class SceneEstimate:
    x: np.ndarray
    residual_norm: float
    cost: float
    provenance: dict = field(default_factory=dict)
    active_set: tuple = ()
    cost_history: list = field(default_factory=list)

    def sidecar(self) -> dict:
        return {
            "residual_norm": self.residual_norm,
            "cost": self.cost,
            "active_set": [int(i) for i in self.active_set],
            "provenance": self.provenance,
            "cost_history": [float(c) for c in self.cost_history],
        }


def _q_matrix(q, n):
    if q is None:
        return np.zeros((n, n))
    if isinstance(q, RegularizerQ):
        return q.q
    return np.asarray(q, dtype=float)


def _as_regularizer(q, n) -> RegularizerQ:
    if isinstance(q, RegularizerQ):
        return q
    if q is None:
        return RegularizerQ.from_matrix(np.zeros((n, n)), "none")
    return RegularizerQ.from_matrix(q)


def objective(w, y, x, alpha=0.0, q=None, beta=0.0) -> float:
    """f(x) = ||Wx - y||^2 + alpha x^T Q x - 2 beta sum(x)."""
    r = w @ x - y
    val = float(r @ r)
    if alpha:
        val += alpha * float(x @ _q_matrix(q, len(x)) @ x)
    if beta:
        val -= 2.0 * beta * float(np.sum(x))
    return val


def _estimate(w, y, x, alpha, q, beta, prov=None) -> SceneEstimate:
    x = np.asarray(x, dtype=float)
    return SceneEstimate(
        x=x,
        residual_norm=float(np.linalg.norm(w @ x - y)),
        cost=objective(w, y, x, alpha, q, beta),
        provenance=dict(prov or {}),
    )


def _solve_system(w, y, alpha, qm, beta):
    """Solve (W^T W + alpha Q) x = W^T y + beta 1.

    Returns (x, info). At alpha = 0 with a rank-deficient W the minimum-norm
    solution from a column-pivoted QR (LAPACK gelsy) is returned.
    """
    n = w.shape[1]
    a = w.T @ w
    if alpha:
        a = a + alpha * qm
    b = w.T @ y + beta
    if alpha == 0:
        rank = int(np.linalg.matrix_rank(w)) if w.size else 0
        if rank < n:
            log.warning("rank-deficient system at alpha=0 (rank %d < %d); "
                        "returning minimum-norm solution", rank, n)
            if beta == 0:
                x = scipy.linalg.lstsq(w, y, lapack_driver="gelsy")[0]
            else:
                x = scipy.linalg.lstsq(a, b, lapack_driver="gelsy")[0]
            return x, {"method": "min-norm-qr", "rank": rank}
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError:
        rank = int(np.linalg.matrix_rank(a))
        raise SingularSystemError(
            f"system matrix not positive definite (rank {rank} of {n})", rank=rank
        ) from None
    # rounding can leave a tiny positive pivot on an exactly singular matrix
    piv = np.abs(np.diag(factor[0]))
    if piv.size and (piv.min() / piv.max()) ** 2 < SINGULAR_RCOND:
        rank = int(np.linalg.matrix_rank(a))
        raise SingularSystemError(
            f"system matrix numerically singular (rank {rank} of {n})", rank=rank)
    x = scipy.linalg.cho_solve(factor, b)
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite solution")
    return x, {"method": "cholesky", "rank": n}


def solve_generic(w, y, alpha=0.0, q=None, beta=0.0) -> SceneEstimate:
    """x = (W^T W + alpha Q)^-1 (W^T y + beta 1)."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    qm = _q_matrix(q, w.shape[1])
    x, info = _solve_system(w, y, alpha, qm, beta)
    return _estimate(w, y, x, alpha, qm, beta,
                     dict(solver="generic", alpha=alpha, beta=beta, **info))


def solve_regularized_ls(w, y, alpha=0.0, q=None) -> SceneEstimate:
    est = solve_generic(w, y, alpha, q, 0.0)
    est.provenance["solver"] = "tikhonov"
    return est


def solve_map_gaussian(w, y, cov, sigma_n2, mean=0.0) -> SceneEstimate:
    """MAP estimate under a N(mean * 1, C_x) prior and AWGN of variance sigma_n2."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    cov = np.asarray(cov, dtype=float)
    try:
        cf = scipy.linalg.cho_factor(cov, lower=True)
    except np.linalg.LinAlgError:
        raise ValidationError("prior covariance is not positive definite") from None
    prec = sigma_n2 * scipy.linalg.cho_solve(cf, np.eye(len(cov)))
    prec = 0.5 * (prec + prec.T)
    a = w.T @ w + prec
    b = w.T @ y + mean * (prec @ np.ones(len(cov)))
    try:
        x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(a, lower=True), b)
    except np.linalg.LinAlgError:
        raise SingularSystemError("MAP system not positive definite") from None
    r = w @ x - y
    d = x - mean
    return SceneEstimate(
        x=x,
        residual_norm=float(np.linalg.norm(r)),
        cost=float(r @ r + d @ prec @ d),
        provenance={"solver": "map-gaussian", "sigma_n2": sigma_n2, "mean": mean},
    )


def solve_map_exponential(w, y, sigma_n2, mean, alpha=0.0, q=None) -> SceneEstimate:
    """Unconstrained MAP estimate under an i.i.d. exponential prior of mean ``mean``.

    Entries may come out negative; a negative-data policy is expected on top.
    Pass ``alpha > 0`` (with ``q``) when W^T W is singular.
    """
    if not mean > 0:
        raise ValidationError("exponential prior mean must be > 0")
    w = np.asarray(w, dtype=float)
    beta = -sigma_n2 / mean
    if alpha == 0 and np.linalg.matrix_rank(w) < w.shape[1]:
        raise SingularSystemError("W^T W is singular; supply alpha > 0",
                                  rank=int(np.linalg.matrix_rank(w)))
    est = solve_generic(w, y, alpha, q, beta)
    est.provenance["solver"] = "map-exponential"
    return est


def apply_negative_policy(w, y, config: SolverConfig, q=None) -> SceneEstimate:
    """Truncation pipelines: clamp y before solving, or clamp x after."""
    y = np.asarray(y, dtype=float)
    policy = config.neg_policy
    if policy == "trunc-y":
        y_used = np.maximum(y, 0.0)
        est = solve_generic(w, y_used, config.alpha, q, config.beta)
        # cost is reported against the observed data
        est = _estimate(np.asarray(w, float), y, est.x, config.alpha,
                        _q_matrix(q, len(est.x)), config.beta, est.provenance)
    elif policy == "trunc-x":
        est = solve_generic(w, y, config.alpha, q, config.beta)
        x = np.maximum(est.x, 0.0)
        active = tuple(np.flatnonzero(est.x < 0))
        est = _estimate(np.asarray(w, float), y, x, config.alpha,
                        _q_matrix(q, len(x)), config.beta, est.provenance)
        est.active_set = active
    elif policy == "none":
        est = solve_generic(w, y, config.alpha, q, config.beta)
    else:
        raise ValidationError(f"apply_negative_policy does not handle {policy!r}")
    est.provenance["neg_policy"] = policy
    return est


def solve_constrained_iterative(w, y, config: SolverConfig, q=None) -> SceneEstimate:
    """Approximate the x >= 0 constrained minimum by repeated support reduction.

    1. solve the generic system;
    2. drop voxels estimated negative (columns of W and of each D_d);
    3. re-solve on the reduced support;
    4. repeat up to ``max_iters`` solves in total.

    Negatives left after the last solve are clamped to zero.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    n = w.shape[1]
    reg = _as_regularizer(q, n)
    qfull = reg.q
    alpha, beta = config.alpha, config.beta
    keep = np.ones(n, dtype=bool)
    x = np.zeros(n)
    trace = []
    for it in range(config.max_iters):
        idx = np.flatnonzero(keep)
        x = np.zeros(n)
        if idx.size:
            sub = reg.restricted(idx) if it else reg
            try:
                xs, _ = _solve_system(w[:, idx], y, alpha, sub.q, beta)
            except SingularSystemError as exc:
                exc.iteration = it
                raise SingularSystemError(
                    f"reduced system singular at iteration {it}: {exc}",
                    rank=exc.rank, iteration=it) from None
            x[idx] = xs
        truncated = np.maximum(x, 0.0)
        trace.append({
            "iteration": it,
            "support": int(idx.size),
            "cost": objective(w, y, x, alpha, qfull, beta),
            "truncated_cost": objective(w, y, truncated, alpha, qfull, beta),
        })
        neg = x < 0
        if not np.any(neg):
            break
        keep &= ~neg
    dropped = ~keep | (x < 0)
    x = np.maximum(x, 0.0)
    x[~keep] = 0.0
    est = _estimate(w, y, x, alpha, qfull, beta,
                    dict(solver="iterative", neg_policy="iterative", alpha=alpha,
                         beta=beta, iterations=len(trace), trace=trace))
    est.active_set = tuple(int(i) for i in np.flatnonzero(dropped))
    return est


def default_step(w, alpha=0.0, q=None) -> float:
    """1 / ||W^T W + alpha Q||_inf, a row-sum bound on the largest eigenvalue."""
    a = w.T @ w + alpha * _q_matrix(q, w.shape[1])
    return 1.0 / float(np.max(np.sum(np.abs(a), axis=1)))


def solve_pgm(w, y, config: SolverConfig, q=None, x0=None) -> SceneEstimate:
    """Projected gradient descent on f over the nonnegative orthant.

    Starts from the truncate-x solution unless ``x0`` is given. With the
    default step the step is halved whenever the cost rises; an explicit
    ``config.mu`` that makes the cost rise raises :class:`DivergenceError`.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    n = w.shape[1]
    qm = _q_matrix(q, n)
    alpha, beta = config.alpha, config.beta
    a = w.T @ w + alpha * qm
    b = w.T @ y + beta
    if x0 is None:
        x0 = apply_negative_policy(w, y, replace(config, neg_policy="trunc-x"), qm).x
    x = np.maximum(np.asarray(x0, dtype=float), 0.0)
    adaptive = config.mu is None
    mu = default_step(w, alpha, qm) if adaptive else config.mu
    cost = objective(w, y, x, alpha, qm, beta)
    history = [cost]
    halvings = 0
    for k in range(config.pgm_iters):
        grad = 2.0 * (a @ x - b)
        x_new = np.maximum(x - mu * grad, 0.0)
        new_cost = objective(w, y, x_new, alpha, qm, beta)
        if new_cost > cost + config.tol * max(1.0, abs(cost)):
            if not adaptive:
                raise DivergenceError(
                    f"cost rose from {cost:.6g} to {new_cost:.6g} at iteration {k}; "
                    f"step mu={mu:g} is too large")
            while new_cost > cost and halvings < 60:
                mu *= 0.5
                halvings += 1
                x_new = np.maximum(x - mu * grad, 0.0)
                new_cost = objective(w, y, x_new, alpha, qm, beta)
        if np.array_equal(x_new, x):
            history.append(new_cost)
            break
        x, cost = x_new, new_cost
        history.append(cost)
    est = _estimate(w, y, x, alpha, qm, beta,
                    dict(solver="pgm", neg_policy="pgm", alpha=alpha, beta=beta,
                         mu=mu, iterations=len(history) - 1))
    est.cost_history = history
    est.active_set = tuple(int(i) for i in np.flatnonzero(x == 0))
    return est


def nnls_bruteforce_oracle(w, y, alpha=0.0, q=None, beta=0.0) -> SceneEstimate:
    """Exact x >= 0 minimizer of f by enumerating every zero/free support pattern."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    n = w.shape[1]
    if n > ORACLE_MAX_VOXELS:
        raise ValidationError(f"oracle enumeration limited to {ORACLE_MAX_VOXELS} voxels")
    qm = _q_matrix(q, n)
    a = w.T @ w + alpha * qm
    b = w.T @ y + beta
    best_x = np.zeros(n)
    best_cost = objective(w, y, best_x, alpha, qm, beta)
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            s = list(support)
            xs = scipy.linalg.lstsq(a[np.ix_(s, s)], b[s], lapack_driver="gelsd")[0]
            if np.any(xs < -1e-12 * scale):
                continue
            x = np.zeros(n)
            x[s] = np.maximum(xs, 0.0)
            c = objective(w, y, x, alpha, qm, beta)
            if c < best_cost:
                best_cost, best_x = c, x
    est = _estimate(w, y, best_x, alpha, qm, beta,
                    dict(solver="oracle", alpha=alpha, beta=beta))
    est.active_set = tuple(int(i) for i in np.flatnonzero(best_x == 0))
    return est


def solve(w, y, config: SolverConfig, q=None) -> SceneEstimate:
    """Dispatch on ``config.neg_policy``."""
    policy = config.neg_policy
    if policy in ("none", "trunc-x", "trunc-y"):
        return apply_negative_policy(w, y, config, q)
    if policy == "iterative":
        return solve_constrained_iterative(w, y, config, q)
    return solve_pgm(w, y, config, q)
