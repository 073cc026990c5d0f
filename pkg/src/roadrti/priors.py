"""Difference operators, Tikhonov matrices and the exponential-correlation prior."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError, ValidationError
from .grid import GridSpec

SUM_OF_SQUARED_DIFFS = "sum_of_squared_diffs"
AVERAGED_FWD_BCK = "averaged_fwd_bck"
CONSTRUCTIONS = (SUM_OF_SQUARED_DIFFS, AVERAGED_FWD_BCK)

# dense covariance is only built for grids up to this size
MAX_DENSE_VOXELS = 2000


def _diff_1d(n: int, construction: str) -> np.ndarray:
    """1D first-difference operator on n samples.

    The averaged forward/backward variant appends two boundary rows of weight
    1/sqrt(2) so that D^T D has 1.5 in both corners.
    """
    rows = np.zeros((n - 1, n))
    i = np.arange(n - 1)
    rows[i, i] = -1.0
    rows[i, i + 1] = 1.0
    if construction == AVERAGED_FWD_BCK:
        edge = np.zeros((2, n))
        edge[0, 0] = edge[1, n - 1] = math.sqrt(0.5)
        rows = np.vstack([rows, edge])
    return rows


def difference_operators(grid: GridSpec, construction: str = AVERAGED_FWD_BCK):
    """Return (D_x, D_y, D_z) under the x-fastest voxel ordering.

    A dimension with a single voxel gets an empty (0 x N) operator.
    """
    if construction not in CONSTRUCTIONS:
        raise ValidationError(f"unknown Q construction {construction!r}")
    nx, ny, nz = grid.shape
    eyes = [np.eye(nx), np.eye(ny), np.eye(nz)]
    ops = []
    for axis, size in enumerate(grid.shape):
        if size == 1:
            ops.append(np.zeros((0, grid.n_voxels)))
            continue
        factors = list(eyes)
        factors[axis] = _diff_1d(size, construction)
        # x-fastest ordering: kron(z, kron(y, x))
        ops.append(np.kron(factors[2], np.kron(factors[1], factors[0])))
    return tuple(ops)


@dataclass(frozen=True)
class RegularizerQ:
    q: np.ndarray
    construction: str
    ops: tuple | None = None

    @classmethod
    def from_matrix(cls, q, construction: str = "custom") -> "RegularizerQ":
        q = np.asarray(q, dtype=float)
        return cls(0.5 * (q + q.T), construction, None)

    def restricted(self, keep: np.ndarray) -> "RegularizerQ":
        """Drop voxel columns from every D_d and rebuild Q on the kept support.

        A Q given without operators (e.g. an inverse covariance) is restricted
        to the kept rows and columns instead.
        """
        if self.ops is None:
            return RegularizerQ(self.q[np.ix_(keep, keep)], self.construction, None)
        ops = tuple(d[:, keep] for d in self.ops)
        n = ops[0].shape[1] if ops else int(np.count_nonzero(keep))
        return RegularizerQ(q_from_operators(ops, n), self.construction, ops)


def q_from_operators(ops, n: int) -> np.ndarray:
    q = np.zeros((n, n))
    for d in ops:
        q += d.T @ d
    return q


def build_q(grid: GridSpec, construction: str = AVERAGED_FWD_BCK) -> RegularizerQ:
    ops = difference_operators(grid, construction)
    return RegularizerQ(q_from_operators(ops, grid.n_voxels), construction, ops)


def identity_q(n: int) -> RegularizerQ:
    return RegularizerQ(np.eye(n), "identity", (np.eye(n),))


@dataclass(frozen=True)
class CovariancePrior:
    sigma_x2: float
    delta_c: float
    cov: np.ndarray
    mean: float = 0.0


def covariance_prior(grid: GridSpec, sigma_x2: float, delta_c: float,
                     mean: float = 0.0) -> CovariancePrior:
    if not (sigma_x2 > 0 and delta_c > 0):
        raise ValidationError("sigma_x^2 and delta_c must be positive")
    if grid.n_voxels > MAX_DENSE_VOXELS:
        raise ValidationError(f"dense covariance limited to {MAX_DENSE_VOXELS} voxels")
    c = grid.centers()
    dist = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
    return CovariancePrior(sigma_x2, delta_c, sigma_x2 * np.exp(-dist / delta_c), mean)


def correlation_coefficient(delta: float, delta_c: float) -> float:
    """Nearest-neighbour correlation exp(-delta/delta_c)."""
    return math.exp(-delta / delta_c)


def alpha_from_prior(sigma_n2: float, sigma_x2: float, c: float) -> float:
    """Regularization weight that matches alpha*Q to the inverse prior covariance."""
    if not 0 <= c < 1:
        raise ValidationError("correlation coefficient must lie in [0, 1)")
    return (sigma_n2 / sigma_x2) / (1.0 - c * c)


def alpha_from_prior_approx(sigma_n2: float, sigma_x2: float, delta: float,
                            delta_c: float) -> float:
    """Large-correlation-length approximation of :func:`alpha_from_prior`."""
    return sigma_n2 * delta_c / (sigma_x2 * 2.0 * delta)


def effective_prior_covariance(q: np.ndarray, alpha: float, sigma_n2: float) -> np.ndarray:
    """Prior covariance implied by Tikhonov weighting, sigma_n^2 (alpha Q)^-1."""
    a = alpha * np.asarray(q, dtype=float)
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        raise SingularSystemError("alpha*Q is singular",
                                  rank=int(np.linalg.matrix_rank(a))) from None
    if not np.all(np.isfinite(inv)) or np.linalg.cond(a) > 1e14:
        raise SingularSystemError("alpha*Q is numerically singular",
                                  rank=int(np.linalg.matrix_rank(a)))
    out = sigma_n2 * inv
    return 0.5 * (out + out.T)


def tridiagonal_inverse_covariance(n: int, sigma_n2: float, sigma_x2: float,
                                   c: float) -> np.ndarray:
    """sigma_n^2 C_x^-1 for a 1D exponential (AR(1)) prior, in closed form."""
    t = np.zeros((n, n))
    i = np.arange(n)
    t[i, i] = 1.0 + c * c
    t[0, 0] = t[-1, -1] = 1.0
    t[i[:-1], i[:-1] + 1] = -c
    t[i[:-1] + 1, i[:-1]] = -c
    return (sigma_n2 / sigma_x2) / (1.0 - c * c) * t
