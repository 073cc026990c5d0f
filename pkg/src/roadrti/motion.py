"""Constant-velocity frame stacking and maximum-likelihood velocity search.

A shift of ``p`` voxels moves every along-road column of the scene towards
higher x index, zero-filling the vacated entries; ``p < 0`` moves it the
other way. As a matrix this is ``I (x) J0^p`` with J0 the lower shift.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericError, ValidationError
from .estimators import SceneEstimate, SolverConfig, objective, solve
from .grid import GridSpec

log = logging.getLogger(__name__)


def round_half_away(v: float) -> int:
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def shift_scene(x, p: int, grid: GridSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    vol = x.reshape(grid.nz * grid.ny, grid.nx)
    out = np.zeros_like(vol)
    if abs(p) >= grid.nx:
        log.warning("shift of %d voxels moves the whole scene out of a grid with nx=%d",
                    p, grid.nx)
        return out.ravel()
    if p >= 0:
        out[:, p:] = vol[:, :grid.nx - p]
    else:
        out[:, :p] = vol[:, -p:]
    return out.ravel()


def shift_matrix_1d(nx: int, p: int) -> np.ndarray:
    """J0^p; negative powers use the transpose."""
    return np.eye(nx, k=-p)


def shift_matrix(grid: GridSpec, p: int) -> np.ndarray:
    return np.kron(np.eye(grid.ny * grid.nz), shift_matrix_1d(grid.nx, p))


def shift_columns(w: np.ndarray, p: int, grid: GridSpec) -> np.ndarray:
    """W J^p without forming J: column n of the result is column (n + p along x) of W."""
    w = np.asarray(w, dtype=float)
    m = w.shape[0]
    cols = w.reshape(m, grid.nz * grid.ny, grid.nx)
    out = np.zeros_like(cols)
    if abs(p) < grid.nx:
        if p >= 0:
            out[:, :, :grid.nx - p] = cols[:, :, p:]
        else:
            out[:, :, -p:] = cols[:, :, :grid.nx + p]
    return out.reshape(m, -1)


def center_reference(n_frames: int) -> int:
    """Center frame; the earlier of the two middle frames for even counts."""
    return (n_frames - 1) // 2


@dataclass
class FrameStack:
    frames: list
    ref: int
    v: float
    w_stack: np.ndarray
    y_stack: np.ndarray
    shifts: list = field(default_factory=list)


def stack_frames(w, frames: Sequence, v: float, grid: GridSpec,
                 ref: int | None = None) -> FrameStack:
    """Stack frames into one system: block i is W J^{round((i - ref) v)}."""
    w = np.asarray(w, dtype=float)
    frames = [np.asarray(f, dtype=float) for f in frames]
    if not frames:
        raise ValidationError("no frames to stack")
    m = w.shape[0]
    for i, f in enumerate(frames):
        if f.shape != (m,):
            raise ValidationError(f"frame {i} has length {f.size}, expected {m}")
    if ref is None:
        ref = center_reference(len(frames))
    if not 0 <= ref < len(frames):
        raise ValidationError(f"reference frame {ref} out of range")
    shifts = [round_half_away((i - ref) * v) for i in range(len(frames))]
    blocks = [shift_columns(w, p, grid) for p in shifts]
    return FrameStack(frames, ref, v, np.vstack(blocks), np.concatenate(frames), shifts)


@dataclass
class VelocityResult:
    v_hat: float
    estimate: SceneEstimate
    costs: dict
    estimates: dict


def estimate_velocity(w, frames, candidates, grid: GridSpec, config: SolverConfig,
                      q=None, ref: int | None = None,
                      include_regularizer: bool = False) -> VelocityResult:
    """Pick v minimizing the stacked residual ||W_stack x(v) - y_stack||^2.

    Ties go to the smallest |v| (then the smaller v).
    """
    candidates = list(candidates)
    if not candidates:
        raise ValidationError("no velocity candidates")
    costs, estimates = {}, {}
    for v in candidates:
        st = stack_frames(w, frames, v, grid, ref)
        try:
            est = solve(st.w_stack, st.y_stack, config, q)
        except NumericError as exc:
            log.warning("candidate v=%s failed: %s", v, exc)
            continue
        r = st.w_stack @ est.x - st.y_stack
        cost = float(r @ r)
        if include_regularizer:
            cost = objective(st.w_stack, st.y_stack, est.x, config.alpha,
                             getattr(q, "q", q), config.beta)
        costs[v], estimates[v] = cost, est
    if not costs:
        raise NumericError("every velocity candidate failed to solve")
    best = min(costs, key=lambda v: (costs[v], abs(v), v))
    return VelocityResult(best, estimates[best], costs, estimates)


def default_candidates(grid: GridSpec, vmin: int | None = None,
                       vmax: int | None = None) -> list[int]:
    lo = -(grid.nx - 1) if vmin is None else max(vmin, -(grid.nx - 1))
    hi = grid.nx - 1 if vmax is None else min(vmax, grid.nx - 1)
    return list(range(lo, hi + 1))


def meters_to_voxels(v_mps: float, dx: float) -> float:
    """Convert meters/frame to voxels/frame."""
    return v_mps / dx
