"""Link-to-voxel weight matrices, W = S * Omega (element-wise).

Selection models decide which voxels a link sees; magnitude models give the
weight value. ``Line``/``Line`` (chord length through the voxel) is the
default.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .grid import GridSpec, Link, chord_matrix, focal_distance_matrices

SELECTIONS = ("ellipse", "line", "all")
MAGNITUDES = ("nesh", "line", "nesh-line", "expdec", "invarea")

# lower bound on lambda-tilde for the inverse-area model, meters
INVAREA_FLOOR = 1e-3


@dataclass(frozen=True)
class SelectionModel:
    variant: str = "line"
    lam: float = 0.03

    def __post_init__(self):
        if self.variant not in SELECTIONS:
            raise ValidationError(f"unknown selection model {self.variant!r}")
        if self.variant == "ellipse" and not self.lam > 0:
            raise ValidationError("ellipse selection needs lambda > 0")


@dataclass(frozen=True)
class MagnitudeModel:
    variant: str = "line"
    sigma_lambda: float = 0.5
    floor: float = INVAREA_FLOOR

    def __post_init__(self):
        if self.variant not in MAGNITUDES:
            raise ValidationError(f"unknown magnitude model {self.variant!r}")
        if self.variant == "expdec" and not self.sigma_lambda > 0:
            raise ValidationError("expdec magnitude needs sigma_lambda > 0")
        if not self.floor > 0:
            raise ValidationError("lambda floor must be > 0")


@dataclass(frozen=True)
class WeightMatrix:
    values: np.ndarray
    selection: SelectionModel
    magnitude: MagnitudeModel
    scale: float = 1.0

    @property
    def shape(self):
        return self.values.shape

    @property
    def provenance(self) -> dict:
        return {
            "selection": self.selection.variant,
            "lambda": self.selection.lam,
            "magnitude": self.magnitude.variant,
            "sigma_lambda": self.magnitude.sigma_lambda,
            "scale": self.scale,
        }


def lambda_tilde(link: Link, center) -> float:
    """Ellipse parameter that puts the voxel center on the ellipse boundary."""
    lt = math.dist(link.p0, center) + math.dist(link.p1, center) - link.length
    return max(lt, 0.0)


def _lambda_tilde_matrix(grid, links):
    d1, d2, d = focal_distance_matrices(grid, links)
    return np.maximum(d1 + d2 - d[:, None], 0.0), d1, d2, d


def selection_matrix(grid: GridSpec, links: Sequence[Link], model: SelectionModel,
                     chords: np.ndarray | None = None) -> np.ndarray:
    m, n = len(links), grid.n_voxels
    if model.variant == "all":
        return np.ones((m, n))
    if model.variant == "line":
        if chords is None:
            chords = chord_matrix(grid, links)
        return (chords > 0).astype(float)
    d1, d2, d = focal_distance_matrices(grid, links)
    return (d1 + d2 < d[:, None] + model.lam).astype(float)


def magnitude_matrix(grid: GridSpec, links: Sequence[Link], model: MagnitudeModel,
                     chords: np.ndarray | None = None) -> np.ndarray:
    m, n = len(links), grid.n_voxels
    d = np.array([l.length for l in links])
    if model.variant in ("line", "nesh-line") and chords is None:
        chords = chord_matrix(grid, links)
    if model.variant == "nesh":
        return np.repeat(d[:, None] ** -0.5, n, axis=1)
    if model.variant == "line":
        return chords.copy()
    if model.variant == "nesh-line":
        return chords * d[:, None] ** -0.5
    lt, _, _, _ = _lambda_tilde_matrix(grid, links)
    if model.variant == "expdec":
        return np.exp(-lt / (2.0 * model.sigma_lambda))
    lt = np.maximum(lt, model.floor)
    dd = d[:, None]
    area = math.pi / 4.0 * (dd + lt) * np.sqrt(2.0 * dd * lt + lt ** 2)
    return 1.0 / area


def build_weight_matrix(grid: GridSpec, links: Sequence[Link],
                        sel: SelectionModel | None = None,
                        mag: MagnitudeModel | None = None,
                        normalize: bool = False) -> WeightMatrix:
    """Assemble W = S * Omega.

    With ``normalize`` the matrix is scaled so its Frobenius norm matches the
    Line/Line matrix of the same geometry, which keeps one regularization
    weight meaningful across models.
    """
    sel = sel or SelectionModel()
    mag = mag or MagnitudeModel()
    needs_chords = sel.variant == "line" or mag.variant in ("line", "nesh-line") or normalize
    chords = chord_matrix(grid, links) if needs_chords else None
    w = selection_matrix(grid, links, sel, chords) * magnitude_matrix(grid, links, mag, chords)
    if not np.any(w):
        raise ValidationError("weight matrix is all zero: no link touches any voxel")
    scale = 1.0
    if normalize:
        ref = np.linalg.norm(chords)
        if ref == 0:
            raise ValidationError("no link crosses the grid; cannot normalize to the Line model")
        scale = float(ref / np.linalg.norm(w))
        w = w * scale
    return WeightMatrix(w, sel, mag, scale)
