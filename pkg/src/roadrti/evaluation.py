"""Reconstruction scoring: RMSE, occupancy ROC curves and template-matching ATR."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .grid import GridSpec
from .simulate import make_scene, vehicle_primitives

# occupancy threshold, dB/m; tuned on measured field data, override for other scenes
DEFAULT_GAMMA = 0.275


def rmse(x_hat, x_true) -> float:
    x_hat, x_true = np.asarray(x_hat, float), np.asarray(x_true, float)
    if x_hat.shape != x_true.shape:
        raise ValidationError(f"length mismatch: {x_hat.shape} vs {x_true.shape}")
    return float(np.sqrt(np.mean((x_hat - x_true) ** 2)))


def occupancy_mask(x_hat, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Voxels strictly above the threshold are declared occupied."""
    if gamma < 0:
        raise ValidationError("threshold must be >= 0")
    return np.asarray(x_hat) > gamma


@dataclass
class RocCurve:
    gamma: np.ndarray
    pf: np.ndarray
    pd: np.ndarray

    def as_rows(self):
        return list(zip(self.gamma.tolist(), self.pf.tolist(), self.pd.tolist()))

    def pd_at(self, pf_grid) -> np.ndarray:
        """Best P_d reachable at each P_f, linearly interpolated between points."""
        order = np.lexsort((self.pd, self.pf))
        pf, pd = self.pf[order], self.pd[order]
        upf = np.unique(pf)
        upd = np.array([pd[pf == v].max() for v in upf])
        upd = np.maximum.accumulate(upd)
        return np.interp(pf_grid, upf, upd)


def default_gammas(estimates, n: int = 200, lo: float = 1e-3) -> np.ndarray:
    top = max(float(np.max(e)) for e in estimates)
    if top <= lo:
        return np.array([lo])
    return np.geomspace(lo, top, n)


def roc_curve(estimates: Sequence, truths: Sequence, gammas=None) -> RocCurve:
    """Pooled (over frames and voxels) false-alarm and detection rates per threshold.

    The emitted curve is ordered by decreasing threshold and always carries
    the limits (0, 0) at +inf and (1, 1) at -inf.
    """
    if len(estimates) != len(truths):
        raise ValidationError("estimates and truths must align")
    est = np.concatenate([np.asarray(e, float).ravel() for e in estimates])
    truth = np.concatenate([np.asarray(t, bool).ravel() for t in truths])
    if est.shape != truth.shape:
        raise ValidationError("estimate and truth sizes differ")
    n_occ = int(truth.sum())
    n_empty = truth.size - n_occ
    if n_occ == 0:
        raise ValidationError("truth has no occupied voxels; P_d is undefined")
    if n_empty == 0:
        raise ValidationError("truth has no empty voxels; P_f is undefined")
    if gammas is None:
        gammas = default_gammas(estimates)
    g = np.concatenate([[np.inf], np.sort(np.asarray(gammas, float))[::-1], [-np.inf]])
    # counts of estimates strictly above each threshold
    occ_sorted = np.sort(est[truth])
    emp_sorted = np.sort(est[~truth])
    det = n_occ - np.searchsorted(occ_sorted, g, side="right")
    fa = n_empty - np.searchsorted(emp_sorted, g, side="right")
    return RocCurve(g, fa / n_empty, det / n_occ)


def average_roc(curves: Sequence[RocCurve], pf_grid=None):
    """Average P_d across curves at common P_f values."""
    if pf_grid is None:
        pf_grid = np.linspace(0.0, 1.0, 101)
    pf_grid = np.asarray(pf_grid, float)
    return pf_grid, np.mean([c.pd_at(pf_grid) for c in curves], axis=0)


@dataclass(frozen=True)
class AtrTemplate:
    name: str
    mask: np.ndarray

    def __post_init__(self):
        if not np.any(self.mask):
            raise ValidationError(f"template {self.name!r} has no occupied voxel")


@dataclass
class AtrResult:
    winner: str
    agreement: dict
    gamma: float

    def report(self) -> dict:
        return {"winner": self.winner, "gamma": self.gamma,
                "agreement": {k: int(v) for k, v in self.agreement.items()}}


def atr_classify(x_hat, templates: Sequence[AtrTemplate],
                 gamma: float = DEFAULT_GAMMA) -> AtrResult:
    """Pick the template agreeing with the thresholded image on the most voxels.

    Ties go to the earliest template in the list.
    """
    if not templates:
        raise ValidationError("need at least one template")
    occ = occupancy_mask(x_hat, gamma)
    agreement = {}
    for t in templates:
        mask = np.asarray(t.mask, bool)
        if mask.shape != occ.shape:
            raise ValidationError(f"template {t.name!r} does not match the grid")
        agreement[t.name] = int(np.sum(mask == occ))
    best = max(agreement.values())
    winner = next(t.name for t in templates if agreement[t.name] == best)
    return AtrResult(winner, agreement, gamma)


def vehicle_templates(grid: GridSpec, x_rear: float, y_lane: float,
                      names: Sequence[str] | None = None, library: dict | None = None):
    """Binary outline templates of library vehicles at a common placement."""
    from .simulate import load_vehicle_library

    library = library or load_vehicle_library()
    names = list(names or library.get("order", library["vehicles"]))
    out = []
    for name in names:
        scene = make_scene(grid, vehicle_primitives(name, x_rear, y_lane, 1.0, library))
        out.append(AtrTemplate(name, scene.x > 0))
    return out
