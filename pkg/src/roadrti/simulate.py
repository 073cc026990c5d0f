"""Synthetic scenes, noise models and RSS-drop measurement synthesis."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .grid import GridSpec
from .motion import center_reference, round_half_away, shift_scene

# two-component fit to measured fading noise, dB
MIXTURE_WEIGHTS = (0.548, 0.452)
MIXTURE_SIGMAS = (0.971, 3.003)


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder; membership uses the horizontal distance to the axis."""
    center: tuple[float, float]
    radius: float
    density: float = 1.0
    z_range: tuple[float, float] | None = None

    def contains(self, pts: np.ndarray) -> np.ndarray:
        dxy = np.linalg.norm(pts[:, :2] - np.asarray(self.center[:2], dtype=float), axis=1)
        inside = dxy < self.radius
        if self.z_range is not None:
            inside &= (pts[:, 2] >= self.z_range[0]) & (pts[:, 2] < self.z_range[1])
        return inside


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    density: float = 1.0

    def contains(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        return np.all((pts >= lo) & (pts < hi), axis=1)


def primitive_from_dict(d: dict):
    kind = d.get("type")
    density = float(d.get("density", 1.0))
    if kind == "cylinder":
        zr = d.get("z_range")
        return Cylinder(tuple(d["center"]), float(d["radius"]), density,
                        tuple(zr) if zr is not None else None)
    if kind == "box":
        return Box(tuple(d["lo"]), tuple(d["hi"]), density)
    raise ValidationError(f"unknown primitive type {kind!r}")


def primitive_to_dict(p) -> dict:
    if isinstance(p, Cylinder):
        out = {"type": "cylinder", "center": list(p.center), "radius": p.radius,
               "density": p.density}
        if p.z_range is not None:
            out["z_range"] = list(p.z_range)
        return out
    return {"type": "box", "lo": list(p.lo), "hi": list(p.hi), "density": p.density}


@dataclass
class Scene:
    grid: GridSpec
    x: np.ndarray
    primitives: list = field(default_factory=list)

    @property
    def occupancy(self) -> np.ndarray:
        return self.x > 0


def make_scene(grid: GridSpec, primitives: Sequence) -> Scene:
    """Each voxel takes the largest density among primitives containing its center."""
    prims = [primitive_from_dict(p) if isinstance(p, dict) else p for p in primitives]
    centers = grid.centers()
    x = np.zeros(grid.n_voxels)
    for p in prims:
        if p.density < 0 or not np.isfinite(p.density):
            raise ValidationError("primitive densities must be finite and >= 0")
        inside = p.contains(centers)
        x[inside] = np.maximum(x[inside], p.density)
    return Scene(grid, x, prims)


@dataclass(frozen=True)
class NoiseModel:
    variant: str = "none"
    sigma: float = 4.0
    weights: tuple = MIXTURE_WEIGHTS
    sigmas: tuple = MIXTURE_SIGMAS
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("none", "awgn", "mixture"):
            raise ValidationError(f"unknown noise model {self.variant!r}")
        if self.variant == "awgn" and not self.sigma > 0:
            raise ValidationError("AWGN sigma must be > 0")
        if self.variant == "mixture":
            if abs(sum(self.weights) - 1.0) > 1e-12 or len(self.weights) != len(self.sigmas):
                raise ValidationError("mixture weights must sum to 1, one per sigma")
            if min(self.sigmas) <= 0:
                raise ValidationError("mixture sigmas must be > 0")

    @property
    def std(self) -> float:
        if self.variant == "none":
            return 0.0
        if self.variant == "awgn":
            return self.sigma
        return float(np.sqrt(np.dot(self.weights, np.square(self.sigmas))))

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def draw(self, size, stream: int = 0) -> np.ndarray:
        rng = self.rng(stream)
        if self.variant == "none":
            return np.zeros(size)
        if self.variant == "awgn":
            return rng.normal(0.0, self.sigma, size)
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        return rng.normal(0.0, 1.0, size) * np.asarray(self.sigmas)[comp]


@dataclass
class MeasurementSet:
    frames: list
    baseline: np.ndarray | None = None
    link_ids: np.ndarray | None = None

    @property
    def n_links(self) -> int:
        return len(self.frames[0])


def simulate_measurement(w, scene, noise: NoiseModel | None = None,
                         stream: int = 0) -> np.ndarray:
    """y = W x + n; deterministic for a given (seed, stream)."""
    w = np.asarray(w, dtype=float)
    x = scene.x if isinstance(scene, Scene) else np.asarray(scene, dtype=float)
    if w.shape[1] != x.size:
        raise ValidationError(f"W has {w.shape[1]} columns but the scene has {x.size} voxels")
    y = w @ x
    if noise is not None:
        y = y + noise.draw(w.shape[0], stream)
    return y


def simulate_sequence(w, scene, v: float, n_frames: int, grid: GridSpec,
                      noise: NoiseModel | None = None, ref: int | None = None) -> MeasurementSet:
    """Frames of a vehicle moving ``v`` voxels/frame; frame ``ref`` shows the scene as is."""
    x = scene.x if isinstance(scene, Scene) else np.asarray(scene, dtype=float)
    if ref is None:
        ref = center_reference(n_frames)
    frames = []
    for i in range(n_frames):
        xi = shift_scene(x, round_half_away((i - ref) * v), grid)
        frames.append(simulate_measurement(w, xi, noise, stream=i))
    return MeasurementSet(frames)


def calibrate(raw_scans) -> np.ndarray:
    """Per-link mean RSS (dBm) of obstruction-free scans."""
    scans = [np.asarray(s, dtype=float) for s in raw_scans]
    if not scans:
        raise ValidationError("calibration needs at least one scan")
    if len({s.shape for s in scans}) != 1:
        raise ValidationError("calibration scans have mismatched lengths")
    return np.mean(np.vstack(scans), axis=0)


def rss_drop(baseline, current) -> np.ndarray:
    """Drop in dB, positive when a link becomes obstructed."""
    return np.asarray(baseline, dtype=float) - np.asarray(current, dtype=float)


def load_vehicle_library() -> dict:
    with resources.files("roadrti").joinpath("data/vehicles.json").open() as fh:
        return json.load(fh)


def vehicle_primitives(name: str, x_rear: float, y_lane: float, density: float | None = None,
                       library: dict | None = None) -> list:
    """Box primitives of a vehicle template placed with its rear at ``x_rear``."""
    library = library or load_vehicle_library()
    try:
        entry = library["vehicles"][name]
    except KeyError:
        raise ValidationError(f"unknown vehicle class {name!r}") from None
    rho = float(entry.get("density", library.get("density", 1.0)) if density is None else density)
    out = []
    for b in entry["boxes"]:
        lo = (x_rear + b["x"][0], y_lane + b["y"][0], b["z"][0])
        hi = (x_rear + b["x"][1], y_lane + b["y"][1], b["z"][1])
        out.append(Box(lo, hi, rho))
    return out
