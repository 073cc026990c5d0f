"""Voxel grid, sensor layout and link geometry.

Voxels are indexed with x (along the road) varying fastest, then y
(across the road), then z (vertical): ``n = ix + nx * (iy + ny * iz)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ValidationError

# chord pieces shorter than this are treated as grazing contact
GRAZE_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        for name in ("dx", "dy", "dz"):
            if not float(getattr(self, name)) > 0:
                raise ValidationError(f"{name} must be > 0")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def spacing(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz])

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.spacing * np.array(self.shape)

    def unravel(self, n: int) -> tuple[int, int, int]:
        if not 0 <= n < self.n_voxels:
            raise IndexError(f"voxel index {n} out of range [0, {self.n_voxels})")
        ix = n % self.nx
        iy = (n // self.nx) % self.ny
        iz = n // (self.nx * self.ny)
        return ix, iy, iz

    def ravel(self, ix: int, iy: int, iz: int) -> int:
        if not (0 <= ix < self.nx and 0 <= iy < self.ny and 0 <= iz < self.nz):
            raise IndexError(f"voxel ({ix}, {iy}, {iz}) outside grid {self.shape}")
        return ix + self.nx * (iy + self.ny * iz)

    def centers(self) -> np.ndarray:
        """All voxel centers as an (N, 3) array in index order."""
        iz, iy, ix = np.meshgrid(
            np.arange(self.nz), np.arange(self.ny), np.arange(self.nx), indexing="ij"
        )
        idx = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)
        return self.lower + (idx + 0.5) * self.spacing

    def to_volume(self, x: np.ndarray) -> np.ndarray:
        """Reshape an N-vector to a (nz, ny, nx) array."""
        return np.asarray(x).reshape(self.nz, self.ny, self.nx)

    def to_dict(self) -> dict:
        return {
            "n": [self.nx, self.ny, self.nz],
            "d": [self.dx, self.dy, self.dz],
            "origin": list(self.origin),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        try:
            n, d = data["n"], data["d"]
            origin = data.get("origin", [0.0, 0.0, 0.0])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed grid description: {exc}") from None
        if len(n) != 3 or len(d) != 3 or len(origin) != 3:
            raise ValidationError("grid 'n', 'd' and 'origin' need three entries each")
        return cls(int(n[0]), int(n[1]), int(n[2]),
                   float(d[0]), float(d[1]), float(d[2]), tuple(origin))


class Topology(str, Enum):
    FULL_MESH = "full_mesh"
    CROSS_ROAD = "cross_road"


@dataclass(frozen=True)
class Sensor:
    id: int
    pos: tuple[float, float, float]
    side: str | None = None


@dataclass(frozen=True)
class Link:
    link_id: int
    tx_id: int
    rx_id: int
    p0: tuple[float, float, float]
    p1: tuple[float, float, float]

    @property
    def length(self) -> float:
        return math.dist(self.p0, self.p1)

    def reversed(self) -> "Link":
        return Link(self.link_id, self.rx_id, self.tx_id, self.p1, self.p0)


@dataclass(frozen=True)
class SensorLayout:
    sensors: tuple[Sensor, ...]
    topology: Topology = Topology.FULL_MESH

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "topology", Topology(self.topology))
        ids = [s.id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ValidationError("sensor ids must be unique")
        if len(ids) < 2:
            raise ValidationError("a layout needs at least two sensors")

    @property
    def k(self) -> int:
        return len(self.sensors)

    def to_dict(self) -> dict:
        out = []
        for s in self.sensors:
            item = {"id": s.id, "pos": list(s.pos)}
            if s.side is not None:
                item["side"] = s.side
            out.append(item)
        return {"sensors": out, "topology": self.topology.value}

    @classmethod
    def from_dict(cls, data: dict) -> "SensorLayout":
        try:
            sensors = [
                Sensor(int(s["id"]), tuple(float(v) for v in s["pos"]), s.get("side"))
                for s in data["sensors"]
            ]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed sensor layout: {exc}") from None
        return cls(tuple(sensors), Topology(data.get("topology", "full_mesh")))


def voxel_center(grid: GridSpec, n: int) -> np.ndarray:
    ix, iy, iz = grid.unravel(n)
    return grid.lower + (np.array([ix, iy, iz]) + 0.5) * grid.spacing


def enumerate_links(layout: SensorLayout) -> list[Link]:
    """Build the link list for a layout; ids are dense from 0."""
    sensors = layout.sensors
    if layout.topology is Topology.FULL_MESH:
        pairs = list(itertools.combinations(sensors, 2))
    else:
        sides = {s.side for s in sensors}
        if None in sides or not sides <= {"L", "R"}:
            raise ValidationError("cross_road layouts need side 'L' or 'R' on every sensor")
        left = [s for s in sensors if s.side == "L"]
        right = [s for s in sensors if s.side == "R"]
        if len(sensors) % 2 or len(left) != len(right):
            raise ValidationError("cross_road layouts need an even K split equally by side")
        pairs = [(a, b) for a in left for b in right]
    links = []
    for a, b in pairs:
        if math.dist(a.pos, b.pos) <= 0:
            raise ValidationError(f"sensors {a.id} and {b.id} share a position")
        links.append(Link(len(links), a.id, b.id, a.pos, b.pos))
    return links


def focal_distances(link: Link, center) -> tuple[float, float]:
    return math.dist(link.p0, center), math.dist(link.p1, center)


def _clip_segment(p0, p1, lo, hi):
    """Parametric slab clipping of p0 + t (p1 - p0), t in [0, 1], to a closed box.

    Returns (t_enter, t_exit) or None when the segment misses the box.
    """
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    t0, t1 = 0.0, 1.0
    for k in range(3):
        if d[k] == 0.0:
            if p0[k] < lo[k] or p0[k] > hi[k]:
                return None
            continue
        # a subnormal direction overflows to +-inf, which the slab test handles
        with np.errstate(over="ignore"):
            ta = (lo[k] - p0[k]) / d[k]
            tb = (hi[k] - p0[k]) / d[k]
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return t0, t1


def segment_length_in_voxel(grid: GridSpec, n: int, link: Link) -> float:
    """Chord length of a link inside one voxel.

    Boxes are half-open ``[lo, hi)`` along each axis, closed on the grid's
    outer faces, so a segment lying in a shared face is credited to the voxel
    with the larger index along the face normal.
    """
    idx = np.array(grid.unravel(n))
    lo = grid.lower + idx * grid.spacing
    hi = lo + grid.spacing
    clip = _clip_segment(link.p0, link.p1, lo, hi)
    if clip is None:
        return 0.0
    p0 = np.asarray(link.p0, dtype=float)
    d = np.asarray(link.p1, dtype=float) - p0
    for k in range(3):
        # face-lying segment on an interior upper face belongs to the neighbour
        if d[k] == 0.0 and p0[k] == hi[k] and idx[k] < grid.shape[k] - 1:
            return 0.0
    length = (clip[1] - clip[0]) * float(np.linalg.norm(d))
    return length if length >= GRAZE_TOL else 0.0


def link_chords(grid: GridSpec, link: Link) -> tuple[np.ndarray, np.ndarray]:
    """All nonzero chord lengths of one link through the grid.

    Siddon-style traversal: every plane crossing splits the segment, each
    piece is assigned to the voxel containing its midpoint.

    Returns
    -------
    voxels : int array of voxel indices (unique, ascending)
    lengths : chord length in each of those voxels
    """
    p0 = np.asarray(link.p0, dtype=float)
    d = np.asarray(link.p1, dtype=float) - p0
    lo, hi = grid.lower, grid.upper
    clip = _clip_segment(p0, p0 + d, lo, hi)
    empty = (np.zeros(0, dtype=int), np.zeros(0))
    if clip is None or clip[1] - clip[0] <= 0:
        return empty
    ts = [np.array(clip)]
    for k in range(3):
        if d[k] != 0.0:
            planes = lo[k] + np.arange(1, grid.shape[k]) * grid.spacing[k]
            with np.errstate(over="ignore"):
                t = (planes - p0[k]) / d[k]
            ts.append(t[(t > clip[0]) & (t < clip[1])])
    t = np.unique(np.concatenate(ts))
    seg_len = np.diff(t) * float(np.linalg.norm(d))
    mid = p0 + np.outer(0.5 * (t[:-1] + t[1:]), d)
    shape = np.array(grid.shape)
    cell = np.floor((mid - lo) / grid.spacing).astype(int)
    # closed outer faces
    cell = np.clip(cell, 0, shape - 1)
    keep = seg_len >= GRAZE_TOL
    cell, seg_len = cell[keep], seg_len[keep]
    vox = cell[:, 0] + grid.nx * (cell[:, 1] + grid.ny * cell[:, 2])
    out = np.zeros(grid.n_voxels)
    np.add.at(out, vox, seg_len)
    nz = np.flatnonzero(out)
    return nz, out[nz]


def chord_matrix(grid: GridSpec, links: Sequence[Link]) -> np.ndarray:
    """Dense M x N matrix of chord lengths L[m, n]."""
    out = np.zeros((len(links), grid.n_voxels))
    for m, link in enumerate(links):
        vox, lengths = link_chords(grid, link)
        out[m, vox] = lengths
    return out


def focal_distance_matrices(grid: GridSpec, links: Sequence[Link]):
    """(d1, d2, d) for every link/voxel pair; d1, d2 are M x N, d is length M."""
    c = grid.centers()
    p0 = np.array([l.p0 for l in links], dtype=float)
    p1 = np.array([l.p1 for l in links], dtype=float)
    d1 = np.linalg.norm(c[None, :, :] - p0[:, None, :], axis=2)
    d2 = np.linalg.norm(c[None, :, :] - p1[:, None, :], axis=2)
    d = np.linalg.norm(p1 - p0, axis=1)
    return d1, d2, d


def box_intersection_length(grid: GridSpec, link: Link) -> float:
    """Length of a link's intersection with the grid's bounding box."""
    clip = _clip_segment(link.p0, link.p1, grid.lower, grid.upper)
    if clip is None:
        return 0.0
    return (clip[1] - clip[0]) * link.length
