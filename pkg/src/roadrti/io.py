"""CSV/JSON/PGM readers and writers. Floats are written with ``repr`` so they read back exactly."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .estimators import SceneEstimate
from .evaluation import RocCurve
from .grid import GridSpec, Link
from .simulate import MeasurementSet

MEASUREMENT_HEADER = ["frame", "link_id", "tx", "rx", "drop_db"]
CALIBRATION_HEADER = ["scan", "link_id", "rss_dbm"]
ESTIMATE_HEADER = ["voxel", "x_db_per_m"]
ROC_HEADER = ["gamma", "pf", "pd"]
RAW_HEADER = ["voxel", "ix", "iy", "iz", "x", "y", "z", "value"]


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _finite(v: str, where: str) -> float:
    try:
        f = float(v)
    except ValueError:
        raise ValidationError(f"{where}: {v!r} is not a number") from None
    if math.isnan(f):
        raise ValidationError(f"{where}: NaN value")
    return f


def _int(v: str, where: str) -> int:
    try:
        return int(v)
    except ValueError:
        raise ValidationError(f"{where}: {v!r} is not an integer") from None


def _open_csv(path, header: list[str]):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != header:
        raise ValidationError(f"{path}: expected header {','.join(header)}")
    return [r for r in rows[1:] if r]


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([c if isinstance(c, str) else fmt(c) for c in r])
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data))
    return path


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- measurements

def write_measurements(path, ms: MeasurementSet, links: Sequence[Link]) -> Path:
    if any(len(f) != len(links) for f in ms.frames):
        raise ValidationError("frame length does not match the link count")
    rows = ((i, l.link_id, l.tx_id, l.rx_id, float(f[j]))
            for i, f in enumerate(ms.frames) for j, l in enumerate(links))
    return _write_csv(path, MEASUREMENT_HEADER, rows)


def load_measurements(path, links: Sequence[Link] | None = None) -> MeasurementSet:
    """Group rows into frames ordered by link id.

    Frame indices must be non-decreasing down the file; with ``links`` given,
    ids and tx/rx pairs are checked against the layout and every frame must
    cover every link exactly once.
    """
    rows = _open_csv(path, MEASUREMENT_HEADER)
    if not rows:
        raise ValidationError(f"{path}: no frames")
    known = {l.link_id: l for l in links} if links is not None else None
    frames: dict[int, dict[int, float]] = {}
    last = None
    for k, r in enumerate(rows, start=2):
        where = f"{path}:{k}"
        if len(r) != len(MEASUREMENT_HEADER):
            raise ValidationError(f"{where}: expected {len(MEASUREMENT_HEADER)} columns")
        frame, lid, tx, rx = (_int(v, where) for v in r[:4])
        drop = _finite(r[4], where)
        if last is not None and frame < last:
            raise ValidationError(f"{where}: frame indices must be non-decreasing")
        last = frame
        if known is not None:
            if lid not in known:
                raise ValidationError(f"{where}: unknown link id {lid}")
            if (known[lid].tx_id, known[lid].rx_id) != (tx, rx):
                raise ValidationError(f"{where}: link {lid} is ({known[lid].tx_id},"
                                      f"{known[lid].rx_id}), not ({tx},{rx})")
        bucket = frames.setdefault(frame, {})
        if lid in bucket:
            raise ValidationError(f"{where}: duplicate link {lid} in frame {frame}")
        bucket[lid] = drop
    ids = sorted(known) if known is not None else sorted(next(iter(frames.values())))
    out = []
    for f, bucket in frames.items():
        if sorted(bucket) != ids:
            raise ValidationError(f"{path}: frame {f} does not cover the link set")
        out.append(np.array([bucket[i] for i in ids]))
    return MeasurementSet(out, link_ids=np.array(ids))


def write_scans(path, scans, link_ids) -> Path:
    rows = ((s, int(lid), float(v)) for s, scan in enumerate(scans)
            for lid, v in zip(link_ids, scan))
    return _write_csv(path, CALIBRATION_HEADER, rows)


def load_scans(path, links: Sequence[Link] | None = None):
    """RSS scans in the calibration format; returns (scans, link_ids)."""
    rows = _open_csv(path, CALIBRATION_HEADER)
    if not rows:
        raise ValidationError(f"{path}: no scans")
    known = {l.link_id for l in links} if links is not None else None
    scans: dict[int, dict[int, float]] = {}
    last = None
    for k, r in enumerate(rows, start=2):
        where = f"{path}:{k}"
        if len(r) != 3:
            raise ValidationError(f"{where}: expected 3 columns")
        s, lid = _int(r[0], where), _int(r[1], where)
        if last is not None and s < last:
            raise ValidationError(f"{where}: scan indices must be non-decreasing")
        last = s
        if known is not None and lid not in known:
            raise ValidationError(f"{where}: unknown link id {lid}")
        scans.setdefault(s, {})[lid] = _finite(r[2], where)
    ids = sorted(known) if known is not None else sorted(next(iter(scans.values())))
    out = []
    for s, bucket in scans.items():
        if sorted(bucket) != ids:
            raise ValidationError(f"{path}: scan {s} does not cover the link set")
        out.append(np.array([bucket[i] for i in ids]))
    return out, np.array(ids)


# ---------------------------------------------------------------- estimates

def write_estimate(path, est: SceneEstimate, extra: dict | None = None) -> tuple[Path, Path]:
    """Estimate CSV plus a JSON sidecar next to it."""
    path = Path(path)
    csv_path = _write_csv(path, ESTIMATE_HEADER, enumerate(np.asarray(est.x, float)))
    side = est.sidecar()
    if extra:
        side.update(extra)
    return csv_path, write_json(path.with_suffix(".json"), side)


def write_vector(path, x) -> Path:
    return _write_csv(path, ESTIMATE_HEADER, enumerate(np.asarray(x, float)))


def load_vector(path, n: int | None = None) -> np.ndarray:
    rows = _open_csv(path, ESTIMATE_HEADER)
    idx = [_int(r[0], f"{path}") for r in rows]
    if idx != list(range(len(idx))):
        raise ValidationError(f"{path}: voxel indices must run 0..N-1 in order")
    if n is not None and len(idx) != n:
        raise ValidationError(f"{path}: {len(idx)} voxels, grid has {n}")
    return np.array([_finite(r[1], f"{path}") for r in rows])


# ---------------------------------------------------------------- evaluation outputs

def write_roc(path, curve: RocCurve) -> Path:
    return _write_csv(path, ROC_HEADER, curve.as_rows())


def load_roc(path) -> RocCurve:
    rows = _open_csv(path, ROC_HEADER)
    a = np.array([[float(v) for v in r] for r in rows]).reshape(-1, 3)
    return RocCurve(a[:, 0], a[:, 1], a[:, 2])


def write_table(path, header, rows) -> Path:
    return _write_csv(path, header, rows)


# ---------------------------------------------------------------- images

def pgm_bytes(img: np.ndarray, vmax: float) -> bytes:
    """Plain (P2) graymap, linear from [0, vmax] to [0, 255]; row 0 is the top row."""
    img = np.asarray(img, float)
    if img.size == 0:
        raise ValidationError("cannot render an empty image")
    if vmax > 0:
        g = np.rint(np.clip(img / vmax, 0.0, 1.0) * 255).astype(int)
    else:
        g = np.zeros(img.shape, int)
    h, w = g.shape
    lines = ["P2", f"{w} {h}", "255"] + [" ".join(str(v) for v in row) for row in g]
    return ("\n".join(lines) + "\n").encode()


def read_pgm(path) -> np.ndarray:
    tok = Path(path).read_text().split()
    if tok[0] != "P2":
        raise ValidationError(f"{path}: not a P2 graymap")
    w, h = int(tok[1]), int(tok[2])
    return np.array([int(t) for t in tok[4:4 + w * h]]).reshape(h, w)


def render_image(x, grid: GridSpec, outdir, stem: str = "estimate") -> dict:
    """Per-z-slice top views, a side view (max over y) and a raw CSV.

    Slices are ny rows by nx columns with y increasing downwards; the side
    view is nz rows by nx columns with the highest layer on top.
    """
    if grid.n_voxels == 0:
        raise ValidationError("zero-size grid")
    x = np.asarray(x, float)
    if x.size != grid.n_voxels:
        raise ValidationError(f"estimate has {x.size} voxels, grid has {grid.n_voxels}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    vol = grid.to_volume(x)
    vmax = float(max(x.max(), 0.0))
    files = []
    for iz in range(grid.nz):
        p = outdir / f"{stem}_z{iz}.pgm"
        p.write_bytes(pgm_bytes(vol[iz], vmax))
        files.append(p.name)
    side = outdir / f"{stem}_side.pgm"
    side.write_bytes(pgm_bytes(vol.max(axis=1)[::-1], vmax))
    files.append(side.name)
    centers = grid.centers()
    raw_rows = []
    for n in range(grid.n_voxels):
        ix, iy, iz = grid.unravel(n)
        raw_rows.append((n, ix, iy, iz, *centers[n], x[n]))
    raw = _write_csv(outdir / f"{stem}_raw.csv", RAW_HEADER, raw_rows)
    files.append(raw.name)
    meta = {"max_value": vmax, "maxval": 255, "files": files, "grid": grid.to_dict()}
    write_json(outdir / f"{stem}_render.json", meta)
    return meta
