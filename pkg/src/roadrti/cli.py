"""Command-line front end. Every command writes a run directory with a manifest.

Exit codes: 0 success, 1 validation/input error, 2 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from . import io
from .config import ExperimentConfig, build_layout
from .errors import NumericError, RTIError, ValidationError
from .estimators import NEG_POLICIES, solve
from .evaluation import atr_classify, occupancy_mask, rmse, roc_curve, vehicle_templates
from .grid import GridSpec, enumerate_links
from .motion import center_reference, default_candidates, estimate_velocity, stack_frames
from .planning import planning_report
from .priors import build_q
from .simulate import (MeasurementSet, NoiseModel, calibrate, make_scene, primitive_to_dict,
                       rss_drop, simulate_sequence, vehicle_primitives)
from .weights import MAGNITUDES, SELECTIONS, build_weight_matrix

log = logging.getLogger("roadrti")

FIGURES = ("9-10", "14", "roc", "atr", "motion", "oracle")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- run directory

class Run:
    """A run directory: inputs/ holds copies of every input file, outputs/ the artifacts."""

    def __init__(self, root: Path, command: str, name: str | None = None):
        stamp = name or time.strftime("%Y%m%d-%H%M%S") + f"-{command}"
        path = Path(root) / stamp
        k = 1
        while path.exists():
            path = Path(root) / f"{stamp}-{k}"
            k += 1
        self.path = path
        self.inputs = path / "inputs"
        self.outputs = path / "outputs"
        self.outputs.mkdir(parents=True)
        self.inputs.mkdir()
        self.input_digests: dict[str, str] = {}

    def add_input(self, label: str, src) -> Path:
        src = Path(src)
        if not src.is_file():
            raise ValidationError(f"file not found: {src}")
        dst = self.inputs / f"{label}{src.suffix}"
        shutil.copyfile(src, dst)
        self.input_digests[dst.name] = io.sha256(dst)
        return src

    def out(self, name: str) -> Path:
        return self.outputs / name

    def finish(self, command: str, argv, config, seed) -> Path:
        outputs = {str(p.relative_to(self.outputs)): io.sha256(p)
                   for p in sorted(self.outputs.rglob("*")) if p.is_file()}
        manifest = {"command": command, "argv": list(argv), "config": config, "seed": seed,
                    "inputs": self.input_digests, "outputs": outputs,
                    "version": __version__}
        return io.write_json(self.path / "manifest.json", manifest)


def _strip_location(argv):
    """Drop flags that only choose where the run directory goes."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in ("--out", "--run-name"):
            skip = True
            continue
        if a.startswith(("--out=", "--run-name=")):
            continue
        out.append(a)
    return out


# ---------------------------------------------------------------- argument surface

def _add_run_flags(p):
    p.add_argument("--out", default="runs", help="root directory for run folders")
    p.add_argument("--run-name", help="fixed run folder name instead of a timestamp")
    p.add_argument("--seed", type=int, default=0, help="base seed (RTI_SEED overrides)")


def _add_model_flags(p):
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--grid", help="grid JSON")
    p.add_argument("--layout", help="sensor layout JSON")
    g = p.add_argument_group("weights")
    g.add_argument("--select", choices=SELECTIONS)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--weights", choices=MAGNITUDES)
    g.add_argument("--sigma-lambda", type=float)
    g.add_argument("--normalize", action="store_true", default=None)
    s = p.add_argument_group("solver")
    s.add_argument("--alpha", help="regularization weight or 'auto'")
    s.add_argument("--sigma-n", type=float, help="noise std, dB")
    s.add_argument("--sigma-x", type=float, help="prior std, dB/m")
    s.add_argument("--delta-c", type=float, help="prior correlation distance, m")
    s.add_argument("--prior-mean", type=float)
    s.add_argument("--neg-policy", choices=NEG_POLICIES)
    s.add_argument("--beta", type=float)
    s.add_argument("--mu", type=float)
    s.add_argument("--iters", type=int, help="iteration limit of the iterative/PGM policy")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="roadrti", description="Radio tomographic imaging of roadside traffic.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="scan time, velocity limits and node capacity")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d-node", type=float, required=True)
    p.add_argument("--heights", type=int, default=1)
    p.add_argument("--rate", type=float, default=38400.0)
    p.add_argument("--frame-bytes", type=int, default=104)
    p.add_argument("--guard", type=float, default=0.0)
    p.add_argument("--proc", type=float, default=0.0)
    p.add_argument("--road-length", type=float)
    _add_run_flags(p)

    p = sub.add_parser("simulate", help="synthesize RSS-drop frames for a scene")
    _add_model_flags(p)
    p.add_argument("--scene", help="scene JSON (list of primitives)")
    p.add_argument("--noise", choices=["none", "awgn", "mixture"])
    p.add_argument("--n-frames", type=int)
    p.add_argument("--v", type=float, help="velocity, voxels/frame")
    p.add_argument("--calib-scans", type=int, default=0,
                   help="also write this many obstruction-free RSS scans plus raw RSS frames")
    _add_run_flags(p)

    p = sub.add_parser("calibrate", help="turn raw RSS scans into RSS drops")
    _add_model_flags(p)
    p.add_argument("--calib", required=True, help="obstruction-free scans CSV")
    p.add_argument("--raw", required=True, help="RSS scans to convert (same format)")
    _add_run_flags(p)

    p = sub.add_parser("reconstruct", help="image one frame, or stacked frames at a known velocity")
    _add_model_flags(p)
    p.add_argument("--measurements", required=True)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--v-true", type=float, help="stack every frame at this velocity, voxels/frame")
    p.add_argument("--ref", default="auto")
    p.add_argument("--truth", help="true density CSV, for RMSE")
    _add_run_flags(p)

    p = sub.add_parser("track", help="velocity search over stacked frames")
    _add_model_flags(p)
    p.add_argument("--frames", required=True, help="measurement CSV with several frames")
    p.add_argument("--ref", default="auto")
    p.add_argument("--vmin", type=int)
    p.add_argument("--vmax", type=int)
    p.add_argument("--v-true", type=float, help="skip the search and use this velocity")
    p.add_argument("--truth", help="true density CSV, for RMSE")
    _add_run_flags(p)

    p = sub.add_parser("evaluate", help="RMSE, ROC and template classification")
    p.add_argument("--config", help="experiment config JSON (for grid and gamma)")
    p.add_argument("--grid", help="grid JSON")
    p.add_argument("--estimate", action="append", required=True)
    p.add_argument("--truth", action="append", required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--atr", action="store_true", help="classify the first estimate")
    p.add_argument("--x-rear", type=float, default=2.0)
    p.add_argument("--y-lane", type=float, default=ex.LANE_Y)
    p.add_argument("--vehicles", nargs="+")
    _add_run_flags(p)

    p = sub.add_parser("render", help="PGM slices, side view and raw CSV of an estimate")
    p.add_argument("--config", help="experiment config JSON (for the grid)")
    p.add_argument("--grid", help="grid JSON")
    p.add_argument("--estimate", required=True)
    _add_run_flags(p)

    p = sub.add_parser("repro-fig", help="synthetic reproduction recipes")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--realizations", type=int, help="noise draws (9-10, 14) or trials (motion, oracle)")
    _add_run_flags(p)
    return ap


# ---------------------------------------------------------------- config resolution

def _seed(args) -> int:
    env = os.environ.get("RTI_SEED")
    if env is None or env == "":
        return args.seed
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"RTI_SEED must be an integer, got {env!r}") from None


def _resolve_config(args, run: Run, seed: int) -> ExperimentConfig:
    doc = {}
    if getattr(args, "config", None):
        doc = io.read_json(run.add_input("config", args.config))
    doc = json.loads(json.dumps(doc))
    if getattr(args, "grid", None):
        doc["grid"] = io.read_json(run.add_input("grid", args.grid))
    if getattr(args, "layout", None):
        doc["layout"] = io.read_json(run.add_input("layout", args.layout))
    if getattr(args, "scene", None):
        doc["scene"] = io.read_json(run.add_input("scene", args.scene))

    def put(section, key, value):
        if value is not None:
            doc.setdefault(section, {})[key] = value

    if hasattr(args, "select"):
        put("weights", "selection", args.select)
        put("weights", "lambda", args.lam)
        put("weights", "magnitude", args.weights)
        put("weights", "sigma_lambda", args.sigma_lambda)
        put("weights", "normalize", args.normalize)
        alpha = args.alpha
        if alpha is not None and alpha != "auto":
            try:
                alpha = float(alpha)
            except ValueError:
                raise ValidationError(f"--alpha must be a number or 'auto', got {alpha!r}") from None
        put("solver", "alpha", alpha)
        put("solver", "sigma_n", args.sigma_n)
        put("solver", "sigma_x", args.sigma_x)
        put("solver", "delta_c", args.delta_c)
        put("solver", "prior_mean", args.prior_mean)
        put("solver", "neg_policy", args.neg_policy)
        put("solver", "beta", args.beta)
        put("solver", "mu", args.mu)
        if args.iters is not None:
            put("solver", "max_iters", args.iters)
            put("solver", "pgm_iters", args.iters)
    if getattr(args, "noise", None):
        put("noise", "variant", args.noise)
    if getattr(args, "sigma_n", None) is not None and "noise" in doc:
        put("noise", "sigma", args.sigma_n)
    if hasattr(args, "n_frames"):
        put("motion", "n_frames", args.n_frames)
        put("motion", "v", args.v)
    if hasattr(args, "vmin"):
        put("motion", "vmin", args.vmin)
        put("motion", "vmax", args.vmax)
    if "noise" in doc or getattr(args, "noise", None):
        doc.setdefault("noise", {})["seed"] = seed
    missing = [k for k in ("grid", "layout") if k not in doc]
    if missing:
        raise ValidationError(f"missing {' and '.join(missing)}: pass --config or --grid/--layout")
    return ExperimentConfig.from_dict(doc)


def _grid_only(args, run: Run) -> tuple[GridSpec, dict]:
    doc = {}
    if args.config:
        doc = io.read_json(run.add_input("config", args.config))
        from .config import validate
        validate(doc)
    if args.grid:
        doc["grid"] = io.read_json(run.add_input("grid", args.grid))
    if "grid" not in doc:
        raise ValidationError("missing grid: pass --config or --grid")
    return GridSpec.from_dict(doc["grid"]), doc


def _system(cfg: ExperimentConfig):
    grid = cfg.grid_spec()
    links = enumerate_links(cfg.sensor_layout())
    sel, mag = cfg.weights.models()
    w = build_weight_matrix(grid, links, sel, mag, cfg.weights.normalize)
    q = build_q(grid, cfg.solver.q_construction)
    return grid, links, w, q


def _scene(cfg: ExperimentConfig, grid: GridSpec):
    prims = []
    for p in cfg.scene:
        if p.get("type") == "vehicle":
            prims.extend(vehicle_primitives(p["name"], p["x_rear"], p["y_lane"], p.get("density")))
        else:
            prims.append(p)
    return make_scene(grid, prims)


def _ref(value, n_frames: int) -> int:
    if value in (None, "auto"):
        return center_reference(n_frames)
    try:
        ref = int(value)
    except ValueError:
        raise ValidationError(f"--ref must be 'auto' or a frame index, got {value!r}") from None
    if not 0 <= ref < n_frames:
        raise ValidationError(f"--ref {ref} outside 0..{n_frames - 1}")
    return ref


# ---------------------------------------------------------------- commands

def cmd_plan(args, run, seed):
    rep = planning_report(args.k, args.d_node, args.heights, args.rate, args.frame_bytes,
                          args.guard, args.proc, args.road_length)
    io.write_json(run.out("plan.json"), rep)
    print(io.dumps(rep), end="")
    keys = ("k", "d_node", "heights", "rate", "frame_bytes", "guard", "proc", "road_length")
    return {"plan": {k: getattr(args, k) for k in keys}}


def cmd_simulate(args, run, seed):
    cfg = _resolve_config(args, run, seed)
    grid, links, w, _ = _system(cfg)
    scene = _scene(cfg, grid)
    noise = NoiseModel(cfg.noise.variant, cfg.noise.sigma, seed=cfg.noise.seed)
    n_frames = cfg.motion.n_frames
    ms = simulate_sequence(w.values, scene, cfg.motion.v, n_frames, grid, noise,
                           _ref(cfg.motion.ref, n_frames))
    io.write_measurements(run.out("measurements.csv"), ms, links)
    io.write_vector(run.out("truth.csv"), scene.x)
    io.write_json(run.out("scene.json"), [primitive_to_dict(p) for p in scene.primitives])
    io.write_json(run.out("grid.json"), grid.to_dict())
    io.write_json(run.out("layout.json"), cfg.sensor_layout().to_dict())
    if args.calib_scans > 0:
        # free-space-like link baseline; calibration noise uses streams past the frames
        lengths = np.array([l.length for l in links])
        base = -40.0 - 20.0 * np.log10(np.maximum(lengths, 1e-3))
        ids = [l.link_id for l in links]
        scans = [base + noise.draw(len(links), stream=n_frames + s) for s in range(args.calib_scans)]
        io.write_scans(run.out("calibration.csv"), scans, ids)
        io.write_scans(run.out("raw.csv"), [base - y for y in ms.frames], ids)
    print(f"simulated {n_frames} frame(s) over {len(links)} links -> {run.outputs}")
    return cfg.to_dict()


def cmd_calibrate(args, run, seed):
    if not (args.config or args.layout):
        raise ValidationError("calibrate needs the layout: pass --config or --layout")
    doc = io.read_json(run.add_input("config", args.config)) if args.config else {}
    if args.layout:
        doc["layout"] = io.read_json(run.add_input("layout", args.layout))
    links = enumerate_links(build_layout(doc["layout"]))
    calib, _ = io.load_scans(run.add_input("calib", args.calib), links)
    raw, _ = io.load_scans(run.add_input("raw", args.raw), links)
    baseline = calibrate(calib)
    ms = MeasurementSet([rss_drop(baseline, r) for r in raw], baseline)
    io.write_measurements(run.out("measurements.csv"), ms, links)
    io.write_vector(run.out("baseline.csv"), baseline)
    print(f"{len(calib)} calibration scans, {len(raw)} frames -> {run.outputs}")
    return {"layout": doc["layout"]}


def _metrics(est, truth_path, run, n):
    out = {"residual_norm": est.residual_norm, "cost": est.cost}
    if truth_path:
        truth = io.load_vector(run.add_input("truth", truth_path), n)
        out["rmse"] = rmse(est.x, truth)
    return out


def cmd_reconstruct(args, run, seed):
    cfg = _resolve_config(args, run, seed)
    grid, links, w, q = _system(cfg)
    ms = io.load_measurements(run.add_input("measurements", args.measurements), links)
    sc = cfg.solver.solver_config(grid)
    if args.v_true is not None:
        st = stack_frames(w.values, ms.frames, args.v_true, grid, _ref(args.ref, len(ms.frames)))
        est = solve(st.w_stack, st.y_stack, sc, q)
        est.provenance["velocity"] = args.v_true
    else:
        if not 0 <= args.frame < len(ms.frames):
            raise ValidationError(f"--frame {args.frame} outside 0..{len(ms.frames) - 1}")
        est = solve(w.values, ms.frames[args.frame], sc, q)
    est.provenance["weights"] = w.provenance
    io.write_estimate(run.out("estimate.csv"), est)
    metrics = _metrics(est, args.truth, run, grid.n_voxels)
    io.write_json(run.out("metrics.json"), metrics)
    print(io.dumps(metrics), end="")
    return cfg.to_dict()


def cmd_track(args, run, seed):
    cfg = _resolve_config(args, run, seed)
    grid, links, w, q = _system(cfg)
    ms = io.load_measurements(run.add_input("frames", args.frames), links)
    sc = cfg.solver.solver_config(grid)
    ref = _ref(args.ref, len(ms.frames))
    if args.v_true is not None:
        cands = [args.v_true]
    else:
        cands = default_candidates(grid, cfg.motion.vmin, cfg.motion.vmax)
    res = estimate_velocity(w.values, ms.frames, cands, grid, sc, q, ref)
    io.write_table(run.out("costs.csv"), ["v", "cost"], sorted(res.costs.items()))
    est = res.estimate
    est.provenance.update({"velocity": res.v_hat, "ref": ref, "weights": w.provenance})
    io.write_estimate(run.out("estimate.csv"), est)
    io.render_image(est.x, grid, run.out("image"))
    metrics = _metrics(est, args.truth, run, grid.n_voxels) | {"v_hat": res.v_hat}
    io.write_json(run.out("metrics.json"), metrics)
    print(io.dumps(metrics), end="")
    return cfg.to_dict()


def cmd_evaluate(args, run, seed):
    grid, doc = _grid_only(args, run)
    gamma = args.gamma
    if gamma is None:
        gamma = doc.get("evaluation", {}).get("gamma", ex.DEFAULT_GAMMA)
    if len(args.estimate) != len(args.truth):
        raise ValidationError("pass one --truth per --estimate")
    ests = [io.load_vector(run.add_input(f"estimate{i}", p), grid.n_voxels)
            for i, p in enumerate(args.estimate)]
    truths = [io.load_vector(run.add_input(f"truth{i}", p), grid.n_voxels)
              for i, p in enumerate(args.truth)]
    curve = roc_curve(ests, [t > 0 for t in truths])
    io.write_roc(run.out("roc.csv"), curve)
    occ = [occupancy_mask(e, gamma) for e in ests]
    n_occ = sum(int((t > 0).sum()) for t in truths)
    n_emp = sum(int((t <= 0).sum()) for t in truths)
    metrics = {
        "gamma": gamma,
        "rmse": [rmse(e, t) for e, t in zip(ests, truths)],
        "pd": sum(int((o & (t > 0)).sum()) for o, t in zip(occ, truths)) / n_occ,
        "pf": sum(int((o & (t <= 0)).sum()) for o, t in zip(occ, truths)) / n_emp,
    }
    if args.atr:
        temps = vehicle_templates(grid, args.x_rear, args.y_lane, args.vehicles)
        rep = atr_classify(ests[0], temps, gamma).report()
        io.write_json(run.out("atr.json"), rep)
        metrics["atr_winner"] = rep["winner"]
    io.write_json(run.out("metrics.json"), metrics)
    print(io.dumps(metrics), end="")
    return {"grid": grid.to_dict(), "evaluation": {"gamma": gamma}}


def cmd_render(args, run, seed):
    grid, _ = _grid_only(args, run)
    x = io.load_vector(run.add_input("estimate", args.estimate), grid.n_voxels)
    meta = io.render_image(x, grid, run.outputs)
    print(f"rendered {len(meta['files'])} files -> {run.outputs}")
    return {"grid": grid.to_dict()}


def _with(cfg, **kw):
    return dataclasses.replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def repro(figure: str, outdir: Path, seed: int, realizations: int | None = None) -> dict:
    """Run one named recipe and write its artifacts into ``outdir``; returns the config used."""
    outdir = Path(outdir)
    if figure == "9-10":
        cfg = _with(ex.RmseGridConfig(seed=seed), realizations=realizations)
        res = ex.run_rmse_grid(cfg)
        io.write_table(outdir / "rmse_grid.csv", ["pipeline", "alpha", "beta", "rmse"], res.rows())
        summary = {}
        for p in cfg.pipelines:
            i, j = res.best_cell(p)
            summary[p] = {"alpha": cfg.alphas[i], "beta": cfg.betas[j],
                          "rmse": float(res.mean(p)[i, j])}
        io.write_json(outdir / "best.json", summary)
    elif figure == "14":
        cfg = _with(ex.BetaSweepConfig(seed=seed), realizations=realizations)
        rows = ex.run_beta_sweep(cfg)
        keys = list(rows[0])
        io.write_table(outdir / "beta_sweep.csv", keys, ([r[k] for k in keys] for r in rows))
    elif figure == "roc":
        cfg = ex.RocConfig(seed=seed)
        res = ex.run_roc_battery(cfg)
        for p, curves in res["curves"].items():
            for k, c in enumerate(curves):
                io.write_roc(outdir / f"roc_{p}_run{k + 1}.csv", c)
        io.write_table(outdir / "roc_average.csv", ["pf", *cfg.policies],
                       zip(res["pf"], *(res["pd"][p] for p in cfg.policies)))
    elif figure == "atr":
        cfg = ex.AtrConfig(seed=seed)
        io.write_json(outdir / "atr.json", ex.run_atr_battery(cfg))
    elif figure == "motion":
        cfg = _with(ex.MotionConfig(seed=seed), trials=realizations)
        rows = ex.run_motion_trials(cfg)
        keys = list(rows[0])
        io.write_table(outdir / "motion.csv", keys, ([r[k] for k in keys] for r in rows))
    elif figure == "oracle":
        cfg = _with(ex.OracleConfig(seed=seed), instances=realizations)
        rows = ex.run_oracle_battery(cfg)
        keys = ["instance", "n", "m", "alpha", "beta", "oracle", "trunc-x", "trunc-y",
                "trunc-y-clamped", "iterative", "pgm"]
        io.write_table(outdir / "oracle.csv", keys, ([r.get(k, math.nan) for k in keys] for r in rows))
    else:
        raise ValidationError(f"unknown figure {figure!r}")
    return {"figure": figure, "recipe": dataclasses.asdict(cfg)}


def cmd_repro(args, run, seed):
    cfg = repro(args.figure, run.outputs, seed, args.realizations)
    print(f"repro-fig {args.figure} -> {run.outputs}")
    return cfg


COMMANDS = {"plan": cmd_plan, "simulate": cmd_simulate, "calibrate": cmd_calibrate,
            "reconstruct": cmd_reconstruct, "track": cmd_track, "evaluate": cmd_evaluate,
            "render": cmd_render, "repro-fig": cmd_repro}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    run = None
    try:
        args = build_parser().parse_args(argv)
        seed = _seed(args)
        run = Run(Path(args.out), args.command, args.run_name)
        config = COMMANDS[args.command](args, run, seed)
        manifest = run.finish(args.command, _strip_location(argv), config, seed)
        print(f"manifest: {manifest}", file=sys.stderr)
        return 0
    except (ValidationError, OSError) as exc:
        code, msg = 1, f"error: {exc}"
    except (NumericError, np.linalg.LinAlgError) as exc:
        code, msg = 2, f"numeric failure: {exc}"
    except RTIError as exc:
        code, msg = 1, f"error: {exc}"
    print(msg, file=sys.stderr)
    if run is not None:
        # a failed command leaves no half-written run behind
        shutil.rmtree(run.path, ignore_errors=True)
    return code


if __name__ == "__main__":
    sys.exit(main())
