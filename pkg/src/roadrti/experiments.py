"""Synthetic experiment recipes: scenes, layouts and the batteries behind the figures.

Every recipe is a pure function of its config dataclass (seeds included), so
reruns are bit-identical.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .estimators import SolverConfig, nnls_bruteforce_oracle, solve
from .evaluation import DEFAULT_GAMMA, atr_classify, average_roc, rmse, roc_curve, vehicle_templates
from .grid import GridSpec, Sensor, SensorLayout, enumerate_links
from .motion import center_reference, estimate_velocity, round_half_away, shift_scene
from .priors import build_q
from .simulate import Box, NoiseModel, make_scene, simulate_measurement, simulate_sequence, vehicle_primitives
from .weights import MagnitudeModel, SelectionModel, build_weight_matrix

# ---------------------------------------------------------------- layouts

SAWTOOTH_HEIGHTS = (0.5, 1.0, 1.5)


def roadside_layout(spacing: float = 2.0, per_side: int = 9, width: float = 4.0,
                    heights=SAWTOOTH_HEIGHTS) -> SensorLayout:
    """Poles on both road edges with antenna heights cycling through ``heights``.

    The right side is offset by one step so facing nodes sit at different heights.
    """
    h = len(heights)
    sensors = []
    for i in range(per_side):
        sensors.append(Sensor(i, (i * spacing, 0.0, heights[i % h]), "L"))
        sensors.append(Sensor(per_side + i, (i * spacing, width, heights[(i + 1) % h]), "R"))
    return SensorLayout(tuple(sensors), "cross_road")


def roadside_grid(spacing: float = 2.0, nx: int = 16) -> GridSpec:
    """Grid over the road between the poles; along-road voxels are half a pole spacing."""
    return GridSpec(nx, 2, 3, spacing / 2.0, 2.0, 0.5)


def perimeter_layout(n_per_side: int = 7, side: float = 7.0, z: float = 0.5,
                     origin: float = -0.5) -> SensorLayout:
    """Sensors walking a square's perimeter at unit steps; full mesh."""
    step = side / n_per_side
    pos = []
    for i in range(n_per_side):
        pos.append((origin + i * step, origin, z))
    for i in range(n_per_side):
        pos.append((origin + side, origin + i * step, z))
    for i in range(n_per_side):
        pos.append((origin + side - i * step, origin + side, z))
    for i in range(n_per_side):
        pos.append((origin, origin + side - i * step, z))
    return SensorLayout(tuple(Sensor(i, p) for i, p in enumerate(pos)), "full_mesh")


def perimeter_grid() -> GridSpec:
    return GridSpec(6, 6, 1, 1.0, 1.0, 1.0)


def perimeter_scene(grid: GridSpec | None = None):
    """An L-shaped 1 dB/m object filling 8 of the 36 voxels."""
    grid = grid or perimeter_grid()
    return make_scene(grid, [Box((1, 1, 0), (3, 4, 1)), Box((3, 3, 0), (5, 4, 1))])


def line_weights(grid: GridSpec, layout: SensorLayout) -> np.ndarray:
    return build_weight_matrix(grid, enumerate_links(layout),
                               SelectionModel("line"), MagnitudeModel("line")).values


def paired_ci(diff, z: float = 1.959963984540054) -> tuple[float, float, float]:
    """Mean and normal-approximation 95% interval of paired differences."""
    d = np.asarray(diff, float)
    m = float(d.mean())
    half = z * float(d.std(ddof=1)) / np.sqrt(d.size) if d.size > 1 else 0.0
    return m, m - half, m + half


# ---------------------------------------------------------------- RMSE over (alpha, beta)

@dataclass(frozen=True)
class RmseGridConfig:
    sigma: float = 0.5
    realizations: int = 200
    seed: int = 0
    alphas: tuple = tuple(float(a) for a in np.geomspace(1e-4, 300.0, 12))
    betas: tuple = (-20.0, -10.0, -6.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5)
    pipelines: tuple = ("trunc-y", "iterative")


@dataclass
class RmseGridResult:
    config: RmseGridConfig
    # pipeline -> (n_alpha, n_beta, realizations)
    rmse: dict

    def mean(self, pipeline: str) -> np.ndarray:
        return self.rmse[pipeline].mean(axis=-1)

    def best_cell(self, pipeline: str, realizations=slice(None), beta=None) -> tuple[int, int]:
        m = self.rmse[pipeline][..., realizations].mean(axis=-1)
        if beta is not None:
            j = self.config.betas.index(beta)
            return int(np.argmin(m[:, j])), j
        i, j = np.unravel_index(np.argmin(m), m.shape)
        return int(i), int(j)

    def rows(self):
        for p in self.config.pipelines:
            m = self.mean(p)
            for i, a in enumerate(self.config.alphas):
                for j, b in enumerate(self.config.betas):
                    yield p, a, b, float(m[i, j])


def run_rmse_grid(cfg: RmseGridConfig = RmseGridConfig()) -> RmseGridResult:
    """RMSE of each negative-data pipeline over an (alpha, beta) grid on the perimeter scene."""
    grid = perimeter_grid()
    w = line_weights(grid, perimeter_layout())
    scene = perimeter_scene(grid)
    q = build_q(grid)
    noise = NoiseModel("awgn", cfg.sigma, seed=cfg.seed)
    ys = [simulate_measurement(w, scene, noise, stream=r) for r in range(cfg.realizations)]
    out = {p: np.zeros((len(cfg.alphas), len(cfg.betas), cfg.realizations)) for p in cfg.pipelines}
    for i, a in enumerate(cfg.alphas):
        for j, b in enumerate(cfg.betas):
            for p in cfg.pipelines:
                sc = SolverConfig(alpha=a, beta=b, neg_policy=p)
                for r, y in enumerate(ys):
                    out[p][i, j, r] = rmse(solve(w, y, sc, q).x, scene.x)
    return RmseGridResult(cfg, out)


# ---------------------------------------------------------------- roadside runs

@dataclass(frozen=True)
class RoadRun:
    vehicle: str
    n_frames: int
    v_m: float          # meters per frame
    spacing: float      # pole spacing, m

    @property
    def dx(self) -> float:
        return self.spacing / 2.0

    @property
    def v_voxels(self) -> float:
        return self.v_m / self.dx

    @property
    def x_rear(self) -> float:
        return 1.5 if self.spacing < 1.5 else 2.0


# four classes, mixed frame counts, speeds and spacings
ATR_RUNS = (
    RoadRun("mustang", 5, 4.0, 2.0),
    RoadRun("van", 5, 4.0, 2.0),
    RoadRun("electric_car", 4, 4.0, 2.0),
    RoadRun("bus", 4, 4.0, 2.0),
    RoadRun("mustang", 5, 4.0, 1.0),
    RoadRun("mustang", 12, 1.0, 1.0),
    RoadRun("mustang", 12, 1.0, 1.0),
    RoadRun("mustang", 21, 1.0, 2.0),
    RoadRun("mustang", 21, 1.0, 2.0),
)
ROC_RUNS = tuple(r for r in ATR_RUNS if r.vehicle == "mustang")
LANE_Y = 0.5


@dataclass
class RoadSetup:
    grid: GridSpec
    w: np.ndarray
    q: object
    scene: object


def road_setup(run: RoadRun, density: float | None = None,
               selection: SelectionModel | None = None,
               magnitude: MagnitudeModel | None = None) -> RoadSetup:
    grid = roadside_grid(run.spacing)
    links = enumerate_links(roadside_layout(run.spacing))
    w = build_weight_matrix(grid, links, selection or SelectionModel("line"),
                            magnitude or MagnitudeModel("line")).values
    scene = make_scene(grid, vehicle_primitives(run.vehicle, run.x_rear, LANE_Y, density))
    return RoadSetup(grid, w, build_q(grid), scene)


@dataclass(frozen=True)
class AtrConfig:
    sigma: float = 4.0
    alpha: float = 0.3
    beta: float = 0.0
    gamma: float = DEFAULT_GAMMA
    neg_policy: str = "iterative"
    seed: int = 0
    candidates: tuple = tuple(range(-9, 10))
    runs: tuple = ATR_RUNS


def run_atr_battery(cfg: AtrConfig = AtrConfig()) -> dict:
    """Stack frames, search velocity, classify against every vehicle template."""
    rows = []
    sc = SolverConfig(alpha=cfg.alpha, beta=cfg.beta, neg_policy=cfg.neg_policy)
    for k, run in enumerate(cfg.runs):
        st = road_setup(run)
        temps = vehicle_templates(st.grid, run.x_rear, LANE_Y)
        ms = simulate_sequence(st.w, st.scene, run.v_voxels, run.n_frames, st.grid,
                               NoiseModel("awgn", cfg.sigma, seed=1000 * cfg.seed + k))
        vr = estimate_velocity(st.w, ms.frames, cfg.candidates, st.grid, sc, st.q)
        res = atr_classify(vr.estimate.x, temps, cfg.gamma)
        rows.append({"run": k + 1, "vehicle": run.vehicle, "frames": run.n_frames,
                     "v_m_per_frame": run.v_m, "spacing_m": run.spacing,
                     "v_true": run.v_voxels, "v_hat": vr.v_hat, "winner": res.winner,
                     "correct": res.winner == run.vehicle, **res.report()})
    return {"score": sum(r["correct"] for r in rows), "total": len(rows), "runs": rows}


@dataclass(frozen=True)
class RocConfig:
    sigma: float = 4.0
    alpha: float = 0.3
    beta: float = 0.0
    policies: tuple = ("trunc-x", "trunc-y", "iterative", "pgm")
    pgm_iters: int = 50
    seed: int = 0
    runs: tuple = ROC_RUNS
    pf_grid: tuple = tuple(float(v) for v in np.linspace(0.0, 1.0, 21))
    selection: str = "line"
    magnitude: str = "line"


def run_roc_battery(cfg: RocConfig = RocConfig()) -> dict:
    """Per-frame reconstructions of moving mustangs; one pooled ROC per run and policy.

    Returns per-policy curves and their P_d averaged on ``pf_grid``.
    """
    curves = {p: [] for p in cfg.policies}
    for k, run in enumerate(cfg.runs):
        st = road_setup(run, selection=SelectionModel(cfg.selection),
                        magnitude=MagnitudeModel(cfg.magnitude))
        ms = simulate_sequence(st.w, st.scene, run.v_voxels, run.n_frames, st.grid,
                               NoiseModel("awgn", cfg.sigma, seed=100 * cfg.seed + k))
        ref = center_reference(run.n_frames)
        truths = [shift_scene(st.scene.x, round_half_away((i - ref) * run.v_voxels), st.grid) > 0
                  for i in range(run.n_frames)]
        for p in cfg.policies:
            sc = SolverConfig(alpha=cfg.alpha, beta=cfg.beta, neg_policy=p, pgm_iters=cfg.pgm_iters)
            ests = [solve(st.w, y, sc, st.q).x for y in ms.frames]
            curves[p].append(roc_curve(ests, truths))
    pf = np.asarray(cfg.pf_grid)
    avg = {p: average_roc(c, pf)[1] for p, c in curves.items()}
    return {"pf": pf, "curves": curves, "pd": avg}


# ---------------------------------------------------------------- beta sweep

@dataclass(frozen=True)
class BetaSweepConfig:
    sigma: float = 4.0
    alpha: float = 0.3
    betas: tuple = (-40.0, -30.0, -20.0, -10.0, -5.0, -2.0, -1.0, 0.0)
    neg_policy: str = "iterative"
    seed: int = 0
    realizations: int = 20
    run: RoadRun = ATR_RUNS[0]
    gamma: float = DEFAULT_GAMMA


def run_beta_sweep(cfg: BetaSweepConfig = BetaSweepConfig()) -> list[dict]:
    """Single-frame reconstruction quality against the bias weight."""
    st = road_setup(cfg.run)
    noise = NoiseModel("awgn", cfg.sigma, seed=cfg.seed)
    ys = [simulate_measurement(st.w, st.scene, noise, stream=r) for r in range(cfg.realizations)]
    truth = st.scene.x > 0
    rows = []
    for b in cfg.betas:
        sc = SolverConfig(alpha=cfg.alpha, beta=b, neg_policy=cfg.neg_policy)
        xs = [solve(st.w, y, sc, st.q).x for y in ys]
        occ = [x > cfg.gamma for x in xs]
        rows.append({
            "beta": b,
            "rmse": float(np.mean([rmse(x, st.scene.x) for x in xs])),
            "nonzero_fraction": float(np.mean([np.mean(x > 0) for x in xs])),
            "pd": float(np.mean([o[truth].mean() for o in occ])),
            "pf": float(np.mean([o[~truth].mean() for o in occ])),
        })
    return rows


# ---------------------------------------------------------------- motion trials

@dataclass(frozen=True)
class MotionConfig:
    trials: int = 30
    sigma: float = 4.0
    density: float = 3.0
    n_frames: int = 5
    v_range: tuple = (-3, 3)
    candidates: tuple = tuple(range(-4, 5))
    alpha: float = 1.0
    seed: int = 0
    spacing: float = 2.0


def run_motion_trials(cfg: MotionConfig = MotionConfig()) -> list[dict]:
    """Moving 4 m box at random integer speeds; noiseless and noisy velocity recovery."""
    grid = roadside_grid(cfg.spacing)
    w = line_weights(grid, roadside_layout(cfg.spacing))
    q = build_q(grid)
    sc = SolverConfig(alpha=cfg.alpha, neg_policy="iterative")
    rng = np.random.default_rng(cfg.seed)
    ref = center_reference(cfg.n_frames)
    rows = []
    for t in range(cfg.trials):
        v = int(rng.integers(cfg.v_range[0], cfg.v_range[1] + 1))
        x0 = float(rng.uniform(4.0, 8.0))
        scene = make_scene(grid, [Box((x0, 0.5, 0.0), (x0 + 4.0, 2.5, 1.0), cfg.density)])
        clean = simulate_sequence(w, scene, v, cfg.n_frames, grid, None)
        v_clean = estimate_velocity(w, clean.frames, cfg.candidates, grid, sc, q).v_hat
        noisy = simulate_sequence(w, scene, v, cfg.n_frames, grid,
                                  NoiseModel("awgn", cfg.sigma, seed=cfg.seed * 10007 + t))
        vr = estimate_velocity(w, noisy.frames, cfg.candidates, grid, sc, q)
        single = solve(w, noisy.frames[ref], sc, q).x
        rows.append({"trial": t, "v_true": v, "v_hat_noiseless": v_clean, "v_hat": vr.v_hat,
                     "rmse_stacked": rmse(vr.estimate.x, scene.x),
                     "rmse_single": rmse(single, scene.x)})
    return rows


# ---------------------------------------------------------------- oracle battery

@dataclass(frozen=True)
class OracleConfig:
    instances: int = 200
    max_voxels: int = 6
    pgm_iters: int = 200
    seed: int = 0
    noise: float = 0.7


def random_nnls_instance(rng: np.random.Generator, max_voxels: int = 6, noise: float = 0.7):
    """Sparse nonnegative W, nonnegative truth, noisy y; 1D smoothness Q."""
    n = int(rng.integers(2, max_voxels + 1))
    m = n + int(rng.integers(0, 5))
    w = rng.uniform(0, 1, (m, n)) * (rng.uniform(size=(m, n)) < 0.7)
    x = np.maximum(rng.normal(0, 1, n), 0)
    y = w @ x + rng.normal(0, noise, m)
    alpha = float(10 ** rng.uniform(-2, 0))
    beta = float(rng.choice([0.0, rng.uniform(-0.5, 0.2)]))
    return w, y, alpha, beta, build_q(GridSpec(n, 1, 1, 1.0, 1.0, 1.0))


def run_oracle_battery(cfg: OracleConfig = OracleConfig()) -> list[dict]:
    """Costs of each policy and of the exhaustive constrained optimum per instance.

    TruncateY may return negative voxels; its cost is also reported after
    clamping so it can be compared on the feasible set.
    """
    from .estimators import objective

    rng = np.random.default_rng(cfg.seed)
    rows = []
    for t in range(cfg.instances):
        w, y, alpha, beta, q = random_nnls_instance(rng, cfg.max_voxels, cfg.noise)
        base = SolverConfig(alpha=alpha, beta=beta, pgm_iters=cfg.pgm_iters)
        row = {"instance": t, "n": w.shape[1], "m": w.shape[0], "alpha": alpha, "beta": beta,
               "oracle": nnls_bruteforce_oracle(w, y, alpha, q, beta).cost}
        for p in ("trunc-x", "trunc-y", "iterative", "pgm"):
            try:
                est = solve(w, y, dataclasses.replace(base, neg_policy=p), q)
            except NumericError:
                row[p] = float("nan")
                continue
            row[p] = est.cost
            if p == "trunc-y":
                row["trunc-y-clamped"] = objective(w, y, np.maximum(est.x, 0), alpha, q.q, beta)
        rows.append(row)
    return rows
