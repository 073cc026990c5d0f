"""One JSON document driving a full pipeline run, validated against a closed schema."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import jsonschema

from .errors import ValidationError
from .estimators import NEG_POLICIES, SolverConfig
from .evaluation import DEFAULT_GAMMA
from .grid import GridSpec, SensorLayout
from .priors import CONSTRUCTIONS, alpha_from_prior, correlation_coefficient
from .weights import MAGNITUDES, SELECTIONS, MagnitudeModel, SelectionModel

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_box = _obj({"type": {"const": "box"}, "lo": _vec3, "hi": _vec3, "density": _nonneg},
            ["type", "lo", "hi"])
_cylinder = _obj({"type": {"const": "cylinder"},
                  "center": {"type": "array", "items": _num, "minItems": 2, "maxItems": 3},
                  "radius": _pos, "density": _nonneg,
                  "z_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                 ["type", "center", "radius"])
_vehicle = _obj({"type": {"const": "vehicle"}, "name": {"type": "string"},
                 "x_rear": _num, "y_lane": _num, "density": _nonneg},
                ["type", "name", "x_rear", "y_lane"])

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "roadrti experiment config",
    **_obj({
        "grid": _obj({"n": {"type": "array", "items": {"type": "integer", "minimum": 1},
                            "minItems": 3, "maxItems": 3},
                      "d": {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3},
                      "origin": _vec3}, ["n", "d"]),
        "layout": {"oneOf": [
            _obj({"sensors": {"type": "array", "minItems": 2, "items": _obj({
                      "id": {"type": "integer", "minimum": 0}, "pos": _vec3,
                      "side": {"enum": ["L", "R", None]}}, ["id", "pos"])},
                  "topology": {"enum": ["full_mesh", "cross_road"]}}, ["sensors"]),
            _obj({"preset": {"const": "roadside"}, "spacing": _pos,
                  "per_side": {"type": "integer", "minimum": 1}, "width": _pos,
                  "heights": {"type": "array", "items": _num, "minItems": 1}}, ["preset"]),
            _obj({"preset": {"const": "perimeter"}}, ["preset"]),
        ]},
        "weights": _obj({"selection": {"enum": list(SELECTIONS)}, "lambda": _pos,
                         "magnitude": {"enum": list(MAGNITUDES)}, "sigma_lambda": _pos,
                         "normalize": {"type": "boolean"}}),
        "solver": _obj({"alpha": {"oneOf": [_nonneg, {"const": "auto"}]},
                        "beta": _num, "prior_mean": _nonneg, "sigma_n": _pos,
                        "sigma_x": _pos, "delta_c": _pos,
                        "neg_policy": {"enum": list(NEG_POLICIES)},
                        "max_iters": {"type": "integer", "minimum": 1},
                        "mu": {"oneOf": [_pos, {"type": "null"}]},
                        "pgm_iters": {"type": "integer", "minimum": 1},
                        "q_construction": {"enum": list(CONSTRUCTIONS)}}),
        "noise": _obj({"variant": {"enum": ["none", "awgn", "mixture"]}, "sigma": _pos,
                       "seed": {"type": "integer", "minimum": 0}}),
        "scene": {"type": "array", "items": {"oneOf": [_box, _cylinder, _vehicle]}},
        "motion": _obj({"n_frames": {"type": "integer", "minimum": 1}, "v": _num,
                        "ref": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "auto"}]},
                        "vmin": {"type": "integer"}, "vmax": {"type": "integer"}}),
        "evaluation": _obj({"gamma": _nonneg}),
    }),
}


def validate(doc: dict) -> None:
    """Raise ValidationError naming the first offending path; nothing is computed before this."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config error at {where}: {exc.message}") from None


@dataclass
class WeightsSection:
    selection: str = "line"
    lam: float = 0.03
    magnitude: str = "line"
    sigma_lambda: float = 0.5
    normalize: bool = False

    def models(self):
        return SelectionModel(self.selection, self.lam), MagnitudeModel(self.magnitude, self.sigma_lambda)


@dataclass
class SolverSection:
    alpha: float | str = 1.0
    beta: float = 0.0
    prior_mean: float = 0.0
    sigma_n: float = 4.0
    sigma_x: float = 1.0
    delta_c: float = 1.3
    neg_policy: str = "iterative"
    max_iters: int = 3
    mu: float | None = None
    pgm_iters: int = 50
    q_construction: str = "averaged_fwd_bck"

    def resolved_alpha(self, grid: GridSpec) -> float:
        """Numeric alpha; ``auto`` maps the exponential-correlation prior onto the smoothness weight."""
        if self.alpha != "auto":
            return float(self.alpha)
        c = correlation_coefficient(float(min(grid.spacing)), self.delta_c)
        return alpha_from_prior(self.sigma_n ** 2, self.sigma_x ** 2, c)

    def solver_config(self, grid: GridSpec) -> SolverConfig:
        return SolverConfig(alpha=self.resolved_alpha(grid), beta=self.beta,
                            prior_mean=self.prior_mean, sigma_n2=self.sigma_n ** 2,
                            neg_policy=self.neg_policy, max_iters=self.max_iters, mu=self.mu,
                            pgm_iters=self.pgm_iters, q_construction=self.q_construction)


@dataclass
class NoiseSection:
    variant: str = "none"
    sigma: float = 4.0
    seed: int = 0


@dataclass
class MotionSection:
    n_frames: int = 1
    v: float = 0.0
    ref: int | str = "auto"
    vmin: int | None = None
    vmax: int | None = None


@dataclass
class ExperimentConfig:
    grid: dict
    layout: dict
    weights: WeightsSection = field(default_factory=WeightsSection)
    solver: SolverSection = field(default_factory=SolverSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    scene: list = field(default_factory=list)
    motion: MotionSection = field(default_factory=MotionSection)
    gamma: float = DEFAULT_GAMMA

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        validate(doc)
        for key in ("grid", "layout"):
            if key not in doc:
                raise ValidationError(f"config error: missing section {key!r}")
        w = dict(doc.get("weights", {}))
        if "lambda" in w:
            w["lam"] = w.pop("lambda")
        return cls(grid=doc["grid"], layout=doc["layout"], weights=WeightsSection(**w),
                   solver=SolverSection(**doc.get("solver", {})),
                   noise=NoiseSection(**doc.get("noise", {})),
                   scene=list(doc.get("scene", [])),
                   motion=MotionSection(**doc.get("motion", {})),
                   gamma=doc.get("evaluation", {}).get("gamma", DEFAULT_GAMMA))

    def to_dict(self) -> dict:
        w = asdict(self.weights)
        w["lambda"] = w.pop("lam")
        motion = {k: v for k, v in asdict(self.motion).items() if v is not None}
        return {"grid": self.grid, "layout": self.layout, "weights": w,
                "solver": asdict(self.solver), "noise": asdict(self.noise),
                "scene": self.scene, "motion": motion, "evaluation": {"gamma": self.gamma}}

    def grid_spec(self) -> GridSpec:
        return GridSpec.from_dict(self.grid)

    def sensor_layout(self) -> SensorLayout:
        return build_layout(self.layout)


def build_layout(doc: dict) -> SensorLayout:
    from .experiments import perimeter_layout, roadside_layout

    preset = doc.get("preset")
    if preset == "roadside":
        kw = {k: doc[k] for k in ("spacing", "per_side", "width") if k in doc}
        if "heights" in doc:
            kw["heights"] = tuple(doc["heights"])
        return roadside_layout(**kw)
    if preset == "perimeter":
        return perimeter_layout()
    return SensorLayout.from_dict(doc)
