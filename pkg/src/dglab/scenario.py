"""Scenario files: JSON schema, fixed vocabulary and construction of the problem objects."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from .errors import ConfigError, DglabError
from .geometry import INTERFACE, REGION_1, REGION_2, Grid, RegionPartition
from .harnack import REGIMES, HarnackProbe, check_admissible
from .solver import BoundaryData, EquationCoefficients
from .weights import ProbePlan, WeightField

STAGES = ("solve", "weights", "degiorgi", "harnack", "holder")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["name", "grid", "weight", "boundary", "regime"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "grid": {
            "type": "object", "additionalProperties": False,
            "required": ["x_lo", "x_hi", "t_hi", "nx", "nt"],
            "properties": {"x_lo": _NUM, "x_hi": _NUM, "t_hi": _POS,
                           "nx": {"type": "integer", "minimum": 3},
                           "nt": {"type": "integer", "minimum": 2}},
        },
        "interface": {"oneOf": [
            {"type": "null"},
            {"type": "object", "additionalProperties": False, "required": ["slope", "intercept"],
             "properties": {"slope": _NUM, "intercept": _NUM}}]},
        "weight": {
            "type": "object", "required": ["kind"],
            "properties": {"kind": {"enum": ["constant", "abs", "piecewise", "sign"]},
                           "value": _POS, "scale": _POS, "center": _NUM,
                           "region1": _NUM, "region2": _NUM,
                           "positive": _POS, "negative": {"type": "number", "exclusiveMaximum": 0}},
            "additionalProperties": False,
        },
        "coefficients": {
            "type": "object", "additionalProperties": False,
            "properties": {"a": _POS, "b": _NUM, "c": _NUM},
        },
        "boundary": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {"kind": {"enum": ["constant", "time_step", "sin_pi_x", "heat_kernel",
                                             "bump", "trig", "sign_separable"]},
                           "value": _NUM, "before": _NUM, "after": _NUM, "t_switch": _NUM,
                           "amplitude": _NUM, "shift": _POS, "radius": _POS, "mean": _NUM},
        },
        "regime": {"enum": list(REGIMES)},
        "form": {"enum": ["nonconservative", "conservative"]},
        "rho0": _POS,
        "eps_sweep": {"type": "object", "additionalProperties": False,
                      "properties": {"k_max": {"type": "integer", "minimum": 2, "maximum": 30}}},
        "eps_strip": {"type": "number", "minimum": 0},
        "eps_strip_sweep": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "R_bar": _POS,
        "kappa": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "delta": _POS,
        "weights": {
            "type": "object", "additionalProperties": False, "required": ["points", "radii"],
            "properties": {"points": {"type": "array", "items": _PAIR},
                           "radii": {"type": "array", "items": _POS, "minItems": 1},
                           "q": {"type": "number", "exclusiveMinimum": 2}},
        },
        "degiorgi": {
            "type": "object", "additionalProperties": False, "required": ["cutoffs"],
            "properties": {
                "cutoffs": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["x0", "r_inner", "r_outer", "t_outer", "t_inner", "t2"],
                    "properties": {k: _NUM for k in ("x0", "r_inner", "r_outer", "t_outer",
                                                     "t_inner", "t2")}}},
                "levels": {"type": "array", "items": _NUM},
                "signs": {"type": "array", "items": {"enum": ["plus", "minus"]}},
                "include_k2": {"type": "boolean"}},
        },
        "probes": {"type": "array", "items": {
            "type": "object", "additionalProperties": False, "required": ["x0", "t0", "r"],
            "properties": {"x0": _NUM, "t0": _NUM, "r": _POS,
                           "j": {"oneOf": [{"enum": [1, 2]}, {"enum": ["plus", "zero", "minus"]}]},
                           "strict": {"type": "boolean"}}}},
        "expansion": {
            "type": "object", "additionalProperties": False,
            "required": ["x0", "t0", "r", "h_level", "thetas"],
            "properties": {"x0": _NUM, "t0": _NUM, "r": _POS, "h_level": _POS,
                           "thetas": {"type": "array", "items": _POS, "minItems": 1},
                           "j": {"enum": [1, 2]}, "eta": _POS}},
        "holder": {
            "type": "object", "additionalProperties": False,
            "properties": {"probes": {"type": "array", "items": _PAIR},
                           "radii": {"type": "array", "items": _POS, "minItems": 2},
                           "interface_example": {"type": "boolean"}}},
        "discontinuity_times": {"type": "array", "items": _NUM},
        "stages": {"type": "array", "items": {"enum": list(STAGES)}},
    },
}


def _boundary(spec: dict, grid: Grid) -> BoundaryData:
    kind = spec["kind"]
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    if kind == "constant":
        v = float(spec.get("value", 1.0))
        fn = lambda x, t: np.full_like(x, v)  # noqa: E731
    elif kind == "time_step":
        lo, hi, ts = float(spec.get("before", 1.0)), float(spec.get("after", 2.0)), float(spec.get("t_switch", 1.0))
        fn = lambda x, t: np.where(t <= ts + 1e-12, lo, hi) + 0.0 * x  # noqa: E731
    elif kind == "sin_pi_x":
        amp = float(spec.get("amplitude", 1.0))
        fn = lambda x, t: amp * np.sin(np.pi * x) + 0.0 * t  # noqa: E731
    elif kind == "heat_kernel":
        s = float(spec.get("shift", 1.0))
        fn = lambda x, t: (t + s) ** -0.5 * np.exp(-x * x / (4 * (t + s)))  # noqa: E731
    elif kind == "bump":
        r, dx = float(spec["radius"]), grid.dx
        fn = lambda x, t: np.where(t == 0, np.clip((r + 0.5 * dx - np.abs(x)) / dx, 0, 1), 0.0)  # noqa: E731
    elif kind == "sign_separable":
        # exact solution of sign(x) u_t = u_xx, continuous with continuous flux at x = 0
        m, a = float(spec.get("mean", 0.0)), float(spec.get("amplitude", 1.0))
        fn = lambda x, t: m + a * np.exp(-t) * np.where(x < 0, np.cos(x), np.cosh(x))  # noqa: E731
    else:
        m, a = float(spec.get("mean", 1.5)), float(spec.get("amplitude", 0.5))
        fn = lambda x, t: m + a * np.sin(np.pi * x) * np.cos(np.pi * t)  # noqa: E731
    return BoundaryData(fn)


@dataclass
class Scenario:
    raw: dict
    source: Path | None = None

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def regime(self) -> str:
        return self.raw["regime"]

    @property
    def form(self) -> str:
        return self.raw.get("form", "nonconservative")

    @property
    def stages(self) -> tuple[str, ...]:
        return tuple(self.raw.get("stages", STAGES))

    @property
    def R_bar(self) -> float:
        return float(self.raw.get("R_bar", math.inf))

    @cached_property
    def grid(self) -> Grid:
        g = self.raw["grid"]
        return Grid(float(g["x_lo"]), float(g["x_hi"]), float(g["t_hi"]), int(g["nx"]), int(g["nt"]))

    @cached_property
    def partition(self) -> RegionPartition:
        spec = self.raw.get("interface")
        if spec is None:
            return RegionPartition.trivial(self.grid)
        return RegionPartition.from_line(self.grid, float(spec["slope"]), float(spec["intercept"]))

    @cached_property
    def weight(self) -> WeightField:
        w = self.raw["weight"]
        part = self.partition
        kind = w["kind"]
        if kind == "constant":
            return WeightField.constant(part, float(w.get("value", 1.0)))
        if kind == "abs":
            s, c = float(w.get("scale", 1.0)), float(w.get("center", 0.0))
            return WeightField.from_function(part, lambda x, t: s * np.abs(x - c))
        if kind == "piecewise":
            return WeightField.piecewise(part, float(w.get("region1", 1.0)), float(w.get("region2", 0.0)))
        lab = part.label
        vals = np.where(lab == REGION_1, float(w.get("positive", 1.0)),
                        np.where(lab == REGION_2, float(w.get("negative", -1.0)), 0.0))
        return WeightField(part, vals)

    @property
    def hypothesis_weight(self) -> WeightField:
        """Non-negative weight fed to the structural-hypothesis checks (floor on region 2)."""
        if self.regime == "forward_backward":
            return self.weight.magnitude()
        if self.regime == "elliptic_parabolic":
            rho0 = float(self.raw.get("rho0", 1.0))
            lab = self.partition.label
            return self.weight.with_values(np.where(lab == REGION_2, rho0, self.weight.values))
        return self.weight

    @cached_property
    def coefficients(self) -> EquationCoefficients:
        c = self.raw.get("coefficients", {})
        return EquationCoefficients.constant(self.grid, c.get("a", 1.0), c.get("b", 0.0), c.get("c", 0.0))

    @cached_property
    def boundary(self) -> BoundaryData:
        return _boundary(self.raw["boundary"], self.grid)

    @property
    def probes(self) -> list[HarnackProbe]:
        return [HarnackProbe(float(p["x0"]), float(p["t0"]), float(p["r"]), p.get("j", 1),
                             self.regime, bool(p.get("strict", True)))
                for p in self.raw.get("probes", [])]

    @property
    def probe_plan(self) -> ProbePlan | None:
        w = self.raw.get("weights")
        if w is None:
            return None
        return ProbePlan(tuple(tuple(p) for p in w["points"]), tuple(w["radii"]), float(w.get("q", 3.0)))

    @property
    def discontinuity_slices(self) -> list[int]:
        return sorted({self.grid.slice_index(float(t)) for t in self.raw.get("discontinuity_times", [])})

    def validate(self) -> None:
        """Structural checks and every probe's geometry, before any solve."""
        try:
            self.grid
            self.partition
            w = self.weight
        except (ValueError, DglabError) as exc:
            raise ConfigError(f"{self.name}: {exc}") from None
        v, lab = w.values, self.partition.label
        regime = self.regime
        inner = lab != INTERFACE
        if regime != "homogeneous" and not np.any(lab == REGION_2):
            raise ConfigError(f"{regime} regime needs an interface and a second region")
        if regime == "homogeneous" and not np.all(v > 0):
            raise ConfigError("homogeneous regime needs a strictly positive weight")
        if regime == "elliptic_parabolic" and not (np.all(v[lab == REGION_1] > 0) and np.all(v[lab == REGION_2] == 0)):
            raise ConfigError("elliptic_parabolic regime needs weight > 0 on region 1 and = 0 on region 2")
        if regime == "forward_backward" and not (np.all(v[lab == REGION_1] > 0) and np.all(v[lab == REGION_2] < 0)
                                                 and inner.any()):
            raise ConfigError("forward_backward regime needs weight > 0 on region 1 and < 0 on region 2")
        for p in self.probes:
            check_admissible(p, w, self.R_bar)


def load_scenario(path: str | Path) -> Scenario:
    """Read and schema-check a scenario; raises ``ConfigError``."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return scenario_from_dict(raw, path)


def scenario_from_dict(raw: Any, source: Path | None = None) -> Scenario:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from None
    return Scenario(raw, source)


def bundled(name: str) -> Path:
    """Path of a bundled scenario (``name`` with or without ``.json``)."""
    fname = name if name.endswith(".json") else f"{name}.json"
    ref = resources.files("dglab") / "scenarios" / fname
    if not ref.is_file():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return Path(str(ref))


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in (resources.files("dglab") / "scenarios").iterdir()
                  if p.name.endswith(".json"))
