"""Scenario configuration files (JSON) with strict schema validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from fracdyn.errors import InputError
from fracdyn.fields import FieldSpec
from fracdyn.solver import CaputoIVP, SolverConfig

ANALYSIS_ORDER = (
    "sector",
    "constants",
    "radius",
    "certificate",
    "comparison",
    "decay",
    "no_fast_decay",
    "separation",
)

_number = {"type": "number"}
_window = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}

_analysis = {
    "type": "object",
    "additionalProperties": False,
    "required": ["op"],
    "properties": {
        "op": {"enum": list(ANALYSIS_ORDER)},
        "samples": {"type": "integer", "minimum": 1000},
        "t_max": {"type": "number", "exclusiveMinimum": 1},
        "windows": {"type": "array", "items": _window},
        "decades_from": {"type": "number", "minimum": 1},
        "beta_test": _number,
        "window": _window,
        "x1": _number,
        "x2": _number,
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "n": {"type": "integer", "minimum": 2},
    },
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["field", "alpha", "x0", "horizon"],
    "properties": {
        "field": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"type": "string"},
                "params": {"type": "object", "additionalProperties": _number},
            },
        },
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "x0": {"type": "array", "items": _number, "minItems": 1},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["uniform", "graded", "geometric"]},
                "n": {"type": "integer", "minimum": 2},
                "stretch": {"type": "number", "exclusiveMinimum": 1},
                "grading": {"type": ["number", "null"], "minimum": 1},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "corrector_iters": {"type": "integer", "minimum": 1},
                "blowup_threshold": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "domain_radius": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "analyses": {"type": "array", "items": _analysis},
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "csv": {"type": "string"},
                "report": {"type": "string"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    field: FieldSpec
    alpha: float
    x0: tuple[float, ...]
    horizon: float
    mesh: dict = field(default_factory=lambda: {"kind": "uniform", "n": 1024, "stretch": 1.05, "grading": None})
    solver: dict = field(default_factory=lambda: {"corrector_iters": 2, "blowup_threshold": 1e12})
    domain_radius: float | None = None
    analyses: tuple[dict, ...] = ()
    outputs: dict = field(default_factory=lambda: {"csv": "trajectory.csv", "report": "report.json"})
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise InputError(f"invalid config at {where}: {exc.message}") from exc
        spec = FieldSpec(data["field"]["name"], dict(data["field"].get("params", {})))
        x0 = tuple(float(v) for v in data["x0"])
        if len(x0) != spec.dim:
            raise InputError(f"x0 has {len(x0)} entries but field {spec.name!r} is {spec.dim}-dimensional")
        base = cls(spec, 0.5, x0, 1.0)
        mesh = {**base.mesh, **data.get("mesh", {})}
        solver = {**base.solver, **data.get("solver", {})}
        outputs = {**base.outputs, **data.get("outputs", {})}
        return cls(
            spec,
            float(data["alpha"]),
            x0,
            float(data["horizon"]),
            mesh,
            solver,
            data.get("domain_radius"),
            tuple(dict(a) for a in data.get("analyses", [])),
            outputs,
            int(data.get("seed", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> ScenarioConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> ScenarioConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(text)

    def to_dict(self) -> dict:
        return {
            "field": self.field.to_dict(),
            "alpha": self.alpha,
            "x0": list(self.x0),
            "horizon": self.horizon,
            "mesh": dict(self.mesh),
            "solver": dict(self.solver),
            "domain_radius": self.domain_radius,
            "analyses": [dict(a) for a in self.analyses],
            "outputs": dict(self.outputs),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def solver_config(self) -> SolverConfig:
        m = self.mesh
        return SolverConfig(
            mesh=m["kind"],
            n=m["n"],
            grading=m["grading"],
            stretch=m["stretch"],
            corrector_iters=self.solver["corrector_iters"],
            blowup_threshold=self.solver["blowup_threshold"],
        )

    def problem(self) -> CaputoIVP:
        f = self.field.build()
        return CaputoIVP(
            self.alpha, lambda t, x: f(x), list(self.x0), self.horizon, self.domain_radius, name=self.field.name
        )
