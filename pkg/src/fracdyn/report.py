"""Uniform JSON report shape shared by the analysis operations."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

SCHEMA_VERSION = 1
REPORT_KEYS = ("operation", "inputs", "verdict", "margins", "constants", "grids", "tolerances", "warnings")


@dataclass
class Report:
    operation: str
    verdict: str
    inputs: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "stable_sector", "ordering_holds")

    def to_dict(self) -> dict:
        return {k: jsonable(getattr(self, k)) for k in REPORT_KEYS}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers into plain JSON values.

    Non-finite floats become strings ("inf", "nan") so the output stays
    strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        if obj.imag == 0:
            return jsonable(float(obj.real))
        return {"re": jsonable(float(obj.real)), "im": jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # enums
        return obj.value
    return obj
