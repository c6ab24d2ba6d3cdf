"""Registry of autonomous vector fields ``f(x)`` used by the CLI scenarios.

A new field is added by writing a builder ``params -> f`` and registering a
:class:`FieldDef` in :data:`REGISTRY`.  Fields take and return 1-D arrays of
length ``dim``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from fracdyn.errors import InputError
from fracdyn.stability.lyapunov import LyapunovCertificate, quadratic_certificate

VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FieldDef:
    name: str
    build: Callable[[dict], VectorField]
    dim: Callable[[dict], int]
    required: tuple[str, ...] = ()
    defaults: Mapping[str, float] = field(default_factory=dict)
    variadic: str | None = None  # prefix of numbered parameters, e.g. "a" for a1, a2, ...
    exceptional: Callable[[dict], tuple[float, ...]] = lambda p: ()
    certificate: Callable[[dict], LyapunovCertificate | None] = lambda p: None
    description: str = ""

    def resolve(self, params: Mapping[str, float]) -> dict:
        """Defaults merged with *params*; unknown or missing names raise."""
        out = dict(self.defaults)
        for k, v in params.items():
            known = k in self.required or k in self.defaults
            numbered = self.variadic is not None and k.startswith(self.variadic) and k[len(self.variadic) :].isdigit()
            if not (known or numbered):
                raise InputError(f"field {self.name!r} has no parameter {k!r}")
            out[k] = float(v)
        missing = [k for k in self.required if k not in out]
        if missing:
            raise InputError(f"field {self.name!r} needs parameters {missing}")
        if self.variadic is not None:
            idx = sorted(int(k[len(self.variadic) :]) for k in out if k.startswith(self.variadic) and k[len(self.variadic) :].isdigit())
            if not idx or idx != list(range(1, len(idx) + 1)):
                raise InputError(f"field {self.name!r} needs {self.variadic}1..{self.variadic}d without gaps")
        return out


@dataclass(frozen=True)
class FieldSpec:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in REGISTRY:
            raise InputError(f"unknown field {self.name!r}; known: {sorted(REGISTRY)}")
        object.__setattr__(self, "params", REGISTRY[self.name].resolve(self.params))

    @property
    def definition(self) -> FieldDef:
        return REGISTRY[self.name]

    @property
    def dim(self) -> int:
        return self.definition.dim(self.params)

    def build(self) -> VectorField:
        return self.definition.build(self.params)

    def exceptional_points(self) -> tuple[float, ...]:
        return self.definition.exceptional(self.params)

    def certificate(self) -> LyapunovCertificate | None:
        return self.definition.certificate(self.params)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(sorted(self.params.items()))}


def _signed_power(x: np.ndarray, beta: float) -> np.ndarray:
    return np.sign(x) * np.abs(x) ** beta


# {{{ builders


def _diag_coeffs(p: dict) -> np.ndarray:
    return np.array([p[f"a{i}"] for i in range(1, len(p) + 1)])


def _linear_diag(p: dict) -> VectorField:
    a = _diag_coeffs(p)
    return lambda x: a * np.asarray(x, dtype=float)


def _linear_cert(p: dict) -> LyapunovCertificate | None:
    a = _diag_coeffs(p)
    if np.any(a >= 0):
        return None
    # 2 <x, Ax> <= -2 min|a_i| |x|^2
    return quadratic_certificate(2 * float(np.min(-a)), 2.0, 1.0, dim=a.size)


def _power_sign(p: dict) -> VectorField:
    beta = p["beta"]
    return lambda x: -_signed_power(np.asarray(x, dtype=float), beta)


def _cubic_plus_g(p: dict) -> VectorField:
    k, n = p["k"], p["n"]
    if n <= 3:
        raise InputError("the perturbation g = k sign(x)|x|^n needs n > 3 so that g(x)/x^3 -> 0")
    return lambda x: -np.asarray(x, dtype=float) ** 3 + k * _signed_power(np.asarray(x, dtype=float), n)


def _cubic_plus_g_cert(p: dict) -> LyapunovCertificate:
    # 2x(-x^3 + k sign(x)|x|^n) <= -x^4  iff  2|k| |x|^(n-3) <= 1
    k, n = abs(p["k"]), p["n"]
    r = 1.0 if k == 0 else min(1.0, (1 / (2 * k)) ** (1 / (n - 3)))
    return quadratic_certificate(1.0, 4.0, r)


def _twodim(p: dict) -> VectorField:
    def f(x):
        x1, x2 = np.asarray(x, dtype=float)
        return np.array([-(x1**3) + x2**4, -(x2**3) - x2 * x1**2])

    return f


def _exp_reciprocal(p: dict) -> VectorField:
    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos, neg = x > 0, x < 0
        out[pos] = -np.exp(-1 / x[pos]) * x[pos]
        out[neg] = -np.exp(1 / x[neg]) * x[neg]
        return out

    return f


def _semilinear(p: dict) -> VectorField:
    lam, k = p["lam"], p["k"]
    return lambda x: lam * np.asarray(x, dtype=float) - k * np.asarray(x, dtype=float) ** 3


def _zero(p: dict) -> VectorField:
    return lambda x: np.zeros_like(np.asarray(x, dtype=float))


# }}}


REGISTRY: dict[str, FieldDef] = {
    d.name: d
    for d in [
        FieldDef(
            "linear_diag",
            _linear_diag,
            dim=lambda p: len(p),
            variadic="a",
            certificate=_linear_cert,
            description="f(x) = diag(a1..ad) x",
        ),
        FieldDef(
            "power_sign",
            _power_sign,
            dim=lambda p: 1,
            required=("beta",),
            exceptional=lambda p: (0.0,) if p["beta"] < 1 else (),
            certificate=lambda p: quadratic_certificate(2.0, 1.0 + p["beta"], 1.0),
            description="f(x) = -sign(x)|x|^beta",
        ),
        FieldDef(
            "cubic_plus_g",
            _cubic_plus_g,
            dim=lambda p: 1,
            defaults={"k": 1.0, "n": 4.0},
            certificate=_cubic_plus_g_cert,
            description="f(x) = -x^3 + g(x), g(x) = k sign(x)|x|^n with n > 3",
        ),
        FieldDef(
            "twodim",
            _twodim,
            dim=lambda p: 2,
            # 2x1(-x1^3 + x2^4) + 2x2(-x2^3 - x2 x1^2) <= -x1^4 - x2^4 on |x| <= 1/2
            certificate=lambda p: quadratic_certificate(1.0, 4.0, 0.5, dim=2),
            description="f(x) = (-x1^3 + x2^4, -x2^3 - x2 x1^2)",
        ),
        FieldDef(
            "exp_reciprocal",
            _exp_reciprocal,
            dim=lambda p: 1,
            description="f(x) = -exp(-1/|x|) x, f(0) = 0",
        ),
        FieldDef(
            "semilinear",
            _semilinear,
            dim=lambda p: 1,
            defaults={"lam": -1.0, "k": 1.0},
            description="f(x) = lam x - k x^3",
        ),
        FieldDef(
            "zero",
            _zero,
            dim=lambda p: int(p["d"]),
            defaults={"d": 1.0},
            certificate=lambda p: quadratic_certificate(0.0, 2.0, 1.0, dim=int(p["d"])),
            description="f(x) = 0",
        ),
    ]
}


def sharp_rate(spec: FieldSpec, alpha: float) -> float | None:
    """Known exact decay exponent for the registry fields that have one."""
    if spec.name == "linear_diag" and all(v < 0 for v in spec.params.values()):
        return alpha
    if spec.name == "power_sign":
        beta = spec.params["beta"]
        return alpha / beta if beta != 1 else alpha
    if spec.name == "cubic_plus_g":
        return alpha / 3
    return None


def explicit_zero_solution(alpha: float, beta: float) -> Callable[[np.ndarray], np.ndarray]:
    """Nontrivial solution ``c t^(alpha/(1-beta))`` of ``CD^alpha x = x^beta``, ``x(0) = 0``, ``beta < 1``."""
    if not 0 < beta < 1:
        raise InputError("needs 0 < beta < 1")
    g = alpha / (1 - beta)
    c = (math.gamma(g + 1 - alpha) / math.gamma(g + 1)) ** (1 / (1 - beta))
    return lambda t: c * np.asarray(t, dtype=float) ** g
