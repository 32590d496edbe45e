"""Diffusion models: coefficients, scale/speed densities, stationary laws.

A one-dimensional diffusion on an open interval is described by its drift
mu(x) and squared diffusion coefficient sigma2(x).  From these we build the
scale density s(x) = exp{-int_{x0}^x 2 mu / sigma2}, the speed density
m(x) = 2 / (sigma2(x) s(x)), the stationary density m(x)/M_total, and
integrals of observables against the stationary law.

Three built-in families are provided:

* ``jacobi(a, b, sigma2)`` on (0, 1): drift a - b x, diffusion sigma2 x(1-x).
* ``tanou(rho)`` on (-pi/2, pi/2): drift -rho tan(x), unit diffusion.
* ``maoclass(gamma)`` on (0, inf): zero drift, diffusion 2 (1+x)^gamma.

Built-ins carry closed-form scale/speed/stationary densities; everything
also works through the generic quadrature path so the two can be
cross-checked.  Scale densities are normalized so that s(x0) = 1 (the
closed forms are divided by their value at the reference point); the
stationary law is invariant under this choice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special as sp_special

from .quadrature import QuadratureError, integrate

SPOT_CHECK_POINTS = 10_000


class ModelError(ValueError):
    """Invalid diffusion specification or observable."""


class NoStationaryDensityError(ModelError):
    """Total speed measure diverges: no stationary density exists."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

REFLECTING = "reflecting"
INACCESSIBLE = "inaccessible"


@dataclass(frozen=True)
class StateInterval:
    lower: float
    upper: float
    lower_boundary: str = INACCESSIBLE
    upper_boundary: str = INACCESSIBLE

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ModelError(f"need lower < upper, got ({self.lower}, {self.upper})")
        for b in (self.lower_boundary, self.upper_boundary):
            if b not in (REFLECTING, INACCESSIBLE):
                raise ModelError(f"unknown boundary behavior {b!r}")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return self.lower < x < self.upper

    def interior_grid(self, n: int) -> np.ndarray:
        """Evenly spaced interior points, infinite endpoints mapped via tan."""
        lo = self.lower if math.isfinite(self.lower) else None
        hi = self.upper if math.isfinite(self.upper) else None
        va = math.atan(lo) if lo is not None else -math.pi / 2
        vb = math.atan(hi) if hi is not None else math.pi / 2
        v = np.linspace(va, vb, n + 2)[1:-1]
        return np.tan(v)


@dataclass(frozen=True)
class DiffusionSpec:
    interval: StateInterval
    drift: Callable[[float], float]
    diffusion_sq: Callable[[float], float]
    reference_point: float
    closed_form: Optional[str] = None          # "jacobi" | "tanou" | "maoclass" | None
    params: dict = field(default_factory=dict)
    name: str = "custom"

    def __post_init__(self):
        if not self.interval.contains(self.reference_point):
            raise ModelError(
                f"reference point {self.reference_point} outside open interval")
        for x in _probe_points(self.interval):
            if not self.diffusion_sq(x) > 0:
                raise ModelError(f"diffusion_sq must be positive; failed at x={x}")

    def spec_id(self) -> str:
        if self.closed_form:
            ps = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
            return f"{self.closed_form}({ps})"
        return self.name


@dataclass(frozen=True)
class Observable:
    fn: Callable[[float], float]
    sup_norm: float
    name: str = "f"
    kind: Optional[str] = None                 # fast-path tag for the MC kernels
    kind_params: tuple = ()

    def __post_init__(self):
        if self.sup_norm < 0:
            raise ModelError("sup_norm must be nonnegative")

    def validate(self, interval: StateInterval) -> None:
        """Spot-check |f| <= sup_norm on a dense interior grid."""
        xs = interval.interior_grid(SPOT_CHECK_POINTS)
        vals = np.array([self.fn(float(x)) for x in xs])
        worst = float(np.max(np.abs(vals)))
        if worst > self.sup_norm * (1 + 1e-12) + 1e-15:
            raise ModelError(
                f"observable {self.name!r}: |f| reaches {worst:.6g} on the grid, "
                f"exceeding declared sup_norm {self.sup_norm:.6g}")


def _probe_points(interval: StateInterval, n: int = 17) -> np.ndarray:
    return interval.interior_grid(n)


# ---------------------------------------------------------------------------
# built-in model constructors
# ---------------------------------------------------------------------------

def jacobi(a: float, b: float, sigma2: float = 2.0) -> DiffusionSpec:
    """Jacobi diffusion on (0,1): drift a - b x, diffusion sigma2 x (1-x)."""
    if not (b > a > 0):
        raise ModelError(f"jacobi requires b > a > 0, got a={a}, b={b}")
    if not sigma2 > 0:
        raise ModelError("jacobi requires sigma2 > 0")
    iv = StateInterval(0.0, 1.0)
    return DiffusionSpec(
        interval=iv,
        drift=lambda x: a - b * x,
        diffusion_sq=lambda x: sigma2 * x * (1.0 - x),
        reference_point=0.5,
        closed_form="jacobi",
        params={"a": a, "b": b, "sigma2": sigma2},
        name="jacobi",
    )


def jacobi_exponents(a: float, b: float, sigma2: float) -> tuple[float, float]:
    """(alpha, beta) of the Beta(alpha+1, beta+1) stationary law."""
    alpha = 2.0 * (b - a) / sigma2 - 1.0
    beta = 2.0 * a / sigma2 - 1.0
    return alpha, beta


def tanou(rho: float) -> DiffusionSpec:
    """Finite-interval analogue of the OU process on (-pi/2, pi/2)."""
    if rho < 0.5:
        raise ModelError(f"tanou requires rho >= 1/2, got {rho}")
    iv = StateInterval(-math.pi / 2, math.pi / 2)
    return DiffusionSpec(
        interval=iv,
        drift=lambda x: -rho * math.tan(x),
        diffusion_sq=lambda x: 1.0,
        reference_point=0.0,
        closed_form="tanou",
        params={"rho": rho},
        name="tanou",
    )


def maoclass(gamma: float) -> DiffusionSpec:
    """Zero-drift diffusion on (0, inf) with sigma2 = 2 (1+x)^gamma, reflecting at 0."""
    if gamma <= 2:
        raise ModelError(f"maoclass requires gamma > 2, got {gamma}")
    return _maoclass_unchecked(gamma)


def _maoclass_unchecked(gamma: float) -> DiffusionSpec:
    # used by tests that probe the divergent regime gamma <= 2
    iv = StateInterval(0.0, math.inf, lower_boundary=REFLECTING)
    return DiffusionSpec(
        interval=iv,
        drift=lambda x: 0.0,
        diffusion_sq=lambda x: 2.0 * (1.0 + x) ** gamma,
        reference_point=1.0,
        closed_form="maoclass",
        params={"gamma": gamma},
        name="maoclass",
    )


# ---------------------------------------------------------------------------
# scale / speed densities
# ---------------------------------------------------------------------------

def _scale_closed(spec: DiffusionSpec, x: float) -> float:
    p = spec.params
    if spec.closed_form == "jacobi":
        a, b, s2 = p["a"], p["b"], p["sigma2"]
        def raw(y):
            return y ** (-2.0 * a / s2) * (1.0 - y) ** (-2.0 * (b - a) / s2)
        return raw(x) / raw(spec.reference_point)
    if spec.closed_form == "tanou":
        rho = p["rho"]
        return (math.cos(x) / math.cos(spec.reference_point)) ** (-2.0 * rho)
    if spec.closed_form == "maoclass":
        return 1.0
    raise AssertionError(spec.closed_form)


def scale_density(spec: DiffusionSpec, x: float, use_closed_form: bool = True) -> float:
    """s(x) = exp{-int_{x0}^x 2 mu(z)/sigma2(z) dz}, normalized to s(x0) = 1."""
    if not spec.interval.contains(x):
        raise ModelError(f"x={x} outside open interval")
    if use_closed_form and spec.closed_form:
        return _scale_closed(spec, x)
    x0 = spec.reference_point
    if x == x0:
        return 1.0
    lo, hi = min(x0, x), max(x0, x)
    val = integrate(lambda z: 2.0 * spec.drift(z) / spec.diffusion_sq(z), lo, hi)
    if x < x0:
        val = -val
    return math.exp(-val)


def speed_density(spec: DiffusionSpec, x: float, use_closed_form: bool = True) -> float:
    """m(x) = 2 / (sigma2(x) s(x))."""
    return 2.0 / (spec.diffusion_sq(x) * scale_density(spec, x, use_closed_form))


def total_speed_measure(spec: DiffusionSpec) -> float:
    """M_total = int m(x) dx over the state space; raises if divergent."""
    if spec.closed_form == "jacobi":
        alpha, beta = jacobi_exponents(**spec.params)
        # m(x) = m(x0) * x^beta (1-x)^alpha / (x0^beta (1-x0)^alpha)
        x0 = spec.reference_point
        scale = speed_density(spec, x0) / (x0 ** beta * (1 - x0) ** alpha)
        return scale * sp_special.beta(beta + 1.0, alpha + 1.0)
    if spec.closed_form == "tanou":
        rho = spec.params["rho"]
        # m(x) = 2 cos(x)^{2 rho} with the x0 = 0 normalization
        return 2.0 * _tanou_normalizer(rho)
    if spec.closed_form == "maoclass":
        gamma = spec.params["gamma"]
        return 1.0 / (gamma - 1.0)
    try:
        return integrate(lambda y: speed_density(spec, y),
                         spec.interval.lower, spec.interval.upper)
    except QuadratureError as exc:
        raise NoStationaryDensityError(
            f"total speed measure of {spec.spec_id()} did not converge: {exc}"
        ) from exc


def stationary_density(spec: DiffusionSpec, x: float) -> float:
    """Normalized speed density m(x) / M_total."""
    if not spec.interval.contains(x):
        return 0.0
    if spec.closed_form == "jacobi":
        alpha, beta = jacobi_exponents(**spec.params)
        return (x ** beta * (1.0 - x) ** alpha
                / sp_special.beta(alpha + 1.0, beta + 1.0))
    if spec.closed_form == "tanou":
        rho = spec.params["rho"]
        z = _tanou_normalizer(rho)
        return math.cos(x) ** (2.0 * rho) / z
    if spec.closed_form == "maoclass":
        gamma = spec.params["gamma"]
        return (gamma - 1.0) * (1.0 + x) ** (-gamma)
    return speed_density(spec, x) / total_speed_measure(spec)


def _tanou_normalizer(rho: float) -> float:
    # int_{-pi/2}^{pi/2} cos(x)^{2 rho} dx = sqrt(pi) Gamma(rho + 1/2) / Gamma(rho + 1)
    return math.sqrt(math.pi) * sp_special.gamma(rho + 0.5) / sp_special.gamma(rho + 1.0)


def pi_integral(spec: DiffusionSpec, f: Observable,
                validate: bool = True) -> float:
    """Space average pi(f) = int f d(pi) against the stationary law."""
    if validate:
        f.validate(spec.interval)
    total_speed_measure(spec)  # raises when no stationary density exists
    return integrate(lambda x: f.fn(x) * stationary_density(spec, x),
                     spec.interval.lower, spec.interval.upper)


# ---------------------------------------------------------------------------
# observable factories (fast-path tags consumed by the MC kernels)
# ---------------------------------------------------------------------------

def obs_constant(c: float) -> Observable:
    return Observable(fn=lambda x: c, sup_norm=abs(c),
                      name=f"const({c:g})", kind="constant", kind_params=(c,))


def obs_indicator(lo: float, hi: float) -> Observable:
    return Observable(fn=lambda x: 1.0 if lo < x < hi else 0.0, sup_norm=1.0,
                      name=f"indicator({lo:g},{hi:g})",
                      kind="indicator", kind_params=(lo, hi))


def obs_exponential(u: float, interval: StateInterval) -> Observable:
    """f(x) = exp(u x), with sup over the (finite) interval."""
    if not (math.isfinite(interval.lower) and math.isfinite(interval.upper)):
        raise ModelError("exponential observable needs a finite interval for its sup")
    sup = max(math.exp(u * interval.lower), math.exp(u * interval.upper))
    return Observable(fn=lambda x: math.exp(u * x), sup_norm=sup,
                      name=f"exp({u:g}x)", kind="exponential", kind_params=(u,))


def obs_identity(interval: StateInterval) -> Observable:
    sup = max(abs(interval.lower), abs(interval.upper))
    if not math.isfinite(sup):
        raise ModelError("identity observable unbounded on infinite interval")
    return Observable(fn=lambda x: x, sup_norm=sup, name="x",
                      kind="identity", kind_params=())


def obs_polynomial(coeffs, interval: StateInterval) -> Observable:
    """f(x) = sum c_k x^k with sup estimated on a dense grid."""
    cs = tuple(float(c) for c in coeffs)
    def f(x):
        acc = 0.0
        for c in reversed(cs):
            acc = acc * x + c
        return acc
    xs = interval.interior_grid(SPOT_CHECK_POINTS)
    sup = float(np.max(np.abs([f(float(x)) for x in xs]))) * (1 + 1e-9) + 1e-15
    return Observable(fn=f, sup_norm=sup, name=f"poly{cs}",
                      kind="polynomial", kind_params=cs)


# ---------------------------------------------------------------------------
# JSON model files
# ---------------------------------------------------------------------------

_EXPRESSION_KINDS = ("polynomial", "scaled_tan", "exp_poly", "sum", "product")


def _build_expression(node: dict) -> Callable[[float], float]:
    """Closed set of safe expressions for custom model files (no code eval)."""
    kind = node.get("kind")
    if kind == "polynomial":
        cs = [float(c) for c in node["coeffs"]]
        def poly(x):
            acc = 0.0
            for c in reversed(cs):
                acc = acc * x + c
            return acc
        return poly
    if kind == "scaled_tan":
        s = float(node["scale"])
        return lambda x: s * math.tan(x)
    if kind == "exp_poly":
        s = float(node.get("scale", 1.0))
        inner = _build_expression({"kind": "polynomial", "coeffs": node["coeffs"]})
        return lambda x: s * math.exp(inner(x))
    if kind == "sum":
        terms = [_build_expression(t) for t in node["terms"]]
        return lambda x: sum(t(x) for t in terms)
    if kind == "product":
        factors = [_build_expression(t) for t in node["terms"]]
        def prod(x):
            acc = 1.0
            for g in factors:
                acc *= g(x)
            return acc
        return prod
    raise ModelError(f"unknown expression kind {kind!r}; allowed: {_EXPRESSION_KINDS}")


def spec_from_dict(doc: dict) -> DiffusionSpec:
    model = doc.get("model")
    params = doc.get("params", {})
    if model == "jacobi":
        return jacobi(params["a"], params["b"], params.get("sigma2", 2.0))
    if model == "tanou":
        return tanou(params["rho"])
    if model == "maoclass":
        return maoclass(params["gamma"])
    if model == "custom":
        ivd = params["interval"]
        lo = float(ivd["lower"]) if ivd["lower"] != "-inf" else -math.inf
        hi = float(ivd["upper"]) if ivd["upper"] != "inf" else math.inf
        iv = StateInterval(lo, hi,
                           ivd.get("lower_boundary", INACCESSIBLE),
                           ivd.get("upper_boundary", INACCESSIBLE))
        drift = _build_expression(params["drift"])
        diff = _build_expression(params["diffusion_sq"])
        ref = params.get("reference_point")
        if ref is None:
            if math.isfinite(lo) and math.isfinite(hi):
                ref = 0.5 * (lo + hi)
            elif math.isfinite(lo):
                ref = lo + 1.0
            else:
                ref = hi - 1.0
        return DiffusionSpec(interval=iv, drift=drift, diffusion_sq=diff,
                             reference_point=float(ref),
                             name=params.get("name", "custom"))
    raise ModelError(f"unknown model {model!r}")


def load_spec(path: str) -> DiffusionSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))
