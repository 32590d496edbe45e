"""Adaptive quadrature helpers with endpoint-singularity and improper-integral support.

All integrals in this package go through :func:`integrate`.  The workhorse is
QUADPACK's adaptive Gauss-Kronrod scheme (``scipy.integrate.quad``); when the
global call does not converge we fall back to geometric subdivision toward the
endpoints, which handles the integrable power-law blow-ups that occur at the
boundaries of the diffusion state space.  Infinite endpoints are mapped to a
finite interval with x = tan(v) so that every integral is ultimately evaluated
on a bounded domain.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate as _sp_integrate

ABS_TOL = 1e-10
REL_TOL = 1e-8

# geometric subdivision fallback: number of dyadic layers stacked toward
# each endpoint before we give up
_MAX_LAYERS = 60


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature fails to reach the requested tolerance."""


def _kahan_sum(values) -> float:
    total = 0.0
    c = 0.0
    for v in values:
        y = v - c
        t = total + y
        c = (t - total) - y
        total = t
    return total


def _quad_finite(fn, a, b, abs_tol, rel_tol):
    out = _sp_integrate.quad(fn, a, b, epsabs=abs_tol, epsrel=rel_tol,
                             limit=200, full_output=True)
    value, err = out[0], out[1]
    ok = len(out) < 4  # 4th element is the warning/error message
    return value, err, ok


def _geometric_layers(a: float, b: float, n_layers: int):
    """Subdivision points accumulating geometrically toward both endpoints."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = [a + half * 2.0 ** (-k) for k in range(n_layers, 0, -1)]
    pts += [b - half * 2.0 ** (-k) for k in range(1, n_layers + 1)]
    return [a] + sorted(set(pts) | {mid}) + [b]


def _subdivided(fn, a, b, abs_tol, rel_tol):
    pieces = []
    cuts = _geometric_layers(a, b, _MAX_LAYERS)
    bad = 0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        v, e, ok = _quad_finite(fn, lo, hi, abs_tol / len(cuts), rel_tol)
        if not ok:
            bad += 1
        pieces.append((v, e))
    value = _kahan_sum(v for v, _ in pieces)
    err = sum(e for _, e in pieces)
    tol = max(abs_tol, rel_tol * abs(value))
    if bad > 2 or err > 10 * tol:
        raise QuadratureError(
            f"adaptive quadrature failed on ({a}, {b}): "
            f"estimated error {err:.3e}, {bad} bad subintervals"
        )
    return value


def map_infinite(fn: Callable[[float], float], a: float, b: float):
    """Map an integral with infinite endpoint(s) to a finite v-interval via x = tan(v)."""
    va = math.atan(a) if math.isfinite(a) else (-math.pi / 2)
    vb = math.atan(b) if math.isfinite(b) else (math.pi / 2)

    def g(v):
        x = math.tan(v)
        c = math.cos(v)
        return fn(x) / (c * c)

    return g, va, vb


def integrate(fn: Callable[[float], float], a: float, b: float,
              abs_tol: float = ABS_TOL, rel_tol: float = REL_TOL) -> float:
    """Integrate fn over (a, b), either endpoint possibly infinite.

    Raises QuadratureError when the estimated error does not meet the
    tolerance even after geometric endpoint subdivision.
    """
    if not a < b:
        if a == b:
            return 0.0
        raise ValueError(f"empty integration interval ({a}, {b})")
    if not (math.isfinite(a) and math.isfinite(b)):
        fn, a, b = map_infinite(fn, a, b)
    value, err, ok = _quad_finite(fn, a, b, abs_tol, rel_tol)
    tol = max(abs_tol, rel_tol * abs(value))
    if ok and err <= 10 * tol:
        return value
    return _subdivided(fn, a, b, abs_tol, rel_tol)


def clustered_nodes(a: float, b: float, n: int) -> np.ndarray:
    """Interior nodes clustered toward both endpoints of a finite interval.

    Chebyshev-like spacing blended with a small uniform component so that the
    minimum grid gap stays well above the scale at which second-difference
    stencils lose accuracy to rounding.
    """
    j = np.arange(1, n + 1)
    theta = (j - 0.5) * math.pi / n
    cheb = 0.5 * (1.0 - np.cos(theta))
    unif = (j - 0.5) / n
    w = 0.02
    t = (1.0 - w) * cheb + w * unif
    return a + (b - a) * t
