"""Grid solution of the centered Poisson equation for the diffusion generator.

For bounded f the function fhat solves  -(A fhat) = f - pi(f)  where A is the
generator mu d/dx + (1/2) sigma2 d^2/dx^2.  We compute fhat through the
scale/speed representation

    fhat(x) = -int_{x0}^x s(y) G(y) dy + C,      G(y) = int_l^y (f - pi(f)) m,

with C fixing the discrete centering pi(fhat) = 0.  The representation is
integrated as a two-component ODE so the solver shares no machinery with
``apply_generator``, which re-applies the generator by finite differences and
therefore acts as an independent residual check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import models
from .models import DiffusionSpec, Observable
from .quadrature import clustered_nodes, integrate

DEFAULT_GRID_SIZE = 4096
MIN_GRID_SIZE = 16


@dataclass(frozen=True)
class GridFunction:
    grid: np.ndarray
    values: np.ndarray
    spec_id: str

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if g.size < MIN_GRID_SIZE:
            raise ValueError(f"grid must have at least {MIN_GRID_SIZE} points")
        if not np.all(np.diff(g) > 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for x, v in zip(self.grid, self.values):
                w.writerow([repr(float(x)), repr(float(v))])


def sup_norm(gf: GridFunction) -> float:
    """max_i |v_i| over the grid."""
    return float(np.max(np.abs(gf.values)))


def _solution_grid(spec: DiffusionSpec, n: int) -> np.ndarray:
    lo, hi = spec.interval.lower, spec.interval.upper
    if math.isfinite(lo) and math.isfinite(hi):
        return clustered_nodes(lo, hi, n)
    # unbounded interval (maoclass): cluster in the tan-transformed variable
    va = math.atan(lo) if math.isfinite(lo) else -math.pi / 2
    vb = math.atan(hi) if math.isfinite(hi) else math.pi / 2
    return np.tan(clustered_nodes(va, vb, n))


def solve_poisson(spec: DiffusionSpec, f: Observable,
                  n: int = DEFAULT_GRID_SIZE,
                  pi_f: Optional[float] = None) -> GridFunction:
    """Solve -(A fhat) = f - pi(f) on an endpoint-refined interior grid."""
    if n < MIN_GRID_SIZE:
        raise ValueError(f"need n >= {MIN_GRID_SIZE}")
    f.validate(spec.interval)
    if pi_f is None:
        pi_f = models.pi_integral(spec, f, validate=False)
    grid = _solution_grid(spec, n)
    x0 = spec.reference_point

    def g(x: float) -> float:
        return f.fn(x) - pi_f

    def rhs(x, y):
        gm = g(x) * models.speed_density(spec, x)
        sg = -models.scale_density(spec, x) * y[0]
        return (gm, sg)

    # Each half is swept inward from its endpoint toward x0: near a singular
    # endpoint the scale density blows up while G -> 0, so G must carry
    # relative (not just absolute) accuracy there.  Anchoring G at the
    # endpoint via quadrature and integrating inward achieves that; sweeping
    # outward from x0 would amplify a fixed absolute error in G by s(x).
    # G(l) = 0 by definition; G(u) = 0 because the integrand is centered.
    left = grid[grid < x0]
    right = grid[grid >= x0]
    vals = np.empty_like(grid)

    def sweep(targets, endpoint, tail_sign):
        if targets.size == 0:
            return np.empty(0)
        nearest = targets[0] if tail_sign > 0 else targets[-1]
        if math.isfinite(endpoint):
            start = nearest - tail_sign * 0.5 * abs(nearest - endpoint)
        else:
            start = nearest - tail_sign * (abs(nearest - x0) + 1.0)
        g_start = tail_sign * integrate(
            lambda z: g(z) * models.speed_density(spec, z),
            *((endpoint, start) if tail_sign > 0 else (start, endpoint)))
        ordered = targets if tail_sign > 0 else targets[::-1]
        append_x0 = ordered[-1] != x0
        t_eval = np.concatenate([ordered, [x0]]) if append_x0 else ordered
        sol = solve_ivp(rhs, (start, x0), (g_start, 0.0),
                        t_eval=t_eval, rtol=1e-10, atol=1e-13,
                        method="DOP853", dense_output=False)
        if not sol.success:
            raise RuntimeError(f"Poisson sweep from {endpoint} failed: {sol.message}")
        fvals = sol.y[1][:-1] if append_x0 else sol.y[1]
        fvals = fvals - sol.y[1][-1]  # pin F(x0) = 0 for both halves
        return fvals if tail_sign > 0 else fvals[::-1]

    vals[grid < x0] = sweep(left, spec.interval.lower, +1)
    vals[grid >= x0] = sweep(right, spec.interval.upper, -1)

    # center: discrete pi(fhat) = 0 under the trapezoid weights of the grid
    w = _trapezoid_weights(grid)
    pi_vals = np.array([models.stationary_density(spec, float(x)) for x in grid])
    mass = float(np.dot(w, pi_vals))
    c = -float(np.dot(w, pi_vals * vals)) / mass
    return GridFunction(grid=grid, values=vals + c, spec_id=spec.spec_id())


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    w = np.zeros_like(grid)
    d = np.diff(grid)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def apply_generator(spec: DiffusionSpec, gf: GridFunction) -> GridFunction:
    """Apply mu d/dx + (1/2) sigma2 d^2/dx^2 by finite differences on the grid.

    Nonuniform three-point central stencils in the interior; one-sided
    cubic-fit stencils at the two grid ends.
    """
    x = gf.grid
    v = gf.values
    n = x.size
    d1 = np.empty(n)
    d2 = np.empty(n)

    h1 = x[1:-1] - x[:-2]
    h2 = x[2:] - x[1:-1]
    d1[1:-1] = (-h2 / (h1 * (h1 + h2)) * v[:-2]
                + (h2 - h1) / (h1 * h2) * v[1:-1]
                + h1 / (h2 * (h1 + h2)) * v[2:])
    d2[1:-1] = 2.0 * (v[:-2] / (h1 * (h1 + h2))
                      - v[1:-1] / (h1 * h2)
                      + v[2:] / (h2 * (h1 + h2)))

    for idx, sl in ((0, slice(0, 4)), (n - 1, slice(n - 4, n))):
        xs = x[sl] - x[idx]
        coef = np.polynomial.polynomial.polyfit(xs, v[sl], 3)
        d1[idx] = coef[1]
        d2[idx] = 2.0 * coef[2]

    mu = np.array([spec.drift(float(xi)) for xi in x])
    s2 = np.array([spec.diffusion_sq(float(xi)) for xi in x])
    return GridFunction(grid=x, values=mu * d1 + 0.5 * s2 * d2,
                        spec_id=gf.spec_id)


def residual(spec: DiffusionSpec, f: Observable, fhat: GridFunction,
             pi_f: Optional[float] = None) -> GridFunction:
    """A fhat + (f - pi(f)) on the grid; zero for the exact solution."""
    if pi_f is None:
        pi_f = models.pi_integral(spec, f)
    a = apply_generator(spec, fhat)
    fv = np.array([f.fn(float(xi)) for xi in fhat.grid])
    return GridFunction(grid=fhat.grid, values=a.values + (fv - pi_f),
                        spec_id=fhat.spec_id)
