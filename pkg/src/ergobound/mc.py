"""Discretized-path Monte Carlo for diffusion time averages.

Paths follow the Euler-Maruyama scheme with a post-step boundary policy
(reflection across finite endpoints, or clamping to [l+delta, u-delta]).
Randomness is counter-based: path i draws its normals from a Philox stream
keyed by (seed, i), so a path's realization is bit-identical no matter how
many paths run, in what order, or across how many workers.  Aggregation is
a fixed-order reduction over path indices.

Built-in models and observables run through compiled kernels; anything else
falls back to an equivalent pure-Python stepper (slow, test-scale only).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numba import njit
from numpy.random import Generator, Philox
from scipy.stats import beta as _beta_dist

from .models import DiffusionSpec, ModelError, Observable

REFLECT = "reflect"
CLAMP = "clamp"

_MODEL_CODES = {"jacobi": 0, "tanou": 1, "maoclass": 2}
_OBS_CODES = {"constant": 0, "indicator": 1, "exponential": 2, "identity": 3}


class SimulationError(RuntimeError):
    """A path left the state space irrecoverably or produced non-finite values."""


@dataclass(frozen=True)
class SimConfig:
    t_horizon: float
    n_paths: int
    seed: int
    x0: float
    dt: float = 1e-3
    boundary_policy: str = REFLECT
    clamp_delta: float = 0.0
    jobs: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.dt <= self.t_horizon):
            raise ValueError("need 0 < dt <= t_horizon")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.boundary_policy not in (REFLECT, CLAMP):
            raise ValueError(f"unknown boundary policy {self.boundary_policy!r}")
        if self.clamp_delta < 0:
            raise ValueError("clamp_delta must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_horizon / self.dt))


@dataclass(frozen=True)
class TailEstimate:
    n: int
    k: int
    p_hat: float
    ci_upper: float
    eps: float
    pi_f: float
    level: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.p_hat <= self.ci_upper <= 1.0:
            raise ValueError("need 0 <= p_hat <= ci_upper <= 1")

    def to_json_dict(self) -> dict:
        return {"schema_version": 1, "n": self.n, "k": self.k,
                "p_hat": self.p_hat, "ci_upper": self.ci_upper,
                "eps": self.eps, "pi_f": self.pi_f, "level": self.level}


@dataclass(frozen=True)
class HittingTimeEstimate:
    mean: float
    std_err: float
    cap_fraction: float
    unreliable: bool
    n: int


def clopper_pearson_upper(k: int, n: int, delta: float = 0.01) -> float:
    """Exact binomial upper confidence limit at level 1 - delta."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if not 0 < delta < 1:
        raise ValueError("need 0 < delta < 1")
    if k == n:
        return 1.0
    return float(_beta_dist.ppf(1.0 - delta, k + 1, n - k))


def path_normals(seed: int, path_index: int, n: int) -> np.ndarray:
    """The n standard normals of path path_index under the given seed."""
    gen = Generator(Philox(key=np.array([seed, path_index], dtype=np.uint64)))
    return gen.standard_normal(n)


# ---------------------------------------------------------------------------
# compiled kernels (built-in models / observables)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _drift_diff(model: int, mp, x: float):
    if model == 0:      # jacobi: a - b x, sigma2 x (1-x)
        return mp[0] - mp[1] * x, mp[2] * x * (1.0 - x)
    elif model == 1:    # tanou: -rho tan(x), 1
        return -mp[0] * math.tan(x), 1.0
    else:               # maoclass: 0, 2 (1+x)^gamma
        return 0.0, 2.0 * (1.0 + x) ** mp[0]


@njit(cache=True, nogil=True, inline="always")
def _obs_eval(obs: int, op, x: float) -> float:
    if obs == 0:
        return op[0]
    elif obs == 1:
        return 1.0 if op[0] < x < op[1] else 0.0
    elif obs == 2:
        return math.exp(op[0] * x)
    else:
        return x


@njit(cache=True, nogil=True, inline="always")
def _apply_boundary(x: float, lo: float, hi: float, has_lo: bool, has_hi: bool,
                    policy: int, delta: float) -> float:
    if policy == 0:  # reflect
        for _ in range(64):
            moved = False
            if has_lo and x < lo:
                x = 2.0 * lo - x
                moved = True
            if has_hi and x > hi:
                x = 2.0 * hi - x
                moved = True
            if not moved:
                return x
        # pathological overshoot: fall back to a clamp at the boundary
        if has_lo and x < lo:
            x = lo
        if has_hi and x > hi:
            x = hi
        return x
    else:            # clamp
        if has_lo and x < lo + delta:
            x = lo + delta
        if has_hi and x > hi - delta:
            x = hi - delta
        return x


@njit(cache=True, nogil=True)
def _kern_averages(model, mp, obs, op, x0, dt, z, check_steps,
                   lo, hi, has_lo, has_hi, policy, delta):
    """Trapezoidal time averages of f along one path at each checkpoint step.

    Returns (averages, status); status 0 = ok, 1 = non-finite state.
    """
    out = np.empty(check_steps.shape[0])
    sqdt = math.sqrt(dt)
    x = x0
    fprev = _obs_eval(obs, op, x)
    acc = 0.0
    comp = 0.0
    ci = 0
    for k in range(z.shape[0]):
        mu, s2 = _drift_diff(model, mp, x)
        x = x + mu * dt + math.sqrt(s2) * sqdt * z[k]
        x = _apply_boundary(x, lo, hi, has_lo, has_hi, policy, delta)
        if not math.isfinite(x):
            return out, 1
        fnew = _obs_eval(obs, op, x)
        y = 0.5 * (fprev + fnew) * dt - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
        fprev = fnew
        if ci < check_steps.shape[0] and k + 1 == check_steps[ci]:
            out[ci] = acc / ((k + 1) * dt)
            ci += 1
    return out, 0


@njit(cache=True, nogil=True)
def _kern_hitting(model, mp, x0, y_target, dt, z,
                  lo, hi, has_lo, has_hi, policy, delta):
    """First step index whose move crosses y_target, or -1 if never."""
    sqdt = math.sqrt(dt)
    x = x0
    prev_sign = x - y_target
    for k in range(z.shape[0]):
        mu, s2 = _drift_diff(model, mp, x)
        x = x + mu * dt + math.sqrt(s2) * sqdt * z[k]
        x = _apply_boundary(x, lo, hi, has_lo, has_hi, policy, delta)
        if not math.isfinite(x):
            return -2
        new_sign = x - y_target
        if prev_sign == 0.0 or prev_sign * new_sign <= 0.0:
            return k + 1
        prev_sign = new_sign
    return -1


@njit(cache=True, nogil=True)
def _kern_histogram(model, mp, x0, dt, z, counts, bin_lo, bin_hi, burn,
                    lo, hi, has_lo, has_hi, policy, delta):
    sqdt = math.sqrt(dt)
    nb = counts.shape[0]
    width = (bin_hi - bin_lo) / nb
    x = x0
    for k in range(z.shape[0]):
        mu, s2 = _drift_diff(model, mp, x)
        x = x + mu * dt + math.sqrt(s2) * sqdt * z[k]
        x = _apply_boundary(x, lo, hi, has_lo, has_hi, policy, delta)
        if not math.isfinite(x):
            return 1
        if k >= burn:
            j = int((x - bin_lo) / width)
            if j < 0:
                j = 0
            if j >= nb:
                j = nb - 1
            counts[j] += 1
    return 0


# ---------------------------------------------------------------------------
# model / observable dispatch
# ---------------------------------------------------------------------------

def _model_code(spec: DiffusionSpec):
    code = _MODEL_CODES.get(spec.closed_form or "")
    if code is None:
        return None, None
    p = spec.params
    if code == 0:
        mp = np.array([p["a"], p["b"], p["sigma2"]])
    elif code == 1:
        mp = np.array([p["rho"]])
    else:
        mp = np.array([p["gamma"]])
    return code, mp


def _obs_code(f: Observable):
    code = _OBS_CODES.get(f.kind or "")
    if code is None:
        return None, None
    op = np.array(list(f.kind_params) + [0.0])  # pad so the array is never empty
    return code, op


def _bounds_of(spec: DiffusionSpec):
    lo, hi = spec.interval.lower, spec.interval.upper
    has_lo, has_hi = math.isfinite(lo), math.isfinite(hi)
    return (lo if has_lo else 0.0), (hi if has_hi else 0.0), has_lo, has_hi


def _policy_code(cfg: SimConfig) -> int:
    return 0 if cfg.boundary_policy == REFLECT else 1


def _py_path_averages(spec, f, cfg, z, check_steps):
    """Pure-Python stepper for custom models/observables."""
    lo, hi = spec.interval.lower, spec.interval.upper
    dt = cfg.dt
    sqdt = math.sqrt(dt)
    x = cfg.x0
    fprev = f.fn(x)
    acc = 0.0
    out = np.empty(len(check_steps))
    ci = 0
    clamp = cfg.boundary_policy == CLAMP
    for k in range(z.shape[0]):
        mu = spec.drift(x)
        s2 = spec.diffusion_sq(x)
        x = x + mu * dt + math.sqrt(s2) * sqdt * z[k]
        if clamp:
            x = min(max(x, lo + cfg.clamp_delta), hi - cfg.clamp_delta)
        else:
            for _ in range(64):
                if math.isfinite(lo) and x < lo:
                    x = 2 * lo - x
                elif math.isfinite(hi) and x > hi:
                    x = 2 * hi - x
                else:
                    break
        if not math.isfinite(x) or not (lo <= x <= hi):
            raise SimulationError(f"path left the state space at step {k} (x={x})")
        fnew = f.fn(x)
        acc += 0.5 * (fprev + fnew) * dt
        fprev = fnew
        if ci < len(check_steps) and k + 1 == check_steps[ci]:
            out[ci] = acc / ((k + 1) * dt)
            ci += 1
    return out


def _path_averages(spec: DiffusionSpec, f: Observable, cfg: SimConfig,
                   path_index: int, check_steps: np.ndarray) -> np.ndarray:
    z = path_normals(cfg.seed, path_index, cfg.n_steps)
    model, mp = _model_code(spec)
    obs, op = _obs_code(f)
    if model is not None and obs is not None:
        lo, hi, has_lo, has_hi = _bounds_of(spec)
        out, status = _kern_averages(model, mp, obs, op, cfg.x0, cfg.dt, z,
                                     check_steps, lo, hi, has_lo, has_hi,
                                     _policy_code(cfg), cfg.clamp_delta)
        if status != 0:
            raise SimulationError(
                f"path {path_index} produced a non-finite state")
        return out
    return _py_path_averages(spec, f, cfg, z, check_steps)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def simulate_functional(spec: DiffusionSpec, f: Observable, cfg: SimConfig,
                        path_index: int) -> float:
    """Trapezoidal (1/t) int_0^t f(X_s) ds along one discretized path."""
    if not 0 <= path_index < cfg.n_paths:
        raise ValueError("path_index out of range")
    if not spec.interval.contains(cfg.x0):
        raise ValueError(f"x0={cfg.x0} outside the open interval")
    check = np.array([cfg.n_steps], dtype=np.int64)
    return float(_path_averages(spec, f, cfg, path_index, check)[0])


def run_ensemble(spec: DiffusionSpec, f: Observable, cfg: SimConfig,
                 checkpoint_steps: Optional[Sequence[int]] = None) -> np.ndarray:
    """Time-average functional for every path at each checkpoint step.

    Returns an (n_paths, n_checkpoints) array; row i is bit-identical to the
    per-path result regardless of cfg.jobs.
    """
    if not spec.interval.contains(cfg.x0):
        raise ValueError(f"x0={cfg.x0} outside the open interval")
    if checkpoint_steps is None:
        checkpoint_steps = [cfg.n_steps]
    check = np.array(sorted(checkpoint_steps), dtype=np.int64)
    if check[0] < 1 or check[-1] > cfg.n_steps:
        raise ValueError("checkpoint steps must lie in [1, n_steps]")
    out = np.empty((cfg.n_paths, check.size))
    errors: list = []

    def work(rng):
        for i in rng:
            try:
                out[i] = _path_averages(spec, f, cfg, i, check)
            except SimulationError as exc:
                errors.append((i, exc))
                return

    _dispatch(work, cfg.n_paths, cfg.jobs)
    if errors:
        i, exc = errors[0]
        done = cfg.n_paths - len(errors)
        raise SimulationError(f"simulation aborted at path {i} "
                              f"({done} paths completed): {exc}")
    return out


def _dispatch(work, n: int, jobs: int) -> None:
    jobs = max(1, jobs)
    if jobs == 1:
        work(range(n))
        return
    chunk = (n + jobs - 1) // jobs
    ranges = [range(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        for fut in [ex.submit(work, r) for r in ranges]:
            fut.result()


def estimate_tail(spec: DiffusionSpec, f: Observable, cfg: SimConfig,
                  eps: float, pi_f: float, delta: float = 0.01,
                  values: Optional[np.ndarray] = None) -> TailEstimate:
    """Empirical frequency of {time average - pi_f >= eps} over the ensemble.

    pi_f must be supplied externally (stationary-law quadrature) so the
    estimator stays independent of the paths.  Pre-computed ensemble values
    may be passed to share one simulation across several eps levels.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if values is None:
        values = run_ensemble(spec, f, cfg)[:, 0]
    n = values.shape[0]
    k = int(np.count_nonzero(values - pi_f >= eps))
    return TailEstimate(n=n, k=k, p_hat=k / n,
                        ci_upper=clopper_pearson_upper(k, n, delta),
                        eps=eps, pi_f=pi_f, level=1.0 - delta)


def mc_hitting_time(spec: DiffusionSpec, cfg: SimConfig, x: float, y: float,
                    cap_warn_fraction: float = 0.05) -> HittingTimeEstimate:
    """Mean first grid-crossing time of level y from start x, horizon-capped."""
    for pt in (x, y):
        if not spec.interval.contains(pt):
            raise ValueError(f"point {pt} outside the open interval")
    if x == y:
        return HittingTimeEstimate(mean=0.0, std_err=0.0, cap_fraction=0.0,
                                   unreliable=False, n=cfg.n_paths)
    model, mp = _model_code(spec)
    if model is None:
        raise ModelError("hitting-time oracle supports built-in models only")
    lo, hi, has_lo, has_hi = _bounds_of(spec)
    pol = _policy_code(cfg)
    cfg_x = replace(cfg, x0=x)
    times = np.empty(cfg.n_paths)
    capped = np.zeros(cfg.n_paths, dtype=bool)

    def work(rng):
        for i in rng:
            z = path_normals(cfg.seed, i, cfg.n_steps)
            step = _kern_hitting(model, mp, x, y, cfg.dt, z,
                                 lo, hi, has_lo, has_hi, pol, cfg.clamp_delta)
            if step == -2:
                raise SimulationError(f"path {i} produced a non-finite state")
            if step < 0:
                times[i] = cfg.t_horizon
                capped[i] = True
            else:
                times[i] = step * cfg.dt

    _dispatch(work, cfg.n_paths, cfg_x.jobs)
    cap_frac = float(np.mean(capped))
    mean = float(np.mean(times))
    se = float(np.std(times, ddof=1) / math.sqrt(cfg.n_paths)) if cfg.n_paths > 1 else 0.0
    return HittingTimeEstimate(mean=mean, std_err=se, cap_fraction=cap_frac,
                               unreliable=cap_frac > cap_warn_fraction,
                               n=cfg.n_paths)


def stationary_histogram(spec: DiffusionSpec, cfg: SimConfig,
                         bins: int) -> np.ndarray:
    """Occupation-fraction histogram over equal-width bins, 10% burn-in."""
    if bins < 1:
        raise ValueError("bins must be positive")
    if cfg.t_horizon < 100:
        raise ValueError("histogram needs t_horizon >= 100")
    lo, hi = spec.interval.lower, spec.interval.upper
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ModelError("histogram requires a finite interval")
    model, mp = _model_code(spec)
    if model is None:
        raise ModelError("histogram supports built-in models only")
    has_lo = has_hi = True
    pol = _policy_code(cfg)
    burn = cfg.n_steps // 10
    counts = np.zeros((cfg.n_paths, bins), dtype=np.int64)

    def work(rng):
        for i in rng:
            z = path_normals(cfg.seed, i, cfg.n_steps)
            status = _kern_histogram(model, mp, cfg.x0, cfg.dt, z, counts[i],
                                     lo, hi, burn, lo, hi, has_lo, has_hi,
                                     pol, cfg.clamp_delta)
            if status != 0:
                raise SimulationError(f"path {i} produced a non-finite state")

    _dispatch(work, cfg.n_paths, cfg.jobs)
    total = counts.sum()
    return counts.sum(axis=0) / total
