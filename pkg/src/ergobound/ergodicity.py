"""Uniform-ergodicity certification and average hitting times.

Two computable criteria are implemented:

* the scale/speed integral test  int m([x, u]) s(x) dx < inf, applicable to
  diffusions on (l, u) whose lower boundary is reflecting;
* the spectral test  t_av = sum_i 1/lambda_i < inf  over the nonzero
  eigenvalues of the negated generator (the eigentime identity), applicable
  whenever the eigenvalue sequence is known.

When t_av is finite the induced norm of the deviation kernel is bounded by
2 t_av; that surrogate is what the concentration bounds consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from scipy import special as sp_special

from . import models
from .models import DiffusionSpec
from .quadrature import QuadratureError, integrate

EIGENTIME_DEFAULT_TOL = 1e-9
EIGENTIME_TERM_CAP = 10 ** 7

# divergence heuristic: declare divergence when the exhaustion increments
# fail to shrink by this factor over this many consecutive rounds
_DIV_SHRINK = 0.9
_DIV_ROUNDS = 8
_MAX_EXHAUSTION_ROUNDS = 48


class CriterionInapplicableError(RuntimeError):
    """The integral test's setting (reflecting lower boundary) does not hold."""


class DivergenceSuspectedError(RuntimeError):
    """Eigentime series did not meet the tolerance within the term cap."""


@dataclass(frozen=True)
class DivergentMarker:
    rounds: int

    def to_json_dict(self) -> dict:
        return {"divergent": True, "rounds": self.rounds}


@dataclass(frozen=True)
class EigenSequence:
    """Nonzero eigenvalues of the negated generator plus tail metadata.

    ``eval`` maps i >= 1 to lambda_i (positive, nondecreasing).
    ``tail_envelope`` maps N to a rigorous upper bound on sum_{i>N} 1/lambda_i.
    ``tail_exact`` optionally gives the tail in closed form (built-ins); when
    present the eigentime correction is exact and the reported uncertainty
    is at rounding level.
    """
    eval: Callable[[int], float]
    tail_envelope: Callable[[int], float]
    tail_exact: Optional[Callable[[int], float]] = None
    name: str = "eigensequence"


def _reciprocal_quadratic_tail(c: float, n: int) -> float:
    """sum_{i>N} 1/(i(i+c)) in closed form via the digamma function."""
    if c == 0.0:
        return float(sp_special.polygamma(1, n + 1))
    return float((sp_special.digamma(n + 1 + c) - sp_special.digamma(n + 1)) / c)


def _log_tail_bound(c: float, n: int) -> float:
    """int_N^inf dx / (x (x + c)), a tail bound for decreasing summands."""
    if c == 0.0:
        return 1.0 / n
    return math.log1p(c / n) / c


def jacobi_eigen(b: float, sigma2: float = 2.0) -> EigenSequence:
    """lambda_i = (sigma2/2) i (i - 1 + 2b/sigma2) for the Jacobi diffusion."""
    if b <= 0 or sigma2 <= 0:
        raise ValueError("jacobi eigenvalues need b > 0 and sigma2 > 0")
    c = 2.0 * b / sigma2 - 1.0
    scale = 2.0 / sigma2
    return EigenSequence(
        eval=lambda i: 0.5 * sigma2 * i * (i + c),
        tail_envelope=lambda n: scale * _log_tail_bound(c, n),
        tail_exact=lambda n: scale * _reciprocal_quadratic_tail(c, n),
        name=f"jacobi(b={b:g},sigma2={sigma2:g})",
    )


def tanou_eigen(rho: float) -> EigenSequence:
    """lambda_i = i (rho + i/2) for the finite-interval OU analogue."""
    if rho < 0.5:
        raise ValueError("tanou eigenvalues need rho >= 1/2")
    c = 2.0 * rho
    return EigenSequence(
        eval=lambda i: i * (rho + 0.5 * i),
        tail_envelope=lambda n: 2.0 / n,        # 1/(i(rho+i/2)) <= 2/i^2
        tail_exact=lambda n: 2.0 * _reciprocal_quadratic_tail(c, n),
        name=f"tanou(rho={rho:g})",
    )


def builtin_eigen(spec: DiffusionSpec) -> Optional[EigenSequence]:
    if spec.closed_form == "jacobi":
        return jacobi_eigen(spec.params["b"], spec.params["sigma2"])
    if spec.closed_form == "tanou":
        return tanou_eigen(spec.params["rho"])
    return None


# ---------------------------------------------------------------------------
# eigentime identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigentimeResult:
    value: float
    uncertainty: float
    n_terms: int


def eigentime_detail(seq: EigenSequence, tol: float = EIGENTIME_DEFAULT_TOL,
                     term_cap: int = EIGENTIME_TERM_CAP) -> EigentimeResult:
    """Partial sum of 1/lambda_i plus a tail correction controlled by tol.

    With an exact tail (built-ins) the correction is applied after a short
    partial sum and the uncertainty is at rounding level; otherwise the sum
    is extended until the tail envelope itself drops below tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    total = 0.0
    comp = 0.0  # compensated accumulation: result independent of batch split
    n = 0
    prev_lam = 0.0
    block = 4096
    while True:
        stop = min(n + block, term_cap)
        for i in range(n + 1, stop + 1):
            lam = seq.eval(i)
            if lam <= 0:
                raise ValueError(f"eigenvalue lambda_{i} = {lam} not positive")
            if lam < prev_lam * (1 - 1e-12):
                raise ValueError(f"eigenvalues not nondecreasing at i={i}")
            prev_lam = lam
            y = 1.0 / lam - comp
            t = total + y
            comp = (t - total) - y
            total = t
        n = stop
        if seq.tail_exact is not None and n >= 2048:
            tail = seq.tail_exact(n)
            env = seq.tail_envelope(n)
            if tail > env * (1 + 1e-9) + 1e-300:
                raise ValueError(
                    f"{seq.name}: tail_exact({n}) = {tail:.3e} exceeds "
                    f"envelope {env:.3e}")
            return EigentimeResult(value=total + tail,
                                   uncertainty=16 * 2.2e-16 * (total + tail),
                                   n_terms=n)
        if seq.tail_exact is None and seq.tail_envelope(n) < tol:
            return EigentimeResult(value=total, uncertainty=seq.tail_envelope(n),
                                   n_terms=n)
        if n >= term_cap:
            raise DivergenceSuspectedError(
                f"{seq.name}: tail envelope still {seq.tail_envelope(n):.3e} "
                f"after {n} terms (tol {tol:.1e}); series may diverge")


def eigentime(seq: EigenSequence, tol: float = EIGENTIME_DEFAULT_TOL) -> float:
    return eigentime_detail(seq, tol).value


def q_sharp_norm_bound(t_av: float) -> float:
    """Deviation-kernel norm surrogate 2 t_av."""
    if not (t_av > 0 and math.isfinite(t_av)):
        raise ValueError(f"t_av must be finite and positive, got {t_av}")
    return 2.0 * t_av


# ---------------------------------------------------------------------------
# integral criterion
# ---------------------------------------------------------------------------

def _speed_tail(spec: DiffusionSpec, x: float) -> float:
    """m([x, u]) = int_x^u m(z) dz."""
    if spec.closed_form == "maoclass":
        gamma = spec.params["gamma"]
        if gamma <= 1:
            raise QuadratureError("speed tail diverges for gamma <= 1")
        return (1.0 + x) ** (1.0 - gamma) / (gamma - 1.0)
    return integrate(lambda z: models.speed_density(spec, z),
                     x, spec.interval.upper, abs_tol=1e-12, rel_tol=1e-10)


def _exhaustion_probe(fn, lo: float, hi: float):
    """Classify a suspect improper integral by integrating over a growing
    exhaustion of (lo, hi): divergent when the increments stop shrinking."""
    finite_hi = math.isfinite(hi)
    increments = []
    total = 0.0
    prev_edge = lo + (0.5 * (hi - lo) if finite_hi else 1.0)
    try:
        total = integrate(fn, lo, prev_edge)
    except QuadratureError:
        return DivergentMarker(rounds=0)
    stale = 0
    for round_no in range(1, _MAX_EXHAUSTION_ROUNDS + 1):
        edge = (hi - (hi - prev_edge) * 0.5) if finite_hi else prev_edge * 2.0
        try:
            inc = integrate(fn, prev_edge, edge)
        except QuadratureError:
            return DivergentMarker(rounds=round_no)
        increments.append(inc)
        total += inc
        if len(increments) >= 2:
            a, b = increments[-2], increments[-1]
            if abs(b) >= _DIV_SHRINK * abs(a) and abs(b) > 1e-14 * max(1.0, abs(total)):
                stale += 1
            else:
                stale = 0
            if stale >= _DIV_ROUNDS:
                return DivergentMarker(rounds=round_no)
        if abs(increments[-1]) < 1e-12 * max(1.0, abs(total)):
            return total
        prev_edge = edge
    return DivergentMarker(rounds=_MAX_EXHAUSTION_ROUNDS)


def integral_condition(spec: DiffusionSpec):
    """Evaluate int_S m([x, u]) s(x) dx; returns a float or DivergentMarker.

    Only applicable when the lower boundary is reflecting (the setting of the
    equivalence the test comes from); otherwise CriterionInapplicableError.
    """
    if spec.interval.lower_boundary != models.REFLECTING:
        raise CriterionInapplicableError(
            f"{spec.spec_id()}: integral criterion requires a reflecting "
            "lower boundary")
    lo, hi = spec.interval.lower, spec.interval.upper

    def integrand(x: float) -> float:
        return _speed_tail(spec, x) * models.scale_density(spec, x)

    try:
        return integrate(integrand, lo, hi)
    except QuadratureError:
        return _exhaustion_probe(integrand, lo, hi)


# ---------------------------------------------------------------------------
# combined assessment
# ---------------------------------------------------------------------------

UNIFORMLY_ERGODIC = "uniformly_ergodic"
NOT_UNIFORMLY_ERGODIC = "not_uniformly_ergodic"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ErgodicityReport:
    integral_value: object = None      # float | DivergentMarker | None
    integral_error: Optional[str] = None
    t_av: object = None                # float | DivergentMarker | None
    t_av_uncertainty: Optional[float] = None
    q_sharp_norm_bound: Optional[float] = None
    verdict: str = INCONCLUSIVE
    method: Optional[str] = None       # "integral_test" | "spectral_test" | "both"

    def to_json_dict(self) -> dict:
        def enc(v):
            if isinstance(v, DivergentMarker):
                return v.to_json_dict()
            return v
        return {
            "schema_version": 1,
            "integral_value": enc(self.integral_value),
            "integral_error": self.integral_error,
            "t_av": enc(self.t_av),
            "t_av_uncertainty": self.t_av_uncertainty,
            "q_sharp_norm_bound": self.q_sharp_norm_bound,
            "verdict": self.verdict,
            "method": self.method,
        }


def assess(spec: DiffusionSpec, seq: Optional[EigenSequence] = None,
           tol: float = EIGENTIME_DEFAULT_TOL) -> ErgodicityReport:
    """Run whichever criteria are applicable and combine the verdicts.

    The eigenvalue sequence is auto-filled for built-in models when not
    supplied.  Sub-criterion failures are recorded per field; they never
    abort the whole report.
    """
    if seq is None:
        seq = builtin_eigen(spec)

    integral_value = None
    integral_error = None
    try:
        integral_value = integral_condition(spec)
    except CriterionInapplicableError as exc:
        integral_error = str(exc)
    except (QuadratureError, models.ModelError) as exc:
        integral_error = f"integral criterion failed: {exc}"

    t_av = None
    t_unc = None
    if seq is not None:
        try:
            res = eigentime_detail(seq, tol)
            t_av, t_unc = res.value, res.uncertainty
        except DivergenceSuspectedError:
            t_av = DivergentMarker(rounds=EIGENTIME_TERM_CAP)

    integral_finite = isinstance(integral_value, float)
    spectral_finite = isinstance(t_av, float)
    integral_div = isinstance(integral_value, DivergentMarker)
    spectral_div = isinstance(t_av, DivergentMarker)

    if integral_finite and spectral_finite:
        method = "both"
    elif spectral_finite or spectral_div:
        method = "spectral_test"
    elif integral_finite or integral_div:
        method = "integral_test"
    else:
        method = None

    if integral_finite or spectral_finite:
        verdict = UNIFORMLY_ERGODIC
    elif integral_div or spectral_div:
        verdict = NOT_UNIFORMLY_ERGODIC
    else:
        verdict = INCONCLUSIVE

    q_bound = q_sharp_norm_bound(t_av) if spectral_finite else None

    return ErgodicityReport(
        integral_value=integral_value,
        integral_error=integral_error,
        t_av=t_av,
        t_av_uncertainty=t_unc,
        q_sharp_norm_bound=q_bound,
        verdict=verdict,
        method=method,
    )
