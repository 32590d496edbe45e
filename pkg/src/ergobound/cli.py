"""Command-line entry point wiring models -> ergodicity -> bounds -> mc.

Subcommands: bound, jacobi-bound, tanou-bound, check, tav, pi, simulate,
verify.  Single results are emitted as JSON (or a one-row CSV with
--format csv); grid sweeps are emitted as CSV.  Every run with --out also
writes a manifest JSON sufficient to re-run it bit-identically.

Exit codes: 0 success, 2 malformed flags or config, 3 bound query below the
validity threshold, 4 domination failure in verify, 5 simulation failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__, bounds, ergodicity, mc, models

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVALID_THRESHOLD = 3
EXIT_NOT_DOMINATED = 4
EXIT_SIMULATION = 5

DEFAULT_T_GRID = (100.0, 200.0, 400.0)
DEFAULT_EPS_GRID = (0.05, 0.1, 0.2)
DEFAULT_N_PATHS = 10_000
DEFAULT_SEED = 20240901


class CLIError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _emit(payload: dict, args) -> None:
    if getattr(args, "format", "json") == "csv":
        keys = list(payload)
        text = ",".join(keys) + "\n" + ",".join(_csv_cell(payload[k]) for k in keys) + "\n"
    else:
        text = json.dumps(payload, indent=2) + "\n"
    _write_output(text, args, payload_kind="result")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_output(text: str, args, payload_kind: str) -> None:
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        _write_manifest(args, [out])
    else:
        sys.stdout.write(text)


def _write_manifest(args, outputs) -> None:
    out = getattr(args, "out", None)
    if not out:
        return
    flags = {k: v for k, v in vars(args).items()
             if k not in ("func",) and not k.startswith("_")}
    manifest = {
        "schema_version": 1,
        "command": args.command,
        "model_file": getattr(args, "model_file", None),
        "flags": {k: _jsonable(v) for k, v in flags.items()},
        "seed": getattr(args, "seed", None),
        "artifact_version": __version__,
        "outputs": list(outputs),
        "argv": getattr(args, "_argv", None),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(out + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return str(v)


def _build_spec(args) -> models.DiffusionSpec:
    if getattr(args, "model_file", None):
        return models.load_spec(args.model_file)
    model = getattr(args, "model", None)
    if model == "jacobi":
        return models.jacobi(args.a, args.b, args.sigma2)
    if model == "tanou":
        return models.tanou(args.rho)
    if model == "maoclass":
        return models.maoclass(args.gamma)
    raise CLIError("specify --model jacobi|tanou|maoclass or --model-file")


def _build_observable(args, spec: models.DiffusionSpec) -> models.Observable:
    f = getattr(args, "f", "indicator")
    if f == "exp":
        return models.obs_exponential(args.u, spec.interval)
    if f == "indicator":
        lo = args.lo if args.lo is not None else spec.interval.lower
        hi = args.hi if args.hi is not None else 0.5 * (spec.interval.lower
                                                        + spec.interval.upper)
        return models.obs_indicator(lo, hi)
    if f == "identity":
        return models.obs_identity(spec.interval)
    if f == "const":
        return models.obs_constant(args.c)
    raise CLIError(f"unknown observable {f!r}")


def _default_x0(spec: models.DiffusionSpec) -> float:
    return spec.reference_point


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_bound(args) -> int:
    res = bounds.hoeffding_bound(bounds.BoundQuery(
        t=args.t, eps=args.eps, f_norm=args.f_norm, q_norm=args.q_norm))
    _emit(res.to_json_dict(), args)
    return EXIT_OK if res.valid else EXIT_INVALID_THRESHOLD


def cmd_jacobi_bound(args) -> int:
    if args.t_av is not None:
        t_av = args.t_av
    elif args.b is not None:
        t_av = bounds.jacobi_t_av(args.b, args.sigma2)
    else:
        raise CLIError("jacobi-bound needs --t-av or --b (with optional --sigma2)")
    res = bounds.jacobi_occupation_bound(args.t, args.eps, t_av)
    payload = res.to_json_dict()
    payload["t_av"] = t_av
    _emit(payload, args)
    return EXIT_OK if res.valid else EXIT_INVALID_THRESHOLD


def cmd_tanou_bound(args) -> int:
    res = bounds.tanou_expfunc_bound(args.t, args.eps, args.u,
                                     paper_constant=args.paper_constant)
    _emit(res.to_json_dict(), args)
    return EXIT_OK if res.result.valid else EXIT_INVALID_THRESHOLD


def cmd_check(args) -> int:
    spec = _build_spec(args)
    report = ergodicity.assess(spec)
    _emit(report.to_json_dict(), args)
    return EXIT_OK


def cmd_tav(args) -> int:
    model = getattr(args, "model", None)
    if model == "jacobi":
        seq = ergodicity.jacobi_eigen(args.b, args.sigma2)
    elif model == "tanou":
        seq = ergodicity.tanou_eigen(args.rho)
    else:
        raise CLIError("tav supports --model jacobi|tanou")
    res = ergodicity.eigentime_detail(seq, args.tol)
    _emit({"schema_version": 1, "t_av": res.value,
           "uncertainty": res.uncertainty, "n_terms": res.n_terms,
           "q_sharp_norm_bound": ergodicity.q_sharp_norm_bound(res.value)}, args)
    return EXIT_OK


def cmd_pi(args) -> int:
    spec = _build_spec(args)
    f = _build_observable(args, spec)
    val = models.pi_integral(spec, f)
    _emit({"schema_version": 1, "model": spec.spec_id(),
           "observable": f.name, "pi_f": val}, args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _build_spec(args)
    f = _build_observable(args, spec)
    f.validate(spec.interval)
    cfg = mc.SimConfig(t_horizon=args.t, n_paths=args.n_paths, seed=args.seed,
                       x0=args.x0 if args.x0 is not None else _default_x0(spec),
                       dt=args.dt, boundary_policy=args.policy,
                       clamp_delta=args.delta, jobs=args.jobs)
    values = mc.run_ensemble(spec, f, cfg)[:, 0]
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    _emit({"schema_version": 1, "seed": cfg.seed, "model": spec.spec_id(),
           "observable": f.name, "t": args.t, "dt": args.dt,
           "n_paths": args.n_paths, "mean": mean, "std_err": se}, args)
    return EXIT_OK


def _verify_rows(args):
    spec = _build_spec(args)
    t_grid = sorted(args.t_grid)
    eps_grid = sorted(args.eps_grid)

    if spec.closed_form == "jacobi":
        f = models.obs_indicator(0.0, 0.5)
        pi_f = models.pi_integral(spec, f, validate=False)
        t_av = bounds.jacobi_t_av(spec.params["b"], spec.params["sigma2"])
        def bound_for(t, eps):
            return bounds.jacobi_occupation_bound(t, eps, t_av)
    elif spec.closed_form == "tanou":
        f = models.obs_exponential(args.u, spec.interval)
        if args.paper_constant:
            pi_f = bounds.tanou_centering(args.u, paper_constant=True)
        else:
            pi_f = models.pi_integral(spec, f, validate=False)
        def bound_for(t, eps):
            return bounds.tanou_expfunc_bound(t, eps, args.u,
                                              paper_constant=args.paper_constant).result
    else:
        raise CLIError("verify supports the jacobi and tanou built-ins")

    cfg = mc.SimConfig(t_horizon=max(t_grid), n_paths=args.n_paths,
                       seed=args.seed, dt=args.dt,
                       x0=args.x0 if args.x0 is not None else _default_x0(spec),
                       jobs=args.jobs)
    checkpoints = [int(round(t / args.dt)) for t in t_grid]
    ensemble = mc.run_ensemble(spec, f, cfg, checkpoints)

    rows = []
    all_dominated = True
    for j, t in enumerate(t_grid):
        for eps in eps_grid:
            res = bound_for(t, eps)
            tail = mc.estimate_tail(spec, f, cfg, eps, pi_f,
                                    values=ensemble[:, j])
            if res.valid:
                b = res.bound * args.bound_scale
                vacuous = b >= 1.0
                dominated = vacuous or tail.ci_upper <= b
            else:
                b = None
                dominated = True  # below threshold: nothing to check
            if not dominated:
                all_dominated = False
            rows.append({"t": t, "eps": eps, "threshold": res.threshold,
                         "bound": b, "k": tail.k, "n": tail.n,
                         "p_hat": tail.p_hat, "ci_upper": tail.ci_upper,
                         "dominated": dominated})
    return rows, all_dominated, cfg.seed


def cmd_verify(args) -> int:
    try:
        rows, all_dominated, seed = _verify_rows(args)
    except mc.SimulationError as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    buf = io.StringIO()
    buf.write(f"# schema_version=1 seed={seed}\n")
    cols = ["t", "eps", "threshold", "bound", "k", "n", "p_hat", "ci_upper",
            "dominated"]
    buf.write(",".join(cols) + "\n")
    for row in rows:
        buf.write(",".join(_csv_cell(row[c]) for c in cols) + "\n")
    _write_output(buf.getvalue(), args, payload_kind="grid")
    return EXIT_OK if all_dominated else EXIT_NOT_DOMINATED


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=["jacobi", "tanou", "maoclass"])
    p.add_argument("--model-file", dest="model_file")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--sigma2", type=float, default=2.0)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=3.0)


def _add_obs_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--f", choices=["indicator", "exp", "identity", "const"],
                   default="indicator")
    p.add_argument("--u", type=float, default=1.0)
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--c", type=float, default=1.0)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ergobound", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate the concentration bound")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--f-norm", type=float, required=True, dest="f_norm")
    p.add_argument("--q-norm", type=float, required=True, dest="q_norm")
    _add_common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("jacobi-bound", help="occupation-time bound for Jacobi")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--t-av", type=float, default=None, dest="t_av")
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--sigma2", type=float, default=2.0)
    _add_common(p)
    p.set_defaults(func=cmd_jacobi_bound)

    p = sub.add_parser("tanou-bound", help="exponential-functional bound for tan-OU")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--paper-constant", action="store_true", dest="paper_constant")
    _add_common(p)
    p.set_defaults(func=cmd_tanou_bound)

    p = sub.add_parser("check", help="uniform-ergodicity assessment")
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("tav", help="average hitting time via the eigentime identity")
    _add_model_flags(p)
    p.add_argument("--tol", type=float, default=ergodicity.EIGENTIME_DEFAULT_TOL)
    _add_common(p)
    p.set_defaults(func=cmd_tav)

    p = sub.add_parser("pi", help="space average of an observable")
    _add_model_flags(p)
    _add_obs_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_pi)

    p = sub.add_parser("simulate", help="Monte Carlo time-average ensemble")
    _add_model_flags(p)
    _add_obs_flags(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--n-paths", type=int, default=1000, dest="n_paths")
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--policy", choices=[mc.REFLECT, mc.CLAMP], default=mc.REFLECT)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="empirical domination sweep over a (t, eps) grid")
    _add_model_flags(p)
    p.add_argument("--t-grid", type=float, nargs="+", default=list(DEFAULT_T_GRID),
                   dest="t_grid")
    p.add_argument("--eps-grid", type=float, nargs="+",
                   default=list(DEFAULT_EPS_GRID), dest="eps_grid")
    p.add_argument("--n-paths", type=int, default=DEFAULT_N_PATHS, dest="n_paths")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--u", type=float, default=1.0)
    p.add_argument("--paper-constant", action="store_true", dest="paper_constant")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--bound-scale", type=float, default=1.0, dest="bound_scale",
                   help="test hook: scales the bound before the domination check")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    args._argv = argv
    try:
        return args.func(args)
    except (CLIError, bounds.BoundDomainError, models.ModelError,
            ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except mc.SimulationError as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
