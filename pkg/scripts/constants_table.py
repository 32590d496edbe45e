#!/usr/bin/env python3
"""Print the analytic constants the bounds consume, per built-in model.

For each model: average hitting time t_av (eigentime series where available,
else the scale/speed integral criterion), the deviation-kernel norm surrogate
2 t_av, and validity thresholds for a few deviation levels.
"""

from ergobound import ergodicity, models
from ergobound.bounds import validity_threshold

EPS_LEVELS = (0.05, 0.1, 0.2, 0.5)


def main() -> None:
    specs = [
        ("jacobi(a=1,b=2,sigma2=2)", models.jacobi(1.0, 2.0, 2.0), 1.0),
        ("jacobi(a=1/2,b=1,sigma2=2)", models.jacobi(0.5, 1.0, 2.0), 1.0),
        ("tanou(rho=1/2)", models.tanou(0.5), 1.0),
        ("maoclass(gamma=3)", models.maoclass(3.0), None),
    ]
    for name, spec, f_norm in specs:
        report = ergodicity.assess(spec)
        print(f"{name}: verdict={report.verdict} method={report.method}")
        if isinstance(report.t_av, float):
            print(f"  t_av = {report.t_av!r}  (+/- {report.t_av_uncertainty:.1e})")
            print(f"  ||Q#|| <= {report.q_sharp_norm_bound!r}")
            if f_norm is not None:
                for eps in EPS_LEVELS:
                    thr = validity_threshold(eps, f_norm, report.q_sharp_norm_bound)
                    print(f"  eps={eps:<5g} validity threshold t > {thr:g}")
        if isinstance(report.integral_value, float):
            print(f"  integral criterion value = {report.integral_value!r}")
        print()


if __name__ == "__main__":
    main()
