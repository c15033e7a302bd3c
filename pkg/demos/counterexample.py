"""The interp2d counterexample: unit steps send a whole annulus onto the
saddle, nearby step sizes do not.

    python demos/counterexample.py [--runs 200]
"""

import argparse

import numpy as np

from rgdlab import ExperimentPlan, builtin_cost, fixed_step_run, monte_carlo_avoidance

ANNULUS = {"kind": "uniform_annulus", "r_lo": 2.1, "r_hi": 3.0}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=200)
    args = ap.parse_args()

    f = builtin_cost("interp2d")
    x0 = np.array([3.0, 0.0])
    tr = fixed_step_run(f, None, "exponential", x0, 1.0)
    print(f"one unit step from {x0}: x1 = {tr.points[1]}  (grad f(x0) = {f.grad(x0)})")

    rows = [
        ("fixed step 1.0", {"kind": "fixed_step", "alpha": 1.0}, {}),
        ("fixed step 0.9", {"kind": "fixed_step", "alpha": 0.9}, {}),
        ("fixed step 1.1", {"kind": "fixed_step", "alpha": 1.1}, {}),
        # any r <= 1/2 accepts the unit step on the annulus, where f = |x|^2 / 2
        ("armijo, a_bar 1.0", {"kind": "stabilized_armijo", "alpha_bar": 1.0}, {"grad_tol": 1e-6}),
        ("armijo, a_bar 0.97", {"kind": "stabilized_armijo", "alpha_bar": 0.97}, {"grad_tol": 1e-6}),
        ("armijo, a_bar 1.0, r 0.6", {"kind": "stabilized_armijo", "alpha_bar": 1.0, "r": 0.6}, {"grad_tol": 1e-6}),
    ]
    print(f"\n{'algorithm':<26}{'saddle':>8}{'other':>8}{'escaped':>9}{'undecided':>11}   wilson 95%")
    for label, alg, stop in rows:
        plan = ExperimentPlan.from_dict(
            {"cost": {"name": "interp2d"}, "algorithm": alg, "sampler": ANNULUS, "num_runs": args.runs, "seed": 1, "stop": stop}
        )
        r = monte_carlo_avoidance(plan)
        c = r.counts
        lo, hi = r.wilson_95
        print(
            f"{label:<26}{c['ConvergedToStrictSaddle']:>8}{c['ConvergedToOther']:>8}"
            f"{c['Escaped']:>9}{c['Undecided']:>11}   [{lo:.3f}, {hi:.3f}]"
        )


if __name__ == "__main__":
    main()
