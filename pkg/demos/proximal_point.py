"""Proximal point on a saddle quadratic and on the hyperbolic plane."""

import numpy as np

from rgdlab import ProximalMap, StopRule, builtin_cost, iteration_map_differential, proximal_point_run, unstable_spectrum
from rgdlab.optimizers import proximal_map


def main():
    a = np.diag([1.0, -1.0])
    f = builtin_cost("quadratic", {"A": a.tolist()})
    x = np.array([3.0, 1.0])
    res = proximal_map(f, x, 0.5)
    print(f"prox of {x}: {res.point}  closed form {np.linalg.solve(np.eye(2) + 0.5 * a, x)}  ({res.iterations} inner steps)")
    print("spectrum of Dg at the origin:", unstable_spectrum(f, None, "proximal_point", np.zeros(2), 0.5))

    tr = proximal_point_run(f, None, np.array([1.0, 1e-8]), 0.5, StopRule(max_iters=200))
    print(f"start 1e-8 off the stable axis: {tr.termination.value} after {tr.iterations} iterations")

    h = builtin_cost(
        "normal_coord_quadratic",
        {"manifold": {"kind": "hyperbolic", "n": 2}, "p": [1.0, 0.0, 0.0], "D": [[1.0, 0.0], [0.0, -0.5]]},
    )
    y = np.array([np.cosh(0.4), np.sinh(0.4) * 0.6, np.sinh(0.4) * 0.8])
    # |D| = 1 bounds the Hessian near p; the inner solver needs some L with alpha L < 1
    mk = ProximalMap(lipschitz=2.0)
    for method in ("FiniteDifference", "ClosedFormJacobi"):
        d = iteration_map_differential(h, None, mk, y, 0.3, method)
        print(f"hyperbolic prox differential ({method}):\n{np.array2string(d.entries, precision=8)}")


if __name__ == "__main__":
    main()
