"""Where does the differential of a gradient step lose rank?

On R^n the singular step sizes are the reciprocals of the positive Hessian
eigenvalues.  On the sphere the scan follows the determinant of the
Jacobi-field differential along alpha and reports its sign changes.
"""

import numpy as np

from rgdlab import builtin_cost, iteration_map_differential, singular_alpha_scan, unstable_spectrum


def main():
    quad = builtin_cost("quadratic", {"A": [[2.0, 0.0], [0.0, -1.0]]})
    res = singular_alpha_scan(quad, None, "fixed_step", np.array([0.3, -0.2]), 2.0)
    print(f"quadratic diag(2, -1): singular steps in (0, 2] = {res.alphas.tolist()}")

    f = builtin_cost("rayleigh", {"A": np.diag([1.0, 2.0, 3.0]).tolist()})
    x = np.array([0.6, 0.48, 0.64])
    for kind in ("fixed_step:exponential", "fixed_step:projection"):
        res = singular_alpha_scan(f, None, kind, x, 2.0, grid_size=1024)
        print(f"\nrayleigh on S^2 at {x}, {kind} ({res.method})")
        for a, s in zip(res.alphas, res.min_singular_values):
            d = iteration_map_differential(f, None, kind, x, a)
            print(f"  alpha = {a:.10f}   sigma_min = {s:.2e}   finite-difference check {d.singular_values()[-1]:.2e}")

    e3 = np.array([0.0, 0.0, 1.0])
    print("\nspectrum of Dg at the strict saddle e3, alpha = 0.225:", unstable_spectrum(f, None, "fixed_step", e3, 0.225))
    print("spectrum of Dg at the minimizer e1, alpha = 0.225:   ", unstable_spectrum(f, None, "fixed_step", np.eye(3)[0], 0.225))


if __name__ == "__main__":
    main()
