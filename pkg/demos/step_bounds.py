"""Step-size bounds of the avoidance guarantees, and how the positive
curvature bound moves with its constants."""

import numpy as np

from rgdlab import step_size_bound


def main():
    print(f"{'regime':<20}{'inputs':<40}alpha_max")
    cases = [
        ("Hadamard", {"L": 1.0}),
        ("ProductSpheres", {"L": 1.0}),
        ("Stiefel", {"L": 1.0, "p": 1}),
        ("Stiefel", {"L": 1.0, "p": 4}),
        ("Pinched", {"L": 1.0, "K_min": 0.5, "K_max": 1.0}),
        ("PositiveCurvature", {"L": 1.0, "G": 1.0, "J": 1.0, "K_max": 1.0}),
    ]
    for regime, params in cases:
        b = step_size_bound(regime, params)
        inputs = ", ".join(f"{k}={v:g}" for k, v in params.items())
        print(f"{regime:<20}{inputs:<40}{b.alpha_max:.6f}")

    print("\nPositiveCurvature, L = G = 1, J = 1e12:")
    for kmax in np.geomspace(1e-12, 1e2, 8):
        b = step_size_bound("PositiveCurvature", {"L": 1.0, "G": 1.0, "J": 1e12, "K_max": kmax})
        print(f"  K_max = {kmax:8.1e}   alpha_max = {b.alpha_max:.9f}")


if __name__ == "__main__":
    main()
