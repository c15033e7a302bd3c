import sys

import numpy as np
import pytest

from rgdlab.geometry import Euclidean, Hyperbolic, ProductSpheres, Sphere, Stiefel

MANIFOLDS = {
    "euclidean3": lambda: Euclidean(3),
    "sphere2": lambda: Sphere(2),
    "sphere4": lambda: Sphere(4),
    "hyperbolic2": lambda: Hyperbolic(2),
    "hyperbolic3": lambda: Hyperbolic(3),
    "product": lambda: ProductSpheres([1, 2]),
    "stiefel42": lambda: Stiefel(4, 2),
    "stiefel31": lambda: Stiefel(3, 1),
}


@pytest.fixture(params=sorted(MANIFOLDS))
def manifold(request):
    return MANIFOLDS[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_pair(m, rng, max_norm=None):
    """A random point and a tangent vector with norm drawn below ``max_norm``."""
    x = m.random_point(rng)
    v = m.random_tangent(rng, x)
    if max_norm is not None:
        v = v * (rng.uniform(0.05, 1.0) * max_norm / float(m.norm(x, v)))
    return x, v


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
