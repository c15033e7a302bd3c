import numpy as np

from ..errors import ConfigurationError
from .base import Manifold, Retraction


class Euclidean(Manifold):
    """Flat R^n with the standard inner product."""

    kind = "euclidean"
    retractions = frozenset({Retraction.EXPONENTIAL, Retraction.PROJECTION})

    def __init__(self, n: int):
        n = int(n)
        if n < 1:
            raise ConfigurationError("Euclidean dimension must be >= 1")
        self.n = n
        self.dim = n
        self.ambient_dim = n
        self.point_shape = (n,)
        self.k_min = 0.0
        self.k_max = 0.0
        self.injectivity_radius = np.inf

    @property
    def constant_curvature(self):
        return True

    def describe(self):
        return {"kind": self.kind, "n": self.n}

    def proj(self, x, z):
        return np.asarray(z, dtype=float)

    def exp(self, x, v):
        return np.asarray(x) + np.asarray(v)

    def retract_projection(self, x, v):
        return np.asarray(x) + np.asarray(v)

    def log(self, x, y):
        return np.asarray(y) - np.asarray(x)

    def dist(self, x, y):
        return np.linalg.norm(np.asarray(y) - np.asarray(x), axis=-1)

    def transport(self, x, v_dir, t, u):
        return np.array(u, dtype=float)

    def transport_along_retraction(self, kind, x, v, u):
        return np.array(u, dtype=float)

    def egrad2rgrad(self, x, egrad):
        return np.asarray(egrad, dtype=float)

    def ehess2rhess(self, x, egrad, ehess_u, u):
        return np.asarray(ehess_u, dtype=float)

    def check_point(self, x, tol=1e-10):
        return bool(np.all(np.isfinite(x)))

    def check_tangent(self, x, v, tol=1e-10):
        return bool(np.all(np.isfinite(v)))

    def random_point(self, rng):
        return rng.standard_normal(self.n)

    def project_point(self, z):
        return np.asarray(z, dtype=float)

    def curvature_blocks(self, frame):
        return [(np.arange(frame.dim), 0.0)]
