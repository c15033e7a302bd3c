"""Hyperbolic space H^n in the hyperboloid (Lorentz) model.

Points satisfy <x, x>_L = -1 with x_0 > 0, where
<u, v>_L = -u_0 v_0 + u_1 v_1 + ... + u_n v_n.  Sectional curvature is -1.
"""

import numpy as np

from ..errors import ConfigurationError
from .base import Manifold


def minkowski(u, v):
    u = np.asarray(u)
    v = np.asarray(v)
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


def _sinhc(r):
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-8
    return np.where(small, 1.0 + r**2 / 6.0, np.sinh(r) / np.where(small, 1.0, r))


class Hyperbolic(Manifold):
    kind = "hyperbolic"

    def __init__(self, n: int):
        n = int(n)
        if n < 1:
            raise ConfigurationError("hyperbolic dimension must be >= 1")
        self.n = n
        self.dim = n
        self.ambient_dim = n + 1
        self.point_shape = (n + 1,)
        self.k_min = -1.0
        self.k_max = -1.0
        self.injectivity_radius = np.inf

    @property
    def constant_curvature(self):
        return True

    def describe(self):
        return {"kind": self.kind, "n": self.n}

    @property
    def origin(self):
        o = np.zeros(self.n + 1)
        o[0] = 1.0
        return o

    def inner(self, x, u, v):
        return minkowski(u, v)

    def proj(self, x, z):
        x = np.asarray(x)
        z = np.asarray(z, dtype=float)
        return z + minkowski(x, z)[..., None] * x

    @staticmethod
    def _lift(y):
        # re-impose <y, y>_L = -1 by recomputing the time coordinate
        y = np.array(y, dtype=float)
        y[..., 0] = np.sqrt(1.0 + np.sum(y[..., 1:] ** 2, axis=-1))
        return y

    def exp(self, x, v):
        x = np.asarray(x)
        v = np.asarray(v, dtype=float)
        r = np.sqrt(np.maximum(minkowski(v, v), 0.0))[..., None]
        return self._lift(np.cosh(r) * x + _sinhc(r) * v)

    def dist(self, x, y):
        d = np.asarray(x) - np.asarray(y)
        chord = np.sqrt(np.maximum(minkowski(d, d), 0.0))
        return 2.0 * np.arcsinh(chord / 2.0)

    def log(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        d = self.dist(x, y)[..., None]
        u = y + minkowski(x, y)[..., None] * x
        u = self.proj(x, u)
        return u / _sinhc(d)

    def transport(self, x, v_dir, t, u):
        x = np.asarray(x)
        v_dir = np.asarray(v_dir, dtype=float)
        u = np.asarray(u, dtype=float)
        r = np.sqrt(np.maximum(minkowski(v_dir, v_dir), 0.0))[..., None]
        e = np.where(r > 0, v_dir / np.where(r > 0, r, 1.0), 0.0)
        theta = t * r
        a = minkowski(u, e)[..., None]
        return u + a * (np.sinh(theta) * x + (np.cosh(theta) - 1.0) * e)

    @staticmethod
    def _flip(g):
        g = np.array(g, dtype=float)
        g[..., 0] = -g[..., 0]
        return g

    def egrad2rgrad(self, x, egrad):
        return self.proj(x, self._flip(egrad))

    def ehess2rhess(self, x, egrad, ehess_u, u):
        return self.proj(x, self._flip(ehess_u)) + minkowski(x, self._flip(egrad))[..., None] * u

    def check_point(self, x, tol=1e-10):
        x = np.asarray(x)
        return bool(np.all(np.abs(minkowski(x, x) + 1.0) <= tol * max(1.0, float(np.max(x[..., 0]))) ** 2)
                    and np.all(x[..., 0] > 0))

    def check_tangent(self, x, v, tol=1e-10):
        scale = max(1.0, float(np.max(np.abs(x)))) * max(1.0, float(np.max(np.abs(v))))
        return bool(np.all(np.abs(minkowski(x, v)) <= tol * scale))

    def random_point(self, rng, scale=1.0):
        v = np.zeros(self.n + 1)
        v[1:] = scale * rng.standard_normal(self.n)
        return self.exp(self.origin, v)

    def project_point(self, z):
        return self._lift(z)

    def curvature_blocks(self, frame):
        return [(np.arange(frame.dim), -1.0)]
