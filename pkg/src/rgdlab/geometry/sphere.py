import numpy as np

from ..errors import ConfigurationError, DomainError
from .base import Manifold, Retraction


def _safe_ratio(num, den):
    """num/den with 0/0 -> 1 (used for sin(r)/r style factors)."""
    den = np.asarray(den, dtype=float)
    small = den == 0
    return np.where(small, 1.0, num / np.where(small, 1.0, den))


class Sphere(Manifold):
    """Unit sphere S^d in R^(d+1) with the induced metric."""

    kind = "sphere"
    compact = True
    retractions = frozenset({Retraction.EXPONENTIAL, Retraction.PROJECTION})

    def __init__(self, d: int):
        d = int(d)
        if d < 1:
            raise ConfigurationError("sphere dimension must be >= 1")
        self.d = d
        self.dim = d
        self.ambient_dim = d + 1
        self.point_shape = (d + 1,)
        self.k_min = 1.0
        self.k_max = 1.0
        self.injectivity_radius = np.pi

    @property
    def constant_curvature(self):
        return True

    def describe(self):
        return {"kind": self.kind, "d": self.d}

    def proj(self, x, z):
        x = np.asarray(x)
        z = np.asarray(z, dtype=float)
        return z - np.sum(x * z, axis=-1, keepdims=True) * x

    def exp(self, x, v):
        x = np.asarray(x)
        v = np.asarray(v, dtype=float)
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        y = np.cos(r) * x + _safe_ratio(np.sin(r), r) * v
        return y / np.linalg.norm(y, axis=-1, keepdims=True)

    def retract_projection(self, x, v):
        y = np.asarray(x) + np.asarray(v)
        n = np.linalg.norm(y, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n > 1e-300, y / np.where(n > 1e-300, n, 1.0), np.nan)

    def log(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        c = np.sum(x * y, axis=-1, keepdims=True)
        u = y - c * x
        un = np.linalg.norm(u, axis=-1, keepdims=True)
        if np.any((un <= 1e-14) & (c < 0)):
            raise DomainError("sphere logarithm undefined at antipodal points")
        theta = self._dist_raw(x, y)[..., None]
        return _safe_ratio(theta, un) * u

    @staticmethod
    def _dist_raw(x, y):
        chord = np.linalg.norm(np.asarray(y) - np.asarray(x), axis=-1)
        return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))

    def dist(self, x, y):
        return self._dist_raw(x, y)

    def transport(self, x, v_dir, t, u):
        x = np.asarray(x)
        v_dir = np.asarray(v_dir, dtype=float)
        u = np.asarray(u, dtype=float)
        r = np.linalg.norm(v_dir, axis=-1, keepdims=True)
        e = np.where(r > 0, v_dir / np.where(r > 0, r, 1.0), 0.0)
        theta = t * r
        a = np.sum(u * e, axis=-1, keepdims=True)
        return u + a * (-np.sin(theta) * x + (np.cos(theta) - 1.0) * e)

    def ehess2rhess(self, x, egrad, ehess_u, u):
        x = np.asarray(x)
        return self.proj(x, ehess_u) - np.sum(x * egrad, axis=-1, keepdims=True) * u

    def check_point(self, x, tol=1e-10):
        return bool(np.all(np.abs(np.linalg.norm(x, axis=-1) - 1.0) <= tol))

    def check_tangent(self, x, v, tol=1e-10):
        return bool(np.all(np.abs(np.sum(np.asarray(x) * v, axis=-1)) <= tol))

    def random_point(self, rng):
        return self.project_point(rng.standard_normal(self.point_shape))

    def project_point(self, z):
        z = np.asarray(z, dtype=float)
        return z / np.linalg.norm(z, axis=-1, keepdims=True)

    def curvature_blocks(self, frame):
        return [(np.arange(frame.dim), 1.0)]
