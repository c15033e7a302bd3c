import numpy as np

from ..errors import ConfigurationError
from .base import Manifold, Retraction
from .sphere import Sphere


class ProductSpheres(Manifold):
    """S^{d_1} x ... x S^{d_N} stored as one concatenated ambient vector.

    Every operation acts factor by factor; the metric is the product metric.
    """

    kind = "product_spheres"
    compact = True
    retractions = frozenset({Retraction.EXPONENTIAL, Retraction.PROJECTION})

    def __init__(self, dims):
        dims = tuple(int(d) for d in dims)
        if not dims or min(dims) < 1:
            raise ConfigurationError("product of spheres needs at least one factor of dimension >= 1")
        self.dims = dims
        self.factors = [Sphere(d) for d in dims]
        offsets = np.cumsum((0,) + tuple(d + 1 for d in dims))
        self.slices = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]
        self.dim = sum(dims)
        self.ambient_dim = int(offsets[-1])
        self.point_shape = (self.ambient_dim,)
        # mixed planes are flat, planes inside one factor have K = 1
        self.k_min = 1.0 if len(dims) == 1 else 0.0
        self.k_max = 1.0
        self.injectivity_radius = np.pi

    @property
    def constant_curvature(self):
        return len(self.dims) == 1

    def describe(self):
        return {"kind": self.kind, "dims": list(self.dims)}

    def _blockwise(self, fn, *arrays):
        arrays = [np.asarray(a, dtype=float) for a in arrays]
        parts = [fn(f, *(a[..., s] for a in arrays)) for f, s in zip(self.factors, self.slices)]
        return np.concatenate(parts, axis=-1)

    def split(self, x):
        x = np.asarray(x)
        return [x[..., s] for s in self.slices]

    def proj(self, x, z):
        return self._blockwise(lambda f, a, b: f.proj(a, b), x, z)

    def exp(self, x, v):
        return self._blockwise(lambda f, a, b: f.exp(a, b), x, v)

    def retract_projection(self, x, v):
        return self._blockwise(lambda f, a, b: f.retract_projection(a, b), x, v)

    def log(self, x, y):
        return self._blockwise(lambda f, a, b: f.log(a, b), x, y)

    def dist(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        sq = sum(f.dist(x[..., s], y[..., s]) ** 2 for f, s in zip(self.factors, self.slices))
        return np.sqrt(sq)

    def transport(self, x, v_dir, t, u):
        return self._blockwise(lambda f, a, b, c: f.transport(a, b, t, c), x, v_dir, u)

    def ehess2rhess(self, x, egrad, ehess_u, u):
        return self._blockwise(lambda f, a, b, c, d: f.ehess2rhess(a, b, c, d), x, egrad, ehess_u, u)

    def check_point(self, x, tol=1e-10):
        x = np.asarray(x)
        return all(f.check_point(x[..., s], tol) for f, s in zip(self.factors, self.slices))

    def check_tangent(self, x, v, tol=1e-10):
        x = np.asarray(x)
        v = np.asarray(v)
        return all(f.check_tangent(x[..., s], v[..., s], tol) for f, s in zip(self.factors, self.slices))

    def random_point(self, rng):
        return self.project_point(rng.standard_normal(self.point_shape))

    def project_point(self, z):
        return self._blockwise(lambda f, a: f.project_point(a), z)

    def curvature_blocks(self, frame):
        # frame vectors built by Gram-Schmidt are supported in a single factor
        owner = np.empty(frame.dim, dtype=int)
        for i, e in enumerate(frame.basis):
            mass = [np.linalg.norm(e[s]) for s in self.slices]
            owner[i] = int(np.argmax(mass))
        return [(np.flatnonzero(owner == k), 1.0) for k in range(len(self.factors))]
