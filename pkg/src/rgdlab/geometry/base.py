"""Common machinery for the concrete manifolds.

Points and tangent vectors are plain numpy arrays in ambient coordinates.
Every manifold has a fixed ``point_shape``; all the core operations
(inner products, exponential, logarithm, retractions, projections and
gradient conversions) broadcast over any leading batch axes, so a stack of
``B`` points has shape ``(B, *point_shape)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DomainError

POINT_TOL = 1e-10


class Retraction(str, enum.Enum):
    EXPONENTIAL = "exponential"
    PROJECTION = "projection"

    @classmethod
    def parse(cls, value) -> "Retraction":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown retraction {value!r}; expected 'exponential' or 'projection'"
            ) from None


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal basis of the tangent space at ``base``.

    ``basis`` has shape ``(dim, *point_shape)``; row ``i`` is the i-th
    basis vector in ambient coordinates.
    """

    base: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def coords(self, m: "Manifold", v: np.ndarray) -> np.ndarray:
        """Coordinates of the tangent vector ``v`` in this frame."""
        return m.inner(self.base, self.basis, v)

    def vector(self, c: np.ndarray) -> np.ndarray:
        """Tangent vector with coordinates ``c``."""
        return np.tensordot(np.asarray(c, dtype=float), self.basis, axes=(0, 0))


def _sum_last(a, k):
    return a.sum(axis=tuple(range(-k, 0))) if k > 1 else a.sum(axis=-1)


class Manifold:
    """Geometric model of a Riemannian manifold embedded in R^ambient_dim.

    Subclasses fill in the class attributes below and implement the core
    operations.  ``k_min``/``k_max`` are sectional curvature bounds and
    ``injectivity_radius`` is the global injectivity radius (``inf`` on
    Hadamard manifolds).
    """

    kind: str = "abstract"
    dim: int
    ambient_dim: int
    point_shape: tuple
    k_min: float | None
    k_max: float
    injectivity_radius: float
    compact: bool = False
    retractions = frozenset({Retraction.EXPONENTIAL})

    # ----------------------------------------------------------------- metadata
    @property
    def is_hadamard(self) -> bool:
        return (
            self.k_max <= 0
            and self.k_min is not None
            and self.k_min == self.k_max
            and np.isinf(self.injectivity_radius)
        )

    @property
    def constant_curvature(self) -> bool:
        return False

    def describe(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "kind")
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.describe() == other.describe()

    def __hash__(self):
        return hash((type(self).__name__, repr(self.describe())))

    # -------------------------------------------------------------- core (batch)
    @property
    def _nax(self) -> int:
        return len(self.point_shape)

    def inner(self, x, u, v):
        return _sum_last(np.asarray(u) * np.asarray(v), self._nax)

    def norm(self, x, u):
        return np.sqrt(np.maximum(self.inner(x, u, u), 0.0))

    def _expand(self, s):
        """Append singleton axes so a batch scalar broadcasts against points."""
        s = np.asarray(s)
        return s.reshape(s.shape + (1,) * self._nax)

    def proj(self, x, z):
        raise NotImplementedError

    def exp(self, x, v):
        raise NotImplementedError

    def retract_projection(self, x, v):
        raise ConfigurationError(f"projection retraction not available on {self.kind}")

    def log(self, x, y):
        raise NotImplementedError

    def dist(self, x, y):
        return self.norm(x, self.log(x, y))

    def transport(self, x, v_dir, t, u):
        """Parallel transport of ``u`` along s -> Exp_x(s v_dir) from s=0 to s=t."""
        raise NotImplementedError

    def egrad2rgrad(self, x, egrad):
        return self.proj(x, egrad)

    def ehess2rhess(self, x, egrad, ehess_u, u):
        raise NotImplementedError

    def ambient_norm(self, x):
        return np.sqrt(_sum_last(np.asarray(x) ** 2, self._nax))

    # ------------------------------------------------------------ retractions
    def retract(self, kind, x, v, check=True):
        """Apply the retraction ``kind``.

        With ``check=False`` rows where the retraction is undefined come back
        as NaN instead of raising, which lets batched optimizers isolate them.
        """
        kind = Retraction.parse(kind)
        if kind not in self.retractions:
            raise ConfigurationError(f"{kind.value} retraction not available on {self.kind}")
        if kind is Retraction.EXPONENTIAL:
            y = self.exp(x, v)
        else:
            y = self.retract_projection(x, v)
        # R_x(0) = x exactly, not up to renormalization round-off
        zero = self._expand(np.all(np.asarray(v) == 0, axis=tuple(range(-self._nax, 0))))
        y = np.where(zero, x, y)
        if check and not np.all(np.isfinite(y)):
            raise DomainError(f"{kind.value} retraction undefined for this input")
        return y

    def transport_along_retraction(self, kind, x, v, u):
        """Transport ``u`` from x to R_x(v) along t -> R_x(t v).

        The default covers manifolds whose projection curves are
        reparametrized geodesics (spheres and products of spheres).
        """
        kind = Retraction.parse(kind)
        if kind is Retraction.EXPONENTIAL:
            return self.transport(x, v, 1.0, u)
        y = self.retract(kind, x, v)
        return self.transport(x, self.log(x, y), 1.0, u)

    # ------------------------------------------------------------ validation
    def check_point(self, x, tol=POINT_TOL) -> bool:
        raise NotImplementedError

    def check_tangent(self, x, v, tol=POINT_TOL) -> bool:
        raise NotImplementedError

    def validate_point(self, x, tol=1e-8):
        x = np.asarray(x, dtype=float)
        if x.shape[-self._nax:] != tuple(self.point_shape):
            raise ConfigurationError(
                f"point of shape {x.shape} does not match {self.kind} shape {self.point_shape}"
            )
        if not self.check_point(x, tol):
            raise ConfigurationError(f"point is not on {self!r}")
        return x

    # ----------------------------------------------------------------- random
    def random_point(self, rng):
        raise NotImplementedError

    def random_tangent(self, rng, x):
        return self.proj(x, rng.standard_normal(self.point_shape))

    def project_point(self, z):
        """Map an ambient array onto the manifold (used by samplers)."""
        raise NotImplementedError

    # -------------------------------------------------------------- curvature
    def curvature_blocks(self, frame: Frame):
        """Split frame indices into blocks of constant curvature.

        Returns a list of ``(indices, K)``.  Only constant-curvature kinds
        (and products of them) implement this.
        """
        raise ConfigurationError(f"{self.kind} does not have constant curvature")
