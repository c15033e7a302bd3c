"""Concrete Riemannian manifolds and the geometric operations used by the
optimizers and the analysis tools."""

import numpy as np

from ..errors import ConfigurationError
from .base import Frame, Manifold, Retraction
from .euclidean import Euclidean
from .frames import gram_matrix, tangent_frame, transport_frame
from .hyperbolic import Hyperbolic, minkowski
from .jacobi import hess_half_sq_dist, jacobi_endpoints
from .product import ProductSpheres
from .sphere import Sphere
from .stiefel import Stiefel

__all__ = [
    "Euclidean",
    "Frame",
    "Hyperbolic",
    "Manifold",
    "ProductSpheres",
    "Retraction",
    "Sphere",
    "Stiefel",
    "distance",
    "gram_matrix",
    "hess_half_sq_dist",
    "jacobi_endpoints",
    "log_map",
    "make_manifold",
    "minkowski",
    "parallel_transport",
    "retract",
    "tangent_frame",
    "transport_frame",
]


def retract(m: Manifold, kind, x, v):
    return m.retract(kind, x, v)


def log_map(m: Manifold, x, y):
    return m.log(x, y)


def distance(m: Manifold, x, y):
    d = m.dist(x, y)
    return float(d) if np.ndim(d) == 0 else d


def parallel_transport(m: Manifold, x, v_dir, t, u):
    return m.transport(x, v_dir, t, u)


def make_manifold(spec) -> Manifold:
    """Build a manifold from a config record such as ``{"kind": "sphere", "d": 2}``."""
    if isinstance(spec, Manifold):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("manifold spec must be an object with a 'kind' field")
    kind = str(spec["kind"]).lower().replace("-", "_")
    try:
        if kind == "euclidean":
            return Euclidean(spec["n"])
        if kind == "sphere":
            return Sphere(spec["d"])
        if kind == "hyperbolic":
            return Hyperbolic(spec["n"])
        if kind == "stiefel":
            return Stiefel(spec["n"], spec["p"])
        if kind in ("product_spheres", "productspheres"):
            return ProductSpheres(spec["dims"])
    except KeyError as exc:
        raise ConfigurationError(f"manifold {kind!r} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad manifold parameters: {exc}") from None
    raise ConfigurationError(f"unknown manifold kind {spec['kind']!r}")
