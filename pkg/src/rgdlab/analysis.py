"""Differentials of iteration maps, singular step-size scans, spectral
instability checks and step-size bounds.

Matrices are expressed in orthonormal frames.  The source frame is
``tangent_frame(m, x)``; the target frame at g(x) is its parallel transport
along the curve the map follows (t -> R_x(-t alpha grad f(x)) for gradient
steps, the geodesic from x to g(x) for the proximal map), so matrices are
comparable across maps, methods and step sizes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .costs import CostModel, fd_hessian, hessian_matrix
from .errors import ConfigurationError, PreconditionError
from .geometry import (
    Euclidean,
    Frame,
    Hyperbolic,
    Manifold,
    ProductSpheres,
    Retraction,
    Sphere,
    hess_half_sq_dist,
    jacobi_endpoints,
    tangent_frame,
)
from .optimizers import ProximalPoint, _prox_batch

FD_REL_STEP = 1e-5
DEFAULT_GRID = 2048
BISECT_TOL = 1e-10
SINGULAR_REL_TOL = 1e-6


class DifferentialMethod(str, enum.Enum):
    FINITE_DIFFERENCE = "FiniteDifference"
    CLOSED_FORM_EUCLIDEAN = "ClosedFormEuclidean"
    CLOSED_FORM_JACOBI = "ClosedFormJacobi"
    CLOSED_FORM_CRITICAL = "ClosedFormCritical"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == key or member.name.replace("_", "").lower() == key:
                return member
        raise ConfigurationError(f"unknown differential method {value!r}")


@dataclass(frozen=True)
class FixedStepMap:
    """x -> R_x(-alpha grad f(x))."""

    retraction: Retraction = Retraction.EXPONENTIAL

    def __post_init__(self):
        object.__setattr__(self, "retraction", Retraction.parse(self.retraction))

    def describe(self):
        return {"kind": "fixed_step", "retraction": self.retraction.value}


@dataclass(frozen=True)
class ProximalMap:
    """x -> argmin_z f(z) + dist(x, z)^2 / (2 alpha), Hadamard manifolds only."""

    inner_tol: float = 1e-13
    max_inner: int = 100_000
    lipschitz: float | None = None

    def describe(self):
        return {"kind": "proximal_point"}


def parse_map_kind(value):
    """Accept a map object, ``"proximal_point"``, ``"fixed_step"`` or
    ``"fixed_step:<retraction>"``."""
    if isinstance(value, (FixedStepMap, ProximalMap)):
        return value
    if isinstance(value, dict):
        kind = value.get("kind", "fixed_step")
        if kind == "proximal_point":
            return ProximalMap()
        return FixedStepMap(value.get("retraction", "exponential"))
    text = str(value).lower()
    if text in ("proximal_point", "proximal", "pp"):
        return ProximalMap()
    head, _, tail = text.partition(":")
    if head in ("fixed_step", "gd", "rgd"):
        return FixedStepMap(tail or "exponential")
    raise ConfigurationError(f"unknown iteration map {value!r}")


@dataclass(eq=False)
class DifferentialMatrix:
    source_frame: Frame
    target_frame: Frame
    entries: np.ndarray
    method: DifferentialMethod

    def det(self) -> float:
        return float(np.linalg.det(self.entries))

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)

    def eigenvalue_magnitudes(self) -> np.ndarray:
        return np.sort(np.abs(np.linalg.eigvals(self.entries)))

    def to_record(self) -> dict:
        return {
            "method": self.method.value,
            "source_point": self.source_frame.base.tolist(),
            "target_point": self.target_frame.base.tolist(),
            "entries": self.entries.tolist(),
        }


# --------------------------------------------------------------------------
# helpers


def _has_blocks(m: Manifold) -> bool:
    return isinstance(m, (Euclidean, Sphere, Hyperbolic, ProductSpheres))


def _fd_step(m, x) -> float:
    return FD_REL_STEP * (1.0 + float(m.ambient_norm(x)))


def _perturbations(m, frame, s):
    """Points Exp_x(+s e_j) and Exp_x(-s e_j), stacked as (2n, *shape)."""
    x = frame.base
    n = frame.dim
    xs = np.broadcast_to(x, (2 * n,) + x.shape)
    vs = np.concatenate([s * frame.basis, -s * frame.basis])
    return m.exp(xs, vs)


def _fd_columns(m, images, target: Frame, s):
    n = target.dim
    d = (images[:n] - images[n:]) / (2.0 * s)
    return np.array([target.coords(m, d[j]) for j in range(n)]).T


def _gradient_step_target(m, kind, x, v, frame) -> Frame:
    y = m.retract(kind, x, v)
    return Frame(base=y, basis=m.transport_along_retraction(kind, x, v, frame.basis))


def _prox_rule(cost, alpha, mk: ProximalMap):
    return ProximalPoint(alpha, mk.inner_tol, mk.max_inner, mk.lipschitz).rule(cost)


def _prox(cost, x, alpha, rule):
    xb = np.asarray(x, dtype=float)
    single = xb.shape == tuple(cost.manifold.point_shape)
    y, _ = _prox_batch(cost, xb[None] if single else xb, alpha, rule.inner_tol, rule.max_inner, rule.lipschitz)
    return y[0] if single else y


def _geodesic_target(m, x, y, frame) -> Frame:
    v = m.log(x, y)
    return Frame(base=y, basis=m.transport(x, v, 1.0, frame.basis))


def _is_critical(cost, x, tol_g=None):
    m = cost.manifold
    if tol_g is None:
        tol_g = 1e-8 * (1.0 + abs(float(cost.value(x))))
    return float(m.norm(x, cost.grad(x))) <= tol_g


# --------------------------------------------------------------------------
# differentials


def iteration_map_differential(
    cost: CostModel, m: Manifold | None, map_kind, x, alpha, method="FiniteDifference"
) -> DifferentialMatrix:
    """Matrix of Dg(x) for the gradient-step or proximal map ``g``."""
    m = cost.manifold if m is None else m
    if m != cost.manifold:
        raise ConfigurationError("cost is defined on a different manifold")
    mk = parse_map_kind(map_kind)
    method = DifferentialMethod.parse(method)
    x = m.validate_point(x)
    alpha = float(alpha)
    if not alpha > 0:
        raise ConfigurationError("α must be positive")
    frame = tangent_frame(m, x)
    if isinstance(mk, ProximalMap):
        return _prox_differential(cost, m, mk, x, alpha, method, frame)
    return _step_differential(cost, m, mk.retraction, x, alpha, method, frame)


def _step_differential(cost, m, kind, x, alpha, method, frame):
    if kind not in m.retractions:
        raise ConfigurationError(f"{kind.value} retraction not available on {m.kind}")
    g = cost.grad(x)
    v = -alpha * g
    eye = np.eye(frame.dim)

    if method is DifferentialMethod.CLOSED_FORM_CRITICAL:
        if not _is_critical(cost, x):
            raise ConfigurationError("closed form at a critical point requires grad f(x) = 0")
        h = hessian_matrix(cost, x, frame)
        return DifferentialMatrix(frame, frame, eye - alpha * h, method)

    if method is DifferentialMethod.CLOSED_FORM_EUCLIDEAN:
        if not isinstance(m, Euclidean) or not cost.has_hessian:
            raise ConfigurationError("Euclidean closed form needs a Euclidean cost with a Hessian")
        h = hessian_matrix(cost, x, frame)
        target = Frame(base=x + v, basis=frame.basis)
        return DifferentialMatrix(frame, target, eye - alpha * h, method)

    if method is DifferentialMethod.CLOSED_FORM_JACOBI:
        if not _has_blocks(m) or kind is not Retraction.EXPONENTIAL:
            raise ConfigurationError(
                "Jacobi closed form needs a constant-curvature manifold and the exponential map"
            )
        if not float(m.norm(x, v)) < m.injectivity_radius:
            raise ConfigurationError("Jacobi closed form needs α |grad f(x)| < inj(x)")
        h = hessian_matrix(cost, x, frame)
        j0, j1 = jacobi_endpoints(m, x, v, frame)
        target = _gradient_step_target(m, kind, x, v, frame)
        return DifferentialMatrix(frame, target, j1 - alpha * j0 @ h, method)

    target = _gradient_step_target(m, kind, x, v, frame)
    s = _fd_step(m, x)
    pts = _perturbations(m, frame, s)
    images = m.retract(kind, pts, -alpha * cost.grad(pts))
    return DifferentialMatrix(frame, target, _fd_columns(m, images, target, s), method)


def _prox_differential(cost, m, mk, x, alpha, method, frame):
    rule = _prox_rule(cost, alpha, mk)
    eye = np.eye(frame.dim)

    if method is DifferentialMethod.CLOSED_FORM_CRITICAL:
        if not _is_critical(cost, x):
            raise ConfigurationError("closed form at a critical point requires grad f(x) = 0")
        h = hessian_matrix(cost, x, frame)
        return DifferentialMatrix(frame, frame, np.linalg.inv(eye + alpha * h), method)

    y = _prox(cost, x, alpha, rule)
    target = _geodesic_target(m, x, y, frame)

    if method is DifferentialMethod.CLOSED_FORM_EUCLIDEAN:
        if not isinstance(m, Euclidean) or not cost.has_hessian:
            raise ConfigurationError("Euclidean closed form needs a Euclidean cost with a Hessian")
        h = hessian_matrix(cost, y, target)
        return DifferentialMatrix(frame, target, np.linalg.inv(eye + alpha * h), method)

    if method is DifferentialMethod.CLOSED_FORM_JACOBI:
        if not _has_blocks(m):
            raise ConfigurationError("Jacobi closed form needs a constant-curvature manifold")
        # g is the inverse of y -> Exp_y(alpha grad f(y)); differentiate that
        # map in (target, source) frames and invert
        w = alpha * cost.grad(y)
        h = hessian_matrix(cost, y, target)
        j0, j1 = jacobi_endpoints(m, y, w, target)
        return DifferentialMatrix(frame, target, np.linalg.inv(j1 + alpha * j0 @ h), method)

    s = _fd_step(m, x)
    images = _prox(cost, _perturbations(m, frame, s), alpha, rule)
    return DifferentialMatrix(frame, target, _fd_columns(m, images, target, s), method)


# --------------------------------------------------------------------------
# singular step sizes


@dataclass(eq=False)
class SingularSet:
    x: np.ndarray
    alphas: np.ndarray
    scan_range: tuple
    method: str
    min_singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    singular_tol: float | None = None

    def to_record(self) -> dict:
        return {
            "x": np.asarray(self.x).tolist(),
            "alphas": [float(a) for a in self.alphas],
            "scan_range": [float(self.scan_range[0]), float(self.scan_range[1])],
            "method": self.method,
            "min_singular_values": [float(a) for a in self.min_singular_values],
            "singular_tol": self.singular_tol,
        }


def _step_scanner(cost, m, kind, x, frame):
    """Return alpha -> Dg_alpha(x) entries for a gradient-step map."""
    g = cost.grad(x)
    if _has_blocks(m) and kind is Retraction.EXPONENTIAL:
        h = hessian_matrix(cost, x, frame)

        def entries(alpha):
            j0, j1 = jacobi_endpoints(m, x, -alpha * g, frame, check=False)
            return j1 - alpha * j0 @ h

        return entries, DifferentialMethod.CLOSED_FORM_JACOBI

    s = _fd_step(m, x)
    pts = _perturbations(m, frame, s)
    gp = cost.grad(pts)

    def entries(alpha):
        target = _gradient_step_target(m, kind, x, -alpha * g, frame)
        return _fd_columns(m, m.retract(kind, pts, -alpha * gp), target, s)

    return entries, DifferentialMethod.FINITE_DIFFERENCE


def singular_alpha_scan(
    cost: CostModel, m: Manifold | None, map_kind, x, alpha_max, grid_size=DEFAULT_GRID
) -> SingularSet:
    """Step sizes in (0, alpha_max] at which Dg_alpha(x) is singular.

    Near alpha = 0 the map is close to the identity (determinant 1), so the
    scan starts from a positive determinant and looks for sign changes of
    the frame-continuous determinant on a uniform grid, refining each by
    bisection.
    """
    m = cost.manifold if m is None else m
    mk = parse_map_kind(map_kind)
    x = m.validate_point(x)
    alpha_max = float(alpha_max)
    if not alpha_max > 0:
        raise ConfigurationError("alpha_max must be positive")
    scan_range = (0.0, alpha_max)

    if isinstance(mk, ProximalMap):
        # Dg is the inverse of a differential, hence never singular
        if not m.is_hadamard:
            raise ConfigurationError(f"proximal point requires a Hadamard manifold, got {m.kind}")
        return SingularSet(x, np.zeros(0), scan_range, "InverseMap")

    if isinstance(m, Euclidean) and cost.has_hessian:
        lam = np.linalg.eigvalsh(hessian_matrix(cost, x, tangent_frame(m, x)))
        alphas = np.sort(1.0 / lam[lam > 0])
        alphas = alphas[alphas <= alpha_max]
        return SingularSet(
            x, alphas, scan_range, "EuclideanEigenvalues", np.zeros(len(alphas)), 0.0
        )

    if mk.retraction not in m.retractions:
        raise ConfigurationError(f"{mk.retraction.value} retraction not available on {m.kind}")
    frame = tangent_frame(m, x)
    entries, method = _step_scanner(cost, m, mk.retraction, x, frame)
    det = lambda a: float(np.linalg.det(entries(a)))

    grid = alpha_max * np.arange(1, int(grid_size) + 1) / int(grid_size)
    dets = np.array([det(a) for a in grid])
    prev_a, prev_d = 0.0, 1.0
    alphas, smins = [], []
    for a, d in zip(grid, dets):
        if d == 0.0 or np.sign(d) != np.sign(prev_d):
            lo, hi, dlo = prev_a, a, prev_d
            if d == 0.0:
                lo = hi = a
            while hi - lo > BISECT_TOL:
                mid = 0.5 * (lo + hi)
                dm = det(mid)
                if dm == 0.0:
                    lo = hi = mid
                    break
                if np.sign(dm) == np.sign(dlo):
                    lo, dlo = mid, dm
                else:
                    hi = mid
            root = 0.5 * (lo + hi)
            sv = np.linalg.svd(entries(root), compute_uv=False)
            if sv[-1] <= SINGULAR_REL_TOL * sv[0]:
                alphas.append(root)
                smins.append(sv[-1])
        if d != 0.0:
            prev_a, prev_d = a, d
    return SingularSet(
        x, np.array(alphas), scan_range, method.value, np.array(smins), SINGULAR_REL_TOL
    )


def unstable_spectrum(cost: CostModel, m: Manifold | None, map_kind, x_star, alpha, tol_g=None):
    """Sorted eigenvalue magnitudes of Dg(x*) at a critical point x*."""
    m = cost.manifold if m is None else m
    mk = parse_map_kind(map_kind)
    x_star = m.validate_point(x_star)
    if not _is_critical(cost, x_star, tol_g):
        raise PreconditionError("unstable_spectrum needs a critical point")
    lam = np.linalg.eigvalsh(hessian_matrix(cost, x_star, tangent_frame(m, x_star)))
    if isinstance(mk, ProximalMap):
        mags = 1.0 / np.abs(1.0 + alpha * lam)
    else:
        mags = np.abs(1.0 - alpha * lam)
    return np.sort(mags)


def hess_dist_consistency(m: Manifold, x, v, h=1e-4) -> float:
    """Deviation between J0(1)^{-1} J1(1) and a finite-difference Hessian of
    z -> dist(z, Exp_x(v))^2 / 2 at x."""
    if not _has_blocks(m):
        raise ConfigurationError("needs a constant-curvature manifold")
    x = m.validate_point(x)
    v = np.asarray(v, dtype=float)
    frame = tangent_frame(m, x)
    j0, j1 = jacobi_endpoints(m, x, v, frame)
    closed = np.linalg.solve(j0, j1)
    y = m.exp(x, v)
    fd = fd_hessian(m, lambda z: -m.log(z, np.broadcast_to(y, np.shape(z))), x, frame, h=h)
    return float(np.max(np.abs(closed - fd)))


def hess_dist_eigenvalues(m: Manifold, x, v) -> np.ndarray:
    """Eigenvalues of the closed-form Hessian of z -> dist(z, Exp_x(v))^2 / 2 at x."""
    return np.linalg.eigvalsh(hess_half_sq_dist(m, x, m.exp(x, np.asarray(v, dtype=float))))


# --------------------------------------------------------------------------
# step-size bounds


class Regime(str, enum.Enum):
    HADAMARD = "Hadamard"
    POSITIVE_CURVATURE = "PositiveCurvature"
    PINCHED = "Pinched"
    STIEFEL = "Stiefel"
    PRODUCT_SPHERES = "ProductSpheres"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ConfigurationError(f"unknown regime {value!r}")


_REQUIRED = {
    Regime.HADAMARD: ("L",),
    Regime.PRODUCT_SPHERES: ("L",),
    Regime.POSITIVE_CURVATURE: ("L", "G", "J", "K_max"),
    Regime.PINCHED: ("L", "K_min", "K_max"),
    Regime.STIEFEL: ("L", "p"),
}


@dataclass(frozen=True)
class StepSizeBound:
    regime: Regime
    alpha_max: float
    inputs: dict

    def to_record(self) -> dict:
        return {"regime": self.regime.value, "alpha_max": self.alpha_max, "inputs": dict(self.inputs)}


def arccot(t: float) -> float:
    """Principal branch (0, pi/2) for t > 0."""
    if not t > 0:
        raise ConfigurationError(f"arccot is only evaluated for t > 0, got {t}")
    return math.atan(1.0 / t)


def _t_arccot(t):
    return t * arccot(t)


def step_size_bound(regime, params: dict) -> StepSizeBound:
    """Largest step size covered by the avoidance guarantee of ``regime``."""
    regime = Regime.parse(regime)
    inputs = {}
    for key in _REQUIRED[regime]:
        if key not in params:
            raise ConfigurationError(f"{regime.value} bound needs {key}")
        val = float(params[key])
        if not (val > 0 and math.isfinite(val)):
            raise ConfigurationError(f"{key} must be positive and finite, got {params[key]}")
        inputs[key] = val
    lip = inputs["L"]
    if regime in (Regime.HADAMARD, Regime.PRODUCT_SPHERES):
        amax = 1.0 / lip
    elif regime is Regime.POSITIVE_CURVATURE:
        t = lip / (inputs["G"] * math.sqrt(inputs["K_max"]))
        amax = min(inputs["J"] * lip / inputs["G"], _t_arccot(t)) / lip
    elif regime is Regime.PINCHED:
        if inputs["K_min"] > inputs["K_max"]:
            raise ConfigurationError("pinched regime needs K_min <= K_max")
        s = math.sqrt(inputs["K_min"] / inputs["K_max"]) / math.pi
        amax = _t_arccot(s) / lip
    else:
        if inputs["p"] != int(inputs["p"]):
            raise ConfigurationError("p must be a positive integer")
        s = 1.0 / (math.pi * math.sqrt(inputs["p"]))
        amax = _t_arccot(s) / lip
    return StepSizeBound(regime, amax, inputs)
