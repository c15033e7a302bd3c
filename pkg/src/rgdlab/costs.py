"""Catalog of cost functions with analytic Riemannian gradients.

Every builtin evaluates on single points or on stacks of points (leading
batch axes), which the batched optimizers rely on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .geometry import (
    Euclidean,
    Hyperbolic,
    Manifold,
    ProductSpheres,
    Sphere,
    make_manifold,
    tangent_frame,
)


class CriticalLabel(str, enum.Enum):
    NOT_CRITICAL = "NotCritical"
    STRICT_SADDLE = "StrictSaddle"
    MINIMIZER = "MinimizerCandidate"
    DEGENERATE = "Degenerate"


@dataclass(eq=False)
class CostModel:
    """A cost on a manifold: value, Riemannian gradient and (optionally)
    Hessian action, plus metadata.

    ``known_critical_points`` is a list of ``(point, label)`` pairs.
    """

    name: str
    manifold: Manifold
    value_fn: Callable
    grad_fn: Callable
    hess_action_fn: Callable | None = None
    lipschitz_L: float | None = None
    known_critical_points: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def value(self, x):
        return self.value_fn(x)

    def grad(self, x):
        return self.grad_fn(x)

    def hess(self, x, u):
        if self.hess_action_fn is None:
            raise ConfigurationError(f"cost {self.name!r} has no analytic Hessian")
        return self.hess_action_fn(x, u)

    @property
    def has_hessian(self) -> bool:
        return self.hess_action_fn is not None


# --------------------------------------------------------------------------
# ambient-defined costs: Riemannian quantities via the manifold's conversions


class _Ambient:
    """Wraps ambient value/egrad/ehess into Riemannian grad/Hess."""

    def __init__(self, manifold):
        self.m = manifold

    def value(self, x):
        raise NotImplementedError

    def egrad(self, x):
        raise NotImplementedError

    def ehess(self, x, u):
        raise NotImplementedError

    def grad(self, x):
        return self.m.egrad2rgrad(x, self.egrad(x))

    def hess(self, x, u):
        return self.m.ehess2rhess(x, self.egrad(x), self.ehess(x, u), u)


class _Quadratic(_Ambient):
    """f(x) = 1/2 x^T A x + b^T x."""

    def __init__(self, manifold, a, b):
        super().__init__(manifold)
        self.a = a
        self.b = b

    def value(self, x):
        x = np.asarray(x)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.a, x) + x @ self.b

    def egrad(self, x):
        return np.asarray(x) @ self.a.T + self.b

    def ehess(self, x, u):
        return np.asarray(u) @ self.a.T


class _Cubic(_Ambient):
    def value(self, x):
        return np.asarray(x)[..., 0] ** 3

    def egrad(self, x):
        return 3.0 * np.asarray(x) ** 2

    def ehess(self, x, u):
        return 6.0 * np.asarray(x) * np.asarray(u)


def bump(t, order=2):
    """u(t) = exp(-3/t) for t > 0, else 0, with derivatives up to ``order``."""
    t = np.asarray(t, dtype=float)
    pos = t > 1e-300
    ts = np.where(pos, t, 1.0)
    u = np.where(pos, np.exp(-3.0 / ts), 0.0)
    if order == 0:
        return (u,)
    live = u > 0
    u1 = np.where(live, 3.0 / ts**2 * u, 0.0)
    if order == 1:
        return u, u1
    u2 = np.where(live, (9.0 / ts**4 - 6.0 / ts**3) * u, 0.0)
    return u, u1, u2


def transition(t, order=2):
    """q(t) = u(t) / (u(t) + u(3 - t)) and its derivatives up to ``order``.

    q = 0 for t <= 0 and q = 1 for t >= 3, smooth in between.
    """
    t = np.asarray(t, dtype=float)
    a = bump(t, order)
    b = bump(3.0 - t, order)
    s = a[0] + b[0]
    q = a[0] / s
    if order == 0:
        return (q,)
    s1 = a[1] - b[1]
    num1 = a[1] * s - a[0] * s1
    q1 = num1 / s**2
    if order == 1:
        return q, q1
    s2 = a[2] + b[2]
    q2 = (a[2] * s - a[0] * s2) / s**2 - 2.0 * s1 * num1 / s**3
    return q, q1, q2


_H1 = np.array([1.0, -1.0])


class _Interp2D(_Ambient):
    """Saddle (x1^2 - x2^2)/2 inside the unit disk glued to |x|^2/2 outside
    radius 2 through the transition q(4 - |x|^2)."""

    def __init__(self):
        super().__init__(Euclidean(2))

    def _parts(self, x, order):
        x = np.asarray(x, dtype=float)
        n2 = np.sum(x * x, axis=-1)
        qs = transition(4.0 - n2, order)
        f1 = 0.5 * (x[..., 0] ** 2 - x[..., 1] ** 2)
        f2 = 0.5 * n2
        return x, qs, f1, f2

    def value(self, x):
        _, (q,), f1, f2 = self._parts(x, 0)
        return q * f1 + (1.0 - q) * f2

    def egrad(self, x):
        x, (q, q1), f1, f2 = self._parts(x, 1)
        g1 = x * _H1
        # grad t = -2x with t = 4 - |x|^2
        return q[..., None] * g1 + (1.0 - q)[..., None] * x + ((f1 - f2) * q1)[..., None] * (-2.0 * x)

    def ehess_matrix(self, x):
        x, (q, q1, q2), f1, f2 = self._parts(x, 2)
        dt = -2.0 * x
        dg = x * _H1 - x
        outer = lambda a, b: a[..., :, None] * b[..., None, :]
        eye = np.eye(2)
        return (
            q[..., None, None] * np.diag(_H1)
            + (1.0 - q)[..., None, None] * eye
            + q1[..., None, None] * (outer(dt, dg) + outer(dg, dt))
            + (f1 - f2)[..., None, None] * (q2[..., None, None] * outer(dt, dt) - 2.0 * q1[..., None, None] * eye)
        )

    def ehess(self, x, u):
        return np.einsum("...ij,...j->...i", self.ehess_matrix(x), np.asarray(u, dtype=float))


class _Rayleigh(_Ambient):
    """f(x) = x^T A x on a sphere."""

    def __init__(self, manifold, a):
        super().__init__(manifold)
        self.a = a

    def value(self, x):
        x = np.asarray(x)
        return np.einsum("...i,ij,...j->...", x, self.a, x)

    def egrad(self, x):
        return 2.0 * np.asarray(x) @ self.a

    def ehess(self, x, u):
        return 2.0 * np.asarray(u) @ self.a


class _ProductRayleigh(_Ambient):
    """f(x) = sum_i x_i^T A_i x_i on a product of spheres."""

    def __init__(self, manifold, mats):
        super().__init__(manifold)
        self.mats = mats

    def value(self, x):
        return sum(
            np.einsum("...i,ij,...j->...", xi, a, xi) for xi, a in zip(self.m.split(x), self.mats)
        )

    def egrad(self, x):
        return np.concatenate([2.0 * xi @ a for xi, a in zip(self.m.split(x), self.mats)], axis=-1)

    def ehess(self, x, u):
        return np.concatenate([2.0 * ui @ a for ui, a in zip(self.m.split(u), self.mats)], axis=-1)


class _NormalCoordQuadratic:
    """f(x) = 1/2 <Log_p(x), D Log_p(x)> on a constant-curvature space.

    D is given as a symmetric matrix in ``tangent_frame(m, p)``.  With
    w = Log_p(x), r = |w| and sn_K the generalized sine, the gradient is the
    parallel transport (p -> x along the geodesic) of
    (D w)_par + r / sn_K(r) (D w)_perp, decomposed relative to w.
    """

    def __init__(self, manifold, p, dmat):
        self.m = manifold
        self.p = p
        self.frame = tangent_frame(manifold, p)
        self.dmat = dmat
        self.k = manifold.k_max

    def _dw(self, w):
        c = np.stack([self.m.inner(self.p, b, w) for b in self.frame.basis], axis=-1)
        return np.tensordot(c @ self.dmat.T, self.frame.basis, axes=(-1, 0))

    def value(self, x):
        w = self.m.log(self.p, x)
        return 0.5 * self.m.inner(self.p, w, self._dw(w))

    def grad(self, x):
        m = self.m
        w = m.log(self.p, x)
        dw = self._dw(w)
        r = m.norm(self.p, w)
        rr = m._expand(r)
        safe = np.where(rr > 0, rr, 1.0)
        what = np.where(rr > 0, w / safe, 0.0)
        par = m._expand(m.inner(self.p, dw, what)) * what
        if self.k > 0:
            ratio = np.where(rr > 0, safe / np.sin(np.sqrt(self.k) * safe) * np.sqrt(self.k), 1.0)
        elif self.k < 0:
            ratio = np.where(rr > 0, safe / np.sinh(np.sqrt(-self.k) * safe) * np.sqrt(-self.k), 1.0)
        else:
            ratio = np.ones_like(rr)
        z = par + ratio * (dw - par)
        return m.transport(self.p, w, 1.0, z)


# --------------------------------------------------------------------------
# builtin factory

BUILTIN_NAMES = (
    "quadratic",
    "cubic1d",
    "interp2d",
    "rayleigh",
    "normal_coord_quadratic",
    "product_sphere_rayleigh",
)

_INTERP2D_L = None


def interp2d_lipschitz() -> float:
    """Sampled bound on the Hessian spectral norm of interp2d.

    Outside radius 2 the Hessian is the identity, so a polar grid on the
    disk of radius 2.05 covers everything; the result is cached.
    """
    global _INTERP2D_L
    if _INTERP2D_L is None:
        rad = np.linspace(0.0, 2.05, 821)
        ang = np.linspace(0.0, np.pi / 2, 181)  # f is even in each coordinate
        rr, aa = np.meshgrid(rad, ang)
        pts = np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1).reshape(-1, 2)
        h = _Interp2D().ehess_matrix(pts)
        _INTERP2D_L = float(np.max(np.abs(np.linalg.eigvalsh(h))))
    return _INTERP2D_L


def _matrix(params, key, square=True):
    if key not in params:
        raise ConfigurationError(f"missing parameter {key!r}")
    try:
        a = np.atleast_2d(np.asarray(params[key], dtype=float))
    except (TypeError, ValueError):
        raise ConfigurationError(f"parameter {key!r} must be a numeric matrix") from None
    if square and (a.ndim != 2 or a.shape[0] != a.shape[1]):
        raise ConfigurationError(f"parameter {key!r} must be a square matrix")
    if not np.all(np.isfinite(a)):
        raise ConfigurationError(f"parameter {key!r} has non-finite entries")
    return a


def _symmetric(a, key):
    if not np.allclose(a, a.T, atol=1e-12):
        raise ConfigurationError(f"parameter {key!r} must be symmetric")
    return 0.5 * (a + a.T)


def _eig_label(eigs, tol=1e-12):
    if np.min(eigs) < -tol:
        return CriticalLabel.STRICT_SADDLE
    if np.min(eigs) > tol:
        return CriticalLabel.MINIMIZER
    return CriticalLabel.DEGENERATE


def _from_ambient(name, impl, lipschitz, critical, params, with_hess=True):
    return CostModel(
        name=name,
        manifold=impl.m,
        value_fn=impl.value,
        grad_fn=impl.grad,
        hess_action_fn=impl.hess if with_hess else None,
        lipschitz_L=lipschitz,
        known_critical_points=critical,
        params=params,
    )


def builtin_cost(name: str, params: dict | None = None) -> CostModel:
    """Construct one of the builtin costs.

    ============================  =============================================
    name                          params
    ============================  =============================================
    ``quadratic``                 ``A`` (symmetric), optional ``b``
    ``cubic1d``                   none (f(x) = x^3 on R)
    ``interp2d``                  none (saddle/bowl interpolation on R^2)
    ``rayleigh``                  ``A`` (symmetric); f(x) = x^T A x on a sphere
    ``normal_coord_quadratic``    ``manifold``, ``p``, ``D``
    ``product_sphere_rayleigh``   ``A`` list of symmetric matrices
    ============================  =============================================
    """
    params = dict(params or {})
    if name == "quadratic":
        a = _symmetric(_matrix(params, "A"), "A")
        n = a.shape[0]
        b = np.asarray(params.get("b", np.zeros(n)), dtype=float)
        if b.shape != (n,):
            raise ConfigurationError("parameter 'b' must have length matching A")
        m = make_manifold(params["manifold"]) if "manifold" in params else Euclidean(n)
        if m.ambient_dim != n:
            raise ConfigurationError("quadratic dimension does not match the manifold")
        eigs = np.linalg.eigvalsh(a)
        critical = []
        if isinstance(m, Euclidean) and np.min(np.abs(eigs)) > 1e-12:
            critical.append((np.linalg.solve(a, -b), _eig_label(eigs)))
        lip = float(np.max(np.abs(eigs))) if isinstance(m, Euclidean) else None
        return _from_ambient(name, _Quadratic(m, a, b), lip, critical, params)

    if name == "cubic1d":
        if params:
            raise ConfigurationError("cubic1d takes no parameters")
        impl = _Cubic(Euclidean(1))
        return _from_ambient(name, impl, None, [(np.zeros(1), CriticalLabel.DEGENERATE)], params)

    if name == "interp2d":
        if params:
            raise ConfigurationError("interp2d takes no parameters")
        return _from_ambient(
            name,
            _Interp2D(),
            interp2d_lipschitz(),
            [(np.zeros(2), CriticalLabel.STRICT_SADDLE)],
            params,
        )

    if name == "rayleigh":
        a = _symmetric(_matrix(params, "A"), "A")
        n = a.shape[0]
        if n < 2:
            raise ConfigurationError("rayleigh needs A of size >= 2")
        m = Sphere(n - 1)
        eigs, vecs = np.linalg.eigh(a)
        critical = []
        for i in range(n):
            hess_eigs = 2.0 * (np.delete(eigs, i) - eigs[i])
            label = _eig_label(hess_eigs)
            critical.append((vecs[:, i].copy(), label))
            critical.append((-vecs[:, i], label))
        lip = float(2.0 * (eigs[-1] - eigs[0]))
        return _from_ambient(name, _Rayleigh(m, a), lip, critical, params)

    if name == "product_sphere_rayleigh":
        if "A" not in params or not isinstance(params["A"], (list, tuple)) or not params["A"]:
            raise ConfigurationError("product_sphere_rayleigh needs 'A': a list of matrices")
        mats = [_symmetric(_matrix({"A": a}, "A"), "A") for a in params["A"]]
        if min(a.shape[0] for a in mats) < 2:
            raise ConfigurationError("each factor matrix must have size >= 2")
        m = ProductSpheres([a.shape[0] - 1 for a in mats])
        lip = float(max(2.0 * (np.ptp(np.linalg.eigvalsh(a))) for a in mats))
        return _from_ambient(name, _ProductRayleigh(m, mats), lip, [], params)

    if name == "normal_coord_quadratic":
        if "manifold" not in params:
            raise ConfigurationError("normal_coord_quadratic needs 'manifold'")
        m = make_manifold(params["manifold"])
        if not isinstance(m, (Euclidean, Sphere, Hyperbolic)):
            raise ConfigurationError("normal_coord_quadratic needs a constant-curvature manifold")
        if "p" not in params:
            raise ConfigurationError("normal_coord_quadratic needs base point 'p'")
        p = m.validate_point(params["p"])
        d = _symmetric(_matrix(params, "D"), "D")
        if d.shape != (m.dim, m.dim):
            raise ConfigurationError(f"'D' must be {m.dim}x{m.dim}")
        impl = _NormalCoordQuadratic(m, p, d)
        label = _eig_label(np.linalg.eigvalsh(d))
        return CostModel(
            name=name,
            manifold=m,
            value_fn=impl.value,
            grad_fn=impl.grad,
            known_critical_points=[(p, label)],
            params=params,
        )

    raise ConfigurationError(f"unknown cost {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")


# --------------------------------------------------------------------------
# derivative checks and critical point classification


def fd_gradient(cost: CostModel, x, frame=None, h=1e-6):
    """Central differences of t -> f(Exp_x(t e_i)) in the given frame."""
    m = cost.manifold
    frame = tangent_frame(m, x) if frame is None else frame
    out = np.empty(frame.dim)
    for i, e in enumerate(frame.basis):
        out[i] = (cost.value(m.exp(x, h * e)) - cost.value(m.exp(x, -h * e))) / (2 * h)
    return out


def _central_hessian(m, grad_fn, x, frame, h):
    cols = []
    for e in frame.basis:
        dg = (grad_fn(m.exp(x, h * e)) - grad_fn(m.exp(x, -h * e))) / (2 * h)
        cols.append(frame.coords(m, m.proj(x, dg)))
    return np.array(cols).T


def fd_hessian(m: Manifold, grad_fn, x, frame=None, h=1e-4, richardson=True):
    """Finite-difference Riemannian Hessian in ``frame``.

    Differentiates the gradient along geodesics and projects the ambient
    derivative onto T_x, which gives the Levi-Civita Hessian on embedded
    manifolds.  With ``richardson`` the O(h^2) error is eliminated using
    steps h and h/2.
    """
    frame = tangent_frame(m, x) if frame is None else frame
    hm = _central_hessian(m, grad_fn, x, frame, h)
    if richardson:
        hm = (4.0 * _central_hessian(m, grad_fn, x, frame, h / 2) - hm) / 3.0
    return 0.5 * (hm + hm.T)


def hessian_matrix(cost: CostModel, x, frame=None):
    """Hessian of ``cost`` at ``x`` as a symmetric matrix in ``frame``.

    Uses the analytic Hessian action when available, finite differences of
    the gradient otherwise.
    """
    m = cost.manifold
    frame = tangent_frame(m, x) if frame is None else frame
    if cost.has_hessian:
        cols = np.array([frame.coords(m, cost.hess(x, e)) for e in frame.basis]).T
        return 0.5 * (cols + cols.T)
    return fd_hessian(m, cost.grad, x, frame)


def classify_critical_point(cost: CostModel, m: Manifold, x, tol_g=None, tol_lambda=1e-6):
    """Label ``x`` as NotCritical, StrictSaddle, MinimizerCandidate or Degenerate."""
    x = np.asarray(x, dtype=float)
    if tol_g is None:
        tol_g = 1e-8 * (1.0 + abs(float(cost.value(x))))
    if float(m.norm(x, cost.grad(x))) > tol_g:
        return CriticalLabel.NOT_CRITICAL
    lam = float(np.min(np.linalg.eigvalsh(hessian_matrix(cost, x))))
    if lam < -tol_lambda:
        return CriticalLabel.STRICT_SADDLE
    if lam > tol_lambda:
        return CriticalLabel.MINIMIZER
    return CriticalLabel.DEGENERATE
