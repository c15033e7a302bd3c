"""Stiefel manifold St(n, p) = {X in R^{n x p} : X^T X = I_p} with the
Euclidean (embedded) metric <U, V> = Tr(U^T V).

The exponential map uses the closed-form geodesic of the embedded metric,

    Y(t) = [X, V] expm(t [[A, -S], [I, A]]) [I; 0] expm(-t A),

with A = X^T V and S = V^T V.  There is no closed form for the logarithm or
for parallel transport; both are computed numerically.
"""

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from ..errors import ConfigurationError, DomainError
from .base import Manifold, Retraction


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _t(a):
    return np.swapaxes(a, -1, -2)


def polar(z):
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    return u @ vt, s


class Stiefel(Manifold):
    kind = "stiefel"
    compact = True
    retractions = frozenset({Retraction.EXPONENTIAL, Retraction.PROJECTION})

    transport_steps = 200

    def __init__(self, n: int, p: int):
        n, p = int(n), int(p)
        if not (1 <= p <= n):
            raise ConfigurationError("Stiefel manifold needs 1 <= p <= n")
        if n == p == 1:
            raise ConfigurationError("St(1, 1) is zero-dimensional")
        self.n = n
        self.p = p
        self.dim = n * p - p * (p + 1) // 2
        self.ambient_dim = n * p
        self.point_shape = (n, p)
        # K_max = 1 for the embedded metric; no lower bound is used anywhere
        self.k_min = None
        self.k_max = 1.0
        self.injectivity_radius = np.pi

    def describe(self):
        return {"kind": self.kind, "n": self.n, "p": self.p}

    def proj(self, x, z):
        x = np.asarray(x)
        z = np.asarray(z, dtype=float)
        return z - x @ _sym(_t(x) @ z)

    def _geodesic_parts(self, x, v):
        p = self.p
        a = _t(x) @ v
        s = _t(v) @ v
        eye = np.broadcast_to(np.eye(p), a.shape)
        m = np.concatenate(
            [np.concatenate([a, -s], axis=-1), np.concatenate([eye, a], axis=-1)], axis=-2
        )
        xv = np.concatenate([x, v], axis=-1)
        return a, m, xv

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        a, m, xv = self._geodesic_parts(x, v)
        e = expm(m)[..., :, : self.p]
        return xv @ e @ expm(-a)

    def _geodesic_with_velocity(self, x, v, t):
        a, m, xv = self._geodesic_parts(x, v)
        e = expm(t * m)
        f = expm(-t * a)
        y = xv @ e[:, : self.p] @ f
        dy = xv @ (e @ m)[:, : self.p] @ f - y @ a
        return y, dy

    def retract_projection(self, x, v):
        z = np.asarray(x) + np.asarray(v)
        q, s = polar(z)
        bad = s[..., -1] <= 1e-12 * np.maximum(s[..., 0], 1e-300)
        return np.where(bad[..., None, None], np.nan, q)

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim > 2 or y.ndim > 2:
            xb, yb = np.broadcast_arrays(x, y)
            out = np.empty(xb.shape)
            for idx in np.ndindex(xb.shape[:-2]):
                out[idx] = self.log(xb[idx], yb[idx])
            return out
        if np.allclose(x, y, atol=0, rtol=0):
            return np.zeros_like(x)
        from .frames import tangent_frame

        frame = tangent_frame(self, x)
        basis = frame.basis

        def residual(c):
            return (self.exp(x, np.tensordot(c, basis, axes=(0, 0))) - y).ravel()

        c0 = frame.coords(self, self.proj(x, y - x))
        sol = least_squares(residual, c0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.max(np.abs(sol.fun)) > 1e-9:
            raise DomainError("Stiefel logarithm did not converge (points too far apart?)")
        v = np.tensordot(sol.x, basis, axes=(0, 0))
        if self.norm(x, v) >= self.injectivity_radius:
            raise DomainError("points are beyond the injectivity radius")
        return v

    def _transport_ode(self, curve, t, u):
        """RK4 for U' = -c(s) sym(c'(s)^T U), the parallel transport equation."""
        u = np.array(u, dtype=float)
        nsteps = self.transport_steps
        h = t / nsteps

        def rhs(s, w):
            c, dc = curve(s)
            return -c @ _sym(_t(dc) @ w)

        s = 0.0
        for _ in range(nsteps):
            k1 = rhs(s, u)
            k2 = rhs(s + h / 2, u + h / 2 * k1)
            k3 = rhs(s + h / 2, u + h / 2 * k2)
            k4 = rhs(s + h, u + h * k3)
            u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            s += h
        end, _ = curve(t)
        return self.proj(end, u)

    def transport(self, x, v_dir, t, u):
        x = np.asarray(x, dtype=float)
        v_dir = np.asarray(v_dir, dtype=float)
        if t == 0 or not np.any(v_dir):
            return np.array(u, dtype=float)
        return self._transport_ode(lambda s: self._geodesic_with_velocity(x, v_dir, s), t, u)

    def transport_along_retraction(self, kind, x, v, u):
        kind = Retraction.parse(kind)
        if kind is Retraction.EXPONENTIAL:
            return self.transport(x, v, 1.0, u)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if not np.any(v):
            return np.array(u, dtype=float)
        h = 1e-6

        def curve(s):
            c, _ = polar(x + s * v)
            dc = (polar(x + (s + h) * v)[0] - polar(x + (s - h) * v)[0]) / (2 * h)
            return c, dc

        return self._transport_ode(curve, 1.0, u)

    def ehess2rhess(self, x, egrad, ehess_u, u):
        x = np.asarray(x)
        return self.proj(x, ehess_u) - np.asarray(u) @ _sym(_t(x) @ egrad)

    def check_point(self, x, tol=1e-10):
        x = np.asarray(x)
        return bool(np.all(np.abs(_t(x) @ x - np.eye(self.p)) <= tol))

    def check_tangent(self, x, v, tol=1e-10):
        x = np.asarray(x)
        return bool(np.all(np.abs(_t(x) @ v + _t(v) @ x) <= tol))

    def random_point(self, rng):
        return self.project_point(rng.standard_normal(self.point_shape))

    def project_point(self, z):
        return polar(np.asarray(z, dtype=float))[0]
