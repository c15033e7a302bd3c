"""Closed-form Jacobi fields on constant-curvature spaces.

Along a geodesic t -> Exp_x(t v) with r = |v| and curvature K, Jacobi fields
split into the component along v (linear in t) and the orthogonal
components, which solve J'' + K r^2 J = 0.  At t = 1 this gives

    J0(1) = P + sn_K(r)/r (I - P),        J1(1) = P + cs_K(r) (I - P),

where P projects onto v and sn_K, cs_K are the generalized sine/cosine.
Products of spheres are handled block by block.
"""

import numpy as np

from ..errors import DomainError
from .frames import tangent_frame


def _sn_over_r(k, r):
    if r == 0 or k == 0:
        return 1.0
    s = np.sqrt(abs(k)) * r
    return (np.sin(s) if k > 0 else np.sinh(s)) / s


def _cs(k, r):
    if k == 0:
        return 1.0
    s = np.sqrt(abs(k)) * r
    return np.cos(s) if k > 0 else np.cosh(s)


def _hess_factor(k, r):
    """Orthogonal eigenvalue of Hess(1/2 dist^2): s cot s or s coth s."""
    if r == 0 or k == 0:
        return 1.0
    s = np.sqrt(abs(k)) * r
    return s / np.tan(s) if k > 0 else s / np.tanh(s)


def _check_conjugate(k, r):
    if k > 0 and np.sqrt(k) * r >= np.pi:
        raise DomainError(
            f"conjugate point: sqrt(K) r = {np.sqrt(k) * r:.6g} >= pi (J0(1) is singular)"
        )


def _blockwise(m, frame, c, block_fn):
    n = frame.dim
    out = np.zeros((n, n))
    for idx, k in m.curvature_blocks(frame):
        cb = c[idx]
        r = float(np.linalg.norm(cb))
        eye = np.eye(len(idx))
        if r == 0:
            out[np.ix_(idx, idx)] = eye
            continue
        uh = cb / r
        p = np.outer(uh, uh)
        out[np.ix_(idx, idx)] = p + block_fn(k, r) * (eye - p)
    return out


def jacobi_endpoints(m, x, v, frame=None, check=True):
    """(J0(1), J1(1)) in ``frame`` (default ``tangent_frame(m, x)``) and its
    parallel transport to Exp_x(v).

    With ``check`` a conjugate point along the geodesic raises DomainError;
    without it the (singular) matrices are returned as is.
    """
    frame = tangent_frame(m, x) if frame is None else frame
    c = frame.coords(m, v)
    if check:
        for idx, k in m.curvature_blocks(frame):
            _check_conjugate(k, float(np.linalg.norm(c[idx])))
    j0 = _blockwise(m, frame, c, _sn_over_r)
    j1 = _blockwise(m, frame, c, _cs)
    return j0, j1


def hess_half_sq_dist(m, x, y, frame=None):
    """Hessian of z -> dist(z, y)^2 / 2 at x, as a matrix in ``frame``."""
    frame = tangent_frame(m, x) if frame is None else frame
    v = m.log(x, y)
    c = frame.coords(m, v)
    for idx, k in m.curvature_blocks(frame):
        r = float(np.linalg.norm(c[idx]))
        if k > 0 and np.sqrt(k) * r >= np.pi:
            raise DomainError("y lies on the cut locus of x")
    return _blockwise(m, frame, c, _hess_factor)
