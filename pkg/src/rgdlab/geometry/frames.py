import numpy as np

from .base import Frame

_SKIP_TOL = 1e-8


def tangent_frame(m, x) -> Frame:
    """Deterministic orthonormal frame at ``x``.

    Gram-Schmidt (with one re-orthogonalization pass) over the ambient
    coordinate vectors projected to the tangent space, in index order;
    residuals below 1e-8 are skipped.
    """
    x = np.asarray(x, dtype=float)
    size = int(np.prod(m.point_shape))
    basis = []
    for k in range(size):
        e = np.zeros(size)
        e[k] = 1.0
        w = m.proj(x, e.reshape(m.point_shape))
        for _ in range(2):
            for b in basis:
                w = w - m.inner(x, b, w) * b
        nrm = float(m.norm(x, w))
        if nrm < _SKIP_TOL:
            continue
        basis.append(w / nrm)
        if len(basis) == m.dim:
            break
    return Frame(base=x, basis=np.array(basis))


def gram_matrix(m, frame: Frame) -> np.ndarray:
    b = frame.basis
    return m.inner(frame.base, b[:, None], b[None, :])


def transport_frame(m, frame: Frame, v_dir, t=1.0) -> Frame:
    """Frame at Exp_x(t v_dir) obtained by parallel transport."""
    x = frame.base
    y = m.exp(x, t * np.asarray(v_dir))
    return Frame(base=y, basis=m.transport(x, v_dir, t, frame.basis))
