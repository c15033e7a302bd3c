"""Iteration engines: fixed-step (R)GD, stabilized and standard Armijo
backtracking, and the proximal point method on Hadamard manifolds.

All engines advance a whole batch of initial points in lock step (one row
per run).  Each row's iterates depend only on its own data, so a run gives
the same result whether it is executed alone or inside a batch of any
composition.  The single-run functions are thin wrappers around
:func:`run_batch` that raise instead of returning per-run errors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .costs import CostModel
from .errors import (
    ConfigurationError,
    InnerSolverFailure,
    IterateDomainError,
    LineSearchFailure,
)
from .geometry import Manifold, Retraction


class Termination(str, enum.Enum):
    GRAD_TOL = "GradTol"
    MAX_ITERS = "MaxIters"
    ESCAPED = "Escaped"


@dataclass(frozen=True)
class LineSearchConfig:
    alpha_bar: float
    tau: float = 0.5
    r: float = 1e-4
    max_shrinks_per_step: int = 200

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ConfigurationError(f"line search decay must satisfy τ ∈ (0,1), got τ = {self.tau}")
        if not (0.0 < self.r < 1.0):
            raise ConfigurationError(f"sufficient decrease tolerance must satisfy r ∈ (0,1), got r = {self.r}")
        if not (self.alpha_bar > 0 and math.isfinite(self.alpha_bar)):
            raise ConfigurationError(f"initial step must satisfy ᾱ > 0, got ᾱ = {self.alpha_bar}")
        if int(self.max_shrinks_per_step) < 1:
            raise ConfigurationError("max_shrinks_per_step must be >= 1")


@dataclass(frozen=True)
class StopRule:
    grad_tol: float = 1e-10
    max_iters: int = 10_000
    escape_radius: float = 1e6

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ConfigurationError("grad_tol must be > 0")
        if int(self.max_iters) < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not self.escape_radius > 0:
            raise ConfigurationError("escape_radius must be > 0 (or inf)")


@dataclass(eq=False)
class Trajectory:
    """Record of one run.

    ``steps[t]`` and ``shrink_counts[t]`` belong to the transition
    x_t -> x_{t+1}; ``grad_norms`` has one entry per iterate.  When the
    engine keeps only a tail of the iterates, ``points`` holds
    x_{points_offset}, ..., x_T.
    """

    points: np.ndarray
    steps: np.ndarray
    grad_norms: np.ndarray
    shrink_counts: np.ndarray
    termination: Termination
    initial_step: float | None = None
    points_offset: int = 0
    exponents: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.steps)

    @property
    def final_point(self) -> np.ndarray:
        return self.points[-1]

    @property
    def complete(self) -> bool:
        return self.points_offset == 0


# --------------------------------------------------------------------------
# step rules


class _StepRule:
    initial_step: float | None = None

    def init(self, cost, x):
        pass

    def step(self, t, idx, x, g, gn):
        """Advance rows ``idx``.

        Returns (new points, accepted steps, shrink counts, errors) where
        ``errors`` maps row positions (within ``idx``) to exceptions.
        """
        raise NotImplementedError


def _domain_errors(t, y, m):
    bad = ~np.all(np.isfinite(y.reshape(len(y), -1)), axis=1)
    return {int(k): IterateDomainError(t) for k in np.flatnonzero(bad)}


class _FixedStep(_StepRule):
    def __init__(self, cost, alpha, retraction):
        self.m = cost.manifold
        self.alpha = float(alpha)
        self.kind = retraction
        self.initial_step = self.alpha

    def step(self, t, idx, x, g, gn):
        y = self.m.retract(self.kind, x, -self.alpha * g, check=False)
        n = len(idx)
        return y, np.full(n, self.alpha), np.zeros(n, dtype=int), _domain_errors(t, y, self.m)


class _Armijo(_StepRule):
    """Backtracking on alpha_bar * tau**i.

    The stabilized variant starts each search at the previously accepted
    exponent; the standard variant restarts at i = 0.
    """

    def __init__(self, cost, cfg: LineSearchConfig, retraction, stabilized):
        self.cost = cost
        self.m = cost.manifold
        self.cfg = cfg
        self.kind = retraction
        self.stabilized = stabilized
        self.initial_step = cfg.alpha_bar

    def init(self, cost, x):
        self.fvals = np.asarray(cost.value(x), dtype=float).copy()
        self.exps = np.zeros(len(x), dtype=np.int64)

    def step(self, t, idx, x, g, gn):
        cfg = self.cfg
        n = len(idx)
        exps = self.exps[idx].copy() if self.stabilized else np.zeros(n, dtype=np.int64)
        f0 = self.fvals[idx]
        rhs_scale = cfg.r * gn**2
        shrinks = np.zeros(n, dtype=int)
        y = np.empty_like(x)
        fy = np.empty(n)
        errors = {}
        pending = np.arange(n)
        while pending.size:
            alpha = cfg.alpha_bar * cfg.tau ** exps[pending].astype(float)
            cand = self.m.retract(self.kind, x[pending], -alpha.reshape((-1,) + (1,) * (x.ndim - 1)) * g[pending], check=False)
            fc = np.asarray(self.cost.value(cand), dtype=float)
            finite = np.all(np.isfinite(cand.reshape(len(cand), -1)), axis=1)
            # reject iff f(x) - f(R(-a g)) < r a |g|^2; equality accepts
            reject = finite & ((f0[pending] - fc) < alpha * rhs_scale[pending])
            for k in pending[~finite]:
                errors[int(k)] = IterateDomainError(t)
            accept = finite & ~reject
            acc = pending[accept]
            y[acc] = cand[accept]
            fy[acc] = fc[accept]
            rej = pending[reject]
            exps[rej] += 1
            shrinks[rej] += 1
            over = shrinks[rej] > cfg.max_shrinks_per_step
            for k in rej[over]:
                errors[int(k)] = LineSearchFailure(t, cfg.alpha_bar * cfg.tau ** float(exps[k] - 1))
            pending = rej[~over]
        ok = np.array([k not in errors for k in range(n)], dtype=bool)
        self.fvals[idx[ok]] = fy[ok]
        self.exps[idx[ok]] = exps[ok]
        steps = cfg.alpha_bar * cfg.tau ** exps.astype(float)
        return y, steps, shrinks, errors


class _Proximal(_StepRule):
    def __init__(self, cost, alpha, inner_tol, max_inner, lipschitz):
        self.cost = cost
        self.alpha = float(alpha)
        self.inner_tol = inner_tol
        self.max_inner = max_inner
        self.lipschitz = lipschitz
        self.initial_step = self.alpha

    def step(self, t, idx, x, g, gn):
        y, failed = _prox_batch(
            self.cost, x, self.alpha, self.inner_tol, self.max_inner, self.lipschitz
        )
        errors = {
            int(k): InnerSolverFailure(f"proximal subproblem stagnated at iterate {t}")
            for k in np.flatnonzero(failed)
        }
        n = len(idx)
        return y, np.full(n, self.alpha), np.zeros(n, dtype=int), errors


# --------------------------------------------------------------------------
# algorithm specs (what an experiment plan carries)


@dataclass(frozen=True)
class FixedStep:
    alpha: float
    retraction: Retraction = Retraction.EXPONENTIAL
    kind = "fixed_step"

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"step size must satisfy α > 0, got α = {self.alpha}")
        object.__setattr__(self, "retraction", Retraction.parse(self.retraction))

    def rule(self, cost):
        _check_retraction(cost.manifold, self.retraction)
        return _FixedStep(cost, self.alpha, self.retraction)


@dataclass(frozen=True)
class StabilizedArmijo:
    config: LineSearchConfig
    retraction: Retraction = Retraction.EXPONENTIAL
    kind = "stabilized_armijo"

    def __post_init__(self):
        object.__setattr__(self, "retraction", Retraction.parse(self.retraction))

    def rule(self, cost):
        _check_retraction(cost.manifold, self.retraction)
        return _Armijo(cost, self.config, self.retraction, stabilized=True)


@dataclass(frozen=True)
class StandardArmijo(StabilizedArmijo):
    kind = "standard_armijo"

    def rule(self, cost):
        _check_retraction(cost.manifold, self.retraction)
        return _Armijo(cost, self.config, self.retraction, stabilized=False)


@dataclass(frozen=True)
class ProximalPoint:
    alpha: float
    inner_tol: float = 1e-10
    max_inner: int = 10_000
    lipschitz: float | None = None
    kind = "proximal_point"

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"step size must satisfy α > 0, got α = {self.alpha}")
        if not self.inner_tol > 0:
            raise ConfigurationError("inner_tol must be > 0")

    def resolve_lipschitz(self, cost):
        lip = self.lipschitz if self.lipschitz is not None else cost.lipschitz_L
        if lip is None:
            raise ConfigurationError(
                f"proximal point needs a Lipschitz constant; cost {cost.name!r} declares none"
            )
        return float(lip)

    def rule(self, cost):
        m = cost.manifold
        if not m.is_hadamard:
            raise ConfigurationError(f"proximal point requires a Hadamard manifold, got {m.kind}")
        lip = self.resolve_lipschitz(cost)
        if not self.alpha * lip < 1.0:
            raise ConfigurationError(f"proximal point requires 0 < α < 1/L (α = {self.alpha}, L = {lip})")
        return _Proximal(cost, self.alpha, self.inner_tol, self.max_inner, lip)


def _check_retraction(m: Manifold, kind):
    if Retraction.parse(kind) not in m.retractions:
        raise ConfigurationError(f"{Retraction.parse(kind).value} retraction not available on {m.kind}")


# --------------------------------------------------------------------------
# batch engine


def run_batch(cost: CostModel, x0s, algorithm, stop: StopRule, keep_points=None):
    """Run ``algorithm`` from every row of ``x0s``.

    Returns a list with one entry per row: a :class:`Trajectory`, or the
    exception that stopped that run.  ``keep_points`` limits stored iterates
    to the last ``keep_points`` per run (``None`` keeps all).
    """
    m = cost.manifold
    x = np.array(x0s, dtype=float)
    if x.shape[1:] != tuple(m.point_shape):
        raise ConfigurationError(f"initial points must have shape (B, {m.point_shape})")
    b = len(x)
    rule = algorithm.rule(cost)
    rule.init(cost, x)

    g = cost.grad(x)
    gn = np.asarray(m.norm(x, g), dtype=float)
    active = np.ones(b, dtype=bool)
    term = np.full(b, None, dtype=object)
    errors = [None] * b
    n_iter = np.zeros(b, dtype=np.int64)

    hist_steps, hist_shrinks, hist_gn = [], [], [gn.copy()]
    hist_exps = [] if isinstance(rule, _Armijo) else None
    if keep_points is None:
        hist_pts = [x.copy()]
    else:
        w = int(keep_points)
        ring = np.empty((w,) + x.shape)
        ring[0] = x

    for t in range(int(stop.max_iters) + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        conv = gn[idx] <= stop.grad_tol
        term[idx[conv]] = Termination.GRAD_TOL
        active[idx[conv]] = False
        idx = idx[~conv]
        if not m.compact and np.isfinite(stop.escape_radius):
            with np.errstate(over="ignore", invalid="ignore"):
                far = ~(m.ambient_norm(x[idx]) <= stop.escape_radius)
            term[idx[far]] = Termination.ESCAPED
            active[idx[far]] = False
            idx = idx[~far]
        bad = ~np.isfinite(gn[idx])
        for k in idx[bad]:
            errors[k] = IterateDomainError(t, "non-finite gradient")
            active[k] = False
        idx = idx[~bad]
        if t == stop.max_iters:
            term[idx] = Termination.MAX_ITERS
            active[idx] = False
            break
        if idx.size == 0:
            break

        full = idx.size == b
        if full:
            y, steps, shrinks, errs = rule.step(t, idx, x, g, gn)
        else:
            y, steps, shrinks, errs = rule.step(t, idx, x[idx], g[idx], gn[idx])
        if full and not errs:
            # every run advanced: skip the bookkeeping by index
            x = np.array(y, dtype=float)
            g = cost.grad(x)
            gn = np.asarray(m.norm(x, g), dtype=float)
            n_iter += 1
            row = np.asarray(steps, dtype=float)
            srow = np.asarray(shrinks, dtype=np.int64)
            good = slice(None)
        else:
            ok = np.ones(idx.size, dtype=bool)
            for k, exc in errs.items():
                errors[idx[k]] = exc
                active[idx[k]] = False
                ok[k] = False
            good = idx[ok]
            x[good] = y[ok]
            if good.size:
                g[good] = cost.grad(x[good])
                gn[good] = m.norm(x[good], g[good])
            n_iter[good] += 1
            row = np.full(b, np.nan)
            row[good] = steps[ok]
            srow = np.zeros(b, dtype=np.int64)
            srow[good] = shrinks[ok]

        hist_steps.append(row)
        hist_shrinks.append(srow)
        hist_gn.append(gn.copy())
        if hist_exps is not None:
            hist_exps.append(rule.exps.copy())
        if keep_points is None:
            hist_pts.append(x.copy())
        else:
            ring[(t + 1) % w, good] = x[good]

    steps_all = np.array(hist_steps).reshape(len(hist_steps), b)
    shr_all = np.array(hist_shrinks, dtype=np.int64).reshape(len(hist_shrinks), b)
    gn_all = np.array(hist_gn)
    exps_all = np.array(hist_exps).reshape(len(hist_exps), b) if hist_exps is not None else None
    pts_all = np.array(hist_pts) if keep_points is None else None

    out = []
    for k in range(b):
        if errors[k] is not None:
            out.append(errors[k])
            continue
        n = int(n_iter[k])
        if pts_all is not None:
            pts, offset = pts_all[: n + 1, k].copy(), 0
        else:
            offset = max(0, n + 1 - w)
            pts = np.array([ring[i % w, k] for i in range(offset, n + 1)])
        out.append(
            Trajectory(
                points=pts,
                steps=steps_all[:n, k].copy(),
                grad_norms=gn_all[: n + 1, k].copy(),
                shrink_counts=shr_all[:n, k].copy(),
                termination=term[k],
                initial_step=rule.initial_step,
                points_offset=offset,
                exponents=exps_all[:n, k].copy() if exps_all is not None else None,
            )
        )
    return out


def _single(cost, m, x0, algorithm, stop):
    if m is not None and m != cost.manifold:
        raise ConfigurationError("cost is defined on a different manifold")
    x0 = cost.manifold.validate_point(x0)
    (res,) = run_batch(cost, x0[None], algorithm, stop)
    if isinstance(res, Exception):
        raise res
    return res


def fixed_step_run(cost, m, retraction_kind, x0, alpha, stop=StopRule()):
    """(R)GD with constant step: x_{t+1} = R_{x_t}(-alpha grad f(x_t))."""
    return _single(cost, m, x0, FixedStep(alpha, retraction_kind), stop)


def stabilized_armijo_run(cost, m, retraction_kind, x0, cfg: LineSearchConfig, stop=StopRule()):
    """Gradient descent with the stabilized Armijo backtracking line search.

    Each search starts from the previously accepted step, so accepted steps
    are non-increasing and lie on the grid alpha_bar * tau**i.
    """
    return _single(cost, m, x0, StabilizedArmijo(cfg, retraction_kind), stop)


def standard_armijo_run(cost, m, retraction_kind, x0, cfg: LineSearchConfig, stop=StopRule()):
    return _single(cost, m, x0, StandardArmijo(cfg, retraction_kind), stop)


def proximal_point_run(cost, m, x0, alpha, stop=StopRule(), inner_tol=1e-10, max_inner=10_000):
    """Proximal point iteration x_{k+1} = argmin_z f(z) + dist(x_k, z)^2 / (2 alpha)."""
    return _single(cost, m, x0, ProximalPoint(alpha, inner_tol, max_inner), stop)


# --------------------------------------------------------------------------
# proximal subproblem


_RES_FLOOR = 16 * np.finfo(float).eps


def _curvature_factor(m, r):
    """Upper bound on the eigenvalues of Hess(dist(., x)^2 / 2) at distance r."""
    if m.k_min is None or m.k_min >= 0:
        return np.ones_like(r)
    s = np.sqrt(-m.k_min) * r
    return np.where(s > 1e-8, s / np.tanh(np.where(s > 1e-8, s, 1.0)), 1.0)


@dataclass
class ProxResult:
    point: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    objective_history: list = field(default_factory=list)


def _prox_batch(cost, x, alpha, inner_tol, max_inner, lipschitz, history=None, counts=None):
    """Riemannian gradient descent on q_x(z) = f(z) + dist(z, x)^2 / (2 alpha).

    q_x is geodesically strongly convex for alpha < 1/L.  The step is
    1 / (L + c/alpha), with c bounding Hess(dist^2/2) at the current distance
    (c = 1 on flat space); a step that fails to decrease q_x is halved.
    The loop stops once |alpha grad f(z) - Log_z(x)| <= inner_tol, or below
    the rounding floor 16 eps (1 + |x| + initial residual) when that is larger.
    Returns (points, failed mask); ``counts``, if given, receives the
    number of inner steps taken per row.
    """
    m = cost.manifold
    z = np.array(x, dtype=float)
    b = len(z)

    def q_of(zz, xx):
        fz = np.asarray(cost.value(zz), dtype=float)
        pen = m.dist(zz, xx) ** 2 / (2 * alpha)
        return fz + pen, _RES_FLOOR * (1.0 + np.abs(fz) + pen)

    def resid_of(zz, xx):
        gq = alpha * cost.grad(zz) - m.log(zz, xx)
        return gq, np.asarray(m.norm(zz, gq), dtype=float)

    qv, _ = q_of(z, x)
    gq, res = resid_of(z, x)
    # the residual cannot be resolved below the rounding level of the data
    tol = np.maximum(inner_tol, _RES_FLOOR * (1.0 + m.ambient_norm(x) + res))
    scale = np.ones(b)
    live = res > tol
    failed = np.zeros(b, dtype=bool)
    if history is not None:
        history.append(qv.copy())
    for _ in range(max_inner):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        if counts is not None:
            counts[idx] += 1
        r = m.dist(z[idx], x[idx])
        c = _curvature_factor(m, r)
        step = scale[idx] / (lipschitz + c / alpha) / alpha
        cand = m.exp(z[idx], -m._expand(step) * gq[idx])
        qc, noise = q_of(cand, x[idx])
        gc, rc = resid_of(cand, x[idx])
        # once q_x flattens to rounding level, progress is judged by the residual
        better = (qc < qv[idx]) | ((qc <= qv[idx] + noise) & (rc < res[idx]))
        acc = idx[better]
        z[acc] = cand[better]
        qv[acc] = qc[better]
        gq[acc], res[acc] = gc[better], rc[better]
        live[acc] = res[acc] > tol[acc]
        rej = idx[~better]
        scale[rej] *= 0.5
        stuck = rej[scale[rej] < 1e-12]
        failed[stuck] = True
        live[stuck] = False
        if history is not None:
            history.append(qv.copy())
    failed |= live
    return z, failed


def proximal_map(cost, x, alpha, inner_tol=1e-10, max_inner=10_000, lipschitz=None):
    """One proximal step from ``x`` (single point or batch).

    Returns a :class:`ProxResult` with the minimizer, the first-order
    residual |alpha grad f(y) - Log_y(x)| and the inner objective history.
    """
    spec = ProximalPoint(alpha, inner_tol, max_inner, lipschitz)
    rule = spec.rule(cost)
    x = np.asarray(x, dtype=float)
    single = x.shape == tuple(cost.manifold.point_shape)
    xb = x[None] if single else x
    hist = []
    its = np.zeros(len(xb), dtype=int)
    y, failed = _prox_batch(cost, xb, rule.alpha, inner_tol, max_inner, rule.lipschitz, history=hist, counts=its)
    if np.any(failed):
        raise InnerSolverFailure("proximal subproblem did not converge")
    m = cost.manifold
    res = m.norm(y, rule.alpha * cost.grad(y) - m.log(y, xb))
    hist = np.array(hist)
    if single:
        return ProxResult(y[0], float(res[0]), int(its[0]), list(hist[:, 0]))
    return ProxResult(y, res, its, list(hist))
