"""Monte Carlo saddle-avoidance experiments.

A plan names a cost, an algorithm, a sampler of initial points and a number
of runs.  Run ``i`` draws its initial point from the stream
``SeedSequence(seed, spawn_key=(i,))``, runs are batched in chunks of fixed
size, and results are merged in run order, so a report depends only on the
plan and never on how many worker processes executed it.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .costs import CostModel, CriticalLabel, builtin_cost, classify_critical_point
from .errors import ConfigurationError
from .geometry import Euclidean, Manifold, ProductSpheres, Sphere, make_manifold
from .optimizers import (
    FixedStep,
    LineSearchConfig,
    ProximalPoint,
    StabilizedArmijo,
    StandardArmijo,
    StopRule,
    Termination,
    Trajectory,
    run_batch,
)

CHUNK_SIZE = 256
WILSON_Z = 1.959963984540054
REPORT_SCHEMA = 1


class Classification(str, enum.Enum):
    STRICT_SADDLE = "ConvergedToStrictSaddle"
    OTHER = "ConvergedToOther"
    ESCAPED = "Escaped"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class Tolerances:
    window: int = 20
    conv_tol: float = 1e-7
    tol_g: float | None = None
    tol_lambda: float = 1e-6

    def __post_init__(self):
        if int(self.window) < 2:
            raise ConfigurationError("convergence window must hold at least 2 iterates")
        if not self.conv_tol > 0 or not self.tol_lambda > 0:
            raise ConfigurationError("tolerances must be positive")


# --------------------------------------------------------------------------
# samplers


@dataclass(frozen=True)
class GaussianAmbientProjected:
    """Ambient N(center, sigma^2 I) draws mapped onto the manifold."""

    sigma: float = 1.0
    center: tuple | None = None
    kind = "gaussian_ambient_projected"

    def check(self, m: Manifold):
        if not self.sigma > 0:
            raise ConfigurationError("sampler sigma must be positive")
        if self.center is not None and np.shape(self.center) != tuple(m.point_shape):
            raise ConfigurationError("sampler center must have the manifold's point shape")

    def sample(self, rng, m: Manifold):
        z = self.sigma * rng.standard_normal(m.point_shape)
        if self.center is not None:
            z = z + np.asarray(self.center, dtype=float)
        return m.project_point(z)

    def to_dict(self):
        d = {"kind": self.kind, "sigma": self.sigma}
        if self.center is not None:
            d["center"] = np.asarray(self.center, dtype=float).tolist()
        return d


@dataclass(frozen=True)
class UniformSphere:
    kind = "uniform_sphere"

    def check(self, m):
        if not isinstance(m, (Sphere, ProductSpheres)):
            raise ConfigurationError(f"uniform_sphere sampler needs a sphere, got {m.kind}")

    def sample(self, rng, m):
        return m.project_point(rng.standard_normal(m.point_shape))

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class UniformAnnulus:
    """Uniform on {r_lo <= |x| <= r_hi} in R^n."""

    r_lo: float
    r_hi: float
    kind = "uniform_annulus"

    def check(self, m):
        if not isinstance(m, Euclidean):
            raise ConfigurationError("uniform_annulus sampler is Euclidean-only")
        if not (0 <= self.r_lo < self.r_hi):
            raise ConfigurationError("uniform_annulus needs 0 <= r_lo < r_hi")

    def sample(self, rng, m):
        n = m.dim
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        u = rng.random()
        r = (self.r_lo**n + u * (self.r_hi**n - self.r_lo**n)) ** (1.0 / n)
        return r * d

    def to_dict(self):
        return {"kind": self.kind, "r_lo": self.r_lo, "r_hi": self.r_hi}


@dataclass(frozen=True)
class ListedPoints:
    """Run i starts at points[i]."""

    points: tuple
    kind = "listed_points"

    def check(self, m):
        for p in self.points:
            m.validate_point(p)

    def sample(self, rng, m, index=0):
        return np.array(self.points[index], dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "points": np.asarray(self.points, dtype=float).tolist()}


def make_sampler(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("sampler must be an object with a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "gaussian_ambient_projected":
            c = spec.get("center")
            return GaussianAmbientProjected(float(spec.get("sigma", 1.0)), None if c is None else tuple(np.ravel(c)))
        if kind == "uniform_sphere":
            return UniformSphere()
        if kind == "uniform_annulus":
            return UniformAnnulus(float(spec["r_lo"]), float(spec["r_hi"]))
        if kind == "listed_points":
            return ListedPoints(tuple(map(tuple, np.asarray(spec["points"], dtype=float).tolist())))
    except KeyError as exc:
        raise ConfigurationError(f"sampler {kind!r} is missing field {exc.args[0]!r}") from None
    raise ConfigurationError(f"unknown sampler kind {kind!r}")


# --------------------------------------------------------------------------
# algorithm specs


def make_algorithm(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("algorithm must be an object with a 'kind' field")
    kind = spec["kind"]
    retraction = spec.get("retraction", "exponential")
    try:
        if kind == "fixed_step":
            return FixedStep(float(spec["alpha"]), retraction)
        if kind in ("stabilized_armijo", "standard_armijo"):
            cfg = LineSearchConfig(
                alpha_bar=float(spec["alpha_bar"]),
                tau=float(spec.get("tau", 0.5)),
                r=float(spec.get("r", 1e-4)),
                max_shrinks_per_step=int(spec.get("max_shrinks_per_step", 200)),
            )
            cls = StabilizedArmijo if kind == "stabilized_armijo" else StandardArmijo
            return cls(cfg, retraction)
        if kind == "proximal_point":
            lip = spec.get("lipschitz")
            return ProximalPoint(
                float(spec["alpha"]),
                float(spec.get("inner_tol", 1e-10)),
                int(spec.get("max_inner", 10_000)),
                None if lip is None else float(lip),
            )
    except KeyError as exc:
        raise ConfigurationError(f"algorithm {kind!r} is missing field {exc.args[0]!r}") from None
    raise ConfigurationError(f"unknown algorithm kind {kind!r}")


def algorithm_to_dict(alg) -> dict:
    if isinstance(alg, FixedStep):
        return {"kind": alg.kind, "alpha": alg.alpha, "retraction": alg.retraction.value}
    if isinstance(alg, StabilizedArmijo):
        c = alg.config
        return {
            "kind": alg.kind,
            "alpha_bar": c.alpha_bar,
            "tau": c.tau,
            "r": c.r,
            "max_shrinks_per_step": c.max_shrinks_per_step,
            "retraction": alg.retraction.value,
        }
    return {
        "kind": alg.kind,
        "alpha": alg.alpha,
        "inner_tol": alg.inner_tol,
        "max_inner": alg.max_inner,
        "lipschitz": alg.lipschitz,
    }


# --------------------------------------------------------------------------
# plan


_TAKES_MANIFOLD = ("quadratic", "normal_coord_quadratic")


def resolve_cost(cost_spec, manifold_spec=None) -> CostModel:
    """Build the cost named in ``cost_spec`` and check it lives on the
    configured manifold (passed on to costs that take one)."""
    if not isinstance(cost_spec, dict) or "name" not in cost_spec:
        raise ConfigurationError("cost must be an object with a 'name' field")
    params = dict(cost_spec.get("params") or {})
    name = cost_spec["name"]
    if manifold_spec is not None and name in _TAKES_MANIFOLD:
        params.setdefault("manifold", manifold_spec)
    cost = builtin_cost(name, params)
    if manifold_spec is not None and make_manifold(manifold_spec) != cost.manifold:
        raise ConfigurationError(f"cost {name!r} lives on {cost.manifold!r}, not on the configured manifold")
    return cost


@dataclass
class ExperimentPlan:
    cost: dict
    algorithm: object
    sampler: object
    num_runs: int
    seed: int = 0
    stop: StopRule = field(default_factory=StopRule)
    tolerances: Tolerances = field(default_factory=Tolerances)
    manifold: dict | None = None

    def __post_init__(self):
        if int(self.num_runs) < 1:
            raise ConfigurationError("num_runs must be >= 1")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        self.num_runs = int(self.num_runs)
        self.seed = int(self.seed)
        m = self.build_cost().manifold
        self.sampler.check(m)
        if isinstance(self.sampler, ListedPoints) and len(self.sampler.points) < self.num_runs:
            raise ConfigurationError("listed_points sampler has fewer points than num_runs")
        self.algorithm.rule(self.build_cost())

    def build_cost(self) -> CostModel:
        return resolve_cost(self.cost, self.manifold)

    def initial_points(self, m=None) -> np.ndarray:
        m = self.build_cost().manifold if m is None else m
        pts = []
        for i in range(self.num_runs):
            if isinstance(self.sampler, ListedPoints):
                pts.append(self.sampler.sample(None, m, i))
            else:
                pts.append(self.sampler.sample(run_rng(self.seed, i), m))
        return np.array(pts)

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "manifold": self.manifold,
            "algorithm": algorithm_to_dict(self.algorithm),
            "sampler": self.sampler.to_dict(),
            "num_runs": self.num_runs,
            "seed": self.seed,
            "stop": {
                "grad_tol": self.stop.grad_tol,
                "max_iters": self.stop.max_iters,
                "escape_radius": self.stop.escape_radius,
            },
            "tolerances": {
                "window": self.tolerances.window,
                "conv_tol": self.tolerances.conv_tol,
                "tol_g": self.tolerances.tol_g,
                "tol_lambda": self.tolerances.tol_lambda,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        if not isinstance(d, dict):
            raise ConfigurationError("experiment must be an object")
        known = {"cost", "manifold", "algorithm", "sampler", "num_runs", "seed", "stop", "tolerances"}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown experiment fields: {', '.join(sorted(extra))}")
        for key in ("cost", "algorithm", "sampler", "num_runs"):
            if key not in d:
                raise ConfigurationError(f"experiment is missing {key!r}")
        try:
            stop = StopRule(**(d.get("stop") or {}))
            tol = Tolerances(**(d.get("tolerances") or {}))
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None
        return cls(
            cost=d["cost"],
            algorithm=make_algorithm(d["algorithm"]),
            sampler=make_sampler(d["sampler"]),
            num_runs=d["num_runs"],
            seed=d.get("seed", 0),
            stop=stop,
            tolerances=tol,
            manifold=d.get("manifold"),
        )


def run_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


# --------------------------------------------------------------------------
# classification


@dataclass
class RunOutcome:
    classification: Classification
    limit_point: np.ndarray | None = None
    iterations: int = 0
    final_step: float | None = None
    stabilization_index: int | None = None
    termination: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "classification": self.classification.value,
            "limit_point": None if self.limit_point is None else np.asarray(self.limit_point).tolist(),
            "iterations": self.iterations,
            "final_step": self.final_step,
            "stabilization_index": self.stabilization_index,
            "termination": self.termination,
            "error": self.error,
        }


def _window_converged(points, window, conv_tol) -> bool:
    if len(points) < window:
        return False
    tail = np.asarray(points[-window:]).reshape(window, -1)
    span = np.max(np.linalg.norm(tail[:, None, :] - tail[None, :, :], axis=-1))
    return bool(span <= conv_tol)


def classify_limit(traj: Trajectory, cost: CostModel, m: Manifold | None = None, tolerances=Tolerances()) -> RunOutcome:
    """Sort a finished run into the avoidance taxonomy."""
    m = cost.manifold if m is None else m
    n = traj.iterations
    final_step = float(traj.steps[-1]) if n else traj.initial_step
    stab = None
    if traj.shrink_counts is not None and traj.exponents is not None:
        stab = step_stabilization_audit(traj)[1]
    base = dict(iterations=n, final_step=final_step, stabilization_index=stab, termination=traj.termination.value)
    if traj.termination is Termination.ESCAPED:
        return RunOutcome(Classification.ESCAPED, **base)
    if traj.termination is Termination.MAX_ITERS and not _window_converged(
        traj.points, tolerances.window, tolerances.conv_tol
    ):
        return RunOutcome(Classification.UNDECIDED, **base)
    x = traj.final_point
    label = classify_critical_point(cost, m, x, tolerances.tol_g, tolerances.tol_lambda)
    cls = Classification.STRICT_SADDLE if label is CriticalLabel.STRICT_SADDLE else Classification.OTHER
    return RunOutcome(cls, limit_point=np.array(x), **base)


def step_stabilization_audit(traj: Trajectory):
    """(stabilized, K, final_alpha): K is the first index from which the
    accepted step never changes again.

    A finite record always ends in a constant stretch, so a run cut off at
    the iteration cap only counts as stabilized when that stretch covers at
    least half of it; runs that terminated on their own are always
    stabilized.
    """
    steps = np.asarray(traj.steps)
    if steps.size == 0:
        return True, 0, traj.initial_step
    last = steps[-1]
    differ = np.flatnonzero(steps != last)
    k = int(differ[-1] + 1) if differ.size else 0
    stabilized = traj.termination is not Termination.MAX_ITERS or 2 * (steps.size - k) >= steps.size
    return bool(stabilized), k, float(last)


# --------------------------------------------------------------------------
# Monte Carlo driver


@dataclass
class AvoidanceReport:
    num_runs: int
    counts: dict
    fraction_to_strict_saddle: float
    wilson_95: tuple
    run_seeds: list
    outcomes: list
    plan: dict

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "plan": self.plan,
            "num_runs": self.num_runs,
            "counts": dict(self.counts),
            "fraction_to_strict_saddle": self.fraction_to_strict_saddle,
            "wilson_95": list(self.wilson_95),
            "run_seeds": self.run_seeds,
            "runs": [o.to_dict() for o in self.outcomes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @property
    def errored(self) -> int:
        return sum(o.error is not None for o in self.outcomes)


def wilson_interval(k: int, n: int, z: float = WILSON_Z):
    if n <= 0:
        raise ValueError("n must be positive")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    # the bounds are exactly 0 and 1 at the extremes; avoid rounding residue
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


def _run_chunk(plan_dict, x0s, keep_points):
    plan = ExperimentPlan.from_dict(plan_dict)
    cost = plan.build_cost()
    results = run_batch(cost, x0s, plan.algorithm, plan.stop, keep_points=keep_points)
    outcomes = []
    for res in results:
        if isinstance(res, Exception):
            outcomes.append(
                RunOutcome(Classification.UNDECIDED, error=f"{type(res).__name__}: {res}")
            )
        else:
            outcomes.append(classify_limit(res, cost, cost.manifold, plan.tolerances))
    return outcomes, (results if keep_points is None else None)


def monte_carlo_avoidance(plan: ExperimentPlan, workers: int = 1, keep_trajectories: bool = False):
    """Run every sample of ``plan`` and aggregate the outcomes.

    With ``keep_trajectories`` the full trajectories are returned as well
    (as ``(report, trajectories)``); otherwise only the tail needed for the
    convergence window is stored.
    """
    cost = plan.build_cost()
    x0s = plan.initial_points(cost.manifold)
    plan_dict = plan.to_dict()
    keep = None if keep_trajectories else int(plan.tolerances.window)
    chunks = [x0s[i : i + CHUNK_SIZE] for i in range(0, len(x0s), CHUNK_SIZE)]
    if workers is not None and int(workers) > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as ex:
            parts = list(ex.map(_run_chunk, [plan_dict] * len(chunks), chunks, [keep] * len(chunks)))
    else:
        parts = [_run_chunk(plan_dict, c, keep) for c in chunks]
    outcomes = [o for part, _ in parts for o in part]
    trajectories = [t for _, part in parts for t in (part or [])]

    counts = {c.value: 0 for c in Classification}
    for o in outcomes:
        counts[o.classification.value] += 1
    k = counts[Classification.STRICT_SADDLE.value]
    report = AvoidanceReport(
        num_runs=plan.num_runs,
        counts=counts,
        fraction_to_strict_saddle=k / plan.num_runs,
        wilson_95=wilson_interval(k, plan.num_runs),
        run_seeds=[[plan.seed, i] for i in range(plan.num_runs)],
        outcomes=outcomes,
        plan=plan_dict,
    )
    if keep_trajectories:
        return report, trajectories
    return report


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """One row per stored iterate: iter, x0..x{n-1}, step, grad_norm, shrinks.

    ``step`` and ``shrinks`` on row t describe the transition to t + 1 and
    are empty on the last row.
    """
    pts = np.asarray(traj.points).reshape(len(traj.points), -1)
    ncoord = pts.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter"] + [f"x{j}" for j in range(ncoord)] + ["step", "grad_norm", "shrinks"])
        for row, p in enumerate(pts):
            t = traj.points_offset + row
            step = repr(float(traj.steps[t])) if t < traj.iterations else ""
            shr = int(traj.shrink_counts[t]) if t < traj.iterations else ""
            w.writerow([t] + [repr(float(v)) for v in p] + [step, repr(float(traj.grad_norms[t])), shr])
