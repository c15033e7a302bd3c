import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgdlab.costs import CostModel, builtin_cost
from rgdlab.errors import ConfigurationError, IterateDomainError, LineSearchFailure
from rgdlab.geometry import Euclidean, Retraction
from rgdlab.optimizers import (
    FixedStep,
    LineSearchConfig,
    StabilizedArmijo,
    StopRule,
    Termination,
    fixed_step_run,
    proximal_map,
    proximal_point_run,
    run_batch,
    stabilized_armijo_run,
    standard_armijo_run,
)

EXP = Retraction.EXPONENTIAL


def quad(a):
    return builtin_cost("quadratic", {"A": np.atleast_2d(a).tolist()})


def _check_armijo_log(cost, tr, cfg):
    """Re-evaluate sufficient decrease and the step grid from the log."""
    m = cost.manifold
    f = cost.value(tr.points)
    g = np.asarray([float(m.norm(x, cost.grad(x))) for x in tr.points])
    for t, a in enumerate(tr.steps):
        assert f[t] - f[t + 1] >= cfg.r * a * g[t] ** 2
    return f


# ---------------------------------------------------------------- configs


@pytest.mark.parametrize(
    "kw,needle",
    [
        ({"alpha_bar": 1.0, "tau": 1.5}, "τ ∈ (0,1)"),
        ({"alpha_bar": 1.0, "tau": 0.0}, "τ ∈ (0,1)"),
        ({"alpha_bar": 1.0, "r": 1.0}, "r ∈ (0,1)"),
        ({"alpha_bar": 0.0}, "ᾱ > 0"),
        ({"alpha_bar": 1.0, "max_shrinks_per_step": 0}, "max_shrinks"),
    ],
)
def test_line_search_config_validation(kw, needle):
    with pytest.raises(ConfigurationError, match=needle.replace("(", r"\(").replace(")", r"\)")):
        LineSearchConfig(**kw)


@pytest.mark.parametrize("kw", [{"grad_tol": 0}, {"max_iters": 0}, {"escape_radius": -1.0}])
def test_stop_rule_validation(kw):
    with pytest.raises(ConfigurationError):
        StopRule(**kw)


def test_fixed_step_rejects_bad_alpha():
    with pytest.raises(ConfigurationError):
        fixed_step_run(quad(1.0), None, EXP, np.ones(1), 0.0)


# ---------------------------------------------------------------- fixed step


def test_interp2d_collapses_to_origin_in_one_step():
    c = builtin_cost("interp2d")
    tr = fixed_step_run(c, c.manifold, EXP, np.array([3.0, 0.0]), 1.0)
    assert np.array_equal(tr.points[1], np.zeros(2))
    assert tr.termination is Termination.GRAD_TOL and tr.iterations == 1


def test_half_norm_squared_one_step():
    c = builtin_cost("quadratic", {"A": np.eye(3).tolist()})
    tr = fixed_step_run(c, None, EXP, np.array([5.0, -2.0, 1.0]), 1.0)
    assert np.array_equal(tr.points[1], np.zeros(3))


def test_rayleigh_iterates_stay_on_sphere():
    c = builtin_cost("rayleigh", {"A": np.diag([1.0, 2.0, 3.0]).tolist()})
    x0 = c.manifold.random_point(np.random.default_rng(0))
    for kind in ("exponential", "projection"):
        for alpha in (0.05, 0.4, 3.0):
            tr = fixed_step_run(c, None, kind, x0, alpha, StopRule(max_iters=200))
            assert np.max(np.abs(np.linalg.norm(tr.points, axis=1) - 1)) < 1e-10


def test_fixed_step_matches_affine_closed_form():
    rng = np.random.default_rng(4)
    b = rng.normal(size=(4, 4))
    a = b @ b.T  # iterates stay O(1) so an absolute tolerance is meaningful
    alpha = 0.9 / np.max(np.abs(np.linalg.eigvalsh(a)))
    x0 = rng.normal(size=4)
    tr = fixed_step_run(quad(a), None, EXP, x0, alpha, StopRule(max_iters=100, escape_radius=np.inf))
    step = np.eye(4) - alpha * a
    x = x0.copy()
    for t in range(len(tr.points)):
        assert np.max(np.abs(tr.points[t] - x)) < 1e-10
        x = step @ x


def test_trajectory_lengths_consistent():
    tr = fixed_step_run(quad([[1.0, 0], [0, 2.0]]), None, EXP, np.ones(2), 0.1, StopRule(max_iters=37))
    assert len(tr.points) == len(tr.steps) + 1 == len(tr.grad_norms) == len(tr.shrink_counts) + 1
    assert tr.termination is Termination.MAX_ITERS and tr.iterations == 37


def test_escape_is_reported():
    tr = fixed_step_run(quad([[1.0, 0], [0, -1.0]]), None, EXP, np.array([0.0, 1.0]), 0.5)
    assert tr.termination is Termination.ESCAPED
    assert np.linalg.norm(tr.final_point) > 1e6


def test_retraction_failure_reports_iterate_index():
    m = Euclidean(1)

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) < 1.0, np.nan, x)

    c = CostModel("broken", m, lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1), grad)
    with pytest.raises(IterateDomainError) as info:
        fixed_step_run(c, None, EXP, np.array([4.0]), 0.5)
    assert info.value.iteration == 3


# ---------------------------------------------------------------- Armijo


def test_armijo_quadratic_example():
    cfg = LineSearchConfig(1.0, 0.5, 0.5)
    c = builtin_cost("quadratic", {"A": [[10.0]]})
    tr = stabilized_armijo_run(c, None, EXP, np.array([1.0]), cfg, StopRule(max_iters=1))
    assert tr.steps[0] == 0.0625 and tr.points[1][0] == 0.375
    assert tr.shrink_counts[0] == 4


def test_standard_armijo_quadratic_restarts():
    cfg = LineSearchConfig(1.0, 0.5, 0.5)
    c = builtin_cost("quadratic", {"A": [[10.0]]})
    tr = standard_armijo_run(c, None, EXP, np.array([1.0]), cfg, StopRule(max_iters=30))
    assert np.all(tr.steps == 0.0625)
    assert np.all(tr.shrink_counts == 4)
    _check_armijo_log(c, tr, cfg)


def test_cubic_constant_step_variants_coincide():
    cfg = LineSearchConfig(0.3, 0.5, 0.5)
    c = builtin_cost("cubic1d")
    a = stabilized_armijo_run(c, None, EXP, np.array([0.3]), cfg, StopRule(max_iters=500))
    b = standard_armijo_run(c, None, EXP, np.array([0.3]), cfg, StopRule(max_iters=500))
    assert np.all(a.steps == 0.3)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.steps, b.steps)
    assert np.all(np.diff(a.points[:, 0]) < 0) and np.all(a.points > 0)


def test_tie_accepts_the_candidate():
    # f = x^2 / 2 from x = 1 with alpha = 1 and r = 1/2: f(x) - f(0) = 1/2 = r alpha |g|^2
    cfg = LineSearchConfig(1.0, 0.5, 0.5)
    tr = stabilized_armijo_run(quad(1.0), None, EXP, np.array([1.0]), cfg, StopRule(max_iters=1))
    assert tr.steps[0] == 1.0 and tr.shrink_counts[0] == 0


def test_line_search_failure_carries_iterate_and_step():
    m = Euclidean(1)
    # gradient with the wrong sign: no step ever decreases f
    c = CostModel("uphill", m, lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1), lambda x: -np.asarray(x))
    cfg = LineSearchConfig(1.0, 0.5, 0.1, max_shrinks_per_step=30)
    with pytest.raises(LineSearchFailure) as info:
        stabilized_armijo_run(c, None, EXP, np.array([1.0]), cfg)
    assert info.value.iteration == 0
    assert info.value.alpha == 0.5**30


@st.composite
def quadratic_problems(draw):
    n = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    q = np.linalg.qr(rng.normal(size=(n, n)))[0]
    lam = rng.uniform(0.1, 20.0, size=n) * rng.choice([-1.0, 1.0], size=n, p=[0.3, 0.7])
    a = q @ np.diag(lam) @ q.T
    return a, rng.normal(size=n) * 3


@settings(max_examples=60, deadline=None)
@given(
    prob=quadratic_problems(),
    alpha_bar=st.floats(0.01, 5.0),
    tau=st.floats(0.1, 0.9),
    r=st.floats(0.01, 0.9),
)
def test_stabilized_armijo_invariants(prob, alpha_bar, tau, r):
    a, x0 = prob
    c = quad(a)
    cfg = LineSearchConfig(alpha_bar, tau, r)
    tr = stabilized_armijo_run(c, None, EXP, x0, cfg, StopRule(max_iters=200, escape_radius=1e8))
    steps = tr.steps
    assert np.all(np.diff(steps) <= 0)
    cum = np.cumsum(tr.shrink_counts)
    assert np.array_equal(steps, alpha_bar * tau ** cum.astype(float))
    f = _check_armijo_log(c, tr, cfg)
    assert np.all(np.diff(f) <= 0)
    # step lower bound with the global constant L of a quadratic
    lip = np.max(np.abs(np.linalg.eigvalsh(a)))
    assert np.all(steps >= min(alpha_bar, 2 * tau * (1 - r) / lip) * (1 - 1e-12))


# ---------------------------------------------------------------- proximal point


def test_proximal_point_example():
    c = quad([[1.0, 0], [0, -1.0]])
    tr = proximal_point_run(c, None, np.array([3.0, 1.0]), 0.5, StopRule(max_iters=1))
    np.testing.assert_allclose(tr.points[1], [2.0, 2.0], atol=1e-10)


def test_proximal_fixed_point_at_critical_point():
    c = quad([[1.0, 0], [0, -1.0]])
    tr = proximal_point_run(c, None, np.zeros(2), 0.5)
    assert tr.iterations == 0 and tr.termination is Termination.GRAD_TOL
    res = proximal_map(c, np.zeros(2), 0.5)
    assert np.max(np.abs(res.point)) <= 1e-10


def test_proximal_residual_and_monotone_inner_objective():
    h = builtin_cost(
        "normal_coord_quadratic",
        {"manifold": {"kind": "hyperbolic", "n": 2}, "p": [1.0, 0, 0], "D": [[1.0, 0.5], [0.5, -2.0]]},
    )
    m = h.manifold
    x = m.exp(m.origin, np.array([0, 0.4, -0.3]))
    res = proximal_map(h, x, 0.2, lipschitz=3.0)
    assert res.residual <= 1e-10
    q = np.asarray(res.objective_history)
    # non-increasing up to rounding of the objective itself
    assert np.all(np.diff(q) <= 1e-13 * (1 + np.abs(q[:-1])))
    assert q[-1] < q[0]


def test_proximal_trajectory_residuals():
    c = quad([[2.0, 0.3], [0.3, -1.0]])
    alpha = 0.3
    tr = proximal_point_run(c, None, np.array([1.0, 0.2]), alpha, StopRule(max_iters=15))
    for x, y in zip(tr.points[:-1], tr.points[1:]):
        assert np.linalg.norm(alpha * c.grad(y) - (x - y)) <= 1e-10


def test_proximal_point_preconditions():
    r = builtin_cost("rayleigh", {"A": np.diag([1.0, 2.0, 3.0]).tolist()})
    with pytest.raises(ConfigurationError):
        proximal_point_run(r, None, np.array([1.0, 0, 0]), 0.1)
    with pytest.raises(ConfigurationError):
        proximal_point_run(quad([[1.0, 0], [0, -1.0]]), None, np.ones(2), 1.0)


# ---------------------------------------------------------------- batching


def test_batch_rows_match_single_runs():
    c = builtin_cost("interp2d")
    x0s = np.random.default_rng(5).uniform(-3, 3, size=(9, 2))
    stop = StopRule(max_iters=300)
    cfg = LineSearchConfig(1.0, 0.5, 0.25)
    for alg in (FixedStep(0.9), StabilizedArmijo(cfg)):
        batch = run_batch(c, x0s, alg, stop)
        for i, x0 in enumerate(x0s):
            (single,) = run_batch(c, x0[None], alg, stop)
            if isinstance(single, Exception):
                assert type(batch[i]) is type(single) and str(batch[i]) == str(single)
                continue
            assert np.array_equal(batch[i].points, single.points)
            assert np.array_equal(batch[i].steps, single.steps)


def test_armijo_stalls_below_rounding_resolution():
    # near the minimizers of interp2d the required decrease r a |g|^2 drops
    # below the spacing of floats around f, so the strict test cannot pass
    c = builtin_cost("interp2d")
    cfg = LineSearchConfig(1.0, 0.5, 0.25)
    x0 = np.array([-0.64557201, -0.04186189])
    with pytest.raises(LineSearchFailure):
        stabilized_armijo_run(c, None, EXP, x0, cfg, StopRule(grad_tol=1e-10))
    tr = stabilized_armijo_run(c, None, EXP, x0, cfg, StopRule(grad_tol=1e-7))
    assert tr.termination is Termination.GRAD_TOL
    np.testing.assert_allclose(np.abs(tr.final_point), [0.0, 1.2925379], atol=1e-6)


def test_tail_buffer_keeps_last_iterates():
    c = quad([[1.0, 0], [0, 2.0]])
    full = run_batch(c, np.ones((2, 2)), FixedStep(0.1), StopRule(max_iters=50))[0]
    tail = run_batch(c, np.ones((2, 2)), FixedStep(0.1), StopRule(max_iters=50), keep_points=20)[0]
    assert tail.points_offset == 31 and len(tail.points) == 20
    assert np.array_equal(tail.points, full.points[-20:])
    assert np.array_equal(tail.steps, full.steps)
