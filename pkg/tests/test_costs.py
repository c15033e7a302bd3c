import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgdlab.costs import (
    CriticalLabel,
    builtin_cost,
    classify_critical_point,
    fd_gradient,
    fd_hessian,
    hessian_matrix,
    transition,
)
from rgdlab.errors import ConfigurationError
from rgdlab.geometry import Hyperbolic, Sphere, tangent_frame

DIAG123 = np.diag([1.0, 2.0, 3.0]).tolist()


def _costs():
    h = Hyperbolic(2)
    p = h.exp(h.origin, np.array([0, 0.3, -0.4]))
    return {
        "quadratic": builtin_cost("quadratic", {"A": [[2.0, 0.5], [0.5, -1.0]], "b": [0.1, 0.2]}),
        "quadratic_sphere": builtin_cost("quadratic", {"A": DIAG123, "manifold": {"kind": "sphere", "d": 2}}),
        "cubic1d": builtin_cost("cubic1d"),
        "interp2d": builtin_cost("interp2d"),
        "rayleigh": builtin_cost("rayleigh", {"A": DIAG123}),
        "normal_coord_sphere": builtin_cost(
            "normal_coord_quadratic",
            {"manifold": {"kind": "sphere", "d": 2}, "p": [0, 0, 1.0], "D": [[1.0, 0], [0, -2.0]]},
        ),
        "normal_coord_hyperbolic": builtin_cost(
            "normal_coord_quadratic",
            {"manifold": {"kind": "hyperbolic", "n": 2}, "p": p.tolist(), "D": [[1.0, 0.5], [0.5, -2.0]]},
        ),
        "product_sphere_rayleigh": builtin_cost(
            "product_sphere_rayleigh", {"A": [np.diag([1.0, 4.0]).tolist(), DIAG123]}
        ),
    }


COSTS = _costs()


def _sample(cost, rng):
    m = cost.manifold
    if cost.name == "interp2d":
        return rng.uniform(-2.6, 2.6, size=2)
    if cost.name == "normal_coord_quadratic":
        p = cost.params["p"]
        return m.exp(np.asarray(p, float), m.random_tangent(rng, np.asarray(p, float)) * 0.5)
    return m.random_point(rng)


@pytest.mark.parametrize("key", sorted(COSTS))
def test_gradient_matches_finite_differences(key):
    cost = COSTS[key]
    m = cost.manifold
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = _sample(cost, rng)
        f = tangent_frame(m, x)
        g = f.coords(m, cost.grad(x))
        fd = fd_gradient(cost, x, f)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))
        assert m.check_tangent(x, cost.grad(x), tol=1e-10)


@pytest.mark.parametrize("key", [k for k in sorted(COSTS) if COSTS[k].has_hessian])
def test_hessian_action_is_self_adjoint_and_bounded(key):
    cost = COSTS[key]
    m = cost.manifold
    rng = np.random.default_rng(2)
    for _ in range(30):
        x = _sample(cost, rng)
        u, w = m.random_tangent(rng, x), m.random_tangent(rng, x)
        hu, hw = cost.hess(x, u), cost.hess(x, w)
        assert abs(float(m.inner(x, u, hw)) - float(m.inner(x, hu, w))) < 1e-8 * (1 + float(m.norm(x, hu)))
        if cost.lipschitz_L is not None:
            assert float(m.norm(x, hu)) <= (cost.lipschitz_L + 1e-8) * float(m.norm(x, u))
        f = tangent_frame(m, x)
        np.testing.assert_allclose(hessian_matrix(cost, x, f), fd_hessian(m, cost.grad, x, f), atol=1e-5)


def test_interp2d_examples():
    c = COSTS["interp2d"]
    x = np.array([3.0, 0.0])
    assert c.value(x) == 4.5
    assert np.array_equal(c.grad(x), x)
    assert transition(1.5)[0] == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0.0, 0.999), theta=st.floats(0, 2 * np.pi), R=st.floats(2.0001, 50.0))
def test_interp2d_pieces(r, theta, R):
    c = COSTS["interp2d"]
    d = np.array([np.cos(theta), np.sin(theta)])
    xi, xo = r * d, R * d
    assert c.value(xi) == pytest.approx(0.5 * (xi[0] ** 2 - xi[1] ** 2), abs=1e-15)
    assert c.value(xo) == pytest.approx(0.5 * R * R, rel=1e-15)
    # outside radius 2 the transition vanishes identically
    assert np.array_equal(c.grad(xo), xo)


@pytest.mark.parametrize("radius", [1.0, 2.0])
def test_interp2d_is_c2_across_transition_circles(radius):
    c = COSTS["interp2d"]
    m = c.manifold
    for theta in np.linspace(0, 2 * np.pi, 7, endpoint=False):
        d = np.array([np.cos(theta), np.sin(theta)])
        hin = fd_hessian(m, c.grad, (radius - 1e-3) * d)
        hout = fd_hessian(m, c.grad, (radius + 1e-3) * d)
        assert np.max(np.abs(hin - hout)) < 1e-4


def test_rayleigh_gradient_example():
    c = COSTS["rayleigh"]
    a = np.diag([1.0, 2.0, 3.0])
    rng = np.random.default_rng(3)
    x = Sphere(2).random_point(rng)
    np.testing.assert_allclose(c.grad(x), 2 * (a @ x - (x @ a @ x) * x), atol=1e-14)
    assert np.array_equal(c.grad(np.array([0, 0, 1.0])), np.zeros(3))


def test_classification_examples():
    r = COSTS["rayleigh"]
    assert classify_critical_point(r, r.manifold, np.array([0, 0, 1.0])) is CriticalLabel.STRICT_SADDLE
    ev = np.linalg.eigvalsh(hessian_matrix(r, np.array([0, 0, 1.0])))
    np.testing.assert_allclose(ev, [-4.0, -2.0], atol=1e-12)
    assert classify_critical_point(r, r.manifold, np.array([0, 1.0, 0])) is CriticalLabel.STRICT_SADDLE
    assert classify_critical_point(r, r.manifold, np.array([-1.0, 0, 0])) is CriticalLabel.MINIMIZER
    c = COSTS["cubic1d"]
    assert classify_critical_point(c, c.manifold, np.zeros(1)) is CriticalLabel.DEGENERATE
    q = builtin_cost("quadratic", {"A": [[2.0, 0], [0, 1.0]]})
    assert classify_critical_point(q, q.manifold, np.zeros(2)) is CriticalLabel.MINIMIZER
    assert classify_critical_point(q, q.manifold, np.ones(2)) is CriticalLabel.NOT_CRITICAL


def test_known_critical_points_agree_with_classifier():
    for key in ("rayleigh", "interp2d", "cubic1d", "normal_coord_hyperbolic", "normal_coord_sphere"):
        c = COSTS[key]
        for x, label in c.known_critical_points:
            assert classify_critical_point(c, c.manifold, x) is label


@pytest.mark.parametrize("key", ["normal_coord_sphere", "normal_coord_hyperbolic"])
def test_normal_coordinate_quadratic_has_hessian_d_at_base(key):
    c = COSTS[key]
    m = c.manifold
    p = np.asarray(c.params["p"], dtype=float)
    assert float(m.norm(p, c.grad(p))) < 1e-14
    f = tangent_frame(m, p)
    np.testing.assert_allclose(fd_hessian(m, c.grad, p, f), np.asarray(c.params["D"]), atol=1e-5)
    assert classify_critical_point(c, m, p) is CriticalLabel.STRICT_SADDLE


def test_lipschitz_metadata():
    assert COSTS["rayleigh"].lipschitz_L == 4.0
    assert builtin_cost("quadratic", {"A": [[2.0, 0], [0, -1.0]]}).lipschitz_L == 2.0
    assert 30 < COSTS["interp2d"].lipschitz_L < 60


@pytest.mark.parametrize(
    "name,params",
    [
        ("nope", {}),
        ("quadratic", {}),
        ("quadratic", {"A": [[1.0, 2.0], [0.0, 1.0]]}),
        ("quadratic", {"A": [[1.0]], "b": [1.0, 2.0]}),
        ("interp2d", {"x": 1}),
        ("rayleigh", {"A": [[1.0]]}),
        ("normal_coord_quadratic", {"manifold": {"kind": "sphere", "d": 2}, "D": [[1.0, 0], [0, 1.0]]}),
    ],
)
def test_malformed_params_are_configuration_errors(name, params):
    with pytest.raises(ConfigurationError):
        builtin_cost(name, params)
