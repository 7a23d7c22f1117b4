import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from moddev.convex_bodies import Ball, HalfSpace, Polytope, contains, contains_closure, scale
from moddev.dominating import (
    min_rate_point,
    on_boundary,
    solve,
    solve_ball,
    solve_halfspace,
    solve_polytope,
    verify_support,
)
from moddev.errors import EmptyPolytope, InvalidSet, SupportViolation
from moddev.gauss_linalg import build_gaussian, rate

from conftest import random_spd

I2 = build_gaussian(np.eye(2))
D41 = build_gaussian(np.diag([4.0, 1.0]))


def test_halfspace_examples():
    dp = solve_halfspace(I2, HalfSpace([1.0, 0.0], 1.0))
    np.testing.assert_allclose(dp.a0, [1.0, 0.0])
    assert dp.lambda_star == pytest.approx(0.5)
    assert dp.sigma_g2 == pytest.approx(1.0)
    np.testing.assert_allclose(dp.v, [1.0, 0.0])

    dp = solve_halfspace(D41, HalfSpace([1.0, 0.0], 2.0))
    np.testing.assert_allclose(dp.a0, [2.0, 0.0])
    np.testing.assert_allclose(dp.v, [0.5, 0.0])
    assert dp.lambda_star == pytest.approx(0.5)
    assert dp.sigma_g2 == pytest.approx(1.0)

    u = np.array([1.0, 1.0]) / np.sqrt(2)
    dp = solve_halfspace(I2, HalfSpace(u, 1.0))
    np.testing.assert_allclose(dp.a0, u)
    assert dp.lambda_star == pytest.approx(0.5)


def test_ball_examples():
    dp = solve_ball(I2, Ball([2.0, 0.0], 1.0))
    np.testing.assert_allclose(dp.a0, [1.0, 0.0], atol=1e-8)
    assert dp.lambda_star == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose(dp.v, [1.0, 0.0], atol=1e-8)
    assert dp.sigma_g2 == pytest.approx(1.0, abs=1e-8)

    dp = solve_ball(I2, Ball([3.0, 4.0], 2.5))
    np.testing.assert_allclose(dp.a0, [1.5, 2.0], atol=1e-8)
    assert dp.lambda_star == pytest.approx(3.125, abs=1e-8)

    dp = solve_ball(D41, Ball([0.0, 2.0], 1.0))
    np.testing.assert_allclose(dp.a0, [0.0, 1.0], atol=1e-8)
    np.testing.assert_allclose(dp.v, [0.0, 1.0], atol=1e-8)
    assert dp.lambda_star == pytest.approx(0.5, abs=1e-8)


def test_polytope_examples():
    hs = HalfSpace([1.0, 2.0], 1.5)
    a = solve_polytope(D41, Polytope((hs,)))
    b = solve_halfspace(D41, hs)
    np.testing.assert_allclose(a.a0, b.a0, atol=1e-8)

    dp = solve_polytope(I2, Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([0.0, 1.0], 1.0))))
    np.testing.assert_allclose(dp.a0, [1.0, 1.0], atol=1e-8)
    assert dp.lambda_star == pytest.approx(1.0, abs=1e-8)
    assert dp.kkt_residual < 1e-9

    dp = solve_polytope(I2, Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([1.0, 1.0], 1.0))))
    np.testing.assert_allclose(dp.a0, [1.0, 0.0], atol=1e-8)
    assert dp.lambda_star == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose(dp.multipliers, [1.0, 0.0], atol=1e-8)


def test_invalid_sets_rejected():
    with pytest.raises(InvalidSet):
        solve_ball(I2, Ball([2.0, 0.0], 2.0))
    with pytest.raises(InvalidSet):
        solve_halfspace(I2, HalfSpace([1.0, 0.0], 0.0))
    with pytest.raises(EmptyPolytope):
        solve_polytope(I2, Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([-1.0, 0.0], 0.0))))
    with pytest.raises(TypeError):
        solve(I2, "ball")


def _check_identities(dp, model):
    lam = dp.lambda_star
    assert abs(dp.sigma_g2 - 2 * lam) <= 1e-10 * max(1.0, 2 * lam)
    assert abs(dp.g(dp.a0) - 2 * lam) <= 1e-10 * max(1.0, 2 * lam)
    assert np.linalg.norm(model.covariance @ dp.v - dp.a0) <= 1e-10 * max(1.0, np.linalg.norm(dp.a0))


def test_identities_random_balls():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        d = int(rng.integers(1, 7))
        model = build_gaussian(random_spd(rng, d, cond=50))
        a = rng.standard_normal(d)
        a *= rng.uniform(1.0, 5.0) / np.linalg.norm(a)
        R = rng.uniform(0.1, 0.9) * np.linalg.norm(a)
        ball = Ball(a, R)
        dp = solve_ball(model, ball)
        _check_identities(dp, model)
        assert on_boundary(ball, dp)
        # v is a positive multiple of a - a0
        diff = a - dp.a0
        cosang = dp.v @ diff / (np.linalg.norm(dp.v) * np.linalg.norm(diff))
        assert cosang > 1 - 1e-9


def _slsqp_ball(model, ball):
    # independent oracle: constrained minimization of the rate on the sphere
    x0 = ball.center * (1 - ball.radius / np.linalg.norm(ball.center))
    res = minimize(
        lambda x: rate(model, x),
        x0,
        jac=lambda x: model.inverse @ x,
        constraints=[{"type": "ineq", "fun": lambda x: ball.radius**2 - np.sum((x - ball.center) ** 2)}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    return res.x


def test_ball_against_generic_optimizer():
    rng = np.random.default_rng(9)
    for _ in range(20):
        d = int(rng.integers(2, 5))
        model = build_gaussian(random_spd(rng, d, cond=10))
        a = rng.standard_normal(d) * 3
        ball = Ball(a, 0.5 * np.linalg.norm(a))
        dp = solve_ball(model, ball)
        x = _slsqp_ball(model, ball)
        assert rate(model, dp.a0) <= rate(model, x) + 1e-9
        np.testing.assert_allclose(dp.a0, x, atol=1e-5)


def test_polytope_against_generic_optimizer():
    rng = np.random.default_rng(21)
    for _ in range(20):
        d = int(rng.integers(2, 5))
        model = build_gaussian(random_spd(rng, d, cond=10))
        k = int(rng.integers(1, 4))
        normals = rng.standard_normal((k, d)) + 2.0
        offsets = rng.uniform(0.5, 2.0, k)
        poly = Polytope(tuple(HalfSpace(n, c) for n, c in zip(normals, offsets)))
        dp = solve_polytope(model, poly)
        res = minimize(
            lambda x: rate(model, x),
            np.full(d, 5.0),
            jac=lambda x: model.inverse @ x,
            constraints=[{"type": "ineq", "fun": lambda x: normals @ x - offsets}],
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 1000},
        )
        assert rate(model, dp.a0) <= rate(model, res.x) + 1e-8
        assert contains_closure(poly, dp.a0 + 1e-9 * np.abs(dp.a0).max())
        _check_identities(dp, model)
        assert dp.kkt_residual < 1e-9
        assert np.all(dp.multipliers >= 0)


def test_polytope_start_and_step_stability():
    rng = np.random.default_rng(5)
    model = build_gaussian(random_spd(rng, 3, cond=20))
    poly = Polytope((HalfSpace([1.0, 0.5, 0.0], 1.0), HalfSpace([0.2, 1.0, 0.3], 1.2), HalfSpace([0.0, 0.1, 1.0], 0.4)))
    ref = solve_polytope(model, poly).a0
    for _ in range(5):
        start = ref + rng.standard_normal(3)
        for step in (1.0, 0.5, 0.2):
            x, info = min_rate_point(model, poly, start=start, step=step)
            np.testing.assert_allclose(x, ref, atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0.1, 10))
def test_scaling_covariance(seed, t):
    rng = np.random.default_rng(seed)
    model = build_gaussian(random_spd(rng, 3))
    a = rng.standard_normal(3)
    a *= 2 / np.linalg.norm(a)
    ball = Ball(a, 1.0)
    dp = solve(model, ball)
    dpt = solve(model, scale(ball, t))
    np.testing.assert_allclose(dpt.a0, t * dp.a0, atol=1e-8 * t)
    assert dpt.lambda_star == pytest.approx(t * t * dp.lambda_star, rel=1e-8)
    poly = Polytope((HalfSpace(a, 1.0), HalfSpace(a + rng.standard_normal(3), 0.5)))
    pp = solve(model, poly)
    ppt = solve(model, scale(poly, t))
    np.testing.assert_allclose(ppt.a0, t * pp.a0, atol=1e-7 * max(1, t))


def test_verify_support():
    rng = np.random.default_rng(0)
    ball = Ball([2.0, 0.0], 1.0)
    dp = solve(I2, ball)
    rep = verify_support(I2, ball, dp, 10**5, rng)
    assert rep.min_margin >= -1e-9
    assert rep.samples > 9 * 10**4
    hs = HalfSpace([1.0, 0.0], 1.0)
    assert verify_support(I2, hs, solve(I2, hs), 10**4, rng).min_margin >= 0
    corner = Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([0.0, 1.0], 1.0)))
    rep = verify_support(I2, corner, solve(I2, corner), 10**5, rng)
    assert 0 <= rep.min_margin < 0.05


def test_verify_support_detects_wrong_point():
    from moddev.dominating import from_point

    ball = Ball([2.0, 0.0], 1.0)
    wrong = from_point(I2, np.array([1.0, 0.8]))
    with pytest.raises(SupportViolation) as err:
        verify_support(I2, ball, wrong, 10**4, np.random.default_rng(1))
    assert contains(ball, err.value.witness)
    assert err.value.margin < 0


def test_to_json_fields():
    dp = solve(I2, Ball([2.0, 0.0], 1.0))
    out = dp.to_json()
    for key in ("a0", "lambda_star", "v", "sigma_g2", "f_unit", "t0", "kkt_residual"):
        assert key in out
    assert out["t0"] == pytest.approx(1.0)
