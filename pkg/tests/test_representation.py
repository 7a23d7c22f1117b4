import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import norm

from moddev.convex_bodies import Ball, HalfSpace, Polytope, contains
from moddev.dominating import solve
from moddev.errors import CovarianceMismatch, InvalidSet, TooLarge
from moddev.gauss_linalg import build_gaussian
from moddev.representation import (
    brute_force_probability,
    jn_estimate,
    repr_exact,
    repr_prefactor,
    theorem1_prefactor,
)
from moddev.tilting import (
    DiscreteBase,
    GaussianBase,
    RademacherProduct,
    matching_model,
    scaled_log_mgf,
    tilt,
)

RAD1 = RademacherProduct([1.0])
HALF = HalfSpace([1.0], 0.5)


def _product_oracle(atoms, probs, n, b_n, body):
    # plain itertools enumeration with exact rational probabilities
    total = Fraction(0)
    for combo in itertools.product(range(len(probs)), repeat=n):
        S = sum(np.asarray(atoms[i], dtype=float) for i in combo)
        if contains(body, S / b_n):
            p = Fraction(1)
            for i in combo:
                p *= probs[i]
            total += p
    return total


def test_brute_force_examples():
    assert brute_force_probability(RAD1, 4, 3.0, HALF) == 0.3125
    assert _product_oracle([[1.0], [-1.0]], [Fraction(1, 2)] * 2, 4, 3.0, HALF) == Fraction(5, 16)
    assert brute_force_probability(RAD1, 1, 1.0, HALF) == 0.5
    assert brute_force_probability(RAD1, 4, 3.0, HalfSpace([1.0], 10.0)) == 0.0


def test_brute_force_against_rational_oracle():
    base = DiscreteBase([[1.0, 0.0], [-1.0, 1.0], [-1.0, -1.0]], [0.5, 0.25, 0.25])
    frac = [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]
    poly = Polytope((HalfSpace([1.0, 0.0], 0.1), HalfSpace([1.0, 1.0], -0.3)))
    for n in (2, 3, 5):
        exact = _product_oracle(base.atoms, frac, n, 2.0, poly)
        assert brute_force_probability(base, n, 2.0, poly) == pytest.approx(float(exact), rel=1e-14, abs=1e-300)


def test_too_large():
    with pytest.raises(TooLarge):
        brute_force_probability(RAD1, 24, 3.0, HALF)
    with pytest.raises(TooLarge):
        repr_exact(RademacherProduct([1.0, 1.0]), 12, 3.0, Ball([2.0, 0.0], 1.0), solve(build_gaussian(np.eye(2)), Ball([2.0, 0.0], 1.0)))


def test_repr_exact_example():
    dp = solve(matching_model(RAD1), HALF)
    assert dp.a0[0] == pytest.approx(0.5)
    assert dp.lambda_star == pytest.approx(0.125)
    assert dp.v[0] == pytest.approx(0.5)
    dec = repr_exact(RAD1, 4, 3.0, HALF, dp)
    assert dec.prob == 0.3125
    assert dec.formula == pytest.approx(0.3125, rel=1e-12)
    assert dec.mode == "exact_enumeration"


@pytest.mark.parametrize("n", [1, 2, 4, 6, 8])
@pytest.mark.parametrize("b_n", [1.0, 3.0, 7.0])
def test_repr_identity_rademacher_1d(n, b_n):
    dp = solve(matching_model(RAD1), HALF)
    dec = repr_exact(RAD1, n, b_n, HALF, dp)
    assert dec.gap <= 1e-12 * max(dec.prob, 1e-300) or dec.prob == dec.formula == 0


def test_repr_identity_skewed_2d():
    base = DiscreteBase([[1.0, 0.0], [-1.0, 1.0], [-1.0, -1.0]], [0.5, 0.25, 0.25])
    model = matching_model(base)
    for body in (Ball([1.0, 0.4], 0.6), Polytope((HalfSpace([1.0, 0.0], 0.2), HalfSpace([1.0, 1.0], 0.1)))):
        dp = solve(model, body)
        for n in (1, 3, 5):
            for b_n in (1.3, 2.7):
                dec = repr_exact(base, n, b_n, body, dp)
                if dec.prob > 0:
                    assert dec.gap <= 1e-12 * dec.prob


def test_repr_covariance_mismatch():
    dp = solve(build_gaussian([[2.0]]), HALF)
    with pytest.raises(CovarianceMismatch):
        repr_exact(RAD1, 4, 3.0, HALF, dp)


@pytest.mark.parametrize("n,b_n", [(10, 5.0), (100, 25.0), (1000, 500.0)])
def test_repr_gaussian_halfspace_quadrature(n, b_n):
    model = build_gaussian(np.diag([4.0, 1.0]))
    hs = HalfSpace([1.0, 1.0], 1.5)
    dp = solve(model, hs)
    dec = repr_exact(GaussianBase(model), n, b_n, hs, dp)
    assert dec.mode == "quadrature"
    rho = b_n / math.sqrt(n)
    sd = math.sqrt(hs.normal @ model.covariance @ hs.normal)
    oracle = norm.sf(rho * hs.offset / sd)
    assert dec.prob == pytest.approx(oracle, rel=1e-12)
    assert abs(dec.formula - oracle) <= 1e-10 * oracle
    # closed form of the tilted factor: e^{a^2/2} Phi-bar(a) with a = rho sigma_g
    a = rho * math.sqrt(dp.sigma_g2)
    assert dec.j_n == pytest.approx(math.exp(norm.logsf(a) + a * a / 2), rel=1e-10)


def test_prefactor_correction_rate():
    base = RademacherProduct([1.0, 2.0])
    body = Ball([2.0, 0.0], 1.0)
    dp = solve(matching_model(base), body)
    ns = np.array([10**3, 10**4, 10**5, 10**6])
    b = ns**0.6
    corr = [(bb**2 / n) * (dp.sigma_g2 / 2 - scaled_log_mgf(base, dp.v, n, bb)) for n, bb in zip(ns, b)]
    scaled = np.abs(corr) / (b**3 / ns**2)
    assert np.all(np.diff(np.abs(corr)) < 0)
    assert scaled.max() < 10
    # prefactor differs from the simplified one by exactly that correction
    for n, bb, c in zip(ns, b, corr):
        assert repr_prefactor(base, dp, n, bb) == pytest.approx(theorem1_prefactor(dp, n, bb) * math.exp(-c), rel=1e-12)


def test_rate_prefactor():
    dp = solve(build_gaussian(np.eye(2)), Ball([2.0, 0.0], 1.0))
    n = 10**4
    b = n**0.6
    assert b * b / n == pytest.approx(6.30957, rel=1e-5)
    val = theorem1_prefactor(dp, n, b)
    assert val == pytest.approx(math.exp(-0.5 * b * b / n), rel=1e-12)
    assert round(val, 6) == 0.042647
    assert theorem1_prefactor(dp, 10**12, 1e-3) == pytest.approx(1.0)


def test_rate_prefactor_guard():
    from moddev.dominating import DominatingPoint

    dp = solve(build_gaussian(np.eye(2)), Ball([2.0, 0.0], 1.0))
    fake = DominatingPoint(np.zeros(2), 0.0, np.zeros(2), 0.0, dp.f_unit, 0.0, dp.model)
    with pytest.raises(InvalidSet):
        theorem1_prefactor(fake, 10, 3.0)


def test_jn_whole_space_gaussian():
    model = build_gaussian(np.diag([2.0, 0.5]))
    body = Ball([2.0, 1.0], 1.0)
    dp = solve(model, body)
    n, b_n = 100, 30.0
    sampler = tilt(GaussianBase(model), (b_n / n) * dp.v)
    est = jn_estimate(sampler, dp, n, b_n, None, 10**6, seed=3)
    exact = math.exp(dp.sigma_g2 * b_n**2 / (2 * n))
    assert abs(est.value - exact) <= 4 * est.std_err


def test_jn_disjoint_body_is_zero():
    base = RademacherProduct([1.0])
    dp = solve(matching_model(base), HALF)
    sampler = tilt(base, (3.0 / 4) * dp.v)
    est = jn_estimate(sampler, dp, 4, 3.0, HalfSpace([1.0], 100.0), 10**4, seed=1)
    assert est.value == 0.0 and est.std_err == 0.0


def test_jn_matches_enumeration():
    base = RademacherProduct([1.0, 2.0])
    body = Ball([2.0, 0.0], 1.5)
    dp = solve(matching_model(base), body)
    n, b_n = 8, 3.0
    dec = repr_exact(base, n, b_n, body, dp)
    sampler = tilt(base, (b_n / n) * dp.v)
    est = jn_estimate(sampler, dp, n, b_n, body, 10**6, seed=5)
    assert dec.j_n > 0
    assert abs(est.j_n - dec.j_n) <= 4 * est.j_n_std_err


def test_jn_invariant_to_thread_count():
    base = RademacherProduct([1.0, 2.0])
    body = Ball([2.0, 0.0], 1.0)
    dp = solve(matching_model(base), body)
    sampler = tilt(base, 0.1 * dp.v)
    a = jn_estimate(sampler, dp, 100, 10.0, body, 200_000, seed=7, threads=1)
    b = jn_estimate(sampler, dp, 100, 10.0, body, 200_000, seed=7, threads=4)
    assert a.value == b.value and a.std_err == b.std_err
