"""Limit objects for Gaussian comparisons and the ball formula.

The ball asymptotic is

    (2 pi sigma_g^2 rho^2)^{-1/2} exp(-rho^2 lambda(a0)) * I,
    I = int_0^inf e^{-s} P(|G_2|^2 <= 2 s b R^2) ds,

with rho^2 = b_n^2 / n, 1/b = g(a - a0) and G_2 the part of G orthogonal (in
the g-sense) to a0.  Integrating by parts, I = E exp(-|G_2|^2 / (2 b R^2)),
which for a weighted chi-square is a finite product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.laguerre import laggauss
from scipy.stats import norm

from .convex_bodies import Ball, HalfSpace, contains
from .dominating import DominatingPoint, solve, solve_ball
from .engine import EstimateReport, run_blocks, summarize
from .errors import DegenerateG2, ValidationError
from .gauss_linalg import GaussianModel, SpectralModel, as_gaussian
from .tilting import GrowthSchedule, resolve_bn


def _exact_report(p, method="exact"):
    return EstimateReport(p_hat=p, std_err=0.0, ci95=(p, p), samples=0, method=method)


def gaussian_set_probability(
    model,
    body,
    rho: float,
    samples: int = 1_000_000,
    seed: int | None = None,
    method: str = "tilted",
    dp: DominatingPoint | None = None,
    threads=None,
    stream=(),
) -> EstimateReport:
    """P(G in rho * D) for G ~ N(0, Sigma).

    Half-spaces use the normal tail in closed form.  Balls and polytopes use
    Monte Carlo, either plain (``method="naive"``) or with G shifted to
    rho * a0 and reweighted by exp(-rho g(x) + rho^2 sigma_g^2 / 2).
    """
    model = as_gaussian(model)
    if rho < 0:
        raise ValidationError("rho must be nonnegative")
    if rho == 0:
        return _exact_report(0.0)
    if isinstance(body, HalfSpace):
        sd = math.sqrt(model.variance_of(body.normal))
        return _exact_report(float(norm.sf(rho * body.offset / sd)))
    L = model.lower_factor
    d = model.dim
    if method == "naive":

        def kernel(rng, size):
            x = rng.standard_normal((size, d)) @ L.T
            return contains(body, x / rho).astype(float)

        return summarize(run_blocks(kernel, samples, seed, stream, threads), "naive", seed)
    if method != "tilted":
        raise ValidationError(f"unknown method {method!r}")
    if dp is None:
        dp = solve(model, body)
    shift = rho * dp.a0
    log_const = 0.5 * rho**2 * dp.sigma_g2

    def kernel(rng, size):
        x = shift + rng.standard_normal((size, d)) @ L.T
        inside = contains(body, x / rho)
        out = np.zeros(size)
        out[inside] = np.exp(-rho * (x[inside] @ dp.v) + log_const)
        return out

    return summarize(run_blocks(kernel, samples, seed, stream, threads), "tilted", seed, weighted=True)


@dataclass(frozen=True)
class CameronMartinResult:
    lhs: EstimateReport
    rhs: EstimateReport
    prefactor: float

    @property
    def combined_se(self) -> float:
        return math.hypot(self.lhs.std_err, self.rhs.std_err)

    @property
    def gap(self) -> float:
        return abs(self.lhs.p_hat - self.rhs.p_hat)

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs.to_json(),
            "rhs": self.rhs.to_json(),
            "prefactor": self.prefactor,
            "gap": self.gap,
            "combined_se": self.combined_se,
        }


def cameron_martin_check(model, ball: Ball, rho: float, samples: int, seed: int, threads=None) -> CameronMartinResult:
    """Both sides of P(G in rho D) = e^{-rho^2 lambda} E[e^{-rho g(G)} 1{G in rho(D - a0)}].

    The left side is plain Monte Carlo and the right side samples the
    expectation directly, on independent streams.
    """
    model = as_gaussian(model)
    dp = solve_ball(model, ball)
    lhs = gaussian_set_probability(model, ball, rho, samples, seed, method="naive", threads=threads, stream=(0,))
    L = model.lower_factor
    d = model.dim

    def kernel(rng, size):
        x = rng.standard_normal((size, d)) @ L.T
        inside = contains(ball, x / rho + dp.a0)
        out = np.zeros(size)
        out[inside] = np.exp(-rho * (x[inside] @ dp.v))
        return out

    raw = summarize(run_blocks(kernel, samples, seed, (1,), threads), "cameron_martin", seed, weighted=True)
    pre = math.exp(-(rho**2) * dp.lambda_star)
    rhs = EstimateReport(
        p_hat=pre * raw.p_hat,
        std_err=pre * raw.std_err,
        ci95=(pre * raw.ci95[0], pre * raw.ci95[1]),
        samples=raw.samples,
        method="cameron_martin",
        ess=raw.ess,
        hits=raw.hits,
        seed=seed,
    )
    return CameronMartinResult(lhs, rhs, pre)


def weighted_chisq_laplace(eigs, c: float) -> float:
    """E exp(-Q / (2c)) for Q = sum_j eigs_j Z_j^2, i.e. prod_j (1 + eigs_j / c)^{-1/2}."""
    if not c > 0:
        raise ValidationError("c must be positive")
    e = np.asarray(eigs, dtype=float)
    if e.size == 0:
        return 1.0
    if np.any(e < 0):
        raise ValidationError("eigenvalues must be nonnegative")
    return math.exp(-0.5 * math.fsum(np.log1p(e / c)))


# numpy's Laguerre weights overflow somewhere above 160 nodes
MAX_LAGUERRE_NODES = 160


@dataclass(frozen=True)
class QuadratureEstimate:
    value: float
    std_err: float
    nodes: int


def quadrature_integral(eigs, c: float, mc_samples: int = 1_000_000, quad_nodes: int = 128, seed: int = 0) -> QuadratureEstimate:
    """int_0^inf e^{-s} P(Q <= 2 s c) ds by Gauss-Laguerre over s with a Monte Carlo CDF of Q.

    The estimate is an average over Q draws of sum_k w_k 1{Q <= 2 s_k c},
    which gives its standard error directly.  The s-integrand has a kink-like
    rise where 2 s c crosses the bulk of Q, so low node counts carry visible
    bias when the eigenvalues are small relative to c.
    """
    if not 16 <= quad_nodes <= MAX_LAGUERRE_NODES:
        raise ValidationError(f"quad_nodes must lie in [16, {MAX_LAGUERRE_NODES}]")
    if not c > 0:
        raise ValidationError("c must be positive")
    e = np.asarray(eigs, dtype=float)
    s, w = laggauss(quad_nodes)
    if e.size == 0:
        return QuadratureEstimate(float(np.sum(w)), 0.0, quad_nodes)
    thresholds = 2.0 * s * c
    # cumulative weights: sum of w_k over nodes with threshold >= q
    tail_w = np.cumsum(w[::-1])[::-1]

    def kernel(rng, size):
        q = (rng.standard_normal((size, e.size)) ** 2) @ e
        idx = np.searchsorted(thresholds, q, side="left")
        out = np.zeros(size)
        ok = idx < len(w)
        out[ok] = tail_w[idx[ok]]
        return out

    rep = summarize(run_blocks(kernel, mc_samples, seed, (7,), 1), "quadrature", seed)
    return QuadratureEstimate(rep.p_hat, rep.std_err, quad_nodes)


@dataclass(frozen=True, eq=False)
class BallAsymptotic:
    dp: DominatingPoint
    b_geom: float
    g2_eigs: np.ndarray
    integral: float
    rho2: float
    value: float
    model_eigs: np.ndarray
    nominal_tail: float | None = None

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "integral": self.integral,
            "b_geom": self.b_geom,
            "rho2": self.rho2,
            "lambda_star": self.dp.lambda_star,
            "sigma_g2": self.dp.sigma_g2,
            "a0": self.dp.a0.tolist(),
            "g2_eigs": self.g2_eigs.tolist(),
            "model_eigs": self.model_eigs.tolist(),
            "nominal_tail": self.nominal_tail,
        }


def g2_eigenvalues(dp: DominatingPoint) -> np.ndarray:
    """Eigenvalues of cov(G_2) = Sigma - a0 a0^T / sigma_g^2 on the hyperplane {g = 0}."""
    cov = dp.model.covariance - np.outer(dp.a0, dp.a0) / dp.sigma_g2
    cov = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(cov)
    k = int(np.argmax(np.abs(V.T @ dp.f_unit)))
    w = np.delete(w, k)
    floor = -1e-10 * max(1.0, float(np.max(np.abs(dp.model.covariance))))
    if np.any(w < floor):
        raise DegenerateG2(f"cov(G_2) has a negative eigenvalue {w.min():.3e}")
    return np.sort(np.clip(w, 0.0, None))[::-1]


def theorem5_value(model, ball: Ball, n: int, schedule) -> BallAsymptotic:
    """Ball asymptotic at sample size n; model may be a SpectralModel."""
    if isinstance(schedule, GrowthSchedule):
        schedule.require_theorem_mode()
    tail = model.nominal_tail if isinstance(model, SpectralModel) else None
    gm = as_gaussian(model)
    dp = solve_ball(gm, ball)
    b_geom = 1.0 / float(dp.v @ (ball.center - dp.a0))
    eigs = g2_eigenvalues(dp)
    integral = weighted_chisq_laplace(eigs, b_geom * ball.radius**2)
    b = resolve_bn(schedule, n)
    rho2 = b * b / n
    value = (2 * math.pi * dp.sigma_g2 * rho2) ** -0.5 * math.exp(-rho2 * dp.lambda_star) * integral
    return BallAsymptotic(
        dp=dp,
        b_geom=b_geom,
        g2_eigs=eigs,
        integral=integral,
        rho2=rho2,
        value=value,
        model_eigs=np.array(gm.eigenvalues),
        nominal_tail=tail,
    )


def theorem1_upper(dp: DominatingPoint, n: int, schedule) -> float:
    """(2 pi sigma_g^2)^{-1/2} (sqrt(n) / b_n) exp(-(b_n^2 / n) lambda(a0))."""
    b = resolve_bn(schedule, n)
    return (2 * math.pi * dp.sigma_g2) ** -0.5 * math.sqrt(n) / b * math.exp(-(b * b / n) * dp.lambda_star)
