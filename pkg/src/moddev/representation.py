"""Exact representation of P(S_n / b_n in D) as prefactor times J_n.

With h = b_n / n and g(x) = <v, x>,

    P(S_n / b_n in D) = exp(-(b_n^2/n) lambda - (b_n^2/n) sigma_g^2 / 2 + n log m(h v)) * J_n,
    J_n = E~[exp(-h g(S_n) + (b_n^2/n) g(a0)) 1{S_n in b_n D}],

where E~ is the n-fold tilted product law.  This holds for every n and b_n,
so enumerable bases check it to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .convex_bodies import HalfSpace, contains
from .engine import EstimateReport, run_blocks, summarize
from .errors import CovarianceMismatch, InvalidSet, TooLarge, ValidationError
from .tilting import DiscreteBase, GaussianBase, RademacherProduct, covariance, log_mgf, tilt, tilted_mean

ENUM_CAP = 10**7
_CHUNK = 1 << 16


def _atoms(base):
    if isinstance(base, RademacherProduct):
        base = base.as_discrete()
    if not isinstance(base, DiscreteBase):
        raise ValidationError("enumeration needs a discrete or Rademacher base")
    return base.atoms, base.probs


def _enumerate(atoms, probs, n, weight_fn):
    """Sum prod_j probs[i_j] * weight_fn(S) over all n-tuples of atom indices.

    ``weight_fn`` maps an (N, d) batch of sums to weights.  Returns fsum of
    chunk totals.
    """
    k = len(probs)
    total = k**n
    if total > ENUM_CAP:
        raise TooLarge(f"{k}^{n} = {total} outcome tuples exceed the cap {ENUM_CAP}")
    logp = np.log(probs)
    partial = []
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        S = np.zeros((len(idx), atoms.shape[1]))
        lp = np.zeros(len(idx))
        rest = idx
        for _ in range(n):
            digit = rest % k
            rest = rest // k
            S += atoms[digit]
            lp += logp[digit]
        partial.append(float(np.sum(np.exp(lp) * weight_fn(S))))
    return math.fsum(partial)


def brute_force_probability(base, n: int, b_n: float, body) -> float:
    """P(S_n in b_n D) by summing over every outcome tuple (strict membership)."""
    atoms, probs = _atoms(base)
    return _enumerate(atoms, probs, n, lambda S: contains(body, S / b_n).astype(float))


@dataclass(frozen=True)
class ReprDecomposition:
    prob: float
    prefactor: float
    j_n: float
    mode: str

    @property
    def formula(self) -> float:
        return self.prefactor * self.j_n

    @property
    def gap(self) -> float:
        return abs(self.prob - self.formula)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "prob": self.prob,
            "prefactor": self.prefactor,
            "j_n": self.j_n,
            "formula": self.formula,
            "abs_gap": self.gap,
        }


def _check_model(base, dp):
    cov = covariance(base)
    if cov.shape != dp.model.covariance.shape or not np.allclose(
        cov, dp.model.covariance, rtol=1e-10, atol=1e-12
    ):
        raise CovarianceMismatch("dominating point was computed for a different covariance")


def repr_prefactor(base, dp, n: int, b_n: float) -> float:
    h = b_n / n
    r2 = b_n * b_n / n
    return math.exp(-r2 * dp.lambda_star - r2 * (0.5 * dp.sigma_g2 - log_mgf(base, h * dp.v) / (h * h)))


def repr_exact(base, n: int, b_n: float, body, dp) -> ReprDecomposition:
    """Both sides of the representation identity, computed without sampling.

    Discrete and Rademacher bases are enumerated.  A Gaussian base with a
    half-space uses the normal tail for the probability and 1-D quadrature
    for J_n.
    """
    _check_model(base, dp)
    pre = repr_prefactor(base, dp, n, b_n)
    h = b_n / n
    r2 = b_n * b_n / n
    ga0 = float(dp.g(dp.a0))
    if isinstance(base, GaussianBase):
        if not isinstance(body, HalfSpace):
            raise ValidationError("exact Gaussian mode supports half-spaces only")
        return _gaussian_halfspace(base, n, b_n, body, dp, pre)
    atoms, _ = _atoms(base)
    sampler = tilt(base.as_discrete() if isinstance(base, RademacherProduct) else base, h * dp.v)
    prob = brute_force_probability(base, n, b_n, body)

    def weight(S):
        inside = contains(body, S / b_n)
        out = np.zeros(len(S))
        out[inside] = np.exp(-h * (S[inside] @ dp.v) + r2 * ga0)
        return out

    j_n = _enumerate(atoms, sampler.probs, n, weight)
    return ReprDecomposition(prob, pre, j_n, "exact_enumeration")


def _gaussian_halfspace(base, n, b_n, body, dp, pre):
    # g(S_n) under the tilted law is N(b_n sigma_g^2, n sigma_g^2); the event is g(S_n) > b_n g(a0)
    sg = math.sqrt(dp.sigma_g2)
    rho = b_n / math.sqrt(n)
    u = body.normal / np.linalg.norm(body.normal)
    if not np.allclose(dp.f_unit, u, atol=1e-10):
        raise ValidationError("dominating point does not belong to this half-space")
    prob = float(norm.sf(rho * sg))

    def integrand(t):
        return math.exp(-rho * sg * t) * norm.pdf(t)

    j_n, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return ReprDecomposition(prob, pre, j_n, "quadrature")


def theorem1_prefactor(dp, n: int, b_n: float) -> float:
    """exp(-(b_n^2 / n) lambda(a0))."""
    if not dp.lambda_star > 0:
        raise InvalidSet("lambda(a0) must be positive; 0 lies in the closure of D")
    return math.exp(-(b_n * b_n / n) * dp.lambda_star)


@dataclass(frozen=True)
class JnEstimate:
    report: EstimateReport
    shift_factor: float

    @property
    def value(self) -> float:
        return self.report.p_hat

    @property
    def std_err(self) -> float:
        return self.report.std_err

    @property
    def j_n(self) -> float:
        """The exact J_n this estimate implies: shift_factor * value."""
        return self.shift_factor * self.value

    @property
    def j_n_std_err(self) -> float:
        return self.shift_factor * self.std_err


def jn_estimate(sampler, dp, n: int, b_n: float, body, samples: int, seed: int, threads=None, stream=()) -> JnEstimate:
    """Monte Carlo of E[exp(-g(T_n - E T_n)) 1{T_n in (b_n^2/n) D}] with T_n = (b_n/n) sum Z_{n,j}.

    ``body=None`` means the whole space.  E T_n is exact.  The returned
    ``shift_factor`` exp(g((b_n^2/n) a0 - E T_n)) converts the estimate into J_n.
    """
    h = b_n / n
    r2 = b_n * b_n / n
    ET = b_n * tilted_mean(sampler)
    gET = float(ET @ dp.v)

    def kernel(rng, size):
        T = h * sampler.sample_sum(n, rng, size)
        val = np.exp(-(T @ dp.v - gET))
        if body is not None:
            val = np.where(contains(body, T / r2), val, 0.0)
        return val

    rep = summarize(run_blocks(kernel, samples, seed, stream, threads), "tilted", seed, weighted=True)
    shift = math.exp(r2 * float(dp.g(dp.a0)) - gET)
    return JnEstimate(rep, shift)
