"""Estimators of P(S_n in b_n D) and the ratio experiments.

``estimate_tilted`` draws S_n from the n-fold tilted law with
theta = (b_n / n) v and weights each replication by
exp(-<theta, S_n> + n log m(theta)).  ``estimate_naive`` is the same
machinery at theta = 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .asymptotics import gaussian_set_probability, theorem5_value
from .convex_bodies import Ball, contains
from .dominating import solve
from .engine import EstimateReport, Z95, run_blocks, summarize
from .errors import CovarianceMismatch, SupportViolation, ValidationError
from .tilting import GrowthSchedule, covariance, matching_model, resolve_bn, tilt

__all__ = [
    "EstimateReport",
    "estimate_naive",
    "estimate_tilted",
    "with_vr_factor",
    "ratio_experiment",
    "RatioRow",
    "estimates_csv",
    "ratio_csv",
]

MIN_SAMPLES = 1000


def _check_samples(samples):
    if samples < MIN_SAMPLES:
        raise ValidationError(f"samples must be at least {MIN_SAMPLES}")


def _run(base, theta, n, b_n, body, samples, seed, threads, stream, method):
    sampler = tilt(base, theta)
    log_cap = n * sampler.log_normalizer
    weighted = bool(np.any(sampler.theta))

    def kernel(rng, size):
        S = sampler.sample_sum(n, rng, size)
        inside = contains(body, S / b_n)
        out = np.zeros(size)
        if not weighted:
            out[inside] = 1.0
            return out
        logw = -(S[inside] @ sampler.theta) + log_cap
        if logw.size and logw.max() > log_cap + 1e-9 * max(1.0, abs(log_cap)):
            raise SupportViolation("importance weight exceeds exp(n log m(theta)); tilt does not support D")
        out[inside] = np.exp(logw)
        return out

    return summarize(run_blocks(kernel, samples, seed, stream, threads), method, seed, weighted=weighted)


def estimate_naive(base, n: int, schedule, body, samples: int, seed: int, threads=None, stream=()) -> EstimateReport:
    """Plain indicator average of 1{S_n in b_n D}."""
    _check_samples(samples)
    b_n = resolve_bn(schedule, n)
    return _run(base, np.zeros(base.dim), n, b_n, body, samples, seed, threads, stream, "naive")


def estimate_tilted(
    base, n: int, schedule, body, dp, samples: int, seed: int, threads=None, stream=(), theta=None
) -> EstimateReport:
    """Importance-sampled estimate under the exponential tilt at the dominating point.

    ``theta`` overrides the tilt vector; ``theta=0`` reproduces
    ``estimate_naive`` bit for bit.
    """
    _check_samples(samples)
    cov = covariance(base)
    if cov.shape != dp.model.covariance.shape or not np.allclose(cov, dp.model.covariance, rtol=1e-10, atol=1e-12):
        raise CovarianceMismatch("dominating point was computed for a different covariance")
    b_n = resolve_bn(schedule, n)
    th = (b_n / n) * dp.v if theta is None else np.broadcast_to(np.asarray(theta, dtype=float), (base.dim,))
    rep = _run(base, th, n, b_n, body, samples, seed, threads, stream, "tilted")
    return replace(rep, extra={"theta": th.tolist()})


def with_vr_factor(naive: EstimateReport, tilted: EstimateReport) -> EstimateReport:
    """Attach var(naive summand) / var(weighted summand) to the tilted report."""
    if tilted.variance <= 0:
        return replace(tilted, vr_factor=math.inf)
    return replace(tilted, vr_factor=naive.variance / tilted.variance)


@dataclass(frozen=True)
class RatioRow:
    n: int
    b_n: float
    p_sum: EstimateReport
    p_gauss: EstimateReport
    ratio: float
    ci: tuple
    t5_value: float | None = None

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "b_n": self.b_n,
            "p_sum": self.p_sum.p_hat,
            "p_sum_se": self.p_sum.std_err,
            "p_gauss": self.p_gauss.p_hat,
            "p_gauss_se": self.p_gauss.std_err,
            "ratio": self.ratio,
            "ci_lo": self.ci[0],
            "ci_hi": self.ci[1],
        }
        if self.t5_value is not None:
            out["t5_value"] = self.t5_value
        return out


def ratio_experiment(base, body, schedule: GrowthSchedule, n_list, samples: int, seed: int, threads=None):
    """Rows of P(S_n in b_n D) / P(G in rho_n D) with a delta-method CI."""
    if not isinstance(schedule, GrowthSchedule):
        raise ValidationError("ratio experiments need a GrowthSchedule")
    schedule.require_theorem_mode()
    model = matching_model(base)
    dp = solve(model, body)
    rows = []
    for i, n in enumerate(n_list):
        b_n = schedule.b(n)
        rho = b_n / math.sqrt(n)
        p_sum = estimate_tilted(base, n, b_n, body, dp, samples, seed, threads, stream=(i, 0))
        p_gauss = gaussian_set_probability(model, body, rho, samples, seed, "tilted", dp, threads, stream=(i, 1))
        ratio = p_sum.p_hat / p_gauss.p_hat if p_gauss.p_hat > 0 else math.nan
        rel = math.hypot(p_sum.rel_err, p_gauss.rel_err)
        ci = (ratio * (1 - Z95 * rel), ratio * (1 + Z95 * rel))
        t5 = theorem5_value(model, body, n, schedule).value if isinstance(body, Ball) else None
        rows.append(RatioRow(int(n), b_n, p_sum, p_gauss, ratio, ci, t5))
    return rows


ESTIMATE_COLUMNS = ["n", "b_n", "method", "p_hat", "std_err", "ci_lo", "ci_hi", "ess", "samples", "seed"]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def estimates_csv(rows) -> str:
    """rows: iterable of (n, b_n, EstimateReport)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ESTIMATE_COLUMNS)
    for n, b_n, rep in rows:
        w.writerow(
            [_fmt(v) for v in (n, float(b_n), rep.method, rep.p_hat, rep.std_err, rep.ci95[0], rep.ci95[1], rep.ess, rep.samples, rep.seed)]
        )
    return buf.getvalue()


def ratio_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["n", "b_n", "p_sum", "p_sum_se", "p_gauss", "p_gauss_se", "ratio", "ci_lo", "ci_hi"]
    if rows and rows[0].t5_value is not None:
        cols.append("t5_value")
    w.writerow(cols)
    for r in rows:
        d = r.to_dict()
        w.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()
