"""Dominating points of open convex sets with respect to a Gaussian law.

The dominating point a0 minimizes the rate x^T Sigma^{-1} x / 2 over the
closure of D.  The supporting functional is g(x) = <v, x> with
v = Sigma^{-1} a0, which gives sigma_g^2 = g(a0) = 2 * rate(a0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import nnls

from .convex_bodies import Ball, HalfSpace, Polytope, boundary_slack, contains, validate_conditions
from .errors import EmptyPolytope, InvalidSet, NoConvergence, SupportViolation
from .gauss_linalg import GaussianModel, as_gaussian

KKT_TOL = 1e-9
ACTIVE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DominatingPoint:
    a0: np.ndarray
    lambda_star: float
    v: np.ndarray
    sigma_g2: float
    f_unit: np.ndarray
    t0: float
    model: GaussianModel
    kkt_residual: float = 0.0
    multipliers: np.ndarray | None = None

    def g(self, x):
        return np.asarray(x, dtype=float) @ self.v

    def to_json(self) -> dict:
        out = {
            "a0": self.a0.tolist(),
            "lambda_star": self.lambda_star,
            "v": self.v.tolist(),
            "sigma_g2": self.sigma_g2,
            "f_unit": self.f_unit.tolist(),
            "t0": self.t0,
            "kkt_residual": self.kkt_residual,
        }
        if self.multipliers is not None:
            out["multipliers"] = self.multipliers.tolist()
        return out


def from_point(model: GaussianModel, a0, kkt_residual=0.0, multipliers=None) -> DominatingPoint:
    """Assemble the dominating-point record for a rate minimizer a0."""
    a0 = np.array(a0, dtype=float)
    v = model.solve(a0)
    lam = 0.5 * float(a0 @ v)
    if not lam > 0:
        raise InvalidSet("dominating point at the origin: 0 lies in the closure of D")
    sigma_g2 = model.variance_of(v)
    t0 = float(np.linalg.norm(v))
    return DominatingPoint(
        a0=a0,
        lambda_star=lam,
        v=v,
        sigma_g2=sigma_g2,
        f_unit=v / t0,
        t0=t0,
        model=model,
        kkt_residual=float(kkt_residual),
        multipliers=multipliers,
    )


def _require_valid(model, body):
    report = validate_conditions(body, model)
    if not report.excludes_origin:
        raise InvalidSet("0 lies in the closure of D")
    if not report.nonempty:
        raise InvalidSet("D has empty interior")


def solve_halfspace(model, hs: HalfSpace) -> DominatingPoint:
    model = as_gaussian(model)
    _require_valid(model, hs)
    Sv = model.S(hs.normal)
    a0 = hs.offset * Sv / float(hs.normal @ Sv)
    return from_point(model, a0)


def _ball_point(eigvals, U, a, mu):
    # x(mu) = mu (Sigma^{-1} + mu I)^{-1} a, diagonalized by Sigma's eigenbasis
    ua = U.T @ a
    x = U @ (mu * eigvals / (1.0 + mu * eigvals) * ua)
    dist = np.linalg.norm(ua / (1.0 + mu * eigvals))
    return x, dist


def solve_ball(model, ball: Ball) -> DominatingPoint:
    """KKT multiplier bisection: Sigma^{-1} x = mu (a - x) with ||x - a|| = R."""
    model = as_gaussian(model)
    _require_valid(model, ball)
    w, U = np.linalg.eigh(model.covariance)
    a, R = ball.center, ball.radius

    lo, hi = 1e-12, 1.0
    for _ in range(200):
        if _ball_point(w, U, a, hi)[1] < R:
            break
        hi *= 2.0
    else:
        raise NoConvergence("could not bracket the ball multiplier")
    if _ball_point(w, U, a, lo)[1] <= R:
        lo = 0.0
    # bisect on log scale while the bracket is wide, then linearly
    for _ in range(400):
        mid = math.sqrt(lo * hi) if lo > 0 and hi / lo > 4 else 0.5 * (lo + hi)
        if _ball_point(w, U, a, mid)[1] > R:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    mu = 0.5 * (lo + hi)
    x, _ = _ball_point(w, U, a, mu)
    resid = np.linalg.norm(model.solve(x) - mu * (a - x))
    return from_point(model, x, kkt_residual=resid, multipliers=np.array([mu]))


# ---------------------------------------------------------------------------
# polytope: Dykstra projections in whitened coordinates, then active-set polish


def _whiten(model, poly):
    # x = L u turns the rate into |u|^2 / 2; constraint <n, x> >= c becomes <L^T n, u> >= c
    W = poly.normals @ model.lower_factor
    return W, poly.offsets


def _dykstra(W, c, y, max_sweeps):
    """Euclidean projection of y onto {W u >= c} by Dykstra's alternating scheme."""
    m = len(c)
    u = y.copy()
    incr = np.zeros((m, len(u)))
    norms2 = np.sum(W * W, axis=1)
    for sweep in range(1, max_sweeps + 1):
        u_prev = u.copy()
        for i in range(m):
            z = u + incr[i]
            viol = c[i] - W[i] @ z
            u = z + (viol / norms2[i]) * W[i] if viol > 0 else z
            incr[i] = z - u
        if np.linalg.norm(u - u_prev) <= 1e-14 * max(1.0, np.linalg.norm(u)):
            break
    return u, sweep


def _kkt(W, c, u, active):
    """Multipliers on the active set and the full KKT residual."""
    mu = np.zeros(len(c))
    if active.any():
        coef, _ = nnls(W[active].T, u)
        mu[active] = coef
    stationarity = np.linalg.norm(u - W.T @ mu)
    slack = W @ u - c
    primal = float(np.max(np.maximum(-slack, 0.0)))
    comp = float(np.max(np.abs(mu * slack)))
    scale = max(1.0, np.linalg.norm(u))
    return mu, max(stationarity, primal, comp) / scale


def _polish(W, c, active):
    """Minimum-norm point on the affine set {W_A u = c_A} and its multipliers."""
    WA = W[active]
    lam, *_ = np.linalg.lstsq(WA @ WA.T, c[active], rcond=None)
    return WA.T @ lam, lam


def _refine(W, c, active, tol):
    """Primal active-set steps from a Dykstra-identified working set."""
    m = len(c)
    for _ in range(2 * m + 2):
        if not active.any():
            return None
        u, lam = _polish(W, c, active)
        mu, res = _kkt(W, c, u, active)
        if res < tol:
            return u, mu, res
        idx = np.flatnonzero(active)
        if lam.min() < -tol:
            active = active.copy()
            active[idx[np.argmin(lam)]] = False
            continue
        viol = c - W @ u
        viol[active] = -np.inf
        if viol.max() > tol:
            active = active.copy()
            active[int(np.argmax(viol))] = True
            continue
        return None
    return None


def min_rate_point(model, poly: Polytope, max_iter: int = 100_000, start=None, step: float = 1.0):
    """Minimize x^T Sigma^{-1} x / 2 over the closed polytope.

    Projected gradient in whitened coordinates (x = L u), where the objective
    is |u|^2 / 2 and ``step=1`` is the exact step; each projection runs
    Dykstra sweeps.  The active set read off the iterate is then polished to
    machine precision.  ``max_iter`` bounds the total number of sweeps.

    Returns the minimizer and a dict with multipliers and the KKT residual.
    Does not require 0 to lie outside the closure.
    """
    W, c = _whiten(model, poly)
    if np.all(c <= 0):
        return np.zeros(poly.dim), {"multipliers": np.zeros(len(c)), "residual": 0.0}
    if start is None:
        u = np.zeros(poly.dim)
    else:
        u = linalg.solve_triangular(model.lower_factor, np.asarray(start, dtype=float), lower=True)
    used = 0
    res = math.inf
    while used < max_iter:
        u, sweeps = _dykstra(W, c, (1.0 - step) * u, max_iter - used)
        used += sweeps
        scale = max(1.0, float(np.linalg.norm(u)))
        found = _refine(W, c, W @ u - c < 1e-6 * scale, KKT_TOL)
        if found is not None:
            u_star, mu, res = found
            return model.lower_factor @ u_star, {"multipliers": mu, "residual": res}
        mu, res = _kkt(W, c, u, W @ u - c < ACTIVE_TOL * scale)
        if res < KKT_TOL:
            return model.lower_factor @ u, {"multipliers": mu, "residual": res}
    raise NoConvergence(f"polytope solver stalled with KKT residual {res:.3e}")


def solve_polytope(model, poly: Polytope, max_iter: int = 100_000, start=None, step=1.0) -> DominatingPoint:
    model = as_gaussian(model)
    _require_valid(model, poly)
    x, info = min_rate_point(model, poly, max_iter=max_iter, start=start, step=step)
    return from_point(model, x, kkt_residual=info["residual"], multipliers=info["multipliers"])


def solve(model, body) -> DominatingPoint:
    if isinstance(body, HalfSpace):
        return solve_halfspace(model, body)
    if isinstance(body, Ball):
        return solve_ball(model, body)
    if isinstance(body, Polytope):
        return solve_polytope(model, body)
    raise TypeError(f"unsupported body {type(body).__name__}")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportReport:
    min_margin: float
    samples: int


def _sample_body(body, dp, count, rng):
    d = dp.a0.shape[0]
    if isinstance(body, Ball):
        z = rng.standard_normal((count, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = body.radius * rng.random(count) ** (1.0 / d)
        pts = body.center + r[:, None] * z
        return pts[contains(body, pts)]
    # Gaussian cloud around a0 at the scale of |a0|, rejected to D
    spread = max(1.0, float(np.linalg.norm(dp.a0)))
    out, have = [], 0
    for _ in range(1000):
        pts = dp.a0 + spread * rng.standard_normal((2 * count, d)) * rng.random((2 * count, 1))
        pts = pts[contains(body, pts)]
        out.append(pts)
        have += len(pts)
        if have >= count:
            break
    return np.concatenate(out)[:count]


def verify_support(model, body, dp: DominatingPoint, samples: int, rng) -> SupportReport:
    """Check D lies in {g >= g(a0)} on sampled points of D."""
    pts = _sample_body(body, dp, samples, rng)
    margins = pts @ dp.v - float(dp.a0 @ dp.v)
    if len(margins) == 0:
        return SupportReport(math.inf, 0)
    i = int(np.argmin(margins))
    if margins[i] < -1e-9:
        raise SupportViolation(
            f"point of D below the supporting hyperplane by {-margins[i]:.3e}",
            witness=pts[i],
            margin=float(margins[i]),
        )
    return SupportReport(float(margins[i]), len(margins))


def on_boundary(body, dp, tol=1e-8) -> bool:
    """a0 sits on the boundary of D up to ``tol`` (relative to |a0|)."""
    scale = max(1.0, float(np.linalg.norm(dp.a0)))
    slack = float(boundary_slack(body, dp.a0))
    return abs(slack) <= tol * scale * (2 * scale if isinstance(body, Ball) else 1.0)
