"""Open convex sets: half-spaces, balls and polytopes.

Membership is strict for ``contains`` (the open set D) and non-strict for
``contains_closure``.  Both accept a single point of shape (d,) or a batch of
shape (N, d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, EmptyPolytope, InvalidAxis, ValidationError

INF_WIDTH = math.inf


def _vec(x):
    a = np.array(x, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """Region <normal, x> > offset."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", _vec(self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        if self.normal.ndim != 1 or not np.linalg.norm(self.normal) > 0:
            raise ValidationError("half-space normal must be a nonzero vector")

    @property
    def dim(self) -> int:
        return len(self.normal)


@dataclass(frozen=True, eq=False)
class Ball:
    """Region ||x - center|| < radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValidationError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Open intersection of half-spaces."""

    constraints: tuple

    def __post_init__(self):
        cons = tuple(self.constraints)
        if not cons:
            raise ValidationError("polytope needs at least one constraint")
        dims = {c.dim for c in cons}
        if len(dims) != 1:
            raise DimensionMismatch("polytope constraints have mixed dimensions")
        object.__setattr__(self, "constraints", cons)

    @property
    def dim(self) -> int:
        return self.constraints[0].dim

    @property
    def normals(self) -> np.ndarray:
        return np.array([c.normal for c in self.constraints])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([c.offset for c in self.constraints])


ConvexBody = HalfSpace | Ball | Polytope


@dataclass(frozen=True)
class SliceSpec:
    """Slice profile tau(s) = beta*sqrt(s) ('sqrt') or beta*sqrt(s|log s|) ('sqrt_log')."""

    kind: str
    beta: float
    delta: float

    def __post_init__(self):
        if self.kind not in ("sqrt", "sqrt_log"):
            raise ValidationError(f"unknown slice kind {self.kind!r}")
        if not (self.beta > 0 and self.delta > 0):
            raise ValidationError("slice beta and delta must be positive")

    def tau(self, s: float) -> float:
        if self.kind == "sqrt":
            return self.beta * math.sqrt(s)
        return self.beta * math.sqrt(s * abs(math.log(s)))


@dataclass(frozen=True)
class ValidationReport:
    open_convex: bool
    nonempty: bool
    excludes_origin: bool

    @property
    def ok(self) -> bool:
        return self.open_convex and self.nonempty and self.excludes_origin


def _points(body, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != body.dim:
        raise DimensionMismatch(f"body has dimension {body.dim}, point has {x.shape[-1]}")
    return x


def _slack(body, x):
    """Signed slack: positive inside the open set, zero on the boundary."""
    if isinstance(body, HalfSpace):
        return x @ body.normal - body.offset
    if isinstance(body, Ball):
        diff = x - body.center
        return body.radius**2 - np.sum(diff * diff, axis=-1)
    if isinstance(body, Polytope):
        return np.min(x @ body.normals.T - body.offsets, axis=-1)
    raise TypeError(f"unsupported body {type(body).__name__}")


def boundary_slack(body, x):
    """Signed slack of x: positive inside D, zero on its boundary."""
    return _slack(body, _points(body, x))


def contains(body, x):
    return _slack(body, _points(body, x)) > 0


def contains_closure(body, x):
    return _slack(body, _points(body, x)) >= 0


def scale(body, t: float):
    """The set t*D for t > 0."""
    if not t > 0:
        raise ValidationError("scale factor must be positive")
    if isinstance(body, HalfSpace):
        return HalfSpace(body.normal, t * body.offset)
    if isinstance(body, Ball):
        return Ball(t * body.center, t * body.radius)
    if isinstance(body, Polytope):
        return Polytope(tuple(scale(c, t) for c in body.constraints))
    raise TypeError(f"unsupported body {type(body).__name__}")


def _polytope_feasibility(poly: Polytope):
    """LP check of the closure and of the interior (Chebyshev-style slack)."""
    A, c = poly.normals, poly.offsets
    d = poly.dim
    norms = np.linalg.norm(A, axis=1)
    # maximize t subject to <a_i, x> - c_i >= t*|a_i|, t <= 1
    obj = np.zeros(d + 1)
    obj[-1] = -1.0
    A_ub = np.hstack([-A, norms[:, None]])
    bounds = [(None, None)] * d + [(None, 1.0)]
    res = linprog(obj, A_ub=A_ub, b_ub=-c, bounds=bounds, method="highs")
    if res.status == 2:
        return False, False
    if res.status != 0:
        raise ValidationError(f"polytope feasibility LP failed: {res.message}")
    t = res.x[-1]
    return bool(t >= -1e-12), bool(t > 1e-12)


def validate_conditions(body, model) -> ValidationReport:
    """Check the standing assumptions: open convex, nonempty, 0 outside the closure."""
    if body.dim != model.dim:
        raise DimensionMismatch(f"body dimension {body.dim} vs model dimension {model.dim}")
    if isinstance(body, HalfSpace):
        return ValidationReport(True, True, body.offset > 0)
    if isinstance(body, Ball):
        return ValidationReport(True, True, float(np.linalg.norm(body.center)) > body.radius)
    if isinstance(body, Polytope):
        closure_ok, interior_ok = _polytope_feasibility(body)
        if not closure_ok:
            raise EmptyPolytope("polytope closure is infeasible")
        if np.all(body.offsets <= 0):
            return ValidationReport(True, interior_ok, False)
        from .dominating import min_rate_point
        from .gauss_linalg import build_gaussian

        x, _ = min_rate_point(build_gaussian(np.eye(body.dim)), body)
        return ValidationReport(True, interior_ok, float(np.linalg.norm(x)) > 1e-9)
    raise TypeError(f"unsupported body {type(body).__name__}")


# ---------------------------------------------------------------------------
# slice geometry


def _perp_projector(v):
    u = v / np.linalg.norm(v)
    return np.eye(len(v)) - np.outer(u, u), u


def _halfspace_width(normal, offset, p, P):
    slack = float(normal @ p - offset)
    if slack <= 0:
        return 0.0
    tilt = float(np.linalg.norm(P @ normal))
    if tilt <= 1e-14 * np.linalg.norm(normal):
        return INF_WIDTH
    return slack / tilt


def _closed_form_width(body, p, v):
    P, u = _perp_projector(v)
    if isinstance(body, HalfSpace):
        return _halfspace_width(body.normal, body.offset, p, P)
    if isinstance(body, Ball):
        w = p - body.center
        w_par = float(w @ u)
        w_perp = float(np.linalg.norm(P @ w))
        room = body.radius**2 - w_par**2
        if room <= 0:
            return 0.0
        return max(math.sqrt(room) - w_perp, 0.0)
    if isinstance(body, Polytope):
        return min(_halfspace_width(c.normal, c.offset, p, P) for c in body.constraints)
    raise TypeError(f"unsupported body {type(body).__name__}")


def _probe_directions(body, p, v):
    """Unit directions in v-perp containing the worst case for each supported body."""
    P, _ = _perp_projector(v)
    cands = [P @ e for e in np.eye(len(v))]
    cands += [-c for c in cands]
    if isinstance(body, Ball):
        cands.append(P @ (p - body.center))
    else:
        cons = body.constraints if isinstance(body, Polytope) else (body,)
        cands += [-(P @ c.normal) for c in cons]
    out = []
    for c in cands:
        nrm = np.linalg.norm(c)
        if nrm > 1e-14:
            out.append(c / nrm)
    return np.array(out)


def _bisect_width(body, p, v, tol=1e-13, cap=1e12):
    dirs = _probe_directions(body, p, v)

    def fits(r):
        pts = p + r * dirs if len(dirs) else p[None, :]
        return bool(np.all(contains_closure(body, pts)))

    if not contains_closure(body, p):
        return 0.0
    hi = 1.0
    while fits(hi):
        hi *= 2.0
        if hi > cap:
            return INF_WIDTH
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return lo


def slice_width(body, a0, v, x0, s: float, method: str = "closed"):
    """Largest r with {y + s*x0 : <v,y> = 0, |y| <= r} inside D - a0.

    ``method`` is ``"closed"`` for the exact formula or ``"bisect"`` for
    bisection over worst-case probe directions.  Returns ``math.inf`` when
    the slice is unbounded.
    """
    a0, v, x0 = (np.asarray(z, dtype=float) for z in (a0, v, x0))
    if float(v @ x0) <= 0:
        raise InvalidAxis("axis x0 must satisfy <v, x0> > 0")
    if not s > 0:
        raise ValidationError("slice height s must be positive")
    p = a0 + s * x0
    if method == "closed":
        return _closed_form_width(body, p, v)
    if method == "bisect":
        return _bisect_width(body, p, v)
    raise ValidationError(f"unknown slice_width method {method!r}")


@dataclass(frozen=True)
class SliceReport:
    dominated: bool
    rows: tuple  # (s, width, tau, margin)


def default_grid(delta: float, levels: int = 24):
    return [delta * 2.0**-k for k in range(levels)]


def check_slice_domination(body, dp, spec: SliceSpec, grid=None, x0=None, method="closed"):
    """Compare slice widths at a0 against the profile tau on a grid of heights in (0, delta]."""
    if grid is None:
        grid = default_grid(spec.delta)
    axis = dp.f_unit if x0 is None else np.asarray(x0, dtype=float)
    rows = []
    for s in grid:
        if not 0 < s <= spec.delta:
            continue
        w = slice_width(body, dp.a0, dp.v, axis, s, method=method)
        t = spec.tau(s)
        rows.append((s, w, t, w - t))
    if not rows:
        raise ValidationError("slice grid has no points in (0, delta]")
    return SliceReport(all(r[3] >= 0 for r in rows), tuple(rows))


# ---------------------------------------------------------------------------
# JSON


def body_from_json(data: dict):
    kind = data.get("type")
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    if kind == "halfspace":
        return HalfSpace(data["normal"], data["offset"])
    if kind == "polytope":
        return Polytope(tuple(HalfSpace(c["normal"], c["offset"]) for c in data["constraints"]))
    raise ValidationError(f"unknown body type {kind!r}")


def body_to_json(body) -> dict:
    if isinstance(body, Ball):
        return {"type": "ball", "center": body.center.tolist(), "radius": body.radius}
    if isinstance(body, HalfSpace):
        return {"type": "halfspace", "normal": body.normal.tolist(), "offset": body.offset}
    return {"type": "polytope", "constraints": [body_to_json(c) for c in body.constraints]}
