"""Increment laws with closed-form MGFs and their exponential tilts.

Three families are supported, each with an exact tilted sampler:

* ``GaussianBase``: N(0, Sigma); tilting by theta shifts the mean to Sigma theta.
* ``DiscreteBase``: finitely many atoms; tilting reweights the atoms.
* ``RademacherProduct``: independent coordinates +-s_j; tilting makes each
  coordinate a biased coin.

The tilted law of Z^(n) uses theta = (b_n / n) v where g(x) = <v, x> is the
supporting functional at the dominating point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ScheduleError, ValidationError
from .gauss_linalg import GaussianModel, as_gaussian, build_gaussian

MEAN_TOL = 1e-12


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


@dataclass(frozen=True, eq=False)
class GaussianBase:
    model: GaussianModel

    def __post_init__(self):
        object.__setattr__(self, "model", as_gaussian(self.model))

    @property
    def dim(self):
        return self.model.dim


@dataclass(frozen=True, eq=False)
class DiscreteBase:
    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        probs = np.array(self.probs, dtype=float)
        if len(probs) != len(atoms) or len(probs) == 0:
            raise ValidationError("atoms and probs must have the same nonzero length")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError("probs must be positive and sum to 1")
        mean = probs @ atoms
        if np.max(np.abs(mean)) > MEAN_TOL * max(1.0, np.max(np.abs(atoms))):
            raise ValidationError(f"discrete base must have mean zero, got {mean}")
        atoms.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self):
        return self.atoms.shape[1]


@dataclass(frozen=True, eq=False)
class RademacherProduct:
    scales: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.array(self.scales, dtype=float))
        if np.any(s <= 0):
            raise ValidationError("Rademacher scales must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "scales", s)

    @property
    def dim(self):
        return len(self.scales)

    def as_discrete(self) -> DiscreteBase:
        d = self.dim
        signs = np.array(np.meshgrid(*[[1.0, -1.0]] * d, indexing="ij")).reshape(d, -1).T
        return DiscreteBase(signs * self.scales, np.full(len(signs), 0.5**d))


@dataclass(frozen=True)
class GrowthSchedule:
    """b(n) = c * n**alpha with 1/2 < alpha < 1."""

    c: float = 1.0
    alpha: float = 0.6

    def __post_init__(self):
        if not self.c > 0:
            raise ScheduleError("schedule constant c must be positive")
        if not 0.5 < self.alpha < 1.0:
            raise ScheduleError(f"alpha must lie in (1/2, 1), got {self.alpha}")
        if self.alpha >= 2.0 / 3.0:
            warnings.warn(
                f"alpha={self.alpha} is outside (1/2, 2/3); only logarithmic-scale results apply",
                stacklevel=2,
            )

    @property
    def theorem_mode(self) -> bool:
        return self.alpha < 2.0 / 3.0

    def require_theorem_mode(self):
        if not self.theorem_mode:
            raise ScheduleError(f"alpha={self.alpha} violates b_n = o(n^(2/3))")

    def b(self, n) -> float:
        return self.c * float(n) ** self.alpha


def resolve_bn(schedule, n) -> float:
    """Accept either a GrowthSchedule or an explicit b_n."""
    if isinstance(schedule, GrowthSchedule):
        return schedule.b(n)
    b = float(schedule)
    if not b > 0:
        raise ValidationError("b_n must be positive")
    return b


# ---------------------------------------------------------------------------


def _theta(base, theta):
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    if t.shape != (base.dim,):
        raise ValidationError(f"theta must have shape ({base.dim},), got {t.shape}")
    return t


def log_mgf(base, theta) -> float:
    t = _theta(base, theta)
    if isinstance(base, GaussianBase):
        return 0.5 * base.model.variance_of(t)
    if isinstance(base, DiscreteBase):
        return float(logsumexp(base.atoms @ t, b=base.probs))
    if isinstance(base, RademacherProduct):
        return float(np.sum(_log_cosh(t * base.scales)))
    raise TypeError(f"unsupported base {type(base).__name__}")


def mgf(base, theta) -> float:
    """E exp(<theta, X>) in closed form."""
    return math.exp(log_mgf(base, theta))


def covariance(base) -> np.ndarray:
    if isinstance(base, GaussianBase):
        return np.array(base.model.covariance)
    if isinstance(base, DiscreteBase):
        return (base.atoms * base.probs[:, None]).T @ base.atoms
    if isinstance(base, RademacherProduct):
        return np.diag(base.scales**2)
    raise TypeError(f"unsupported base {type(base).__name__}")


def matching_model(base) -> GaussianModel:
    """Gaussian model sharing the base's covariance; degenerate covariances are rejected."""
    if isinstance(base, GaussianBase):
        return base.model
    return build_gaussian(covariance(base))


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TiltedSampler:
    """The law of X reweighted by exp(<theta, x>) / m(theta)."""

    base: object
    theta: np.ndarray
    log_normalizer: float
    probs: np.ndarray | None = None  # discrete: tilted atom weights
    p_plus: np.ndarray | None = None  # Rademacher: P(coordinate = +s_j)

    @property
    def dim(self):
        return self.base.dim

    def sample(self, rng, size: int):
        """Draw ``size`` single increments, shape (size, d)."""
        return self.sample_sum(1, rng, size)

    def sample_sum(self, n: int, rng, size: int):
        """Draw ``size`` independent copies of Z_1 + ... + Z_n, shape (size, d).

        Exact in every family: Gaussian sums stay Gaussian, discrete sums are
        multinomial counts of atoms, Rademacher sums are scaled binomials.
        """
        base = self.base
        if isinstance(base, GaussianBase):
            m = base.model
            z = rng.standard_normal((size, m.dim))
            return n * (m.covariance @ self.theta) + math.sqrt(n) * (z @ m.lower_factor.T)
        if isinstance(base, DiscreteBase):
            counts = rng.multinomial(n, self.probs, size=size)
            return counts @ base.atoms
        if isinstance(base, RademacherProduct):
            k = rng.binomial(n, self.p_plus, size=(size, base.dim))
            return (2.0 * k - n) * base.scales
        raise TypeError(f"unsupported base {type(base).__name__}")


def tilt(base, theta) -> TiltedSampler:
    t = _theta(base, theta)
    lognorm = log_mgf(base, t)
    if isinstance(base, GaussianBase):
        return TiltedSampler(base, t, lognorm)
    if isinstance(base, DiscreteBase):
        if not np.any(t):
            q = np.array(base.probs)
        else:
            q = np.exp(np.log(base.probs) + base.atoms @ t - lognorm)
            q /= q.sum()
        return TiltedSampler(base, t, lognorm, probs=q)
    if isinstance(base, RademacherProduct):
        # e^{x} / (2 cosh x) written as a logistic to stay finite for large x
        p = 1.0 / (1.0 + np.exp(-2.0 * t * base.scales))
        return TiltedSampler(base, t, lognorm, p_plus=p)
    raise TypeError(f"unsupported base {type(base).__name__}")


def make_tilt(base, dp, n: int, schedule) -> TiltedSampler:
    """Tilt at theta = (b_n / n) v for the dominating point's functional v."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    h = resolve_bn(schedule, n) / n
    return tilt(base, h * dp.v)


def tilted_mean(sampler: TiltedSampler) -> np.ndarray:
    base = sampler.base
    if isinstance(base, GaussianBase):
        return base.model.covariance @ sampler.theta
    if isinstance(base, DiscreteBase):
        return sampler.probs @ base.atoms
    if isinstance(base, RademacherProduct):
        return base.scales * np.tanh(sampler.theta * base.scales)
    raise TypeError(f"unsupported base {type(base).__name__}")


def tilted_covariance(sampler: TiltedSampler) -> np.ndarray:
    base = sampler.base
    if isinstance(base, GaussianBase):
        return np.array(base.model.covariance)
    if isinstance(base, DiscreteBase):
        centered = base.atoms - tilted_mean(sampler)
        return (centered * sampler.probs[:, None]).T @ centered
    if isinstance(base, RademacherProduct):
        th = np.tanh(sampler.theta * base.scales)
        return np.diag(base.scales**2 * (1.0 - th**2))
    raise TypeError(f"unsupported base {type(base).__name__}")


def tilted_variance_g(sampler: TiltedSampler, dp) -> float:
    """Variance of g(Z^(n)) under the tilted law."""
    return float(dp.v @ tilted_covariance(sampler) @ dp.v)


def scaled_log_mgf(base, f_vec, n: int, schedule) -> float:
    """(n / b_n^2) log E exp(f(b_n S_n / n)) = log m(h f) / h^2 with h = b_n / n."""
    h = resolve_bn(schedule, n) / n
    return log_mgf(base, h * np.atleast_1d(np.asarray(f_vec, dtype=float))) / h**2


def base_from_json(data: dict):
    from .gauss_linalg import spectral_model

    kind = data.get("type")
    if kind == "gaussian":
        cov = data["covariance"]
        if isinstance(cov, dict) and "spectral" in cov:
            sp = cov["spectral"]
            if sp.get("rule", "j^-p") != "j^-p":
                raise ValidationError(f"unknown spectral rule {sp.get('rule')!r}")
            return GaussianBase(spectral_model(sp["p"], sp["dim"]).to_gaussian())
        return GaussianBase(build_gaussian(cov))
    if kind == "discrete":
        return DiscreteBase(data["atoms"], data["probs"])
    if kind == "rademacher":
        return RademacherProduct(data["scales"])
    raise ValidationError(f"unknown distribution type {kind!r}")
