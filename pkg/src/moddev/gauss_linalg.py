"""Dense Gaussian-measure primitives on R^d.

A centered Gaussian law is carried by its covariance matrix together with a
Cholesky factor and the inverse, computed once at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import zeta

from .errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric, ValidationError

SYMMETRY_RTOL = 1e-12
EIGEN_FLOOR = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Centered Gaussian measure N(0, covariance) on R^d."""

    covariance: np.ndarray
    lower_factor: np.ndarray
    inverse: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def S(self, v):
        """Image of the functional x -> <v, x> under the covariance operator."""
        return self.covariance @ np.asarray(v, dtype=float)

    def solve(self, x):
        """Return covariance^{-1} x using the Cholesky factor."""
        return linalg.cho_solve((self.lower_factor, True), np.asarray(x, dtype=float))

    def variance_of(self, v) -> float:
        """sigma_f^2 for f(x) = <v, x>."""
        v = np.asarray(v, dtype=float)
        return float(v @ self.covariance @ v)


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Diagonal covariance with eigenvalues ``j**-p``, j = 1..dim.

    Stands in for a trace-class covariance on a separable Hilbert space,
    truncated to the first ``dim`` coordinates.
    """

    eigenvalues: np.ndarray
    p: float | None = None
    nominal_tail: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def tail_mass(self) -> float:
        # the truncated model carries no mass beyond dim
        return 0.0

    def to_gaussian(self) -> GaussianModel:
        return build_gaussian(np.diag(self.eigenvalues))


def spectral_model(p: float, dim: int) -> SpectralModel:
    if dim < 1:
        raise ValidationError("spectral dim must be positive")
    if p <= 1:
        raise ValidationError("spectral rule j^-p needs p > 1 for finite trace")
    j = np.arange(1, dim + 1, dtype=float)
    tail = float(zeta(p, dim + 1))
    return SpectralModel(eigenvalues=_frozen(j ** (-p)), p=float(p), nominal_tail=tail)


def as_gaussian(model) -> GaussianModel:
    if isinstance(model, SpectralModel):
        return model.to_gaussian()
    return model


def build_gaussian(covariance) -> GaussianModel:
    """Validate a covariance matrix and precompute its factorization.

    Raises
    ------
    NotSymmetric
        If the matrix is not square or asymmetric beyond 1e-12 relative.
    NotPositiveDefinite
        If the smallest eigenvalue is below ``1e-12 * trace / d``.
    """
    cov = np.array(covariance, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] == 0:
        raise NotSymmetric(f"covariance must be a non-empty square matrix, got shape {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise ValidationError("covariance has non-finite entries")
    scale = max(np.max(np.abs(cov)), np.finfo(float).tiny)
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("covariance is not symmetric")
    cov = 0.5 * (cov + cov.T)
    d = cov.shape[0]
    eig = np.linalg.eigvalsh(cov)
    floor = EIGEN_FLOOR * np.trace(cov) / d
    if eig[0] <= floor:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {eig[0]:.3e} is not above the floor {floor:.3e}"
        )
    L = linalg.cholesky(cov, lower=True)
    inv = linalg.cho_solve((L, True), np.eye(d))
    inv = 0.5 * (inv + inv.T)
    return GaussianModel(_frozen(cov), _frozen(L), _frozen(inv), _frozen(eig))


def rate(model: GaussianModel, x) -> float:
    """Gaussian rate function x^T Sigma^{-1} x / 2."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dim:
        raise DimensionMismatch(f"expected dimension {model.dim}, got {x.shape[-1]}")
    return float(0.5 * x @ model.solve(x))


def sample(model: GaussianModel, rng: np.random.Generator, size: int | None = None):
    """Draw from N(0, Sigma) as L z with z standard normal.

    Returns a d-vector when ``size`` is None, else an array of shape (size, d).
    """
    if size is None:
        z = rng.standard_normal(model.dim)
        return model.lower_factor @ z
    z = rng.standard_normal((size, model.dim))
    return z @ model.lower_factor.T


def sqrt_spd(A) -> np.ndarray:
    """Symmetric positive definite square root via eigendecomposition."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric("sqrt_spd needs a square matrix")
    A = 0.5 * (A + A.T)
    w, V = np.linalg.eigh(A)
    d = A.shape[0]
    if w[0] <= EIGEN_FLOOR * max(np.trace(A), 0.0) / d or w[0] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} is not positive")
    B = (V * np.sqrt(w)) @ V.T
    return 0.5 * (B + B.T)
