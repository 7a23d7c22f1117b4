"""Moderate-deviation probabilities of i.i.d. sums over open convex sets.

Dominating points, exponential tilts, the exact prefactor/J_n
representation, closed-form ball asymptotics and Monte Carlo estimators
(plain and importance-sampled) that cross-check them.
"""

from .asymptotics import (
    cameron_martin_check,
    gaussian_set_probability,
    quadrature_integral,
    theorem1_upper,
    theorem5_value,
    weighted_chisq_laplace,
)
from .convex_bodies import (
    Ball,
    HalfSpace,
    Polytope,
    SliceSpec,
    check_slice_domination,
    contains,
    contains_closure,
    scale,
    slice_width,
    validate_conditions,
)
from .dominating import DominatingPoint, solve, solve_ball, solve_halfspace, solve_polytope, verify_support
from .engine import EstimateReport
from .gauss_linalg import GaussianModel, SpectralModel, build_gaussian, rate, sample, spectral_model, sqrt_spd
from .montecarlo import estimate_naive, estimate_tilted, ratio_experiment
from .representation import brute_force_probability, jn_estimate, repr_exact, theorem1_prefactor
from .tilting import (
    DiscreteBase,
    GaussianBase,
    GrowthSchedule,
    RademacherProduct,
    make_tilt,
    mgf,
    scaled_log_mgf,
    tilted_mean,
    tilted_variance_g,
)

__version__ = "0.1.0"
