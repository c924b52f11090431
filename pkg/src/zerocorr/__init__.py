"""Correlation functions of the real zeros of random polynomials.

Three independent routes to the same numbers: an integral over the
cofactor coefficients (deterministic quadrature), an expectation over the
tail coefficients (Monte Carlo), and sampled polynomials with certified
root counts (the oracle).  Closed forms cover Gaussian, uniform and
exponential coefficients when every point is a root (``k = n``).
"""
__version__ = "0.1.0"

from .correlation import (
    CorrelationQuery,
    expected_real_roots,
    prob_all_real,
    rho,
    rho1_bin_integrals,
    rho2_box_integral,
    rho_k_montecarlo,
    rho_k_quadrature,
    rho_n_closed_form,
    rho_n_corollary,
    rho_n_exponential,
    rho_n_gaussian,
    rho_n_uniform,
    rho_theorem2_integrand,
)
from .models import CoefficientModel, Custom, Exponential, Gaussian, Uniform, stream
from .montecarlo import MonteCarloSpec
from .oracle import (
    BoxFamily,
    RootCertificationError,
    RootSet,
    discriminant_prob_all_real,
    empirical_correlation,
    empirical_intensity,
    empirical_prob_all_real,
    real_roots,
)
from .polycore import (
    Partition,
    PointConfig,
    SeparationError,
    coeffs_from_factorization,
    derivative_at_root,
    elem_sym,
    eta_jacobian_det,
    eta_schur,
    eta_vandermonde,
    schur,
    solve_vandermonde,
    vandermonde_det,
)
from .quadrature import Estimate, Geometry, QuadratureSpec, integrate_1d, integrate_nd

__all__ = [
    "BoxFamily",
    "CoefficientModel",
    "CorrelationQuery",
    "Custom",
    "Estimate",
    "Exponential",
    "Gaussian",
    "Geometry",
    "MonteCarloSpec",
    "Partition",
    "PointConfig",
    "QuadratureSpec",
    "RootCertificationError",
    "RootSet",
    "SeparationError",
    "Uniform",
    "coeffs_from_factorization",
    "derivative_at_root",
    "discriminant_prob_all_real",
    "elem_sym",
    "empirical_correlation",
    "empirical_intensity",
    "empirical_prob_all_real",
    "eta_jacobian_det",
    "eta_schur",
    "eta_vandermonde",
    "expected_real_roots",
    "integrate_1d",
    "integrate_nd",
    "prob_all_real",
    "real_roots",
    "rho",
    "rho1_bin_integrals",
    "rho2_box_integral",
    "rho_k_montecarlo",
    "rho_k_quadrature",
    "rho_n_closed_form",
    "rho_n_corollary",
    "rho_n_exponential",
    "rho_n_gaussian",
    "rho_n_uniform",
    "rho_theorem2_integrand",
    "schur",
    "solve_vandermonde",
    "stream",
    "vandermonde_det",
]
