"""Decay rates of oscillatory integral operators with homogeneous polynomial phases."""

from .decayfit import DecayFitResult, DecaySample, GridPolicy, compare, fit_power_law, sweep
from .newton import analyze_newton, newton_distance, norm_hypothesis_check, rank_one_check
from .numop import CutoffSpec, GridSpec, build_operator, knapp_lower_bound, l2_norm, lp_norm_lower
from .polycore import HomogeneousPolynomial, format_polynomial, mixed_hessian, parse_polynomial
from .rates import l2_damped_exponent, predict_lp_decay, shell_sum_bound

__all__ = [
    "CutoffSpec", "DecayFitResult", "DecaySample", "GridPolicy", "GridSpec", "HomogeneousPolynomial",
    "analyze_newton", "build_operator", "compare", "fit_power_law", "format_polynomial",
    "knapp_lower_bound", "l2_damped_exponent", "l2_norm", "lp_norm_lower", "mixed_hessian",
    "newton_distance", "norm_hypothesis_check", "parse_polynomial", "predict_lp_decay",
    "rank_one_check", "shell_sum_bound", "sweep",
]
