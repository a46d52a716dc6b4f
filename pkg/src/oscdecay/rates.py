"""Closed-form decay predictions for ``T_lambda`` and its damped family.

All arithmetic is done in :class:`fractions.Fraction` when the inputs are
rational (ints, Fractions, or strings such as ``"6/5"``); float inputs fall
back to floating arithmetic and the result is tagged ``exact=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

import numpy as np

SIGMA_ATOL = 1e-12
_REGIME_DUAL = {
    "interior": "interior",
    "endpoint_low": "endpoint_high",
    "endpoint_high": "endpoint_low",
    "below_range": "above_range",
    "above_range": "below_range",
}


class HypothesisError(ValueError):
    """Parameters outside the range where the decay table is stated."""


def as_number(value) -> Fraction | float:
    """Exact Fraction for ints, Fractions and numeric strings, else float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Real):
        return float(value)
    raise TypeError(f"not a real number: {value!r}")


def _same(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= SIGMA_ATOL


def dual_exponent(p):
    """Hoelder conjugate ``p / (p - 1)``."""
    p = as_number(p)
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return p / (p - 1)


def sharp_range(d: int, n: int) -> tuple[Fraction, Fraction]:
    """``(d/(d-n), d/n)``, the open interval of sharp decay."""
    return Fraction(d, d - n), Fraction(d, n)


@dataclass(frozen=True)
class DecayPrediction:
    d: int
    n: int
    p: Fraction | float
    exponent: Fraction | float
    log_exponent: Fraction | float
    sharpness: str  # sharp | almost_sharp | upper_bound_only
    regime: str  # interior | endpoint_low | endpoint_high | below_range | above_range
    exact: bool = True
    in_hypothesis: bool = True


def predict_lp_decay(d: int, n: int, p, allow_out_of_hypothesis: bool = False) -> DecayPrediction:
    """Predicted ``L^p`` decay ``lambda^-exponent (log lambda)^log_exponent``.

    The Newton distance is ``2n/d`` under the rank-one condition, so the
    sharp exponent is ``n/d``. Outside ``[d/(d-n), d/n]`` the bound is
    ``1/p'`` below and ``1/p`` above the range, neither known to be sharp.

    >>> predict_lp_decay(6, 2, 2).exponent
    Fraction(1, 3)
    """
    in_hyp = d > 2 * n >= 4
    if not in_hyp and not allow_out_of_hypothesis:
        raise HypothesisError(f"need d > 2n >= 4, got d={d}, n={n}")
    if d <= n:
        raise HypothesisError(f"need d > n for a nonempty range, got d={d}, n={n}")
    p = as_number(p)
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    exact = isinstance(p, Fraction)
    lo, hi = sharp_range(d, n)
    delta = Fraction(2 * n, d)
    half = delta / 2
    if not exact:
        lo, hi, delta, half = float(lo), float(hi), float(delta), float(half)
    zero = Fraction(0) if exact else 0.0

    if _same(p, lo):
        return DecayPrediction(d, n, p, half, delta, "almost_sharp", "endpoint_low", exact, in_hyp)
    if _same(p, hi):
        return DecayPrediction(d, n, p, half, delta, "almost_sharp", "endpoint_high", exact, in_hyp)
    if lo < p < hi:
        return DecayPrediction(d, n, p, half, zero, "sharp", "interior", exact, in_hyp)
    if p < lo:
        return DecayPrediction(d, n, p, 1 - 1 / p, zero, "upper_bound_only", "below_range", exact, in_hyp)
    return DecayPrediction(d, n, p, 1 / p, zero, "upper_bound_only", "above_range", exact, in_hyp)


def dual_regime(regime: str) -> str:
    return _REGIME_DUAL[regime]


@dataclass(frozen=True)
class DampedDecayPrediction:
    d: int
    n: int
    sigma: Fraction | float
    exponent: Fraction | float
    has_log: bool
    c_z_note: float  # |z(z-1)|, carried as metadata only
    t: float = 0.0
    exact: bool = True

    @property
    def log_exponent(self):
        return 1 if self.has_log else 0

    @property
    def regime(self) -> str:
        if self.has_log:
            return "damped_critical"
        return "damped_saturated" if self.exponent == Fraction(1, 2) else "damped_interior"


def sigma_bounds(d: int, n: int) -> tuple[Fraction, Fraction]:
    """``(sigma_1, sigma_2) = (-n/(d-2), (d-2n)/(2(d-2)))``."""
    if d <= 2:
        raise HypothesisError(f"need d > 2, got d={d}")
    return Fraction(-n, d - 2), Fraction(d - 2 * n, 2 * (d - 2))


def l2_damped_exponent(sigma, d: int, n: int, t: float = 0.0) -> DampedDecayPrediction:
    """``L^2`` decay exponent of the operator damped by ``||S''||_HS^(sigma+it)``."""
    s1, s2 = sigma_bounds(d, n)
    sigma = as_number(sigma)
    exact = isinstance(sigma, Fraction)
    if sigma <= s1:
        raise ValueError(f"sigma must exceed sigma_1 = {s1}, got {sigma}")
    z = complex(float(sigma), float(t))
    c_z = abs(z * (z - 1))
    half = Fraction(1, 2) if exact else 0.5
    if _same(sigma, s2):
        return DampedDecayPrediction(d, n, sigma, half, True, c_z, float(t), exact)
    if sigma > s2:
        return DampedDecayPrediction(d, n, sigma, half, False, c_z, float(t), exact)
    exponent = ((d - 2) * sigma + n) / d
    return DampedDecayPrediction(d, n, sigma, exponent, False, c_z, float(t), exact)


# --- dyadic shell majorant ---------------------------------------------------


def _shell_log2_terms(lam: float, sigma: float, d: int, n: int, k: np.ndarray):
    base = -(d - 2) * k * sigma
    osc = base + k * (d - 2 * n) / 2 - 0.5 * math.log2(lam)
    size = base - n * k
    return osc, size


def shell_sum_bound(lam: float, sigma, d: int, n: int, k_max: int | None = None) -> float:
    """Dyadic shell majorant ``sum_k min(oscillatory bound, size bound)``.

    Shell ``k`` contributes ``min(2^{-(d-2)k sigma} 2^{k(d-2n)/2} lam^{-1/2},
    2^{-(d-2)k sigma} 2^{-nk})``. ``k_max`` is extended until the size-term
    tail falls below ``1e-15`` of the partial sum.
    """
    lam, sigma = float(lam), float(sigma)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    rate = (d - 2) * sigma + n  # size terms decay like 2^{-rate k}
    if rate <= 0:
        raise ValueError(f"size terms do not decay for sigma={sigma}")
    if k_max is None:
        k_max = max(8, math.ceil(math.log2(max(lam, 2.0)) / d) + 8)
    r = 2.0 ** -rate
    while True:
        k = np.arange(k_max + 1, dtype=float)
        osc, size = _shell_log2_terms(lam, sigma, d, n, k)
        total = float(np.sum(np.exp2(np.minimum(osc, size))))
        tail = 2.0 ** (size[-1] - rate) / (1.0 - r)
        if tail < 1e-15 * total:
            return total
        k_max = int(k_max * 1.5) + 8


def shell_crossover_index(lam: float, sigma, d: int, n: int, k_max: int = 200) -> int:
    """Shell index where the two bounds are closest (``2^k ~ lam^{1/d}``)."""
    k = np.arange(k_max + 1, dtype=float)
    osc, size = _shell_log2_terms(float(lam), float(sigma), d, n, k)
    return int(np.argmin(np.abs(osc - size)))
