"""Sweeps of estimated operator norms over lambda and power-law fits.

A sweep evaluates the discretized operator norm on a ladder of frequencies,
refining the grid with lambda so that ``h * lambda * G`` stays bounded. The
fit is an ordinary least-squares line through ``log norm`` against
``log lambda``; when the prediction carries a logarithmic factor
``(log lambda)^q`` that factor is removed before the regression.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .numop import (
    DEFAULT_SEED,
    CutoffSpec,
    GridSpec,
    ResolutionWarning,
    build_operator,
    gradient_bound,
    l2_norm,
    lp_norm_lower,
    required_points,
)
from .polycore import HomogeneousPolynomial, format_polynomial, parse_polynomial

CSV_HEADER = ("lambda", "norm", "method", "grid_N", "resolved")
DEFAULT_CUTOFF = CutoffSpec("flat_top", plateau=0.7)
MIN_FIT_POINTS = 4


class InsufficientDataError(ValueError):
    """Fewer than four resolved, distinct lambda values."""


@dataclass(frozen=True)
class DecaySample:
    lam: float
    norm: float
    method: str
    grid_N: int
    resolved: bool


@dataclass(frozen=True)
class GridPolicy:
    """Maps lambda to points per axis on ``[-radius, radius]^n``.

    The target is the smallest N with ``h * lambda * G <= 1/4``, times
    ``oversample``, raised to ``min_N`` and capped so that ``N^n`` stays within
    ``max_nodes`` nodes per side (and N within ``max_N`` when given). A capped
    grid violates the resolution rule and its sample is flagged unresolved.
    """

    radius: float = 1.0
    min_N: int = 16
    max_nodes: int = 200_000
    max_N: int | None = None
    oversample: float = 1.0

    def points(self, S: HomogeneousPolynomial, lam: float, G: float) -> int:
        target = math.ceil(self.oversample * required_points(S, lam, self.radius, 0.0, G=G))
        cap = int(math.floor(self.max_nodes ** (1.0 / S.n) + 1e-9))
        if self.max_N is not None:
            cap = min(cap, self.max_N)
        return int(min(cap, max(self.min_N, target)))


@dataclass
class DecayFitResult:
    """Least-squares fit of ``log norm`` on ``log lambda``.

    ``log_model_slope`` fits ``log norm - q log log lambda`` with ``q`` fixed
    from the attached prediction; it equals ``slope`` when ``q = 0``.
    ``deviation`` is measured with the slope that ``compare`` would use.
    """

    samples: tuple[DecaySample, ...]
    slope: float
    intercept: float
    r_squared: float
    log_model_slope: float
    log_exponent: float
    predicted_exponent: float | None
    deviation: float | None
    stderr: float

    @property
    def effective_slope(self) -> float:
        return self.log_model_slope if self.log_exponent else self.slope


@dataclass(frozen=True)
class Comparison:
    passed: bool
    fitted_slope: float
    predicted_exponent: float
    deviation: float
    tolerance: float
    regime: str
    used_log_model: bool


def default_tolerance(n: int) -> float:
    return 0.05 if n == 1 else 0.10


def _estimate_one(args) -> DecaySample:
    text, n, lam, p, z, cutoff, policy, G, seed, restarts = args
    S = parse_polynomial(text, n)
    N = policy.points(S, lam, G)
    grid = GridSpec(n, policy.radius, N)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ResolutionWarning)
            T = build_operator(S, lam, z, cutoff, grid, grid, G=G)
        if p == 2:
            est = l2_norm(T, tol=1e-9, seed=seed)
        else:
            est = lp_norm_lower(T, p, restarts=restarts, tol=1e-8, seed=seed)
    except (ValueError, MemoryError) as exc:
        warnings.warn(f"lambda={lam:g}: estimate failed ({exc})", RuntimeWarning, stacklevel=2)
        return DecaySample(float(lam), 0.0, "failed", N, False)
    return DecaySample(float(lam), est.value, est.method, N, T.resolved)


def sweep(S: HomogeneousPolynomial, lambdas: Iterable[float], p: float = 2.0, z=(0.0, 0.0),
          cutoff: CutoffSpec = DEFAULT_CUTOFF, policy: GridPolicy = GridPolicy(),
          seed: int = DEFAULT_SEED, jobs: int = 1, restarts: int = 2) -> list[DecaySample]:
    """Norm estimates on a strictly increasing ladder of lambda values.

    ``p = 2`` uses power iteration; other ``p`` use the p-norm power method,
    which yields lower bounds. Samples whose grid was capped by the policy
    are flagged ``resolved=False``; a failing estimate yields a sample with
    method ``failed`` and the sweep carries on.
    """
    lambdas = [float(v) for v in lambdas]
    if not lambdas:
        raise ValueError("empty lambda ladder")
    if any(v <= 0 for v in lambdas) or any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda ladder must be positive and strictly increasing")
    rho = cutoff.rho(policy.radius)
    G = gradient_bound(S, rho)
    text = format_polynomial(S)
    tasks = [(text, S.n, lam, float(p), z, cutoff, policy, G, seed, restarts) for lam in lambdas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(_estimate_one, tasks))
    else:
        samples = [_estimate_one(t) for t in tasks]
    for s in samples:
        if not s.resolved and s.method != "failed":
            warnings.warn(f"lambda={s.lam:g}: grid N={s.grid_N} violates the resolution rule",
                          ResolutionWarning, stacklevel=2)
    return samples


def octave_ladder(lo: int, hi: int, step: float = 1.0) -> list[float]:
    """``2^lo, 2^(lo+step), ..., 2^hi``."""
    count = int(round((hi - lo) / step))
    return [2.0 ** (lo + i * step) for i in range(count + 1)]


def _ols(x: np.ndarray, y: np.ndarray):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    dof = len(x) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 and sxx > 0 else math.inf
    return float(coef[0]), float(coef[1]), min(1.0, max(0.0, r2)), stderr


def _prediction_terms(prediction) -> tuple[float, float]:
    if prediction is None:
        return 0.0, math.nan
    return float(prediction.log_exponent), float(prediction.exponent)


def fit_power_law(samples: Sequence[DecaySample], prediction=None) -> DecayFitResult:
    """Ordinary least squares of ``log norm`` on ``log lambda``.

    Uses resolved samples only and needs at least four distinct lambda values.
    If ``prediction`` (a ``DecayPrediction`` or ``DampedDecayPrediction``)
    carries a log factor of power ``q``, the log-model slope is also fitted.
    Samples are sorted first so the result does not depend on their order.
    """
    use = sorted((s for s in samples if s.resolved), key=lambda s: (s.lam, s.norm))
    lams = np.array([s.lam for s in use], dtype=float)
    distinct = len(np.unique(lams))
    if distinct < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"need >= {MIN_FIT_POINTS} distinct resolved lambda values, got {distinct}")
    norms = np.array([s.norm for s in use], dtype=float)
    if np.any(norms <= 0):
        raise ValueError("cannot fit a sample with zero norm")
    q, predicted = _prediction_terms(prediction)
    x, y = np.log(lams), np.log(norms)
    slope, intercept, r2, stderr = _ols(x, y)
    log_slope = slope
    if q:
        if np.any(lams <= 1.0):
            raise ValueError("log-model fit needs lambda > 1")
        log_slope = _ols(x, y - q * np.log(x))[0]
    deviation = None
    if prediction is not None:
        deviation = abs((log_slope if q else slope) + predicted)
    return DecayFitResult(tuple(use), slope, intercept, r2, log_slope, q,
                          None if prediction is None else predicted, deviation, stderr)


def compare(fit: DecayFitResult, prediction, tol: float) -> Comparison:
    """Pass iff ``|slope + exponent| <= tol``, using the log-model slope when
    the prediction has a log factor."""
    q = float(prediction.log_exponent)
    if q and fit.log_exponent != q:
        slope = fit_power_law(fit.samples, prediction).log_model_slope
    else:
        slope = fit.log_model_slope if q else fit.slope
    dev = abs(slope + float(prediction.exponent))
    return Comparison(dev <= tol, slope, float(prediction.exponent), dev, float(tol),
                      prediction.regime, bool(q))


def write_csv_stream(fh, samples: Sequence[DecaySample]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in samples:
        w.writerow([repr(s.lam), repr(s.norm), s.method, s.grid_N, str(s.resolved).lower()])


def write_csv(path, samples: Sequence[DecaySample]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_csv_stream(fh, samples)


def read_csv(path) -> list[DecaySample]:
    """Parse a sweep CSV; raises ``ValueError`` on a malformed header or row."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != CSV_HEADER:
        raise ValueError(f"expected header {','.join(CSV_HEADER)}")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"line {i}: expected {len(CSV_HEADER)} fields")
        resolved = row[4].strip().lower()
        if resolved not in ("true", "false"):
            raise ValueError(f"line {i}: resolved must be true or false")
        out.append(DecaySample(float(row[0]), float(row[1]), row[2].strip(), int(row[3]),
                               resolved == "true"))
    return out


def sample_dict(s: DecaySample) -> dict:
    return asdict(s)
