"""Discretized oscillatory integral operators and operator-norm estimators.

The operator

    (T f)(x) = integral of exp(i lam S(x, y)) ||S''_xy(x, y)||_HS^z psi(x, y) f(y) dy

is sampled with the midpoint rule on uniform lattices of ``[-R, R]^n``. The
kernel is never stored whole above ``cache_entries`` entries; it is rebuilt
in row blocks on every application. Only nodes inside the cutoff support
take part in the products.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .newton import max_gradient_on_sphere
from .polycore import HomogeneousPolynomial, mixed_hessian, monomial_table

DEFAULT_SEED = 0x5EED
DEFAULT_CACHE_ENTRIES = 1 << 24
BLOCK_ENTRIES = 1 << 21
RESOLUTION_LIMIT = 0.25


class ResolutionWarning(UserWarning):
    """The grid spacing is too coarse for the oscillation frequency."""


class EmptySupportError(ValueError):
    pass


class UnderResolvedError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Midpoint lattice of the cube ``[-radius, radius]^n`` with N points per axis."""

    n: int
    radius: float
    points_per_dim: int

    def __post_init__(self):
        if self.points_per_dim < 2:
            raise ValueError("points_per_dim must be >= 2")
        if self.radius <= 0 or self.n < 1:
            raise ValueError("radius must be positive and n >= 1")

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / self.points_per_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.n

    @property
    def size(self) -> int:
        return self.points_per_dim**self.n

    @cached_property
    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.radius + h * (np.arange(self.points_per_dim) + 0.5)

    @cached_property
    def nodes(self) -> np.ndarray:
        """``(N**n, n)`` array, last coordinate varying fastest."""
        mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class CutoffSpec:
    """Radial cutoff ``psi(x, y) = amplitude * profile(|(x, y)| / rho)``.

    kinds
        ``smooth_bump``: ``exp(1 - 1/(1 - u^2))`` for ``u < 1``.
        ``flat_top``: identically 1 for ``u <= plateau``, C-infinity step down to 0 at ``u = 1``.
        ``cosine_taper``: 1 up to ``plateau``, then a half cosine to 0 at ``u = 1`` (C^1 only).

    ``support_radius=None`` means ``0.9 * grid.radius``.
    """

    kind: str = "smooth_bump"
    support_radius: float | None = None
    plateau: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("smooth_bump", "flat_top", "cosine_taper"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if not 0.0 <= self.plateau < 1.0:
            raise ValueError("plateau must lie in [0, 1)")

    def rho(self, radius: float) -> float:
        rho = 0.9 * radius if self.support_radius is None else float(self.support_radius)
        if not 0 < rho < radius * math.sqrt(2):
            raise ValueError(f"support radius {rho} must lie in (0, radius*sqrt(2))")
        return rho

    def profile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        inside = u < 1.0
        if self.kind == "smooth_bump":
            with np.errstate(divide="ignore", over="ignore"):
                out = np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - u * u, 1.0)), 0.0)
        elif self.kind == "flat_top":
            out = _smooth_step((1.0 - u) / (1.0 - self.plateau))
        else:
            w = np.clip((u - self.plateau) / (1.0 - self.plateau), 0.0, 1.0)
            out = np.where(inside, 0.5 * (1.0 + np.cos(np.pi * w)), 0.0)
        return self.amplitude * out


def gradient_bound(S: HomogeneousPolynomial, rho: float) -> float:
    """Upper estimate of ``max |grad S|`` on the ball of radius ``rho``."""
    return rho ** (S.d - 1) * max_gradient_on_sphere(S)


def required_points(S: HomogeneousPolynomial, lam: float, radius: float, rho: float,
                    G: float | None = None) -> int:
    """Smallest N with ``h * lam * G <= 1/4`` for ``h = 2 radius / N``."""
    if G is None:
        G = gradient_bound(S, rho)
    return max(2, math.ceil(2.0 * radius * lam * G / RESOLUTION_LIMIT - 1e-9))


@dataclass
class NormEstimate:
    value: float
    method: str  # power_iteration_l2 | pnorm_power_method | knapp_lower
    p: float
    iterations: int
    residual: float
    is_lower_bound: bool
    converged: bool = True


class DiscretizedOperator:
    """Midpoint discretization of the (damped) oscillatory operator.

    Kernel entry ``(i, j)`` is ``exp(i lam S(x_i, y_j)) * ||S''(x_i, y_j)||^z
    * psi(x_i, y_j) * h_y^n``. At nodes where the HS norm vanishes the
    damping factor is 0 (for ``sigma > 0`` by continuity, for ``sigma <= 0``
    the node is excluded); ``z = 0`` means no damping at all.
    """

    def __init__(self, S: HomogeneousPolynomial, lam: float, z=(0.0, 0.0),
                 cutoff: CutoffSpec | Callable | None = None,
                 grid_x: GridSpec | None = None, grid_y: GridSpec | None = None,
                 cache_entries: int = DEFAULT_CACHE_ENTRIES, G: float | None = None):
        if grid_x is None or grid_y is None:
            raise ValueError("both grids are required")
        if grid_x.n != S.n or grid_y.n != S.n:
            raise ValueError(f"grid dimension does not match n={S.n}")
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        self.S = S
        self.lam = float(lam)
        z = complex(*z) if isinstance(z, tuple) else complex(z)
        self.sigma, self.t = z.real, z.imag
        self.cutoff = CutoffSpec() if cutoff is None else cutoff
        self.grid_x, self.grid_y = grid_x, grid_y
        self.cache_entries = cache_entries
        self.weight = grid_y.cell_volume

        X, Y = grid_x.nodes, grid_y.nodes
        x2, y2 = np.sum(X * X, axis=1), np.sum(Y * Y, axis=1)
        if isinstance(self.cutoff, CutoffSpec):
            self.rho = self.cutoff.rho(max(grid_x.radius, grid_y.radius))
            rows, cols = np.flatnonzero(x2 < self.rho**2), np.flatnonzero(y2 < self.rho**2)
            if rows.size == 0 or cols.size == 0 or x2[rows].min() + y2[cols].min() >= self.rho**2:
                raise EmptySupportError("cutoff vanishes at every grid node pair")
        else:
            self.rho = math.sqrt(grid_x.radius**2 * S.n + grid_y.radius**2 * S.n)
            rows, cols = np.arange(len(X)), np.arange(len(Y))
        self.rows, self.cols = rows, cols
        self._X, self._Y = X[rows], Y[cols]
        self._x2, self._y2 = x2[rows], y2[cols]

        alphas, betas, C = S.factor_tables()
        self._phase_x = monomial_table(self._X, alphas) @ C
        self._phase_y = monomial_table(self._Y, betas)
        self._hess = []
        if self.damped:
            for entry in mixed_hessian(S).flat():
                if entry.is_zero:
                    continue
                a, b, Ce = entry.factor_tables()
                self._hess.append((monomial_table(self._X, a) @ Ce, monomial_table(self._Y, b)))

        self.G = G
        self.resolved = True
        if self.lam > 0:
            if self.G is None:
                self.G = gradient_bound(S, self.rho)
            h = max(grid_x.spacing, grid_y.spacing)
            if h * self.lam * self.G > RESOLUTION_LIMIT:
                self.resolved = False
                warnings.warn(
                    f"under-resolved oscillation: h*lam*G = {h * self.lam * self.G:.3g} > "
                    f"{RESOLUTION_LIMIT} (lam={self.lam:g}, N={grid_x.points_per_dim})",
                    ResolutionWarning, stacklevel=2)
        self._matrix = None

    @property
    def damped(self) -> bool:
        return self.sigma != 0.0 or self.t != 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid_x.size, self.grid_y.size

    @property
    def out_volume(self) -> float:
        return self.grid_x.cell_volume

    @property
    def in_volume(self) -> float:
        return self.grid_y.cell_volume

    # --- kernel -----------------------------------------------------------

    def _amplitude(self, sl: slice) -> np.ndarray:
        r2 = self._x2[sl, None] + self._y2[None, :]
        if isinstance(self.cutoff, CutoffSpec):
            amp = self.cutoff.profile(np.sqrt(r2) / self.rho)
        else:
            amp = np.asarray(self.cutoff(self._X[sl], self._Y), dtype=float)
        return amp * self.weight

    def _damping(self, sl: slice) -> np.ndarray:
        hs2 = np.zeros((self._X[sl].shape[0], self._Y.shape[0]))
        for hx, hy in self._hess:
            hs2 += (hx[sl] @ hy.T) ** 2
        zero = hs2 == 0.0
        with np.errstate(divide="ignore"):
            log_hs = 0.5 * np.log(np.where(zero, 1.0, hs2))
        damp = np.exp((self.sigma + 1j * self.t) * log_hs)
        damp[zero] = 0.0
        return damp

    def kernel_block(self, sl: slice) -> np.ndarray:
        """Kernel rows ``sl`` restricted to the active nodes (weight included)."""
        phase = self._phase_x[sl] @ self._phase_y.T
        phase *= self.lam
        K = np.empty(phase.shape, dtype=complex)
        K.real = np.cos(phase)
        K.imag = np.sin(phase)
        K *= self._amplitude(sl)
        if self.damped:
            K *= self._damping(sl)
        return K

    def _blocks(self):
        if self._matrix is None and len(self.rows) * len(self.cols) <= self.cache_entries:
            self._matrix = self.kernel_block(slice(None))
        if self._matrix is not None:
            yield slice(None), self._matrix
            return
        step = max(1, BLOCK_ENTRIES // max(1, len(self.cols)))
        for start in range(0, len(self.rows), step):
            sl = slice(start, start + step)
            yield sl, self.kernel_block(sl)

    def dense(self) -> np.ndarray:
        """Full ``(N_x^n, N_y^n)`` kernel matrix; for small operators and tests."""
        out = np.zeros(self.shape, dtype=complex)
        for sl, K in self._blocks():
            out[np.ix_(self.rows[sl], self.cols)] = K
        return out

    def hs_zero_pairs(self) -> int:
        """Node pairs dropped by the vanishing-damping rule."""
        if not self.damped:
            return 0
        count = 0
        step = max(1, BLOCK_ENTRIES // max(1, len(self.cols)))
        for start in range(0, len(self.rows), step):
            sl = slice(start, start + step)
            hs2 = sum((hx[sl] @ hy.T) ** 2 for hx, hy in self._hess)
            count += int(np.count_nonzero(np.asarray(hs2) == 0.0))
        return count

    # --- application --------------------------------------------------------

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != (self.shape[1],):
            raise ValueError(f"expected a vector of length {self.shape[1]}, got shape {f.shape}")
        fa = f[self.cols]
        out_active = np.empty(len(self.rows), dtype=complex)
        for sl, K in self._blocks():
            out_active[sl] = K @ fa
        out = np.zeros(self.shape[0], dtype=complex)
        out[self.rows] = out_active
        return out

    def apply_adjoint(self, g: np.ndarray) -> np.ndarray:
        """Conjugate-transpose application of the kernel matrix."""
        g = np.asarray(g)
        if g.shape != (self.shape[0],):
            raise ValueError(f"expected a vector of length {self.shape[0]}, got shape {g.shape}")
        ga = g[self.rows]
        acc = np.zeros(len(self.cols), dtype=complex)
        for sl, K in self._blocks():
            acc += K.conj().T @ ga[sl]
        out = np.zeros(self.shape[1], dtype=complex)
        out[self.cols] = acc
        return out

    def apply_normal(self, f: np.ndarray) -> tuple[np.ndarray, float]:
        """``(K^H K f, ||K f||^2)`` in a single pass over the kernel."""
        fa = np.asarray(f)[self.cols]
        acc = np.zeros(len(self.cols), dtype=complex)
        sq = 0.0
        for sl, K in self._blocks():
            t = K @ fa
            sq += float(np.vdot(t, t).real)
            acc += K.conj().T @ t
        out = np.zeros(self.shape[1], dtype=complex)
        out[self.cols] = acc
        return out, sq

    def adjoint(self) -> "AdjointOperator":
        """Discretization of the L^2 adjoint ``T*`` (weights on the x grid)."""
        return AdjointOperator(self)


class AdjointOperator:
    def __init__(self, parent: DiscretizedOperator):
        self.parent = parent
        self._scale = parent.out_volume / parent.in_volume

    @property
    def shape(self):
        return self.parent.shape[::-1]

    @property
    def out_volume(self):
        return self.parent.in_volume

    @property
    def in_volume(self):
        return self.parent.out_volume

    def apply(self, g):
        return self._scale * self.parent.apply_adjoint(g)

    def apply_adjoint(self, f):
        return self._scale * self.parent.apply(f)

    def adjoint(self):
        return self.parent


def build_operator(S: HomogeneousPolynomial, lam: float, z=(0.0, 0.0), cutoff=None,
                   grid_x: GridSpec | None = None, grid_y: GridSpec | None = None,
                   **kwargs) -> DiscretizedOperator:
    """Discretize ``T_lam^z``; ``grid_y`` defaults to ``grid_x``."""
    return DiscretizedOperator(S, lam, z, cutoff, grid_x, grid_x if grid_y is None else grid_y, **kwargs)


# --- norm estimation -----------------------------------------------------------


def _random_start(size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size) + 1j * rng.uniform(-1.0, 1.0, size)


def l2_norm(T, tol: float = 1e-10, max_iter: int = 1000, seed: int = DEFAULT_SEED) -> NormEstimate:
    """Largest singular value of the discretized L^2 -> L^2 operator.

    Power iteration on ``T^H T`` from a seeded random start; converged when
    successive Rayleigh estimates differ by less than ``tol`` relative.
    """
    rng = np.random.default_rng(seed)
    scale2 = T.out_volume / T.in_volume
    v = _random_start(T.shape[1], rng)
    v /= np.linalg.norm(v)
    prev, est, residual = None, 0.0, math.inf
    normal = getattr(T, "apply_normal", None)
    for it in range(1, max_iter + 1):
        if normal is not None:
            w, sq = normal(v)
        else:
            t = T.apply(v)
            sq = float(np.vdot(t, t).real)
            w = T.apply_adjoint(t)
        est = math.sqrt(sq * scale2)
        wn = np.linalg.norm(w)
        if wn == 0.0 or est == 0.0:
            return NormEstimate(0.0, "power_iteration_l2", 2.0, it, 0.0, False, True)
        if prev is not None:
            residual = abs(est - prev) / est
            if residual < tol:
                return NormEstimate(est, "power_iteration_l2", 2.0, it, residual, False, True)
        prev = est
        v = w / wn
    return NormEstimate(est, "power_iteration_l2", 2.0, max_iter, residual, False, False)


def _dual_vector(y: np.ndarray, p: float) -> np.ndarray:
    """Unit ``l^{p'}`` vector attaining ``<y, .> = ||y||_p``."""
    a = np.abs(y)
    m = a.max()
    if m == 0.0:
        return np.zeros_like(y)
    u = a / m
    phase = np.where(a > 0, y / np.where(a > 0, a, 1.0), 0.0)
    q = p / (p - 1.0)
    return u ** (p - 1.0) * phase / np.sum(u**p) ** (1.0 / q)


def _lp(v: np.ndarray, p: float) -> float:
    a = np.abs(v)
    m = a.max()
    return 0.0 if m == 0.0 else float(m * np.sum((a / m) ** p) ** (1.0 / p))


def lp_norm_lower(T, p: float, restarts: int = 4, tol: float = 1e-10, seed: int = DEFAULT_SEED,
                  max_iter: int = 1000, starts: Sequence[np.ndarray] = ()) -> NormEstimate:
    """Lower bound for the discretized L^p -> L^p norm (p-norm power method).

    Iterates ``y = M x``, ``z = M^H dual_p(y)``, ``x = dual_{p'}(z)`` on the
    quadrature-scaled matrix ``M``; the estimates ``||M x||_p`` never decrease.
    The best value over the given ``starts`` and ``restarts`` seeded random
    starts is returned, always flagged as a lower bound.
    """
    p = float(p)
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    q = p / (p - 1.0)
    scale = T.out_volume ** (1.0 / p) * T.in_volume ** (-1.0 / p)
    rng = np.random.default_rng(seed)
    inits = [np.asarray(s, dtype=complex) for s in starts]
    inits += [_random_start(T.shape[1], rng) for _ in range(restarts)]
    best = NormEstimate(0.0, "pnorm_power_method", p, 0, math.inf, True, False)
    total = 0
    for x in inits:
        nx = _lp(x, p)
        if nx == 0.0:
            continue
        x = x / nx
        prev, converged, residual = None, False, math.inf
        est = 0.0
        for it in range(1, max_iter + 1):
            total += 1
            y = scale * T.apply(x)
            est = _lp(y, p)
            if est > best.value:
                best.value = est
            if est == 0.0:
                converged = True
                break
            if prev is not None:
                residual = abs(est - prev) / est
                if residual < tol:
                    converged = True
                    break
            prev = est
            z = scale * T.apply_adjoint(_dual_vector(y, p))
            if _lp(z, q) <= np.vdot(z, x).real * (1.0 + tol):
                converged, residual = True, 0.0
                break
            x = _dual_vector(z, q)
        if est >= best.value * (1 - 1e-15):
            best.converged, best.residual = converged, residual
    best.iterations = total
    return best


def knapp_radius(S: HomogeneousPolynomial, lam: float) -> float:
    """Radius ``c lam^{-1/d}`` with ``c = 1 / (2 (d ||S||_coeff)^{1/d})``."""
    c = 1.0 / (2.0 * (S.d * S.coefficient_l1()) ** (1.0 / S.d))
    return c * lam ** (-1.0 / S.d)


def knapp_test_function(S: HomogeneousPolynomial, lam: float, grid: GridSpec) -> np.ndarray:
    r = knapp_radius(S, lam)
    f = (np.linalg.norm(grid.nodes, axis=1) <= r).astype(complex)
    inside = int(f.real.sum())
    if inside < 3:
        raise UnderResolvedError(
            f"Knapp ball of radius {r:.3g} holds {inside} grid nodes; refine the grid (need >= 3)")
    return f


def knapp_ratio(T: DiscretizedOperator, f: np.ndarray, p: float) -> float:
    """``||T f||_p / ||f||_p`` in quadrature-weighted norms."""
    tf = T.apply(f)
    num = _lp(tf, p) * T.out_volume ** (1.0 / p)
    den = _lp(f, p) * T.in_volume ** (1.0 / p)
    return num / den


def knapp_lower_bound(S: HomogeneousPolynomial, lam: float, p: float, cutoff=None,
                      grid: GridSpec | None = None, **kwargs) -> NormEstimate:
    """Lower bound from the indicator of a ball on which ``lam S`` barely moves."""
    if lam < 1:
        raise ValueError("Knapp bound needs lambda >= 1")
    f = knapp_test_function(S, lam, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        T = build_operator(S, lam, 0.0, cutoff, grid, grid, **kwargs)
    return NormEstimate(knapp_ratio(T, f, p), "knapp_lower", float(p), 0, 0.0, True, True)
