"""Newton distance of a phase and sampled checks of the Hessian hypotheses.

The diagonal coordinate ``t*`` of the reduced Newton polyhedron is the value
of a tiny linear program::

    minimize t   subject to   sum(mu) = 1,  mu >= 0,  (sum_i mu_i P_i)_j <= t

over the support points ``P_i``; the Newton distance is ``1 / t*``. Supports
are small, so the LP is solved exactly over the rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .polycore import HessianMatrix, HomogeneousPolynomial, gradient, mixed_hessian

EXACT_LP_MAX_POINTS = 64
LATTICE_SEED = 0x5EED
POSITIVITY_RTOL = 1e-10


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class NewtonAnalysis:
    support: tuple[tuple[int, ...], ...]
    t_star: Fraction | float
    newton_distance: Fraction | float
    weights: tuple  # optimal convex weights mu, one per support point
    exact: bool

    @property
    def diagonal_point(self) -> tuple:
        dim = len(self.support[0])
        return (self.t_star,) * dim

    def combination(self) -> tuple:
        """The optimal convex combination ``sum mu_i P_i``."""
        dim = len(self.support[0])
        return tuple(sum(w * p[j] for w, p in zip(self.weights, self.support)) for j in range(dim))


# --- exact simplex ------------------------------------------------------------


def _pivot(T, basis, row, col):
    pv = T[row][col]
    T[row] = [v / pv for v in T[row]]
    for i, r in enumerate(T):
        if i != row and r[col] != 0:
            f = r[col]
            T[i] = [a - f * b for a, b in zip(r, T[row])]
    basis[row] = col


def _run_simplex(T, basis, cost, allowed):
    """Bland's-rule simplex on a tableau whose last column is the rhs."""
    while True:
        entering = None
        for j in allowed:
            if j in basis:
                continue
            reduced = cost[j] - sum(cost[basis[i]] * T[i][j] for i in range(len(T)))
            if reduced < 0:
                entering = j
                break
        if entering is None:
            return
        best = None
        for i, r in enumerate(T):
            if r[entering] > 0:
                ratio = r[-1] / r[entering]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise ArithmeticError("unbounded linear program")
        _pivot(T, basis, best[1], entering)


def exact_simplex(c: Sequence[Fraction], A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]):
    """Minimize ``c.x`` subject to ``A x = b, x >= 0`` in exact arithmetic.

    Two-phase dense tableau method with Bland's anti-cycling rule.
    Returns ``(value, x)``.
    """
    rows, ncols = len(A), len(c)
    T = []
    for i in range(rows):
        sign = -1 if b[i] < 0 else 1
        art = [Fraction(0)] * rows
        art[i] = Fraction(1)
        T.append([Fraction(sign * v) for v in A[i]] + art + [Fraction(sign * b[i])])
    basis = [ncols + i for i in range(rows)]
    phase1 = [Fraction(0)] * ncols + [Fraction(1)] * rows
    _run_simplex(T, basis, phase1, range(ncols + rows))
    if sum(T[i][-1] for i in range(rows) if basis[i] >= ncols) != 0:
        raise ArithmeticError("infeasible linear program")
    for i in range(rows - 1, -1, -1):
        if basis[i] >= ncols:
            col = next((j for j in range(ncols) if T[i][j] != 0), None)
            if col is None:
                del T[i], basis[i]
            else:
                _pivot(T, basis, i, col)
    cost = list(c) + [Fraction(0)] * rows
    _run_simplex(T, basis, cost, range(ncols))
    x = [Fraction(0)] * ncols
    for i, j in enumerate(basis):
        x[j] = T[i][-1]
    return sum(ci * xi for ci, xi in zip(c, x)), x


def newton_distance(support: Sequence[Sequence[int]], exact: bool | None = None) -> NewtonAnalysis:
    """Diagonal coordinate ``t*`` of the reduced Newton polyhedron and ``1/t*``.

    Parameters
    ----------
    support : sequence of integer points
        Exponent vectors ``(alpha, beta)`` of the nonzero monomials.
    exact : bool, optional
        Force the exact rational or the floating path. By default supports
        of at most 64 points are solved exactly.
    """
    pts = [tuple(int(v) for v in p) for p in support]
    if not pts:
        raise SupportError("empty support")
    dim = len(pts[0])
    if any(len(p) != dim for p in pts):
        raise SupportError("support points have different dimensions")
    if any(v < 0 for p in pts for v in p):
        raise SupportError("support points must have non-negative coordinates")
    if any(sum(p) == 0 for p in pts):
        raise SupportError("degenerate support: contains the origin")
    m = len(pts)
    if exact is None:
        exact = m <= EXACT_LP_MAX_POINTS

    # variables: mu_1..mu_m, t, slack_1..slack_dim
    if exact:
        zero, one = Fraction(0), Fraction(1)
        A = []
        for j in range(dim):
            row = [Fraction(p[j]) for p in pts] + [-one] + [zero] * dim
            row[m + 1 + j] = one
            A.append(row)
        A.append([one] * m + [zero] * (1 + dim))
        b = [zero] * dim + [one]
        c = [zero] * m + [one] + [zero] * dim
        t_star, x = exact_simplex(c, A, b)
        weights = tuple(x[:m])
        return NewtonAnalysis(tuple(pts), t_star, 1 / t_star, weights, True)

    P = np.asarray(pts, dtype=float)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_ub = np.hstack([P.T, -np.ones((dim, 1))])
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res = optimize.linprog(
        c, A_ub=A_ub, b_ub=np.zeros(dim), A_eq=A_eq, b_eq=[1.0],
        bounds=[(0, None)] * (m + 1), method="highs",
        options={"primal_feasibility_tolerance": 1e-9},
    )
    if not res.success:
        raise ArithmeticError(f"linear program failed: {res.message}")
    t_star = float(res.x[-1])
    return NewtonAnalysis(tuple(pts), t_star, 1.0 / t_star, tuple(res.x[:m]), False)


def analyze_newton(S: HomogeneousPolynomial, exact: bool | None = None) -> NewtonAnalysis:
    return newton_distance(S.support(), exact=exact)


# --- sphere sampling ----------------------------------------------------------


def sphere_lattice(dim: int, samples_per_dim: int, max_samples: int = 1 << 18) -> np.ndarray:
    """Deterministic quasi-uniform points on the unit sphere in R^dim.

    The circle gets equally spaced angles. Higher spheres use a scrambled
    Sobol sequence (fixed seed) pushed through the Gaussian quantile and
    normalized. Coordinate axes and the ``(+-e_i +- e_j)/sqrt(2)`` points are
    always included since degenerate Hessians tend to vanish there.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        m = max(4, 4 * math.ceil(samples_per_dim / 4))
        theta = 2 * np.pi * np.arange(m) / m
        bulk = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        total = min(max_samples, samples_per_dim ** (dim - 1))
        sob = qmc.Sobol(d=dim, scramble=True, seed=LATTICE_SEED)
        u = sob.random(1 << max(1, math.ceil(math.log2(total))))
        g = _normal.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        bulk = g / np.linalg.norm(g, axis=1, keepdims=True)
    eye = np.eye(dim)
    special = [eye, -eye]
    for i in range(dim):
        for j in range(i + 1, dim):
            for si in (1, -1):
                for sj in (1, -1):
                    special.append(((si * eye[i] + sj * eye[j]) / math.sqrt(2))[None, :])
    return np.vstack([bulk] + special)


def _hs_on_points(H: HessianMatrix, V: np.ndarray) -> np.ndarray:
    n = H.n
    return np.sqrt(np.maximum(H.hs_squared_points(V[:, :n], V[:, n:]), 0.0))


def _polish_minimum(H: HessianMatrix, start: np.ndarray) -> np.ndarray:
    """Gauss-Newton descent of the Hessian entries on the sphere."""
    n = H.n
    entries = [e for e in H.flat() if not e.is_zero]

    def residual(v):
        u = v / np.linalg.norm(v)
        return np.array([e.evaluate_points(u[None, :n], u[None, n:])[0] for e in entries])

    try:
        res = optimize.least_squares(residual, start, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
        v = res.x
    except (ValueError, np.linalg.LinAlgError):
        v = start
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class RankOneReport:
    samples: int
    min_hs: float
    verdict: str  # "pass" | "fail"
    worst_point: tuple[float, ...]
    threshold: float

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def rank_one_check(S: HomogeneousPolynomial, samples_per_dim: int = 64, polish: int = 8) -> RankOneReport:
    """Sampled test that the mixed Hessian never vanishes off the origin.

    The HS norm is evaluated on :func:`sphere_lattice` and the lowest
    ``polish`` samples are refined by local least squares. By homogeneity
    positivity on the sphere is positivity on R^{2n} minus the origin.
    """
    H = mixed_hessian(S)
    V = sphere_lattice(2 * S.n, samples_per_dim)
    values = _hs_on_points(H, V)
    order = np.argsort(values)[:polish]
    best_val, best_pt = float(values[order[0]]), V[order[0]]
    if best_val > 0:
        for k in order:
            u = _polish_minimum(H, V[k])
            val = float(_hs_on_points(H, u[None, :])[0])
            if val < best_val:
                best_val, best_pt = val, u
    threshold = POSITIVITY_RTOL * S.max_abs_coefficient()
    verdict = "pass" if best_val > threshold else "fail"
    return RankOneReport(len(V) + (polish if values.min() > 0 else 0), best_val, verdict,
                         tuple(float(v) for v in best_pt), threshold)


# --- norm hypothesis --------------------------------------------------------


@dataclass(frozen=True)
class NormHypothesisReport:
    verdict: str  # "sampled-pass" | "fail"
    reason: str = ""
    witness: tuple = ()
    pairs_tested: int = 0
    worst_ratio: float = math.inf  # min over pairs of (N(u)+N(v)) / N(u+v)
    notes: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return self.verdict == "sampled-pass"


def _floats(v) -> tuple[float, ...]:
    return tuple(float(c) for c in v)


def hs_root_function(S: HomogeneousPolynomial):
    """``N(v) = ||S''_xy(v)||_HS ** (1/(d-2))`` on stacked ``v = (x, y)`` rows."""
    H = mixed_hessian(S)
    n = S.n
    power = 1.0 / (S.d - 2) if S.d > 2 else 1.0

    def N(V):
        V = np.atleast_2d(V)
        return np.sqrt(np.maximum(H.hs_squared_points(V[:, :n], V[:, n:]), 0.0)) ** power

    return N


def norm_hypothesis_check(
    S: HomogeneousPolynomial, triple_samples: int = 20000, samples_per_dim: int = 64,
    tol: float = 1e-9, seed: int = LATTICE_SEED,
) -> NormHypothesisReport:
    """Sampled test that ``||S''_xy||_HS^(1/(d-2))`` is a norm on R^n x R^n.

    Checks positivity on the sphere, absolute homogeneity at a few points
    and the triangle inequality on random pairs (worst pairs are locally
    refined). A pass is never a certificate.
    """
    notes = []
    rank = rank_one_check(S, samples_per_dim)
    if not rank.passed:
        return NormHypothesisReport("fail", "positivity", (rank.worst_point,), 0, 0.0)
    N = hs_root_function(S)
    dim = 2 * S.n
    rng = np.random.default_rng(seed)
    if S.d == 2:
        notes.append("degree 2: Hessian is constant, exponent 1/(d-2) undefined; "
                     "homogeneity skipped, N taken as the HS norm")
    else:
        V = rng.standard_normal((16, dim))
        for s in (-2.5, 0.5, 3.0):
            lhs, rhs = N(s * V), abs(s) * N(V)
            if np.any(np.abs(lhs - rhs) > 1e-9 * np.abs(rhs)):
                k = int(np.argmax(np.abs(lhs - rhs)))
                return NormHypothesisReport("fail", "homogeneity", (_floats(V[k]), s), 0, 0.0)

    U = rng.standard_normal((triple_samples, dim))
    W = rng.standard_normal((triple_samples, dim))
    nu, nw, nuw = N(U), N(W), N(U + W)
    ratio = (nu + nw) / np.maximum(nuw, 1e-300)
    order = np.argsort(ratio)[:5]
    worst, witness = float(ratio[order[0]]), (_floats(U[order[0]]), _floats(W[order[0]]))

    def objective(z):
        a, b = z[:dim], z[dim:]
        top = N(a + b)[0]
        return (N(a)[0] + N(b)[0]) / top if top > 0 else math.inf

    for k in order:
        res = optimize.minimize(objective, np.concatenate([U[k], W[k]]), method="Nelder-Mead",
                                options={"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-13})
        if res.fun < worst:
            worst, witness = float(res.fun), (_floats(res.x[:dim]), _floats(res.x[dim:]))
    if worst < 1.0 - tol:
        return NormHypothesisReport("fail", "triangle inequality", witness, triple_samples, worst, tuple(notes))
    return NormHypothesisReport("sampled-pass", "", (), triple_samples, worst, tuple(notes))


def max_gradient_on_sphere(S: HomogeneousPolynomial, samples_per_dim: int = 64) -> float:
    """Approximate ``max |grad S|`` over the unit sphere of R^{2n}.

    Lattice maximum, refined locally and padded by 1% against missed peaks.
    """
    grads = gradient(S)
    n = S.n

    def gnorm(V):
        V = np.atleast_2d(V)
        return np.sqrt(sum(g.evaluate_points(V[:, :n], V[:, n:]) ** 2 for g in grads if not g.is_zero))

    V = sphere_lattice(2 * n, samples_per_dim)
    vals = np.asarray(gnorm(V), dtype=float)
    best = float(vals.max()) if vals.size else 0.0
    for k in np.argsort(vals)[-4:]:
        res = optimize.minimize(lambda v: -gnorm(v / np.linalg.norm(v))[0], V[k], method="Nelder-Mead",
                                options={"maxiter": 600, "xatol": 1e-8, "fatol": 1e-12})
        best = max(best, -float(res.fun))
    return 1.01 * best
