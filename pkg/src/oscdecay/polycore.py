"""Sparse homogeneous polynomials in two blocks of variables.

A phase ``S(x, y)`` on R^n x R^n is stored as a map from exponent pairs
``(alpha, beta)`` to exact rational coefficients. Everything needed
downstream (evaluation, mixed Hessian, Hilbert-Schmidt norm of the Hessian,
gradients for the resolution rule) lives here.

Text form, whitespace insignificant, no parentheses::

    expression  := term (('+'|'-') term)*
    term        := coefficient? ('*'? factor)+
    factor      := var ('^' uint)?
    var         := ('x'|'y') uint
    coefficient := decimal | int '/' int
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]
TermKey = tuple[MultiIndex, MultiIndex]


class PolynomialError(ValueError):
    """Base class for malformed polynomial input."""


class PolynomialSyntaxError(PolynomialError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class MixedDegreeError(PolynomialError):
    pass


class DimensionError(PolynomialError):
    pass


class HomogeneousPolynomial:
    """Immutable homogeneous polynomial in ``x = (x1..xn)``, ``y = (y1..yn)``.

    Parameters
    ----------
    n : int
        Block dimension.
    d : int
        Total degree. Every stored term has ``|alpha| + |beta| == d``.
    terms : mapping
        ``{(alpha, beta): coefficient}``. Zero coefficients are dropped,
        coefficients are converted to :class:`fractions.Fraction` when they
        are ints, Fractions or decimal strings, otherwise kept as float.
    """

    __slots__ = ("n", "d", "_terms", "_hash")

    def __init__(self, n: int, d: int, terms: Mapping[TermKey, object] | None = None):
        if n < 1:
            raise DimensionError(f"block dimension must be >= 1, got {n}")
        if d < 0:
            raise PolynomialError(f"degree must be >= 0, got {d}")
        clean: dict[TermKey, Fraction | float] = {}
        for (alpha, beta), coeff in (terms or {}).items():
            alpha, beta = tuple(int(a) for a in alpha), tuple(int(b) for b in beta)
            if len(alpha) != n or len(beta) != n:
                raise DimensionError(f"multi-index length differs from n={n}: {(alpha, beta)}")
            if min(alpha + beta) < 0:
                raise PolynomialError(f"negative exponent in {(alpha, beta)}")
            if sum(alpha) + sum(beta) != d:
                raise MixedDegreeError(
                    f"term {(alpha, beta)} has degree {sum(alpha) + sum(beta)}, expected {d}"
                )
            c = _as_coefficient(coeff)
            if c != 0:
                clean[(alpha, beta)] = c
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "_terms", MappingProxyType(dict(sorted(clean.items()))))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("HomogeneousPolynomial is immutable")

    @property
    def terms(self) -> Mapping[TermKey, Fraction | float]:
        return self._terms

    @classmethod
    def zero(cls, n: int, d: int) -> "HomogeneousPolynomial":
        return cls(n, d, {})

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self._terms.values())

    def support(self) -> list[tuple[int, ...]]:
        """Exponent vectors ``alpha + beta`` as points of Z^{2n}."""
        return [alpha + beta for alpha, beta in self._terms]

    def max_abs_coefficient(self) -> float:
        return max((abs(float(c)) for c in self._terms.values()), default=0.0)

    def coefficient_l1(self) -> float:
        return sum(abs(float(c)) for c in self._terms.values())

    def scaled(self, factor) -> "HomogeneousPolynomial":
        factor = _as_coefficient(factor)
        return HomogeneousPolynomial(self.n, self.d, {k: c * factor for k, c in self._terms.items()})

    def __eq__(self, other):
        if not isinstance(other, HomogeneousPolynomial):
            return NotImplemented
        return (self.n, self.d, dict(self._terms)) == (other.n, other.d, dict(other._terms))

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.n, self.d, tuple(self._terms.items()))))
        return self._hash

    def __repr__(self):
        return f"HomogeneousPolynomial(n={self.n}, d={self.d}, {format_polynomial(self)!r})"

    def __str__(self):
        return format_polynomial(self)

    def __call__(self, x, y):
        return evaluate(self, x, y)

    # --- vectorized evaluation -------------------------------------------

    def factor_tables(self):
        """Split the polynomial as ``S(x, y) = X(x) @ C @ Y(y).T``.

        Returns ``(alphas, betas, C)`` where ``alphas``/``betas`` are the
        distinct x- and y-exponents and ``C`` is the float coefficient matrix.
        """
        alphas = sorted({a for a, _ in self._terms})
        betas = sorted({b for _, b in self._terms})
        ai = {a: i for i, a in enumerate(alphas)}
        bi = {b: j for j, b in enumerate(betas)}
        C = np.zeros((len(alphas), len(betas)))
        for (a, b), c in self._terms.items():
            C[ai[a], bi[b]] = float(c)
        return alphas, betas, C

    def evaluate_pairs(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Evaluate at every pair ``(X[i], Y[j])``; returns shape ``(len(X), len(Y))``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self.is_zero:
            return np.zeros((X.shape[0], Y.shape[0]))
        alphas, betas, C = self.factor_tables()
        return monomial_table(X, alphas) @ C @ monomial_table(Y, betas).T

    def evaluate_points(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Evaluate at matched rows ``(X[k], Y[k])``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.zeros(np.broadcast_shapes(X.shape[:-1], Y.shape[:-1]))
        for (a, b), c in self._terms.items():
            out = out + float(c) * np.prod(X ** np.array(a), axis=-1) * np.prod(Y ** np.array(b), axis=-1)
        return out


def _as_coefficient(value) -> Fraction | float:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    return float(value)


def monomial_table(points: np.ndarray, exponents: Sequence[MultiIndex]) -> np.ndarray:
    """``table[k, m] = prod_i points[k, i] ** exponents[m][i]``."""
    points = np.atleast_2d(points)
    table = np.ones((points.shape[0], len(exponents)))
    for m, e in enumerate(exponents):
        for i, power in enumerate(e):
            if power:
                table[:, m] *= points[:, i] ** power
    return table


# --- parsing and printing ----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+/\d+|\d+\.\d*|\.\d+|\d+)|(?P<var>[xy])(?P<idx>\d+)|(?P<op>[-+*^]))"
)


def _tokenize(text: str):
    pos, tokens = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        while text[pos].isspace():
            pos += 1
        m = _TOKEN.match(text, pos)
        if not m:
            raise PolynomialSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        start = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), start))
        elif m.group("var") is not None:
            tokens.append(("var", (m.group("var"), int(m.group("idx"))), start))
        else:
            tokens.append((m.group("op"), m.group("op"), start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


def parse_polynomial(text: str, n: int) -> HomogeneousPolynomial:
    """Parse a phase expression in variables ``x1..xn, y1..yn``.

    Like terms are combined and zero coefficients dropped. The degree is
    inferred from the monomials and must be uniform and at least 2.

    >>> parse_polynomial("x1*y1", 1).terms
    mappingproxy({((1,), (1,)): Fraction(1, 1)})
    """
    tokens = _tokenize(text)
    i = 0
    terms: dict[TermKey, Fraction] = {}
    degrees: dict[int, int] = {}
    sign = Fraction(1)
    if tokens[0][0] in "+-":
        sign = Fraction(-1) if tokens[0][0] == "-" else Fraction(1)
        i = 1
    while True:
        kind, value, pos = tokens[i]
        coeff = Fraction(1)
        if kind == "num":
            if tokens[i + 1][0] == "^":
                raise PolynomialSyntaxError("exponent without a variable", tokens[i + 1][2], text)
            try:
                coeff = Fraction(value)
            except ZeroDivisionError:
                raise PolynomialSyntaxError("zero denominator", pos, text) from None
            i += 1
        alpha, beta = [0] * n, [0] * n
        nfactors = 0
        while True:
            kind, value, pos = tokens[i]
            if kind == "*":
                if tokens[i + 1][0] != "var":
                    raise PolynomialSyntaxError("expected a variable after '*'", tokens[i + 1][2], text)
                i += 1
                continue
            if kind != "var":
                break
            block, idx = value
            if not 1 <= idx <= n:
                raise DimensionError(f"variable {block}{idx} at position {pos} outside 1..{n}")
            power = 1
            i += 1
            if tokens[i][0] == "^":
                if tokens[i + 1][0] != "num" or not tokens[i + 1][1].isdigit():
                    raise PolynomialSyntaxError("expected an unsigned integer exponent", tokens[i + 1][2], text)
                power = int(tokens[i + 1][1])
                i += 2
            (alpha if block == "x" else beta)[idx - 1] += power
            nfactors += 1
        if nfactors == 0:
            raise PolynomialSyntaxError("expected a variable", tokens[i][2], text)
        key = (tuple(alpha), tuple(beta))
        deg = sum(alpha) + sum(beta)
        degrees.setdefault(deg, pos)
        terms[key] = terms.get(key, Fraction(0)) + sign * coeff
        kind, value, pos = tokens[i]
        if kind == "end":
            break
        if kind not in "+-":
            raise PolynomialSyntaxError(f"unexpected token {value!r}", pos, text)
        sign = Fraction(-1) if kind == "-" else Fraction(1)
        i += 1
    if len(degrees) > 1:
        found = sorted(degrees)
        raise MixedDegreeError(f"monomials of different total degree: {found}")
    d = next(iter(degrees))
    if d < 2:
        raise PolynomialError(f"phase degree must be >= 2, got {d}")
    return HomogeneousPolynomial(n, d, terms)


def _format_coefficient(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def format_polynomial(S: HomogeneousPolynomial) -> str:
    """Canonical text form, parseable by :func:`parse_polynomial`."""
    if S.is_zero:
        return "0"
    parts = []
    for (alpha, beta), c in S.terms.items():
        factors = []
        for block, e in (("x", alpha), ("y", beta)):
            for i, power in enumerate(e):
                if power == 1:
                    factors.append(f"{block}{i + 1}")
                elif power > 1:
                    factors.append(f"{block}{i + 1}^{power}")
        mag = abs(c)
        body = "*".join(factors)
        if mag != 1 or not factors:
            body = _format_coefficient(mag) + ("*" + body if factors else "")
        parts.append(("- " if c < 0 else "+ ") + body)
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


# --- O^d membership ---------------------------------------------------------


@dataclass(frozen=True)
class OdVerdict:
    passed: bool
    offending: tuple[TermKey, ...] = ()

    def __bool__(self):
        return self.passed


def validate_O_d(S: HomogeneousPolynomial) -> OdVerdict:
    """Check that ``S`` has no pure x- or pure y-terms."""
    bad = tuple(k for k in S.terms if sum(k[0]) == 0 or sum(k[1]) == 0)
    return OdVerdict(not bad, bad)


# --- calculus ---------------------------------------------------------------


def derivative(S: HomogeneousPolynomial, block: str, index: int) -> HomogeneousPolynomial:
    """Exact partial derivative in ``x_index`` or ``y_index`` (0-based index)."""
    if block not in ("x", "y"):
        raise ValueError(f"block must be 'x' or 'y', got {block!r}")
    if S.d == 0:
        return S
    pos = 0 if block == "x" else 1
    out: dict[TermKey, object] = {}
    for key, c in S.terms.items():
        e = key[pos]
        if e[index] == 0:
            continue
        lowered = e[:index] + (e[index] - 1,) + e[index + 1:]
        new_key = (lowered, key[1]) if pos == 0 else (key[0], lowered)
        out[new_key] = out.get(new_key, 0) + c * e[index]
    return HomogeneousPolynomial(S.n, S.d - 1, out)


def gradient(S: HomogeneousPolynomial) -> list[HomogeneousPolynomial]:
    """Partials in the order ``x1..xn, y1..yn``."""
    return [derivative(S, "x", i) for i in range(S.n)] + [derivative(S, "y", i) for i in range(S.n)]


@dataclass(frozen=True)
class HessianMatrix:
    """Mixed Hessian: ``entries[i][j] = d^2 S / dx_i dy_j``."""

    entries: tuple[tuple[HomogeneousPolynomial, ...], ...]

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def flat(self) -> list[HomogeneousPolynomial]:
        return [e for row in self.entries for e in row]

    def hs_squared_pairs(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Squared HS norm at every pair ``(X[i], Y[j])``."""
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        out = np.zeros((X.shape[0], Y.shape[0]))
        for entry in self.flat():
            if not entry.is_zero:
                out += entry.evaluate_pairs(X, Y) ** 2
        return out

    def hs_squared_points(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        out = 0.0
        for entry in self.flat():
            if not entry.is_zero:
                out = out + entry.evaluate_points(X, Y) ** 2
        return np.asarray(out, dtype=float)


def mixed_hessian(S: HomogeneousPolynomial) -> HessianMatrix:
    if S.d < 2:
        raise PolynomialError("mixed Hessian needs degree >= 2")
    return HessianMatrix(
        tuple(
            tuple(derivative(derivative(S, "x", i), "y", j) for j in range(S.n))
            for i in range(S.n)
        )
    )


def evaluate(S: HomogeneousPolynomial, x: Sequence[float], y: Sequence[float]) -> float:
    """Plain monomial-sum evaluation at one point."""
    x, y = list(x), list(y)
    if len(x) != S.n or len(y) != S.n:
        raise DimensionError(f"expected vectors of length {S.n}, got {len(x)} and {len(y)}")
    total = 0.0
    for (alpha, beta), c in S.terms.items():
        term = float(c)
        for xi, a in zip(x, alpha):
            term *= xi**a
        for yi, b in zip(y, beta):
            term *= yi**b
        total += term
    return total


def hs_norm_value(H: HessianMatrix, x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != H.n or len(y) != H.n:
        raise DimensionError(f"expected vectors of length {H.n}, got {len(x)} and {len(y)}")
    return math.sqrt(sum(evaluate(e, x, y) ** 2 for e in H.flat()))


def from_terms(n: int, items: Iterable[tuple[MultiIndex, MultiIndex, object]]) -> HomogeneousPolynomial:
    """Build a polynomial from ``(alpha, beta, coeff)`` triples, inferring ``d``."""
    items = list(items)
    if not items:
        raise PolynomialError("cannot infer the degree of an empty term list")
    d = sum(items[0][0]) + sum(items[0][1])
    terms: dict[TermKey, object] = {}
    for a, b, c in items:
        key = (tuple(a), tuple(b))
        terms[key] = terms.get(key, 0) + _as_coefficient(c)
    return HomogeneousPolynomial(n, d, terms)
