from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscdecay.polycore import (
    DimensionError,
    HomogeneousPolynomial,
    MixedDegreeError,
    PolynomialError,
    PolynomialSyntaxError,
    derivative,
    evaluate,
    format_polynomial,
    from_terms,
    hs_norm_value,
    mixed_hessian,
    parse_polynomial,
    validate_O_d,
)


def compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


@st.composite
def polynomials(draw, n=None, d=None, mixed_only=False):
    n = draw(st.integers(1, 2)) if n is None else n
    d = draw(st.integers(2, 6)) if d is None else d
    keys = []
    for k in range(d + 1):
        for a in compositions(k, n):
            for b in compositions(d - k, n):
                if mixed_only and (k == 0 or k == d):
                    continue
                keys.append((a, b))
    chosen = draw(st.lists(st.sampled_from(keys), min_size=1, max_size=5, unique=True))
    coeffs = draw(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=7)
                           .filter(lambda c: c != 0), min_size=len(chosen), max_size=len(chosen)))
    return HomogeneousPolynomial(n, d, dict(zip(chosen, coeffs)))


# --- parsing --------------------------------------------------------------------


def test_parse_identity_monomial():
    S = parse_polynomial("x1*y1", 1)
    assert S.d == 2
    assert dict(S.terms) == {((1,), (1,)): Fraction(1)}


def test_parse_coupled_example(coupled):
    assert coupled.n == 2 and coupled.d == 6
    assert len(coupled.terms) == 8
    assert set(coupled.terms.values()) == {Fraction(1, 5)}


def test_mixed_degree_error():
    with pytest.raises(MixedDegreeError):
        parse_polynomial("x1^3*y1 + x1*y1^2", 1)


def test_dimension_error():
    with pytest.raises(DimensionError):
        parse_polynomial("x1*y3", 2)


@pytest.mark.parametrize("text, pos", [("x1*y1 + $", 8), ("x1 ** y1", 4), ("2^3*x1*y1", 1), ("1/0*x1*y1", 0)])
def test_syntax_error_reports_position(text, pos):
    with pytest.raises(PolynomialSyntaxError) as info:
        parse_polynomial(text, 1)
    assert info.value.position == pos


def test_degree_below_two_rejected():
    with pytest.raises(PolynomialError):
        parse_polynomial("x1 + y1", 1)


def test_like_terms_combine_and_cancel():
    S = parse_polynomial("x1*y1 + 2 x1 y1 - 3*x1*y1 + x1^2*y1^0", 1)
    assert dict(S.terms) == {((2,), (0,)): Fraction(1)}


def test_decimal_coefficients_are_exact():
    S = parse_polynomial("0.5*x1*y1", 1)
    assert S.terms[((1,), (1,))] == Fraction(1, 2)


@settings(max_examples=60, deadline=None)
@given(polynomials())
def test_print_parse_round_trip(S):
    again = parse_polynomial(format_polynomial(S), S.n)
    assert dict(again.terms) == dict(S.terms)


# --- O^d ---------------------------------------------------------------------


def test_O_d_examples(coupled):
    assert validate_O_d(coupled)
    bad = validate_O_d(parse_polynomial("x1^6", 1))
    assert not bad and bad.offending == (((6,), (0,)),)
    bad = validate_O_d(parse_polynomial("x1^5*y1 + y1^6", 1))
    assert bad.offending == (((0,), (6,)),)


@settings(max_examples=60, deadline=None)
@given(polynomials())
def test_O_d_matches_brute_force(S):
    expected = all(min(sum(a), sum(b)) >= 1 for a, b in S.terms)
    assert bool(validate_O_d(S)) == expected


# --- evaluation and calculus ---------------------------------------------------


def test_evaluate_examples(coupled):
    assert evaluate(parse_polynomial("x1*y1", 1), [2], [3]) == 6
    assert evaluate(coupled, [1, 0], [1, 0]) == pytest.approx(0.4, rel=1e-15)
    with pytest.raises(DimensionError):
        evaluate(coupled, [1], [1, 0])


@settings(max_examples=40, deadline=None)
@given(polynomials(), st.sampled_from([0.5, 2.0, 7.0]))
def test_homogeneity(S, s):
    rng = np.random.default_rng(1)
    for _ in range(10):
        x, y = rng.standard_normal(S.n), rng.standard_normal(S.n)
        base = evaluate(S, x, y)
        assert evaluate(S, s * x, s * y) == pytest.approx(s**S.d * base, rel=1e-12, abs=1e-300)


def test_vectorized_evaluation_matches_scalar():
    S = parse_polynomial("3*x1^2*y2 - 1/7*x2*y1*y2 + x1*x2*y1", 2)
    rng = np.random.default_rng(2)
    X, Y = rng.standard_normal((5, 2)), rng.standard_normal((4, 2))
    grid = S.evaluate_pairs(X, Y)
    for i, j in product(range(5), range(4)):
        assert grid[i, j] == pytest.approx(evaluate(S, X[i], Y[j]), rel=1e-13)
    pts = S.evaluate_points(X[:4], Y)
    assert np.allclose(pts, [evaluate(S, X[k], Y[k]) for k in range(4)], rtol=1e-13)


def test_derivative_of_absent_variable_is_zero():
    S = parse_polynomial("x1^2*y1", 2)
    D = derivative(S, "y", 1)
    assert D.is_zero and D.d == 2


def test_hessian_constant_and_separable(separable):
    H = mixed_hessian(parse_polynomial("x1*y1", 1))
    assert dict(H[0, 0].terms) == {((0,), (0,)): Fraction(1)}
    H = mixed_hessian(separable)
    assert H[0, 1].is_zero and H[1, 0].is_zero
    assert H[0, 0] == parse_polynomial("x1^4 + y1^4", 2)
    assert H[1, 1] == parse_polynomial("x2^4 + y2^4", 2)


def test_hessian_of_coupled_phase(coupled):
    # Entries from differentiating each monomial by hand.
    H = mixed_hessian(coupled)
    assert H[0, 0] == parse_polynomial("x1^4 + y1^4 + 4/5*x1^3*x2 + 4/5*y1^3*y2", 2)
    assert H[0, 1] == parse_polynomial("1/5*x2^4 + 1/5*y1^4", 2)
    assert H[1, 0] == parse_polynomial("1/5*x1^4 + 1/5*y2^4", 2)
    assert H[1, 1] == parse_polynomial("x2^4 + y2^4 + 4/5*x1*x2^3 + 4/5*y1*y2^3", 2)


def _fd_mixed(S, x, y, i, j, h=1e-4):
    def f(dx, dy):
        xx, yy = np.array(x, float), np.array(y, float)
        xx[i] += dx
        yy[j] += dy
        return evaluate(S, xx, yy)

    return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)


@settings(max_examples=25, deadline=None)
@given(polynomials(n=2, d=4))
def test_hessian_matches_finite_differences(S):
    H = mixed_hessian(S)
    rng = np.random.default_rng(3)
    scale = S.max_abs_coefficient()
    for _ in range(20):
        x, y = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        for i, j in product(range(2), range(2)):
            exact = evaluate(H[i, j], x, y)
            assert _fd_mixed(S, x, y, i, j) == pytest.approx(exact, rel=1e-6, abs=1e-6 * scale)


def test_hs_norm_examples(separable):
    ident = mixed_hessian(parse_polynomial("x1*y1 + x2*y2", 2))
    assert hs_norm_value(ident, [0.3, -2], [5, 1]) == pytest.approx(np.sqrt(2), rel=1e-15)
    assert hs_norm_value(mixed_hessian(separable), [1, 0], [1, 0]) == pytest.approx(2.0, rel=1e-15)


@settings(max_examples=30, deadline=None)
@given(polynomials(d=5, mixed_only=True))
def test_hs_norm_scaling(S):
    H = mixed_hessian(S)
    rng = np.random.default_rng(4)
    x, y = rng.standard_normal(S.n), rng.standard_normal(S.n)
    base = hs_norm_value(H, x, y)
    assert hs_norm_value(H, 3 * x, 3 * y) == pytest.approx(3 ** (S.d - 2) * base, rel=1e-12, abs=1e-300)


def test_zero_polynomial_and_from_terms():
    Z = HomogeneousPolynomial.zero(2, 4)
    assert Z.is_zero and Z.terms == {} and Z.d == 4
    S = from_terms(1, [((1,), (1,), "1/3"), ((1,), (1,), Fraction(2, 3))])
    assert dict(S.terms) == {((1,), (1,)): Fraction(1)}
    with pytest.raises(MixedDegreeError):
        HomogeneousPolynomial(1, 2, {((1,), (1,)): 1, ((2,), (1,)): 1})


def test_immutability_and_hash(flagship):
    with pytest.raises(AttributeError):
        flagship.d = 3
    assert hash(flagship) == hash(parse_polynomial("x1*y1^5 + x1^5*y1", 1))
