from fractions import Fraction as Q

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sle_lab.series import (
    BiSeries,
    ScalarModeError,
    SeriesDomainError,
    TruncatedSeries,
    TruncationError,
    comp_inverse,
    compose,
    exp_series,
    exp_vector_field,
    kernel_expand,
    log_series,
    mul_inverse,
    ps_exp,
    ps_inv,
    ps_log,
    ps_mul,
    residue,
    schwarzian,
    v_extract,
)

rationals = st.fractions(min_value=-3, max_value=3, max_denominator=7)
LO = -10


def at_inf(coeffs, lo=LO, var="z"):
    return TruncatedSeries({n: Q(c) for n, c in coeffs.items()}, lo, max([1, *coeffs]), var)


def aut(tail, lo=LO):
    """z + sum tail[k] z^{-k}."""
    return at_inf({1: 1, **{-k: c for k, c in tail.items()}}, lo)


def sym_coeffs(expr, n_terms):
    """Coefficients of a sympy expression in 1/z, keyed by power of z."""
    z, u = sp.symbols("z u")
    e = sp.series(sp.simplify(expr.subs(z, 1 / u)) * u, u, 0, n_terms).removeO()
    poly = sp.Poly(sp.expand(e), u)
    return {1 - m[0]: Q(str(c)) for m, c in zip(poly.monoms(), poly.coeffs())}


# -- basic windows and modes ----------------------------------------------------


def test_reading_below_window_raises():
    f = at_inf({1: 1, -1: 2}, lo=-3)
    assert f.coeff(5) == 0
    assert f.coeff(-3) == 0
    with pytest.raises(TruncationError):
        f.coeff(-4)


def test_product_window_is_tightest_exact():
    f = at_inf({1: 1, 0: 1}, lo=-3)
    g = at_inf({1: 1, -1: 1}, lo=-5)
    p = f * g
    assert p.hi == 2
    assert p.lo == max(-3 + 1, -5 + 1)


def test_modes_never_mix():
    exact = at_inf({1: 1})
    numeric = TruncatedSeries({1: 1.0}, LO, 1, mode="complex")
    with pytest.raises(ScalarModeError):
        exact + numeric
    with pytest.raises(ScalarModeError):
        exact.scale(0.5)


# -- compose / comp_inverse ----------------------------------------------------


def test_compose_identity():
    f = aut({0: 3, 1: Q(1, 2), 3: -2})
    assert compose(f, aut({})).equals(f)


@settings(max_examples=25, deadline=None)
@given(rationals, rationals)
def test_compose_two_shears_matches_symbolic(a, b):
    z = sp.symbols("z")
    g = z + sp.Rational(b.numerator, b.denominator) / z
    oracle = sym_coeffs(g + sp.Rational(a.numerator, a.denominator) / g, 12)
    got = compose(aut({1: a}), aut({1: b}))
    for n in range(got.lo, 2):
        assert got.coeff(n) == oracle.get(n, 0)


def test_compose_shear_leading_terms():
    a, b = Q(2), Q(3)
    got = compose(aut({1: a}), aut({1: b}))
    assert [got.coeff(n) for n in (1, -1, -3, -5)] == [1, a + b, -a * b, a * b * b]


@settings(max_examples=25, deadline=None)
@given(st.dictionaries(st.integers(0, 5), rationals, max_size=4))
def test_comp_inverse_round_trip(tail):
    f = aut(tail)
    h = comp_inverse(f)
    z = aut({})
    assert compose(h, f).equals(z)
    assert compose(f, h).equals(z)


def test_comp_inverse_examples():
    assert comp_inverse(aut({})).equals(aut({}))
    assert comp_inverse(aut({0: 5})).equals(aut({0: -5}))
    a = Q(3, 4)
    h = comp_inverse(aut({1: a}))
    assert compose(aut({1: a}), h).equals(aut({}))
    assert h.coeff(-1) == -a and h.coeff(-3) == -a * a


def test_compose_rejects_non_automorphism():
    with pytest.raises(SeriesDomainError):
        compose(aut({}), at_inf({1: 2}))


# -- mul_inverse / exp / log ---------------------------------------------------


def test_mul_inverse_examples():
    inv = mul_inverse(aut({}))
    assert inv.coeff(-1) == 1 and inv.keys() == [-1]
    a = Q(-2, 3)
    inv = mul_inverse(aut({0: a}))
    assert [inv.coeff(-k) for k in range(1, 6)] == [a**j * (-1) ** j for j in range(5)]


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.integers(-1, 8), rationals, max_size=5), st.integers(-3, 3))
def test_mul_inverse_product_is_one(tail, top):
    coeffs = {top: Q(1), **{top - 1 - k: c for k, c in tail.items() if k >= 0}}
    f = TruncatedSeries(coeffs, top - 10, top)
    one = f * mul_inverse(f)
    assert one.equals(TruncatedSeries.constant(Q(1), lo=one.lo))


def test_exp_examples():
    zero = TruncatedSeries({}, -6, -1)
    assert exp_series(zero).equals(TruncatedSeries.constant(Q(1), lo=-6))
    a = Q(3, 2)
    e = exp_series(TruncatedSeries({-1: a}, -8, -1))
    fact = 1
    for k in range(9):
        assert e.coeff(-k) == a**k / fact
        fact *= k + 1


@settings(max_examples=30, deadline=None)
@given(st.dictionaries(st.integers(1, 7), rationals, max_size=4))
def test_exp_times_exp_minus_is_one(tail):
    f = TruncatedSeries({-k: c for k, c in tail.items()}, -8, -1)
    prod = exp_series(f) * exp_series(-f)
    assert prod.equals(TruncatedSeries.constant(Q(1), lo=prod.lo))
    assert log_series(exp_series(f)).equals(f)


def test_exp_rejects_constant_term():
    with pytest.raises(SeriesDomainError):
        exp_series(TruncatedSeries({0: Q(1)}, -4, 0))


# -- schwarzian ------------------------------------------------------------------


def test_schwarzian_examples():
    assert schwarzian(aut({})).is_zero()
    assert schwarzian(aut({0: Q(7)})).is_zero()
    a = Q(5, 3)
    s = schwarzian(aut({1: a}))
    assert s.coeff(-4) == -6 * a
    assert s.coeff(-5) == 0
    assert all(s.coeff(n) == 0 for n in range(-3, 3))


@settings(max_examples=10, deadline=None)
@given(rationals, rationals)
def test_schwarzian_matches_symbolic(a, b):
    z = sp.symbols("z")
    f = z + sp.Rational(a.numerator, a.denominator) / z + sp.Rational(b.numerator, b.denominator) / z**2
    S = sp.diff(f, z, 3) / sp.diff(f, z) - sp.Rational(3, 2) * (sp.diff(f, z, 2) / sp.diff(f, z)) ** 2
    oracle = sym_coeffs(S * z, 12)  # shift so sym_coeffs keys are powers of z of S*z
    got = schwarzian(aut({1: a, 2: b}))
    for n in range(max(got.lo, -9), 0):
        assert got.coeff(n) == oracle.get(n + 1, 0)


# -- v_extract -------------------------------------------------------------------


def at_zero(coeffs, hi=8):
    return TruncatedSeries({n: Q(c) for n, c in coeffs.items()}, 1, hi, "w", at="zero")


def test_v_extract_examples():
    v = v_extract(at_zero({1: Q(5, 2)}), 4)
    assert v[0] == Q(5, 2) and all(v[i] == 0 for i in range(1, 5))
    a = Q(-3, 7)
    v = v_extract(at_zero({1: 1, 2: a}), 3)
    assert v[0] == 1 and v[1] == a


@settings(max_examples=15, deadline=None)
@given(rationals.filter(bool), st.dictionaries(st.integers(2, 6), rationals, max_size=4))
def test_v_extract_round_trip_at_zero(v0, higher):
    rho = at_zero({1: v0, **higher})
    N = 5
    v = v_extract(rho, N)
    w = TruncatedSeries.monomial(1, Q(1), var="w", at="zero", hi=N + 1)
    back = exp_vector_field({i: v[i] for i in range(1, N + 1)}, w, N + 1).scale(v[0])
    assert back.equals(rho.with_window(hi=N + 1))


@settings(max_examples=15, deadline=None)
@given(st.dictionaries(st.integers(0, 5), rationals, max_size=4))
def test_v_extract_round_trip_at_infinity(tail):
    rho = aut(tail)
    N = 6
    v = v_extract(rho, N)
    z = TruncatedSeries.monomial(1, Q(1), lo=1 - N)
    back = exp_vector_field({j: v[j] for j in range(-1, -N - 1, -1)}, z, 1 - N)
    assert back.equals(rho.with_window(lo=1 - N))


# -- kernels and residues -------------------------------------------------------


def test_kernel_identity_is_geometric():
    K = kernel_expand(aut({}), "a>b", vars=("w", "z"), depth=8)
    for m in range(7):
        assert K.coefficient(-m - 1, m) == 1
    assert K.coefficient(-2, 0) == 0


def test_kernel_residue_extracts_negative_modes():
    K = kernel_expand(aut({}), "a>b", vars=("w", "z"), depth=10)
    for n in range(-6, 4):
        probe = TruncatedSeries.monomial(-n - 1, Q(1), lo=-20, var="w")
        r = (K * probe).residue("w")
        expected = {-n - 1: 1} if n <= -1 else {}
        for p in range(r.lo, r.hi + 1):
            assert r.coeff(p) == expected.get(p, 0)


@settings(max_examples=20, deadline=None)
@given(st.dictionaries(st.integers(-4, 4), rationals, max_size=5))
def test_region_difference_is_formal_delta(poly):
    ident = aut({})
    p = TruncatedSeries({n: c for n, c in poly.items()}, -30, 4, "w")
    r1 = (kernel_expand(ident, "a>b", vars=("w", "z"), depth=12) * p).residue("w")
    r2 = (kernel_expand(ident, "b>a", vars=("w", "z"), depth=12) * p).residue("w")
    for n in range(-4, 5):
        assert r1.coeff(n) - r2.coeff(n) == poly.get(n, 0)


def test_regions_do_not_combine():
    ident = aut({})
    with pytest.raises(Exception, match="region"):
        kernel_expand(ident, "a>b") + kernel_expand(ident, "b>a")


def test_kernel_with_nontrivial_g_inverts_difference():
    g = aut({0: Q(1, 2), 1: 2, 2: Q(-1, 3)})
    K = kernel_expand(g, "a>b", vars=("w", "z"), depth=10)
    diff = BiSeries.lift(g.rename("w"), ("w", "z"), "a>b") - BiSeries.lift(g.rename("z"), ("w", "z"), "a>b")
    one = K * diff
    for (pa, pb), c in one.terms.items():
        if pa + pb >= one.Dlo and pa >= one.Plo:
            assert c == (1 if (pa, pb) == (0, 0) else 0)


def test_residue_examples():
    assert residue(TruncatedSeries.monomial(-1, Q(1), lo=-5)) == 1
    g = aut({0: 3, 1: Q(2, 5), 4: 1})
    assert residue(g.deriv()) == 0
    da = TruncatedSeries.monomial(-1, Q(1), lo=-8).deriv()
    assert residue(da * TruncatedSeries.constant(Q(1), lo=-8)) == 0
    assert residue(da * TruncatedSeries.monomial(1, Q(1), lo=-8)) == -1


# -- dense kernels agree with exact series ---------------------------------------------


def test_dense_kernels_match_exact():
    rng = np.random.default_rng(3)
    K = 9
    a = rng.integers(-3, 4, size=K).astype(float)
    b = rng.integers(-3, 4, size=K).astype(float)
    a[0] = 1.0
    sa = TruncatedSeries({-k: Q(int(x)) for k, x in enumerate(a)}, 1 - K, 0)
    sb = TruncatedSeries({-k: Q(int(x)) for k, x in enumerate(b)}, 1 - K, 0)
    prod = sa * sb
    inv = mul_inverse(sa)
    assert np.allclose(ps_mul(a, b), [float(prod.coeff(-k)) for k in range(K)])
    assert np.allclose(ps_inv(a), [float(inv.coeff(-k)) for k in range(K)])
    c = b.copy()
    c[0] = 0
    sc = TruncatedSeries({-k: Q(int(x)) for k, x in enumerate(c) if k}, 1 - K, -1)
    ex = exp_series(sc)
    assert np.allclose(ps_exp(c), [float(ex.coeff(-k)) for k in range(K)])
    assert np.allclose(ps_log(ps_exp(c)), c)
