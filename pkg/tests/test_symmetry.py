import random
from fractions import Fraction as Q

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sle_lab import symmetry as S
from sle_lab.martingales import _sl2_current
from sle_lab.symmetry import PolyState, Windows, apply_symmetry_op, build_operator

W = Windows()
RING = W.ring()


def op(X, level):
    return build_operator(X, level, W)


def top(sign):
    return PolyState.top(RING, sign)


def matmul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)] for i in range(2)]


def comm(a, b):
    ab, ba = matmul(a, b), matmul(b, a)
    return [[ab[i][j] - ba[i][j] for j in range(2)] for i in range(2)]


def scaled(c, a):
    return [[c * x for x in row] for row in a]


def test_pi_is_a_representation():
    E, H, F = (S.pi_matrix(Y) for Y in "EHF")
    assert comm(E, F) == H
    assert comm(H, E) == scaled(2, E)
    assert comm(H, F) == scaled(-2, F)


# -- zero modes and top weights ------------------------------------------------------


def test_zero_modes_on_constants():
    assert apply_symmetry_op(op("E", 0), top(1)) == top(-1).scale(-1)
    assert apply_symmetry_op(op("E", 0), top(-1)).is_zero()
    assert apply_symmetry_op(op("F", 0), top(-1)) == top(1).scale(-1)
    assert apply_symmetry_op(op("F", 0), top(1)).is_zero()
    assert apply_symmetry_op(op("H", 0), top(1)) == top(1).scale(-1)
    assert apply_symmetry_op(op("H", 0), top(-1)) == top(-1)


def test_l0_top_weight():
    for s in (1, -1):
        assert apply_symmetry_op(op("L", 0), top(s)) == top(s).scale(S.TOP_WEIGHT)


def test_lowering_modes_kill_constants():
    for X in "EHFL":
        for n in (1, 2):
            assert apply_symmetry_op(op(X, n), top(1)).is_zero(), (X, n)


def test_l_minus_one_x_part_at_identity():
    Lm1 = op("L", -1)
    x = RING.var("x")
    vx = Lm1.derivs[("x", 0)]
    at_identity = vx.filter(lambda k: RING.decode(k).keys() <= {("x", 0)})
    assert at_identity == x * x
    assert Lm1.scalar.filter(lambda k: RING.decode(k).keys() <= {("x", 0)}) == x.scale(Q(1, 2))


def test_operator_coefficients_are_homogeneous():
    # weight of every coefficient = weight of the variable it differentiates + level
    for X in "EHFL":
        for level in (-2, 0, 1):
            o = op(X, level)
            for v, p in o.derivs.items():
                for k in p.t:
                    assert RING.weight(k) <= S.var_weight(v) - level or RING.weight(k) > W.reach


def test_infeasible_level_rejected():
    with pytest.raises(S.InfeasibleError):
        build_operator("E", W.reach, W)
    assert not W.feasible(W.reach)
    with pytest.raises(ValueError):
        build_operator("Q", 0, W)


# -- linearity and Leibniz ---------------------------------------------------------------


@settings(max_examples=15, deadline=None)
@given(st.sampled_from("EHFL"), st.integers(-2, 2), st.integers(0, 10**6), st.integers(-3, 3))
def test_operators_are_linear(X, level, seed, c):
    rng = random.Random(seed)
    P = S.random_state(RING, rng, max_weight=3)
    R = S.random_state(RING, rng, max_weight=3)
    o = op(X, level)
    lhs = apply_symmetry_op(o, P.scale(c) + R)
    rhs = apply_symmetry_op(o, P).scale(c) + apply_symmetry_op(o, R)
    assert lhs == rhs
    assert apply_symmetry_op(o, PolyState.zero(RING)).is_zero()


@settings(max_examples=15, deadline=None)
@given(st.sampled_from("EHFL"), st.integers(-2, 2), st.integers(0, 10**6))
def test_derivation_part_satisfies_leibniz(X, level, seed):
    rng = random.Random(seed)
    D = op(X, level).derivation_part()

    def d(p):
        return apply_symmetry_op(D, top(1).scale(p)).comps[1]

    p = S.random_state(RING, rng, n_terms=3, degree=1, max_weight=2, x_power=1).comps[1]
    q = S.random_state(RING, rng, n_terms=3, degree=1, max_weight=2, x_power=1).comps[-1]
    dmax, wmax = S.safe_bounds(W, (level, 0))
    keep = lambda k: RING.degree(k) <= dmax and RING.weight(k) <= wmax  # noqa: E731
    assert (d(p * q) - d(p) * q - p * d(q)).filter(keep).is_zero()


# -- brackets ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "A,l,B,m",
    [("E", 0, "F", 0), ("H", 0, "E", 0), ("E", 1, "F", -1), ("H", 1, "H", -1),
     ("L", 1, "L", -1), ("L", 2, "L", -2), ("L", -1, "E", 2), ("F", -2, "H", 1)],
)
def test_commutator_examples(A, l, B, m):
    r = S.commutator_check(A, l, B, m, windows=W)
    assert r.passed and r.checked_terms > 0


def test_expected_bracket_table():
    assert S.expected_bracket("E", 1, "F", -1) == ([(Q(1), "H", 0)], Q(1))
    assert S.expected_bracket("H", 1, "H", -1) == ([], Q(2))
    assert S.expected_bracket("L", 2, "L", -2) == ([(Q(4), "L", 0)], Q(1, 2))
    assert S.expected_bracket("L", 1, "E", -2) == ([(Q(2), "E", -1)], Q(0))


def test_missing_central_term_is_detected():
    P = top(1)
    lhs = apply_symmetry_op(op("E", 1), apply_symmetry_op(op("F", -1), P)) - apply_symmetry_op(
        op("F", -1), apply_symmetry_op(op("E", 1), P)
    )
    without_k = apply_symmetry_op(op("H", 0), P)
    assert not (lhs - without_k).is_zero()
    assert lhs - without_k == P.scale(S.LEVEL)


def test_central_charge_is_one():
    assert S.central_charge(W) == 1


def test_safe_bounds():
    assert S.safe_bounds(W, (1, -1, 0)) == (W.d_max - 1, W.reach - 1)
    assert S.safe_bounds(W, (-2, -2, -4)) == (W.d_max - 1, W.reach)


# -- generating functions -------------------------------------------------------------


@pytest.mark.parametrize("X", ["E", "H", "F", "L"])
@pytest.mark.parametrize("bra,ket", [(1, 1), (1, -1), (-1, 1), (-1, -1)])
def test_generating_functions_match_closed_forms(X, bra, ket):
    g = S.generating_function_check(X, bra, ket, n_max=3, windows=W)
    assert g.passed
    assert g.numeric_residual == 0
    assert g.sign == (1 if X == "L" else -1)


def test_generating_function_identity_examples():
    g = S.generating_function_check("E", 1, -1, n_max=2, windows=W)
    assert [r["closed"] for r in g.rows] == [1, 0, 0]
    g = S.generating_function_check("H", 1, 1, n_max=2, windows=W)
    assert g.rows[0]["closed"] == 1
    g = S.generating_function_check("E", -1, 1, n_max=2, windows=W)
    assert all(r["closed"] == 0 and r["operator"] == 0 for r in g.rows)


@pytest.mark.parametrize("bra,ket", [(1, 1), (-1, 1)])
def test_printed_f_forms_disagree_with_operators(bra, ket):
    F = S._ExactFields(S._kernels(W))
    printed = _sl2_current(F, "F", bra, ket, True)
    corrected = S.closed_form_series("F", bra, ket, W)
    n_max = 3
    diffs = []
    for n in range(n_max + 1):
        ops = apply_symmetry_op(op("F", -n), top(bra)).comps[ket]
        for form in (printed, corrected):
            diffs.append(S._as_poly(RING, form.coeff(-n - 1)) + ops)
    printed_diffs, corrected_diffs = diffs[0::2], diffs[1::2]
    assert all(d.is_zero() for d in corrected_diffs)
    assert any(not d.is_zero() for d in printed_diffs)
