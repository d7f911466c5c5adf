"""Affine sl2 and Virasoro symmetry operators on martingale polynomials.

A martingale polynomial is ``M_u = <u| G Y(-, x)|0>`` with
``G = exp(e.E) exp(h.H) exp(f.F) Q(g)`` for the level-1 module with
``c = 1`` and top weight ``1/4``.  It is an ``L*``-valued polynomial in
``x, g_n, e_n, h_n, f_n``; ``L*`` has the dual basis ``phi_+, phi_-``.
The operators satisfy ``M_{X(l)u} = X_l M_u`` and ``M_{L_l u} = L_l M_u``.

Every operator is a first-order differential operator plus a ``pi(Y)``
action and a scalar.  Its coefficients are residues of kernels
``1/(g(w) - g(z))`` (region |w| > |z|) and ``1/(g(z) - x)`` (region
|z| > |x|) built with :func:`series.kernel_expand`, against

* currents:  ``Ad(Theta^-1) X`` coefficients times ``z^-l`` and the
  scalar ``k Res z^-l (X | dTheta Theta^-1)``;
* Virasoro:  ``-(Theta^-1 dTheta)_Y z^(1-l)`` plus the ``g'^2`` vector
  field, the Schwarzian and the Sugawara term ``k/2 (J|J)``.

Arithmetic is exact in a truncated ring (:mod:`sle_lab.poly`).  All
series are homogeneous for the weight grading (z, w and x of weight 1),
so the series windows and the ring's weight cap agree.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Iterable, Mapping, Sequence

from .poly import Poly, PolyRing, Var, var_weight
from .series import (
    TruncatedSeries,
    TruncationError,
    exp_series,
    kernel_expand,
    mul_inverse,
    schwarzian,
)

__all__ = [
    "LEVEL",
    "CENTRAL_CHARGE",
    "TOP_WEIGHT",
    "Windows",
    "InfeasibleError",
    "PolyState",
    "SymOp",
    "build_operator",
    "apply_symmetry_op",
    "CommutatorReport",
    "commutator_check",
    "expected_bracket",
    "central_charge",
    "GeneratingFunctionReport",
    "generating_function_check",
    "random_state",
    "probe_states",
    "state_values",
    "pi_matrix",
]

LEVEL = 1
CENTRAL_CHARGE = Fraction(1)
TOP_WEIGHT = Fraction(1, 4)
OPERATORS = ("E", "H", "F", "L")
SIGNS = (1, -1)

# pi(Y) phi_a = coeff * phi_b, from (pi(Y) phi)(v) = -phi(Y v)
_PI: dict[str, dict[int, tuple[int, int]]] = {
    "E": {1: (-1, -1)},
    "F": {-1: (1, -1)},
    "H": {1: (1, -1), -1: (-1, 1)},
}


def pi_matrix(Y: str) -> list[list[int]]:
    """Matrix of pi(Y) on (phi_+, phi_-), columns = inputs."""
    idx = {1: 0, -1: 1}
    m = [[0, 0], [0, 0]]
    for a, (b, c) in _PI[Y].items():
        m[idx[b]][idx[a]] = c
    return m


class InfeasibleError(ValueError):
    """Requested level or coefficient lies outside what the windows support."""


@dataclass(frozen=True)
class Windows:
    """Truncation windows: ``e_n, h_n, f_n`` with ``n >= n_min``, ``g_n`` with
    ``n >= n_min + 1``, total degree ``<= d_max``, ``x`` powers ``<= J``."""

    n_min: int = -6
    d_max: int = 3
    J: int = 6
    w_max: int | None = None

    def ring(self) -> PolyRing:
        return _ring(self)

    @property
    def reach(self) -> int:
        """Largest weight at which every in-window monomial is representable."""
        return min(-self.n_min, self.J, self.ring().w_max)

    def feasible(self, level: int) -> bool:
        return abs(level) < self.reach


@lru_cache(maxsize=None)
def _ring(w: Windows) -> PolyRing:
    return PolyRing(w.n_min, w.d_max, w.J, w.w_max)


# ---------------------------------------------------------------------------
# states


@dataclass
class PolyState:
    """``comps[a]`` is the polynomial multiplying ``phi_a`` (a = +1, -1)."""

    ring: PolyRing
    comps: dict[int, Poly]
    loss: int = 0

    @classmethod
    def zero(cls, ring: PolyRing) -> "PolyState":
        return cls(ring, {1: ring.zero(), -1: ring.zero()})

    @classmethod
    def top(cls, ring: PolyRing, sign: int = 1) -> "PolyState":
        """The constant ``M_{v}`` for the dual basis vector ``phi_sign``."""
        out = cls.zero(ring)
        out.comps[sign] = ring.const(1)
        return out

    def __add__(self, o: "PolyState") -> "PolyState":
        return PolyState(self.ring, {a: self.comps[a] + o.comps[a] for a in SIGNS}, self.loss + o.loss)

    def __sub__(self, o: "PolyState") -> "PolyState":
        return self + o.scale(-1)

    def scale(self, c: Any) -> "PolyState":
        if isinstance(c, Poly):
            return PolyState(self.ring, {a: c * p for a, p in self.comps.items()}, self.loss)
        return PolyState(self.ring, {a: p.scale(c) for a, p in self.comps.items()}, self.loss)

    def mul(self, p: Poly) -> "PolyState":
        return self.scale(p)

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.comps.values())

    def __eq__(self, o: object) -> bool:
        if not isinstance(o, PolyState):
            return NotImplemented
        return all(self.comps[a] == o.comps[a] for a in SIGNS)

    def filter(self, keep) -> "PolyState":
        return PolyState(self.ring, {a: p.filter(keep) for a, p in self.comps.items()}, self.loss)

    def max_abs(self) -> Fraction:
        return max(p.max_abs() for p in self.comps.values())

    def evaluate(self, values: Mapping[Var, Any]) -> dict[int, Any]:
        return {a: p.evaluate(values) for a, p in self.comps.items()}


def random_state(
    ring: PolyRing, rng: random.Random, n_terms: int = 6, degree: int = 2,
    max_weight: int | None = None, x_power: int = 2,
) -> PolyState:
    """Random in-window state with small integer coefficients."""
    pool = [v for v in ring.variables("gehf") if var_weight(v) <= (max_weight or 99)]
    out = PolyState.zero(ring)
    for _ in range(n_terms):
        exps: dict[Var, int] = {}
        for _ in range(rng.randint(0, degree)):
            v = rng.choice(pool)
            exps[v] = exps.get(v, 0) + 1
        xp = rng.randint(0, x_power)
        if xp:
            exps[("x", 0)] = xp
        mon = ring.monomial(exps, rng.choice([-3, -2, -1, 1, 2, 3]))
        a = rng.choice(SIGNS)
        out.comps[a] = out.comps[a] + mon
    return out


def probe_states(ring: PolyRing, rng: random.Random, max_weight: int) -> list[PolyState]:
    """Dense states: every variable, then every pair of variables, up to ``max_weight``.

    Random nonzero coefficients make accidental cancellation between terms
    negligible, so one dense state probes all of its monomials at once.
    """
    pool = [v for v in ring.variables() if var_weight(v) <= max_weight]
    coef = lambda: Fraction(rng.choice([-1, 1]) * rng.randint(1, 97), rng.randint(1, 13))  # noqa: E731
    single, pairs = PolyState.zero(ring), PolyState.zero(ring)
    for v in pool:
        for a in SIGNS:
            single.comps[a] = single.comps[a] + ring.monomial({v: 1}, coef())
    for i, v in enumerate(pool):
        for w in pool[i:]:
            if var_weight(v) + var_weight(w) <= max_weight:
                exps = {v: 1} if v != w else {v: 2}
                if v != w:
                    exps[w] = 1
                a = rng.choice(SIGNS)
                pairs.comps[a] = pairs.comps[a] + ring.monomial(exps, coef())
    return [single, pairs]


# ---------------------------------------------------------------------------
# operators


@dataclass
class SymOp:
    """``sum_v derivs[v] d/dv + sum_Y pi_coeffs[Y] pi(Y) + scalar``."""

    id: str
    level: int
    ring: PolyRing
    derivs: dict[Var, Poly]
    pi_coeffs: dict[str, Poly]
    scalar: Poly

    def derivation_part(self) -> "SymOp":
        z = self.ring.zero()
        return SymOp(self.id, self.level, self.ring, dict(self.derivs), {}, z)

    def n_terms(self) -> int:
        return sum(len(p.t) for p in self.derivs.values()) + sum(
            len(p.t) for p in self.pi_coeffs.values()) + len(self.scalar.t)


class _Kernels:
    """Series shared by all operators of one window set."""

    PAD = 2

    def __init__(self, windows: Windows) -> None:
        ring = windows.ring()
        self.windows = windows
        self.ring = ring
        W = ring.w_max
        lo0 = -W - self.PAD
        one = ring.const(1)
        nmin = ring.n_min

        def field_series(kind: str, var: str) -> TruncatedSeries:
            return TruncatedSeries({n: ring.var(kind, n) for n in range(nmin, 0)}, lo0, -1, var, "exact")

        gz = {1: one}
        gz.update({n: ring.var("g", n) for n in range(nmin + 1, 1)})
        self.g = TruncatedSeries(gz, lo0 + 1, 1, "z", "exact")
        self.dg = self.g.deriv()
        self.e, self.h, self.f = (field_series(k, "z") for k in "ehf")
        self.de, self.dh, self.df = self.e.deriv(), self.h.deriv(), self.f.deriv()
        self.E2 = exp_series(self.h.scale(-2))
        self.P2 = exp_series(self.h.scale(2))
        self.ew, self.hw, self.fw = (field_series(k, "w") for k in "ehf")
        self.P2w = exp_series(self.hw.scale(2))
        depth = W + self.PAD + 4
        # 1/(g(w) - g(z)) for |w| > |z|, and 1/(g(z) - x) for |z| > |x|
        self.Kwz = kernel_expand(self.g, "a>b", vars=("w", "z"), depth=depth)
        x_id = TruncatedSeries.identity("x", mode="exact")
        self.Kzx = kernel_expand(self.g, "a>b", other=x_id, vars=("z", "x"), depth=depth)
        self.Sg = schwarzian(self.g)
        e, f, E2, P2 = self.e, self.f, self.E2, self.P2
        de, dh, df = self.de, self.dh, self.df
        # coefficients of Theta^-1 X Theta on (E, H, F)
        self.ad = {
            "E": {"E": E2, "H": E2 * f, "F": -(E2 * f * f)},
            "H": {"E": (E2 * e).scale(2), "H": 1 + (E2 * e * f).scale(2), "F": (f + E2 * e * f * f).scale(-2)},
            "F": {"E": -(E2 * e * e), "H": -(e + E2 * e * e * f), "F": P2 + (e * f).scale(2) + E2 * e * e * f * f},
        }
        # (X | dTheta Theta^-1) with (E|F) = 1, (H|H) = 2
        self.pair = {
            "E": E2 * df,
            "H": (dh + E2 * e * df).scale(2),
            "F": de - (e * dh).scale(2) - E2 * e * e * df,
        }
        # components of J = Theta^-1 dTheta
        JE = E2 * de
        JH = dh + E2 * f * de
        JF = df - (f * dh).scale(2) - E2 * f * f * de
        self.J = {"E": JE, "H": JH, "F": JF}
        self.JJ = (JE * JF).scale(2) + (JH * JH).scale(2)

    # -- residues ---------------------------------------------------------
    def a_series(self, psi: TruncatedSeries) -> TruncatedSeries:
        """``Res_z psi(z) g'(z) / (g(w) - g(z))`` as a series in w."""
        return (self.Kwz * (psi * self.dg)).residue("z")

    def x_poly(self, psi: TruncatedSeries) -> Poly:
        """``Res_z psi(z) g'(z) / (g(z) - x)`` as a polynomial in x."""
        t = (self.Kzx * (psi * self.dg)).residue("z")
        ring = self.ring
        out = ring.zero()
        for m, c in t.coeffs.items():
            if m < 0:
                raise InfeasibleError("negative x power in a regular part")
            if m <= ring.J:
                out = out + c * ring.var("x") ** m
        return out

    def coeff(self, s: TruncatedSeries, n: int) -> Any:
        try:
            return s.coeff(n)
        except TruncationError as exc:
            raise InfeasibleError(f"coefficient {s.var}^{n} outside the exact window: {exc}") from None

    def current_derivs(self, psi: Mapping[str, TruncatedSeries], sign: int) -> dict[Var, Poly]:
        a = {Y: self.a_series(p) for Y, p in psi.items()}
        fw = self.fw
        ce = self.P2w * a["E"]
        ch = a["H"] - fw * a["E"]
        cf = a["F"] + (fw * a["H"]).scale(2) - fw * fw * a["E"]
        out: dict[Var, Poly] = {}
        for kind, ser in (("e", ce), ("h", ch), ("f", cf)):
            for n in range(self.ring.n_min, 0):
                c = self.coeff(ser, n)
                if not _zero(c):
                    out[(kind, n)] = _as_poly(self.ring, c).scale(sign)
        return out


def _zero(c: Any) -> bool:
    return c == 0 if not isinstance(c, Poly) else c.is_zero()


def _as_poly(ring: PolyRing, c: Any) -> Poly:
    return c if isinstance(c, Poly) else ring.const(c)


@lru_cache(maxsize=None)
def _kernels(windows: Windows) -> _Kernels:
    return _Kernels(windows)


@lru_cache(maxsize=None)
def build_operator(id: str, level: int, windows: Windows = Windows()) -> SymOp:
    """Materialize ``E_l``, ``H_l``, ``F_l`` or ``L_l`` on the given windows."""
    if id not in OPERATORS:
        raise ValueError(f"unknown operator {id!r}; expected one of {OPERATORS}")
    if not windows.feasible(level):
        raise InfeasibleError(f"level {level} needs |level| < {windows.reach} for these windows")
    K = _kernels(windows)
    ring = K.ring
    if id != "L":
        psi = {Y: K.ad[id][Y].shift(-level) for Y in "EHF"}
        derivs = K.current_derivs(psi, -1)
        pi = {Y: K.x_poly(psi[Y]) for Y in "EHF"}
        scalar = _as_poly(ring, K.coeff(K.pair[id].shift(-level), -1)).scale(LEVEL)
    else:
        psi = {Y: -K.J[Y].shift(1 - level) for Y in "EHF"}
        derivs = K.current_derivs(psi, 1)
        pi = {Y: -K.x_poly(psi[Y]) for Y in "EHF"}
        V = (K.dg * K.dg).shift(1 - level)
        aV = (K.Kwz * V).residue("z")
        for n in range(ring.n_min + 1, 1):
            c = K.coeff(aV, n)
            if not _zero(c):
                derivs[("g", n)] = -_as_poly(ring, c)
        Vx = (K.Kzx * V).residue("z")
        xpart = ring.zero()
        for m, c in Vx.coeffs.items():
            if m <= ring.J:
                xpart = xpart + c * ring.var("x") ** m
        if not xpart.is_zero():
            derivs[("x", 0)] = xpart
        anomaly = (K.Sg.scale(CENTRAL_CHARGE / 12) + K.JJ.scale(Fraction(LEVEL, 2))).shift(1 - level)
        scalar = xpart.deriv(("x", 0)).scale(TOP_WEIGHT) + _as_poly(ring, K.coeff(anomaly, -1))
    pi = {Y: p for Y, p in pi.items() if not p.is_zero()}
    return SymOp(id, level, ring, derivs, pi, scalar)


def apply_symmetry_op(op: SymOp, P: PolyState) -> PolyState:
    """Exact application; ``loss`` counts monomials dropped by the windows."""
    ring = op.ring
    if P.ring is not ring:
        raise ValueError("state and operator live in different rings")
    before = ring.dropped
    out = {a: ring.zero() for a in SIGNS}
    for a, Pa in P.comps.items():
        if Pa.is_zero():
            continue
        acc = op.scalar * Pa
        for v in Pa.variables():
            c = op.derivs.get(v)
            if c is not None:
                acc = acc + c * Pa.deriv(v)
        out[a] = out[a] + acc
        for Y, T in op.pi_coeffs.items():
            tgt = _PI[Y].get(a)
            if tgt is not None:
                b, c = tgt
                out[b] = out[b] + (T * Pa).scale(c)
    return PolyState(ring, out, P.loss + ring.dropped - before)


# ---------------------------------------------------------------------------
# brackets

_SL2_BRACKET = {
    ("H", "E"): [(2, "E")],
    ("H", "F"): [(-2, "F")],
    ("E", "F"): [(1, "H")],
}
# (X|Y) for the central term
_KILLING = {("E", "F"): 1, ("F", "E"): 1, ("H", "H"): 2}


def expected_bracket(idA: str, l: int, idB: str, m: int) -> tuple[list[tuple[Fraction, str, int]], Fraction]:
    """``[A_l, B_m]`` as (operator terms, scalar)."""
    if idA == "L" and idB == "L":
        c0 = CENTRAL_CHARGE / 12 * (l**3 - l) if l + m == 0 else Fraction(0)
        return [(Fraction(l - m), "L", l + m)], c0
    if idA == "L":
        return [(Fraction(-m), idB, l + m)], Fraction(0)
    if idB == "L":
        return [(Fraction(l), idA, l + m)], Fraction(0)
    terms: list[tuple[Fraction, str, int]] = []
    if (idA, idB) in _SL2_BRACKET:
        terms = [(Fraction(c), Z, l + m) for c, Z in _SL2_BRACKET[(idA, idB)]]
    elif (idB, idA) in _SL2_BRACKET:
        terms = [(Fraction(-c), Z, l + m) for c, Z in _SL2_BRACKET[(idB, idA)]]
    scalar = Fraction(l * _KILLING.get((idA, idB), 0) * LEVEL) if l + m == 0 else Fraction(0)
    return terms, scalar


def safe_bounds(windows: Windows, levels: Iterable[int]) -> tuple[int, int]:
    """(max degree, max weight) of result monomials unaffected by truncation.

    A dropped monomial has degree > d_max or weight > reach; one operator
    lowers the degree by at most one and the weight by exactly its level.
    """
    ring = windows.ring()
    shift = max([0, *levels])
    return ring.d_max - 1, windows.reach - shift


@dataclass
class CommutatorReport:
    idA: str
    l: int
    idB: str
    m: int
    max_residual: Fraction
    checked_terms: int
    safe_degree: int
    safe_weight: int
    n_samples: int
    loss: int

    @property
    def passed(self) -> bool:
        return self.max_residual == 0

    @property
    def key(self) -> str:
        return f"[{self.idA}{self.l},{self.idB}{self.m}]"

    def as_dict(self) -> dict:
        return {
            "idA": self.idA, "l": self.l, "idB": self.idB, "m": self.m,
            "max_residual": str(self.max_residual), "checked_terms": self.checked_terms,
            "safe_degree": self.safe_degree, "safe_weight": self.safe_weight,
            "n_samples": self.n_samples, "loss": self.loss, "passed": self.passed,
        }


def commutator_check(
    idA: str, l: int, idB: str, m: int,
    samples: Sequence[PolyState] | None = None,
    windows: Windows = Windows(),
    seed: int = 0,
) -> CommutatorReport:
    """``([A_l, B_m] - expected) P`` restricted to the safe window."""
    ring = windows.ring()
    for lev in (l, m, l + m):
        if not windows.feasible(lev):
            raise InfeasibleError(f"level {lev} infeasible for {windows}")
    if samples is None:
        rng = random.Random(seed)
        samples = [PolyState.top(ring, 1), PolyState.top(ring, -1)]
        samples += [random_state(ring, rng, max_weight=windows.reach) for _ in range(4)]
        samples += probe_states(ring, rng, windows.reach)
    A, B = build_operator(idA, l, windows), build_operator(idB, m, windows)
    terms, scalar = expected_bracket(idA, l, idB, m)
    dmax, wmax = safe_bounds(windows, (l, m, l + m))
    keep = lambda k: ring.degree(k) <= dmax and ring.weight(k) <= wmax  # noqa: E731
    worst, checked, loss = Fraction(0), 0, 0
    for P in samples:
        ab = apply_symmetry_op(A, apply_symmetry_op(B, P))
        ba = apply_symmetry_op(B, apply_symmetry_op(A, P))
        lhs = ab - ba
        rhs = P.scale(scalar)
        for c, Z, lev in terms:
            rhs = rhs + apply_symmetry_op(build_operator(Z, lev, windows), P).scale(c)
        diff = (lhs - rhs).filter(keep)
        worst = max(worst, diff.max_abs())
        # monomials that entered the comparison before any cancellation
        for a in SIGNS:
            seen = set(ab.comps[a].t) | set(ba.comps[a].t) | set(rhs.comps[a].t)
            checked += sum(1 for k in seen if keep(k))
        loss += lhs.loss
    return CommutatorReport(idA, l, idB, m, worst, checked, dmax, wmax, len(samples), loss)


def central_charge(windows: Windows = Windows()) -> Fraction:
    """``c`` read off ``([L_2, L_-2] - 4 L_0) M_{v}``, which equals ``c/2 M_{v}``."""
    ring = windows.ring()
    top = PolyState.top(ring, 1)
    L2, Lm2, L0 = (build_operator("L", k, windows) for k in (2, -2, 0))
    v = apply_symmetry_op(L2, apply_symmetry_op(Lm2, top)) - apply_symmetry_op(Lm2, apply_symmetry_op(L2, top))
    v = v - apply_symmetry_op(L0, top).scale(4)
    if not v.comps[-1].is_zero() or not v.comps[1].is_constant():
        raise ArithmeticError("bracket on the top state is not a multiple of it")
    return 2 * v.comps[1].t.get(0, Fraction(0))


# ---------------------------------------------------------------------------
# generating functions


class _ExactFields:
    """Exact-series backend for the closed-form formulas (``rho = g - x``)."""

    def __init__(self, K: _Kernels) -> None:
        ring = K.ring
        self.K = K
        self.s = type("S", (), {"e": "e", "h": "h", "f": "f"})()
        rho = K.g - ring.var("x")
        self.R = rho.deriv() * mul_inverse(rho)
        self.S = K.Sg

    def series(self, name: str) -> TruncatedSeries:
        return getattr(self.K, name)

    def dseries(self, name: str) -> TruncatedSeries:
        return getattr(self.K, "d" + name)

    def mul(self, *xs: TruncatedSeries) -> TruncatedSeries:
        out = xs[0]
        for x in xs[1:]:
            out = out * x
        return out

    def exp(self, x: TruncatedSeries) -> TruncatedSeries:
        return exp_series(x)

    def q(self, a: int, b: int) -> Fraction:
        return Fraction(a, b)

    def one(self) -> TruncatedSeries:
        return TruncatedSeries.monomial(0, self.K.ring.const(1), var="z", mode="exact")


def closed_form_series(X: str, bra: int, ket: int, windows: Windows = Windows()) -> TruncatedSeries:
    """``<bra| X(z) G |ket>`` (or ``T(z)`` for X = "L") with exact coefficients."""
    from .martingales import _sl2_current, _sl2_virasoro

    F = _ExactFields(_kernels(windows))
    if X == "L":
        return _sl2_virasoro(F, bra, ket)
    return _sl2_current(F, X, bra, ket, False)


def state_values(s, path: int = 0) -> dict[Var, complex]:
    """Variable values of one simulated sl2 path (``x = B_t``, ``g = rho + x``)."""
    if s.e is None:
        raise ValueError("state carries no sl2 internal fields")
    vals: dict[Var, complex] = {("x", 0): complex(s.B0[path])}
    g = s.g_coeffs()[path]
    for k in range(1, g.shape[0]):
        vals[("g", 1 - k)] = complex(g[k])
    for name in "ehf":
        arr = getattr(s, name)[path]
        for k in range(1, arr.shape[0]):
            vals[(name, -k)] = complex(arr[k])
    return vals


@dataclass
class GeneratingFunctionReport:
    X: str
    bra: int
    ket: int
    n_max: int
    sign: int | None
    symbolic_residual: Fraction
    rows: list[dict] = field(default_factory=list)

    @property
    def numeric_residual(self) -> float:
        return max((r["abs_diff"] for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        expected = 1 if self.X == "L" else -1
        return self.sign == expected and self.symbolic_residual == 0


def generating_function_check(
    X: str, bra: int, ket: int,
    values: Mapping[Var, Any] | None = None,
    n_max: int = 3,
    windows: Windows = Windows(),
) -> GeneratingFunctionReport:
    """Compare the closed form with ``-sum_n z^(-n-1) (X_{-n} M_bra)(v_ket)``.

    For X = "L" the relation is ``+sum_n z^(-n-2) (L_{-n} M_bra)(v_ket)``.
    The comparison is exact as polynomials (both sides in the same ring);
    ``values`` (default: the identity state, all variables 0) gives the
    numeric rows.  The sign is determined, not assumed.
    """
    ring = windows.ring()
    closed = closed_form_series(X, bra, ket, windows)
    top = PolyState.top(ring, bra)
    offset = 2 if X == "L" else 1
    pairs = []
    for n in range(n_max + 1):
        op = build_operator(X, -n, windows)
        ops_n = apply_symmetry_op(op, top).comps[ket]
        try:
            cl = closed.coeff(-n - offset)
        except TruncationError as exc:
            raise InfeasibleError(str(exc)) from None
        pairs.append((n, _as_poly(ring, cl), ops_n))
    sign = None
    for s in (-1, 1):
        if all((c - o.scale(s)).is_zero() for _, c, o in pairs):
            sign = s
            break
    ref = sign if sign is not None else (1 if X == "L" else -1)
    resid = max((c - o.scale(ref)).max_abs() for _, c, o in pairs)
    vals = values or {}
    rows = []
    for n, c, o in pairs:
        cv = c.evaluate(vals)
        ov = o.evaluate(vals)
        rows.append({
            "X": X, "bra": bra, "ket": ket, "n": n,
            "closed": cv, "operator": ov, "abs_diff": abs(cv - ref * ov),
        })
    return GeneratingFunctionReport(X, bra, ket, n_max, sign, resid, rows)
