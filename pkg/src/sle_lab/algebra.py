"""Exact computations in graded modules.

Three module families are supported, all with Fraction coefficients:

* ``VirasoroVerma(c, h)``: PBW monomials ``L_{-n1} ... L_{-nk}|c,h>`` with
  ``n1 >= ... >= nk >= 1``.
* ``HeisenbergFock(rank, lam)``: level-1 Fock space of ``rank`` orthonormal
  bosons ``H_i``; the top vector has ``H_i(0) = lam * delta_{i1}``.
* ``LatticeSl2(charge)``: level-1 affine sl2 realized on ``V_{Q + charge*alpha}``
  (``Q = Z alpha``, ``(alpha|alpha) = 2``) through vertex operators with the
  trivial cocycle.  ``charge = 0`` is the vacuum module, ``1/2`` the
  fundamental one, whose top space is spanned by ``e^{Lambda}`` and
  ``e^{-Lambda}``.

Vectors are :class:`GradedVector` objects.  Operators that would leave the
degree cutoff raise :class:`DegreeOverflowError` unless the caller passes an
explicit projection bound ``upto`` (used inside exponentials of raising
operators, where dropping high components is exact for the low ones).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import factorial
from typing import Any, Callable, Iterable, Mapping, Union

from .series import TruncatedSeries, v_extract

Q = Fraction


class AlgebraError(Exception):
    pass


class DegreeOverflowError(AlgebraError):
    """A raising operator produced components above the cutoff."""


class CriticalLevelError(AlgebraError):
    pass


# ---------------------------------------------------------------------------
# module definitions


@dataclass(frozen=True)
class VirasoroVerma:
    c: Fraction
    h: Fraction
    kind = "verma"

    def top(self) -> tuple:
        return ()

    def degree(self, mon: tuple) -> int:
        return sum(mon)

    def top_weight(self) -> Fraction:
        return Q(self.h)

    def basis(self, d: int) -> list[tuple]:
        return [tuple(p) for p in partitions(d)]


@dataclass(frozen=True)
class HeisenbergFock:
    rank: int
    lam: Fraction = Q(0)
    level: int = 1
    kind = "fock"

    @property
    def lie(self) -> tuple[str, ...]:
        return tuple(f"H{i}" for i in range(1, self.rank + 1))

    def top(self) -> tuple:
        return ()

    def degree(self, mon: tuple) -> int:
        return sum(n for n, _ in mon)

    def top_weight(self) -> Fraction:
        return Q(self.lam) ** 2 / 2

    def basis(self, d: int) -> list[tuple]:
        out = []
        for parts in partitions(d):
            # assign a color to each part; canonical = sorted descending pairs
            seen = set()
            for colors in product(range(1, self.rank + 1), repeat=len(parts)):
                mon = tuple(sorted(zip(parts, colors), reverse=True))
                if mon not in seen:
                    seen.add(mon)
                    out.append(mon)
        return out


@dataclass(frozen=True)
class LatticeSl2:
    charge: Fraction = Q(1, 2)
    level: int = 1
    kind = "lattice"
    lie = ("E", "H", "F")

    def __post_init__(self) -> None:
        if Q(self.charge) not in (Q(0), Q(1, 2)):
            raise ValueError("charge must be 0 or 1/2")

    def top(self, sign: int = 1) -> tuple:
        """``e^{Lambda}`` (sign=+1) or ``e^{-Lambda}`` (sign=-1); vacuum for charge 0."""
        if self.charge == 0:
            return (0, ())
        return (0, ()) if sign > 0 else (-1, ())

    def degree(self, mon: tuple) -> int:
        m, parts = mon
        s = Q(self.charge)
        d = (m + s) ** 2 - s**2 + sum(parts)
        return int(d)

    def top_weight(self) -> Fraction:
        return Q(self.charge) ** 2

    def basis(self, d: int) -> list[tuple]:
        out = []
        s = Q(self.charge)
        m = 0
        ms = []
        for m in range(-d - 2, d + 2):
            k = (m + s) ** 2 - s**2
            if k <= d and k.denominator == 1:
                ms.append((m, int(k)))
        for m, k in sorted(ms):
            for parts in partitions(d - k):
                out.append((m, tuple(parts)))
        return out


ModuleSpec = Union[VirasoroVerma, HeisenbergFock, LatticeSl2]


@lru_cache(maxsize=None)
def _partitions(n: int, maxpart: int) -> tuple[tuple[int, ...], ...]:
    if n == 0:
        return ((),)
    out = []
    for k in range(min(n, maxpart), 0, -1):
        for rest in _partitions(n - k, k):
            out.append((k,) + rest)
    return tuple(out)


def partitions(n: int) -> tuple[tuple[int, ...], ...]:
    """Partitions of n as nonincreasing tuples."""
    if n < 0:
        return ()
    return _partitions(n, n)


# ---------------------------------------------------------------------------
# vectors


class GradedVector:
    """Sparse vector ``{monomial: coefficient}`` with a degree cutoff."""

    __slots__ = ("spec", "terms", "cutoff")

    def __init__(self, spec: ModuleSpec, terms: Mapping[Any, Any], cutoff: int = 6) -> None:
        self.spec = spec
        self.cutoff = cutoff
        clean = {}
        for mon, c in terms.items():
            if c == 0:
                continue
            if spec.degree(mon) > cutoff:
                raise DegreeOverflowError(
                    f"component of degree {spec.degree(mon)} exceeds cutoff {cutoff}"
                )
            clean[mon] = c
        self.terms = clean

    @classmethod
    def top(cls, spec: ModuleSpec, cutoff: int = 6, **kw: Any) -> "GradedVector":
        return cls(spec, {spec.top(**kw): Q(1)}, cutoff)

    @classmethod
    def basis_vector(cls, spec: ModuleSpec, mon: Any, cutoff: int = 6) -> "GradedVector":
        return cls(spec, {mon: Q(1)}, cutoff)

    def __repr__(self) -> str:
        return f"GradedVector({self.spec}, {self.terms})"

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GradedVector):
            return NotImplemented
        return (self - other).is_zero()

    def __add__(self, o: "GradedVector") -> "GradedVector":
        out = dict(self.terms)
        for k, c in o.terms.items():
            out[k] = out.get(k, 0) + c
        return GradedVector(self.spec, out, max(self.cutoff, o.cutoff))

    def __neg__(self) -> "GradedVector":
        return GradedVector(self.spec, {k: -c for k, c in self.terms.items()}, self.cutoff)

    def __sub__(self, o: "GradedVector") -> "GradedVector":
        return self + (-o)

    def scale(self, c: Any) -> "GradedVector":
        return GradedVector(self.spec, {k: c * v for k, v in self.terms.items()}, self.cutoff)

    __rmul__ = scale

    def project(self, upto: int) -> "GradedVector":
        return GradedVector(
            self.spec, {k: c for k, c in self.terms.items() if self.spec.degree(k) <= upto}, upto
        )

    def with_cutoff(self, cutoff: int) -> "GradedVector":
        return GradedVector(self.spec, self.terms, cutoff)

    def max_degree(self) -> int:
        return max((self.spec.degree(k) for k in self.terms), default=0)

    def coefficient(self, mon: Any) -> Any:
        return self.terms.get(mon, Q(0))


def _accumulate(out: dict, mon: Any, c: Any) -> None:
    if c == 0:
        return
    v = out.get(mon, 0) + c
    if v == 0:
        out.pop(mon, None)
    else:
        out[mon] = v


# ---------------------------------------------------------------------------
# Virasoro Verma action


def _verma_L(spec: VirasoroVerma, m: int, mon: tuple) -> dict:
    return dict(_verma_L_cached(Q(spec.c), Q(spec.h), m, mon))


@lru_cache(maxsize=200_000)
def _verma_L_cached(c: Fraction, h: Fraction, m: int, mon: tuple) -> tuple:
    if not mon:
        if m > 0:
            return ()
        if m == 0:
            return (((), h),)
        return (((-m,), Q(1)),)
    if m < 0 and -m >= mon[0]:
        return (((-m,) + mon, Q(1)),)
    if m == 0:
        return ((mon, h + sum(mon)),)
    first, rest = mon[0], mon[1:]
    out: dict = {}
    # L_m L_{-first} rest = L_{-first} (L_m rest) + [L_m, L_{-first}] rest
    for mon2, c2 in _verma_L_cached(c, h, m, rest):
        for mon3, c3 in _verma_L_cached(c, h, -first, mon2):
            _accumulate(out, mon3, c2 * c3)
    k = m - first  # [L_m, L_{-n}] = (m+n) L_{m-n} + (m^3-m)/12 delta_{m,n} c
    if m + first != 0:
        for mon2, c2 in _verma_L_cached(c, h, k, rest):
            _accumulate(out, mon2, (m + first) * c2)
    if m == first:
        _accumulate(out, rest, Q(m**3 - m, 12) * c)
    return tuple(out.items())


# ---------------------------------------------------------------------------
# Heisenberg Fock action


def _fock_H(spec: HeisenbergFock, i: int, n: int, mon: tuple) -> dict:
    if n < 0:
        return {tuple(sorted(mon + ((-n, i),), reverse=True)): Q(1)}
    if n == 0:
        return {mon: Q(spec.lam)} if i == 1 and spec.lam != 0 else {}
    cnt = mon.count((n, i))
    if not cnt:
        return {}
    lst = list(mon)
    lst.remove((n, i))
    return {tuple(lst): Q(cnt * n * spec.level)}


# ---------------------------------------------------------------------------
# lattice realization


def _alpha_mode(spec: LatticeSl2, n: int, mon: tuple) -> dict:
    m, parts = mon
    if n < 0:
        return {(m, tuple(sorted(parts + (-n,), reverse=True))): Q(1)}
    if n == 0:
        return {mon: 2 * (m + Q(spec.charge))} if (m + Q(spec.charge)) != 0 else {}
    cnt = parts.count(n)
    if not cnt:
        return {}
    lst = list(parts)
    lst.remove(n)
    return {(m, tuple(lst)): Q(2 * n * cnt)}


@lru_cache(maxsize=None)
def _creation_terms(sigma: int, b: int) -> tuple:
    """Coefficient of z^b in exp(sigma * sum_j z^j x_j / j) as ((parts, coeff), ...)."""
    out = []
    for parts in partitions(b):
        coeff = Q(1)
        counts: dict[int, int] = {}
        for p in parts:
            counts[p] = counts.get(p, 0) + 1
        for j, k in counts.items():
            coeff *= Q(sigma, j) ** k / factorial(k)
        out.append((parts, coeff))
    return tuple(out)


@lru_cache(maxsize=200_000)
def _vertex_cached(charge: Fraction, sigma: int, n: int, mon: tuple) -> tuple:
    m, parts = mon
    pairing = 2 * sigma * (m + charge)  # (sigma alpha | beta)
    assert pairing.denominator == 1
    pairing = int(pairing)
    # annihilation part: each x_j -> x_j - 2 sigma z^{-j}
    ann: dict[tuple[tuple[int, ...], int], Fraction] = {((), 0): Q(1)}
    for j in parts:
        nxt: dict = {}
        for (kept, a), c in ann.items():
            _accumulate(nxt, (tuple(sorted(kept + (j,), reverse=True)), a), c)
            _accumulate(nxt, (kept, a + j), c * (-2 * sigma))
        ann = nxt
    out: dict = {}
    for (kept, a), c in ann.items():
        b = -n - 1 - pairing + a
        if b < 0:
            continue
        for cparts, cc in _creation_terms(sigma, b):
            newparts = tuple(sorted(kept + cparts, reverse=True))
            _accumulate(out, (m + sigma, newparts), c * cc)
    return tuple(out.items())


def vertex_mode(spec: LatticeSl2, beta: int, n: int, v: GradedVector, upto: int | None = None) -> GradedVector:
    """Mode ``n`` of ``Gamma_{beta alpha}(z)`` (beta = +1 gives E(n), -1 gives F(n))."""
    if beta not in (1, -1):
        raise ValueError("beta must be +1 or -1 (in units of alpha)")
    return apply_generator(spec, ("E" if beta > 0 else "F", n), v, upto)


# ---------------------------------------------------------------------------
# generic application


def _raw_apply(spec: ModuleSpec, gen: tuple, mon: Any) -> dict:
    name = gen[0]
    if isinstance(spec, VirasoroVerma):
        if name == "L":
            return _verma_L(spec, gen[1], mon)
        if name == "C":
            return {mon: Q(spec.c)}
    elif isinstance(spec, HeisenbergFock):
        if name.startswith("H") and len(name) > 1:
            return _fock_H(spec, int(name[1:]), gen[1], mon)
        if name == "K":
            return {mon: Q(spec.level)}
    elif isinstance(spec, LatticeSl2):
        if name in ("H", "alpha"):
            return _alpha_mode(spec, gen[1], mon)
        if name == "E":
            return dict(_vertex_cached(Q(spec.charge), 1, gen[1], mon))
        if name == "F":
            return dict(_vertex_cached(Q(spec.charge), -1, gen[1], mon))
        if name == "K":
            return {mon: Q(spec.level)}
    raise AlgebraError(f"generator {gen} not available on {spec}")


def apply_generator(spec: ModuleSpec, gen: tuple, v: GradedVector, upto: int | None = None) -> GradedVector:
    """Apply one generator, e.g. ``("L", -2)``, ``("H1", 1)``, ``("E", 0)``.

    On affine modules ``("L", n)`` is the Sugawara operator.  With
    ``upto=None`` the result must fit in ``v.cutoff``; otherwise components
    above ``upto`` are dropped.
    """
    if gen[0] == "L" and not isinstance(spec, VirasoroVerma):
        return sugawara_L(spec, gen[1], v, upto)
    out: dict = {}
    bound = v.cutoff if upto is None else upto
    for mon, c in v.terms.items():
        for mon2, c2 in _raw_apply(spec, gen, mon).items():
            if spec.degree(mon2) > bound:
                if upto is None:
                    raise DegreeOverflowError(
                        f"{gen} raises degree to {spec.degree(mon2)} > cutoff {bound}; widen the cutoff"
                    )
                continue
            _accumulate(out, mon2, c * c2)
    return GradedVector(spec, out, bound)


def apply_word(spec: ModuleSpec, word: Iterable[tuple], v: GradedVector, upto: int | None = None) -> GradedVector:
    """Apply generators right to left, as written: ``word = [g1, g2]`` gives ``g1 g2 v``."""
    for gen in reversed(list(word)):
        v = apply_generator(spec, gen, v, upto)
    return v


# ---------------------------------------------------------------------------
# Segal-Sugawara


def _casimir_pairs(spec: ModuleSpec) -> list[tuple[str, str, Fraction]]:
    """Dual-basis pairs (X_a, X^a, weight) of the invariant form, rationally."""
    if isinstance(spec, HeisenbergFock):
        return [(f"H{i}", f"H{i}", Q(1)) for i in range(1, spec.rank + 1)]
    if isinstance(spec, LatticeSl2):
        return [("H", "H", Q(1, 2)), ("E", "F", Q(1)), ("F", "E", Q(1))]
    raise AlgebraError("Sugawara construction needs an affine module")


def dual_coxeter(spec: ModuleSpec) -> int:
    return 0 if isinstance(spec, HeisenbergFock) else 2


def sugawara_L(spec: ModuleSpec, n: int, v: GradedVector, upto: int | None = None) -> GradedVector:
    """``L_n = 1/(2(k+h)) sum_a sum_j :X_a(n-j) X^a(j):``."""
    k = spec.level
    hv = dual_coxeter(spec)
    if k + hv == 0:
        raise CriticalLevelError("k = -h^vee")
    pref = Q(1, 2 * (k + hv))
    bound = v.cutoff if upto is None else upto
    inner = max(bound, v.max_degree()) + max(abs(n), 0) + 2
    out = GradedVector(spec, {}, bound)
    d = v.max_degree()
    for A, B, w in _casimir_pairs(spec):
        for p in range(n - d, d + 1):
            q = n - p
            if p < 0:
                word = [(A, p), (B, q)]
            else:
                word = [(B, q), (A, p)]
            r = apply_word(spec, word, v, upto=inner)
            if r.terms:
                out = out + r.scale(pref * w).project(inner)
    final: dict = {}
    for mon, c in out.terms.items():
        if spec.degree(mon) > bound:
            if upto is None:
                raise DegreeOverflowError(f"L_{n} exceeds cutoff {bound}")
            continue
        final[mon] = c
    return GradedVector(spec, final, bound)


def apply_L(spec: ModuleSpec, n: int, v: GradedVector, upto: int | None = None) -> GradedVector:
    return apply_generator(spec, ("L", n), v, upto)


# ---------------------------------------------------------------------------
# pairing


def pairing(u: GradedVector, v: GradedVector) -> Fraction:
    """Bilinear form with ``<top|top> = 1``.

    Verma: contravariant, ``<L_n u|v> = <u|L_{-n} v>``.  Affine modules:
    ``<X(n)u|v> = -<u|X(-n)v>`` for the oscillator modes; distinct lattice
    sectors ``e^beta`` are orthogonal with ``<e^beta|e^beta> = 1`` (dual-basis
    convention on the zero-mode space).
    """
    spec = u.spec
    total = Q(0)
    cut = max(u.cutoff, v.cutoff, u.max_degree(), v.max_degree())
    for mon, c in u.terms.items():
        if isinstance(spec, VirasoroVerma):
            w = v.with_cutoff(cut)
            for n in mon:  # L_{-n1} ... L_{-nk}|h>: apply L_{n1} first
                w = apply_generator(spec, ("L", n), w)
            total += c * w.coefficient(())
        elif isinstance(spec, HeisenbergFock):
            w = v.with_cutoff(cut)
            for n, i in mon:
                w = apply_generator(spec, (f"H{i}", n), w)
            total += c * (-1) ** len(mon) * w.coefficient(())
        else:
            m, parts = mon
            w = v.with_cutoff(cut)
            for n in parts:
                w = apply_generator(spec, ("H", n), w)
            total += c * (-1) ** len(parts) * w.coefficient((m, ()))
    return total


# ---------------------------------------------------------------------------
# Lie data for the affine modules


def lie_bracket(spec: ModuleSpec, X: str, Y: str) -> dict[str, Fraction]:
    if isinstance(spec, HeisenbergFock):
        return {}
    table = {
        ("H", "E"): {"E": Q(2)}, ("E", "H"): {"E": Q(-2)},
        ("H", "F"): {"F": Q(-2)}, ("F", "H"): {"F": Q(2)},
        ("E", "F"): {"H": Q(1)}, ("F", "E"): {"H": Q(-1)},
    }
    return dict(table.get((X, Y), {}))


def killing(spec: ModuleSpec, X: str, Y: str) -> Fraction:
    """Normalized invariant form ((H|H) = 2, (E|F) = 1; orthonormal H_i)."""
    if isinstance(spec, HeisenbergFock):
        return Q(1) if X == Y else Q(0)
    if X == Y == "H":
        return Q(2)
    if {X, Y} == {"E", "F"}:
        return Q(1)
    return Q(0)


# ---------------------------------------------------------------------------
# loop-algebra operators


@dataclass(frozen=True)
class LoopTerm:
    """``X ⊗ x(zeta)`` with finitely supported x given as {power: coeff}."""

    X: str
    x: Mapping[int, Fraction]


def apply_loop(spec: ModuleSpec, X: str, x: Mapping[int, Any], v: GradedVector, upto: int) -> GradedVector:
    """``X ⊗ x = sum_n x_n X(n)`` applied to v, projected to degree ``upto``."""
    out = GradedVector(spec, {}, upto)
    for n, c in x.items():
        if c == 0:
            continue
        if isinstance(spec, HeisenbergFock):
            gen = (X, n)
        else:
            gen = (X, n)
        out = out + apply_generator(spec, gen, v, upto).scale(c)
    return out


def exp_raising(
    spec: ModuleSpec, terms: Iterable[tuple[tuple, Any]], v: GradedVector, upto: int, sign: int = 1
) -> GradedVector:
    """``exp(sign * sum c * gen) v`` for raising generators, projected to ``upto``."""
    terms = [(g, c) for g, c in terms if c != 0]
    total = v.project(upto)
    term = total
    k = 0
    while term.terms:
        k += 1
        nxt = GradedVector(spec, {}, upto)
        for g, c in terms:
            nxt = nxt + apply_generator(spec, g, term, upto).scale(c)
        term = nxt.scale(Q(sign, k))
        total = total + term
    return total


def _loop_gens(X: str, a: Mapping[int, Any]) -> list[tuple[tuple, Any]]:
    return [((X, n), c) for n, c in a.items()]


def conjugate_loop(
    spec: ModuleSpec, A: str, a: Mapping[int, Any], X: str, x: Mapping[int, Any], v: GradedVector, D: int
) -> GradedVector:
    """``e^{-a} (X ⊗ x) e^{a} v`` with ``a = A ⊗ a(zeta)``, exact on degrees <= D."""
    if any(n >= 0 for n, c in a.items() if c != 0):
        raise AlgebraError("a(zeta) must lie in zeta^-1 C[[zeta^-1]]")
    lift = max([0] + [n for n, c in x.items() if c != 0])
    w = exp_raising(spec, _loop_gens(A, a), v, D + lift, +1)
    w = apply_loop(spec, X, x, w, D)
    return exp_raising(spec, _loop_gens(A, a), w, D, -1)


def _series_mul(p: Mapping[int, Any], q: Mapping[int, Any], lo: int) -> dict[int, Any]:
    out: dict[int, Any] = {}
    for i, a in p.items():
        for j, b in q.items():
            if i + j >= lo:
                out[i + j] = out.get(i + j, 0) + a * b
    return {k: c for k, c in out.items() if c != 0}


def conjugation_rhs(
    spec: ModuleSpec, A: str, a: Mapping[int, Any], X: str, x: Mapping[int, Any], v: GradedVector, D: int
) -> GradedVector:
    """Closed form ``sum_m (-1)^m/m! (ad A)^m X ⊗ a^m x - k (A|X) Res(da * x)`` applied to v."""
    lo = -(D + 1) - max([0] + [abs(n) for n in x])  # deeper powers cannot reach degree <= D
    out = GradedVector(spec, {}, D)
    elem: dict[str, Fraction] = {X: Q(1)}
    series = dict(x)
    m = 0
    while elem and series:
        for Y, cy in elem.items():
            out = out + apply_loop(spec, Y, series, v, D).scale(cy * Q((-1) ** m, factorial(m)))
        nxt: dict[str, Fraction] = {}
        for Y, cy in elem.items():
            for Z, cz in lie_bracket(spec, A, Y).items():
                nxt[Z] = nxt.get(Z, 0) + cy * cz
        elem = {k: c for k, c in nxt.items() if c != 0}
        series = _series_mul(series, a, lo)
        m += 1
    da = {n - 1: n * c for n, c in a.items()}
    res = sum((c * x.get(-1 - n, 0) for n, c in da.items()), Q(0))
    central = spec.level * killing(spec, A, X) * res
    return out - v.project(D).scale(central)


def conjugation_check(
    spec: ModuleSpec, A: str, a: Mapping[int, Any], X: str, x: Mapping[int, Any], D: int,
    rhs: Callable[..., GradedVector] | None = None,
) -> dict[Any, GradedVector]:
    """Residual ``LHS - RHS`` on every basis vector of degree <= D (nonzero ones only)."""
    rhs = rhs or conjugation_rhs
    residuals = {}
    for d in range(D + 1):
        for mon in spec.basis(d):
            v = GradedVector.basis_vector(spec, mon, D)
            r = conjugate_loop(spec, A, a, X, x, v, D) - rhs(spec, A, a, X, x, v, D)
            if not r.is_zero():
                residuals[mon] = r
    return residuals


def virasoro_twist_residual(spec: ModuleSpec, A: str, a: Mapping[int, Any], n: int, D: int) -> dict[Any, GradedVector]:
    """Mode ``n`` of ``e^{-a} L(z) e^{a} - L(z) + da(z) A(z) - k/2 (A|A) (da)^2`` on degrees <= D."""
    da = {p - 1: p * c for p, c in a.items() if c != 0}
    sq = _series_mul(da, da, -(4 * D + 10))
    central = Q(spec.level, 2) * killing(spec, A, A) * sq.get(-n - 2, 0)
    residuals = {}
    for d in range(D + 1):
        for mon in spec.basis(d):
            v = GradedVector.basis_vector(spec, mon, D)
            lift = max(n, 0)
            w = exp_raising(spec, _loop_gens(A, a), v, D + lift, +1)
            w = sugawara_L(spec, n, w.with_cutoff(D + lift), upto=D)
            lhs = exp_raising(spec, _loop_gens(A, a), w, D, -1)
            rhs = sugawara_L(spec, n, v, upto=D)
            for j, c in da.items():
                rhs = rhs - apply_generator(spec, (A, n + 1 + j), v, D).scale(c)
            rhs = rhs + v.scale(central)
            r = lhs - rhs
            if not r.is_zero():
                residuals[mon] = r
    return residuals


# ---------------------------------------------------------------------------
# coordinate-change operators


def R_or_Q_operator(rho: TruncatedSeries, v: GradedVector, side: str, upto: int | None = None) -> GradedVector:
    """``R(rho) = exp(-sum_{i>0} v_i L_i) v0^{-L0}`` (side="R", rho at zero) or
    ``Q(rho) = exp(-sum_{j<0} v_j L_j)`` (side="Q", rho in Aut_+ at infinity)."""
    spec = v.spec
    if side == "R":
        if rho.at != "zero":
            raise AlgebraError("R needs rho expanded at zero")
        d = v.max_degree()
        vs = v_extract(rho, max(d, 1))
        v0 = vs[0]
        out: dict = {}
        for mon, c in v.terms.items():
            wt = spec.top_weight() + spec.degree(mon)
            out[mon] = c * _rational_power(v0, -wt)
        w = GradedVector(spec, out, v.cutoff)
        total = w
        term = w
        k = 0
        while term.terms:
            k += 1
            nxt = GradedVector(spec, {}, v.cutoff)
            for i in range(1, d + 1):
                if vs.get(i, 0) != 0:
                    nxt = nxt + apply_L(spec, i, term).scale(vs[i])
            term = nxt.scale(Q(-1, k))
            total = total + term
        return total
    if side == "Q":
        bound = v.cutoff if upto is None else upto
        vs = v_extract(rho, bound)
        if vs[0] != 1:
            raise AlgebraError("Q needs rho in Aut_+ (v0 = 1)")
        gens = [(("L", j), vs[j]) for j in range(-1, -bound - 1, -1) if vs.get(j, 0) != 0]
        return exp_raising(spec, gens, v.with_cutoff(bound), bound, -1)
    raise ValueError("side must be 'R' or 'Q'")


def _rational_power(b: Any, e: Fraction) -> Any:
    e = Q(e)
    if b == 1:
        return Q(1)
    if e.denominator == 1:
        return Q(b) ** int(e)
    raise AlgebraError("v0^{-L0} is irrational for non-integer weights unless v0 = 1")


# ---------------------------------------------------------------------------
# null vectors and annihilators


def kappa_to_ch(kappa: Fraction) -> tuple[Fraction, Fraction]:
    kappa = Q(kappa)
    if kappa == 0:
        raise ValueError("kappa must be nonzero")
    c = 1 - Q(3) * (kappa - 4) ** 2 / (2 * kappa)
    h = (6 - kappa) / (2 * kappa)
    return c, h


def singular_check(c: Fraction, h: Fraction, kappa: Fraction) -> tuple[GradedVector, GradedVector]:
    """``(L_1 chi, L_2 chi)`` for ``chi = (-2 L_{-2} + kappa/2 L_{-1}^2)|c,h>``."""
    spec = VirasoroVerma(Q(c), Q(h))
    top = GradedVector.top(spec, 2)
    chi = apply_L(spec, -2, top).scale(Q(-2)) + apply_word(spec, [("L", -1), ("L", -1)], top).scale(Q(kappa) / 2)
    return apply_L(spec, 1, chi), apply_L(spec, 2, chi)


def annihilator_operator(spec: ModuleSpec, kappa: Fraction, tau: Any) -> list[tuple[list[tuple], Fraction]]:
    """Words of ``-2L_{-2} + kappa/2 L_{-1}^2 + 1/2 sum_r tau_r X_r(-1)^2``."""
    words: list[tuple[list[tuple], Fraction]] = [
        ([("L", -2)], Q(-2)),
        ([("L", -1), ("L", -1)], Q(kappa) / 2),
    ]
    if isinstance(spec, HeisenbergFock):
        taus = list(tau)
        if len(taus) != spec.rank:
            raise ValueError("tau vector length must equal the rank")
        for i, t in enumerate(taus, start=1):
            words.append(([(f"H{i}", -1), (f"H{i}", -1)], Q(t) / 2))
    elif isinstance(spec, LatticeSl2):
        t = Q(tau)
        words.append(([("H", -1), ("H", -1)], t / 4))
        words.append(([("E", -1), ("F", -1)], t / 2))
        words.append(([("F", -1), ("E", -1)], t / 2))
    else:
        raise AlgebraError("annihilator needs an affine module")
    return words


def annihilator_check(spec: ModuleSpec, kappa: Fraction, tau: Any, top: GradedVector) -> GradedVector:
    out = GradedVector(spec, {}, max(top.cutoff, 2))
    t = top.with_cutoff(max(top.cutoff, 2))
    for word, c in annihilator_operator(spec, kappa, tau):
        out = out + apply_word(spec, word, t).scale(c)
    return out
