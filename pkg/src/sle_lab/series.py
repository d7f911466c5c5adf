"""Truncated formal Laurent series with explicit exactness windows.

A :class:`TruncatedSeries` stores coefficients on an exponent window
``[lo, hi]``.  Orientation ``"inf"`` (expansions at infinity, the default)
means exponents above ``hi`` are exactly zero and exponents below ``lo`` were
discarded.  Orientation ``"zero"`` is the mirror image and is used for
coordinate changes at the origin.  Every operation returns the largest window
on which its result is exact; reading a discarded coefficient raises.

Coefficients are generic ring elements.  Two scalar modes exist:
``"exact"`` (ints, Fractions, polynomial coefficients) and ``"complex"``
(Python/NumPy complex floats, including arrays of per-path values).  Series of
different modes never combine.

The module also hosts :class:`BiSeries` for two-variable kernels such as
``1/(g(w) - g(z))`` and a few NumPy kernels on dense power series in
``u = 1/z`` used by the simulator.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "SeriesError",
    "TruncationError",
    "SingularSeriesError",
    "SeriesDomainError",
    "ScalarModeError",
    "TruncatedSeries",
    "BiSeries",
    "compose",
    "comp_inverse",
    "mul_inverse",
    "schwarzian",
    "exp_series",
    "log_series",
    "v_extract",
    "exp_vector_field",
    "kernel_expand",
    "residue",
    "ps_mul",
    "ps_inv",
    "ps_exp",
    "ps_log",
]

NEG_INF = -(10**9)
POS_INF = 10**9


class SeriesError(Exception):
    """Base class for series errors."""


class TruncationError(SeriesError):
    """A coefficient outside the exact window was requested or produced."""


class SingularSeriesError(SeriesError):
    """Inversion of a series with vanishing leading coefficient."""


class SeriesDomainError(SeriesError):
    """Operation undefined for the given series (e.g. exp of a positive power)."""


class ScalarModeError(SeriesError):
    """Exact and floating scalars were mixed."""


# ---------------------------------------------------------------------------
# scalar helpers


def _is_zero(c: Any) -> bool:
    if isinstance(c, np.ndarray):
        return not np.any(c)
    iz = getattr(c, "is_zero", None)
    if iz is not None:
        return iz() if callable(iz) else bool(iz)
    return c == 0


def _infer_mode(values: Iterable[Any]) -> str | None:
    for c in values:
        if isinstance(c, np.ndarray):
            if np.issubdtype(c.dtype, np.inexact):
                return "complex"
            continue
        if isinstance(c, (float, complex, np.floating, np.complexfloating)):
            return "complex"
        if isinstance(c, (int, Fraction, np.integer)):
            continue
        return "exact"
    return None


def _rational(q: Fraction | int, mode: str) -> Any:
    """A rational constant in the given scalar mode."""
    if mode == "complex":
        return float(q)
    return Fraction(q)


def _inv_scalar(a: Any, mode: str) -> Any:
    if mode == "complex":
        return 1.0 / a
    if isinstance(a, (int, np.integer)):
        return Fraction(1, int(a))
    if isinstance(a, Fraction):
        return 1 / a
    inv = getattr(a, "inverse", None)
    if inv is None:
        raise SingularSeriesError(f"cannot invert exact scalar {a!r}")
    return inv()


# ---------------------------------------------------------------------------
# one-variable series


class TruncatedSeries:
    """Laurent series with an exactness window.  Treat as immutable."""

    __slots__ = ("var", "coeffs", "lo", "hi", "mode", "at")

    def __init__(
        self,
        coeffs: Mapping[int, Any],
        lo: int,
        hi: int,
        var: str = "z",
        mode: str | None = None,
        at: str = "inf",
    ) -> None:
        if at not in ("inf", "zero"):
            raise ValueError(f"orientation must be 'inf' or 'zero', got {at!r}")
        if lo > hi:
            raise TruncationError(f"empty window [{lo}, {hi}]")
        clean: dict[int, Any] = {}
        for n, c in coeffs.items():
            n = int(n)
            if n < lo or n > hi:
                if _is_zero(c):
                    continue
                raise TruncationError(f"exponent {n} outside window [{lo}, {hi}]")
            if not _is_zero(c):
                clean[n] = c
        if mode is None:
            mode = _infer_mode(clean.values()) or "exact"
        elif mode not in ("exact", "complex"):
            raise ValueError(f"unknown scalar mode {mode!r}")
        else:
            inferred = _infer_mode(clean.values())
            if inferred is not None and inferred != mode:
                raise ScalarModeError(f"{inferred} coefficients in a {mode} series")
        self.var = var
        self.coeffs = clean
        self.lo = lo
        self.hi = hi
        self.mode = mode
        self.at = at

    # -- constructors -----------------------------------------------------
    @classmethod
    def monomial(
        cls, n: int, c: Any = 1, lo: int | None = None, var: str = "z",
        mode: str | None = None, at: str = "inf", hi: int | None = None,
    ) -> "TruncatedSeries":
        if at == "inf":
            lo = NEG_INF if lo is None else lo
            hi = n if hi is None else hi
        else:
            hi = POS_INF if hi is None else hi
            lo = n if lo is None else lo
        return cls({n: c}, lo, hi, var, mode, at)

    @classmethod
    def constant(cls, c: Any, lo: int | None = None, **kw: Any) -> "TruncatedSeries":
        return cls.monomial(0, c, lo, **kw)

    @classmethod
    def identity(cls, var: str = "z", mode: str = "exact", at: str = "inf") -> "TruncatedSeries":
        return cls.monomial(1, 1, var=var, mode=mode, at=at)

    @classmethod
    def from_list(
        cls, top: int, values: Iterable[Any], var: str = "z", mode: str | None = None
    ) -> "TruncatedSeries":
        """``values[k]`` is the coefficient of ``var**(top - k)`` (orientation inf)."""
        vals = list(values)
        return cls({top - k: v for k, v in enumerate(vals)}, top - len(vals) + 1, top, var, mode)

    # -- access -----------------------------------------------------------
    def __getitem__(self, n: int) -> Any:
        return self.coeff(n)

    def coeff(self, n: int) -> Any:
        if self.at == "inf":
            if n > self.hi:
                return 0
            if n < self.lo:
                raise TruncationError(f"exponent {n} below exact window [{self.lo}, {self.hi}]")
        else:
            if n < self.lo:
                return 0
            if n > self.hi:
                raise TruncationError(f"exponent {n} above exact window [{self.lo}, {self.hi}]")
        return self.coeffs.get(n, 0)

    def _zero(self) -> Any:
        return 0

    def keys(self) -> list[int]:
        return sorted(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __repr__(self) -> str:
        terms = " + ".join(f"({self.coeffs[n]})*{self.var}^{n}" for n in sorted(self.coeffs, reverse=True))
        return f"TruncatedSeries[{self.var}, {self.at}, {self.lo}..{self.hi}]({terms or '0'})"

    # -- window helpers ---------------------------------------------------
    def _check(self, other: "TruncatedSeries") -> None:
        if self.var != other.var:
            raise SeriesError(f"variable mismatch {self.var} vs {other.var}")
        if self.at != other.at:
            raise SeriesError("orientation mismatch")
        if self.mode != other.mode:
            raise ScalarModeError(f"cannot combine {self.mode} and {other.mode} series")

    def _new(self, coeffs: Mapping[int, Any], lo: int, hi: int) -> "TruncatedSeries":
        lo = max(lo, NEG_INF)
        hi = min(hi, POS_INF)
        if lo > hi:
            raise TruncationError(f"no exact coefficients survive (window [{lo}, {hi}])")
        return TruncatedSeries(coeffs, lo, hi, self.var, self.mode, self.at)

    def with_window(self, lo: int | None = None, hi: int | None = None) -> "TruncatedSeries":
        """Shrink the exact window (never widens on the truncated side)."""
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        if self.at == "inf" and lo < self.lo:
            raise TruncationError("cannot widen window below discarded exponents")
        if self.at == "zero" and hi > self.hi:
            raise TruncationError("cannot widen window above discarded exponents")
        return self._new({n: c for n, c in self.coeffs.items() if lo <= n <= hi}, lo, hi)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other: Any) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            self._check(other)
            return other
        if self.mode == "exact" and _infer_mode([other]) == "complex":
            raise ScalarModeError("float scalar combined with exact series")
        return TruncatedSeries.monomial(0, other, var=self.var, mode=self.mode, at=self.at)

    def __add__(self, other: Any) -> "TruncatedSeries":
        o = self._coerce(other)
        out = dict(self.coeffs)
        for n, c in o.coeffs.items():
            out[n] = out[n] + c if n in out else c
        if self.at == "inf":
            lo, hi = max(self.lo, o.lo), max(self.hi, o.hi)
        else:
            lo, hi = min(self.lo, o.lo), min(self.hi, o.hi)
        return self._new({n: c for n, c in out.items() if lo <= n <= hi}, lo, hi)

    __radd__ = __add__

    def __neg__(self) -> "TruncatedSeries":
        return self._new({n: -c for n, c in self.coeffs.items()}, self.lo, self.hi)

    def __sub__(self, other: Any) -> "TruncatedSeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "TruncatedSeries":
        return self._coerce(other) - self

    def scale(self, c: Any) -> "TruncatedSeries":
        if self.mode == "exact" and _infer_mode([c]) == "complex":
            raise ScalarModeError("float scalar combined with exact series")
        return self._new({n: c * v for n, v in self.coeffs.items()}, self.lo, self.hi)

    def __mul__(self, other: Any) -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            return self.scale(other)
        self._check(other)
        if self.at == "inf":
            lo = max(self.lo + other.hi, other.lo + self.hi)
            hi = self.hi + other.hi
        else:
            lo = self.lo + other.lo
            hi = min(self.hi + other.lo, other.hi + self.lo)
        out: dict[int, Any] = {}
        for n1, c1 in self.coeffs.items():
            for n2, c2 in other.coeffs.items():
                n = n1 + n2
                if n < lo or n > hi:
                    continue
                p = c1 * c2
                out[n] = out[n] + p if n in out else p
        return self._new(out, lo, hi)

    def __rmul__(self, other: Any) -> "TruncatedSeries":
        return self.scale(other)

    def __pow__(self, n: int) -> "TruncatedSeries":
        if n < 0:
            return mul_inverse(self) ** (-n)
        result = TruncatedSeries.monomial(0, 1, var=self.var, mode=self.mode, at=self.at)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def shift(self, k: int) -> "TruncatedSeries":
        """Multiply by ``var**k``."""
        return self._new({n + k: c for n, c in self.coeffs.items()}, self.lo + k, self.hi + k)

    def deriv(self) -> "TruncatedSeries":
        return self._new(
            {n - 1: c * n for n, c in self.coeffs.items() if n != 0}, self.lo - 1, self.hi - 1
        )

    def map_coeffs(self, fn: Callable[[Any], Any], mode: str | None = None) -> "TruncatedSeries":
        return TruncatedSeries(
            {n: fn(c) for n, c in self.coeffs.items()}, self.lo, self.hi, self.var,
            mode or self.mode, self.at,
        )

    def rename(self, var: str) -> "TruncatedSeries":
        return TruncatedSeries(self.coeffs, self.lo, self.hi, var, self.mode, self.at)

    def evaluate(self, x: Any) -> Any:
        """Sum of the exact coefficients at ``x`` (tail beyond the window ignored)."""
        total: Any = 0
        for n, c in self.coeffs.items():
            total = total + c * x**n
        return total

    def equals(self, other: "TruncatedSeries", lo: int | None = None, hi: int | None = None) -> bool:
        """Coefficientwise equality on the common exact window (optionally restricted)."""
        self._check(other)
        if self.at == "inf":
            a, b = max(self.lo, other.lo), max(self.hi, other.hi)
        else:
            a, b = min(self.lo, other.lo), min(self.hi, other.hi)
        if lo is not None:
            a = max(a, lo)
        if hi is not None:
            b = min(b, hi)
        keys = {n for n in (*self.coeffs, *other.coeffs) if a <= n <= b}
        return all(_is_zero(self.coeff(n) - other.coeff(n)) for n in keys)


# ---------------------------------------------------------------------------
# operations


def _leading(f: TruncatedSeries) -> int:
    if not f.coeffs:
        raise SingularSeriesError("series is zero on its exact window")
    return max(f.coeffs) if f.at == "inf" else min(f.coeffs)


def mul_inverse(f: TruncatedSeries) -> TruncatedSeries:
    """Multiplicative inverse ``1/f``."""
    t = _leading(f)
    if f.at == "inf":
        depth = t - f.lo
        sign = -1
    else:
        depth = f.hi - t
        sign = 1
    a = f.coeffs[t]
    if _is_zero(a):
        raise SingularSeriesError("zero leading coefficient")
    ainv = _inv_scalar(a, f.mode)
    g = [f.coeffs.get(t + sign * k, 0) * ainv for k in range(depth + 1)]
    q: list[Any] = [_rational(1, f.mode)]
    for k in range(1, depth + 1):
        acc: Any = 0
        for j in range(1, k + 1):
            if not _is_zero(g[j]):
                acc = acc + g[j] * q[k - j]
        q.append(-acc)
    coeffs = {-t + sign * k: q[k] * ainv for k in range(depth + 1)}
    if f.at == "inf":
        return f._new(coeffs, -t - depth, -t)
    return f._new(coeffs, -t, -t + depth)


def _is_aut(g: TruncatedSeries) -> None:
    if g.at == "inf":
        if g.hi > 1 or g.lo > 1 or not _is_zero(g.coeff(1) - 1):
            raise SeriesDomainError("expected z + lower order terms with unit leading coefficient")
    else:
        if g.lo < 1 or _is_zero(g.coeff(1)):
            raise SeriesDomainError("expected a*w + higher order terms with a != 0")


def compose(f: TruncatedSeries, g: TruncatedSeries) -> TruncatedSeries:
    """``f(g(z))`` for ``g`` a coordinate change (z + ... at infinity, a*w + ... at zero)."""
    if f.at != g.at:
        raise SeriesError("orientation mismatch")
    if f.mode != g.mode:
        raise ScalarModeError("cannot compose series of different scalar modes")
    _is_aut(g)
    keys = sorted(f.coeffs)
    if not keys:
        out = TruncatedSeries({}, f.lo, f.hi, g.var, f.mode, f.at)
        return out
    ginv = mul_inverse(g) if keys[0] < 0 else None
    total: TruncatedSeries | None = None
    pos_cache: dict[int, TruncatedSeries] = {}
    for n in keys:
        if n >= 0:
            if n not in pos_cache:
                pos_cache[n] = g**n
            term = pos_cache[n]
        else:
            term = ginv ** (-n)  # type: ignore[operator]
        term = term.scale(f.coeffs[n])
        total = term if total is None else total + term
    assert total is not None
    if f.at == "inf":
        # unknown coefficients of f below f.lo contribute at exponents < f.lo
        lo, hi = max(total.lo, f.lo), total.hi
    else:
        lo, hi = total.lo, min(total.hi, f.hi)
    if lo > hi:
        raise TruncationError("composition window underflow: f is truncated too shallowly")
    return total.with_window(lo, hi)


def comp_inverse(f: TruncatedSeries) -> TruncatedSeries:
    """Compositional inverse of ``f = z + b0 + b_{-1} z^-1 + ...``."""
    if f.at != "inf":
        raise SeriesDomainError("comp_inverse is implemented for expansions at infinity")
    _is_aut(f)
    z = TruncatedSeries.monomial(1, 1, lo=f.lo, var=f.var, mode=f.mode)
    tail = f - z  # exponents <= 0
    h = z
    # each iteration fixes one more coefficient
    for _ in range(2 - f.lo + 1):
        h_new = z - compose(tail, h)
        if h_new.equals(h):
            h = h_new
            break
        h = h_new
    return h.with_window(max(h.lo, f.lo), h.hi)


def _clip_to(s: TruncatedSeries, ref: TruncatedSeries) -> TruncatedSeries | None:
    """Restrict ``s`` to the truncated side of ``ref``; None if nothing survives."""
    if s.at == "inf":
        if s.hi < ref.lo:
            return None
        return s.with_window(lo=max(s.lo, ref.lo))
    if s.lo > ref.hi:
        return None
    return s.with_window(hi=min(s.hi, ref.hi))


def _subleading(f: TruncatedSeries) -> bool:
    return all((n < 0 if f.at == "inf" else n > 0) for n in f.coeffs)


def exp_series(f: TruncatedSeries) -> TruncatedSeries:
    """Termwise exponential of a series with strictly negative exponents (positive at zero)."""
    if not _subleading(f):
        raise SeriesDomainError("exp_series needs strictly subleading exponents (no constant or growing terms)")
    one = TruncatedSeries.monomial(0, _rational(1, f.mode), var=f.var, mode=f.mode, at=f.at)
    total = _clip_to(one, f) or one
    term: TruncatedSeries | None = total
    k = 0
    while term is not None and term.coeffs:
        k += 1
        term = _clip_to((term * f).scale(_rational(Fraction(1, k), f.mode)), f)
        if term is not None:
            total = total + term
    return total


def log_series(f: TruncatedSeries) -> TruncatedSeries:
    """``log f`` for ``f = 1 + (strictly subleading terms)``."""
    if not _is_zero(f.coeff(0) - 1):
        raise SeriesDomainError("log_series needs constant term 1")
    g = f - TruncatedSeries.monomial(0, _rational(1, f.mode), var=f.var, mode=f.mode, at=f.at)
    if not _subleading(g):
        raise SeriesDomainError("log_series needs 1 + strictly subleading terms")
    total = g
    term: TruncatedSeries | None = g
    k = 1
    while term is not None and term.coeffs:
        k += 1
        term = _clip_to(term * g, f)
        if term is not None:
            total = total + term.scale(_rational(Fraction((-1) ** (k + 1), k), f.mode))
    return total


def schwarzian(f: TruncatedSeries) -> TruncatedSeries:
    """``f'''/f' - 3/2 (f''/f')**2``."""
    d1 = f.deriv()
    d2 = d1.deriv()
    d3 = d2.deriv()
    inv = mul_inverse(d1)
    r = d2 * inv
    return d3 * inv - (r * r).scale(_rational(Fraction(3, 2), f.mode))


def residue(f: TruncatedSeries) -> Any:
    """Coefficient of ``var**-1``."""
    return f.coeff(-1)


def exp_vector_field(v: Mapping[int, Any], phi: TruncatedSeries, bound: int) -> TruncatedSeries:
    """``exp(V) phi`` for ``V = sum_j v_j var**(j+1) d/dvar``, kept to ``bound``.

    At infinity the ``v_j`` (j < 0) lower exponents and the result is kept for
    exponents >= bound; at zero they raise and exponents <= bound are kept.
    """
    mode = phi.mode
    inf = phi.at == "inf"
    if inf:
        field = TruncatedSeries({j + 1: c for j, c in v.items()}, NEG_INF, 0, phi.var, mode)
    else:
        field = TruncatedSeries({j + 1: c for j, c in v.items()}, 2, POS_INF, phi.var, mode, "zero")

    def clip(s: TruncatedSeries) -> TruncatedSeries | None:
        if inf:
            if s.hi < bound:
                return None
            return s.with_window(lo=max(s.lo, bound))
        if s.lo > bound:
            return None
        return s.with_window(hi=min(s.hi, bound))

    total = clip(phi)
    if total is None:
        raise TruncationError("bound excludes the whole series")
    term: TruncatedSeries | None = total
    k = 0
    while term is not None and term.coeffs:
        k += 1
        term = clip((field * term.deriv()).scale(_rational(Fraction(1, k), mode)))
        if term is not None:
            total = total + term
    return total


def v_extract(rho: TruncatedSeries, N: int) -> dict[int, Any]:
    """Coefficients of ``rho`` as the flow of a vector field.

    At zero (``rho(w) = v0 w + ...``) returns ``{0: v0, 1: v1, ..., N: vN}`` with
    ``rho = exp(sum_{i>0} v_i w^{i+1} d_w) (v0 w)``.
    At infinity (``rho(z) = z + r0 + ...``) returns ``{0: 1, -1: v_{-1}, ..., -N: v_{-N}}``
    with ``rho = exp(sum_{j<0} v_j z^{j+1} d_z) z``.
    """
    mode = rho.mode
    if rho.at == "zero":
        if rho.lo < 1:
            raise SeriesDomainError("rho must vanish at 0")
        v0 = rho.coeff(1)
        if _is_zero(v0):
            raise SingularSeriesError("rho'(0) = 0")
        if rho.hi < N + 1:
            raise TruncationError(f"need coefficients up to w^{N + 1}")
        target = rho.scale(_inv_scalar(v0, mode)).with_window(hi=N + 1)
        w = TruncatedSeries.monomial(1, _rational(1, mode), var=rho.var, mode=mode, at="zero", hi=N + 1)
        vs: dict[int, Any] = {}
        for i in range(1, N + 1):
            cur = exp_vector_field(vs, w, N + 1)
            vs[i] = target.coeff(i + 1) - cur.coeff(i + 1)
        out = {0: v0}
        out.update(vs)
        return out
    _is_aut(rho)
    if rho.lo > 1 - N:
        raise TruncationError(f"need coefficients down to z^{1 - N}")
    target = rho.with_window(lo=1 - N)
    z = TruncatedSeries.monomial(1, _rational(1, mode), lo=1 - N, var=rho.var, mode=mode)
    vs = {}
    for j in range(-1, -N - 1, -1):
        cur = exp_vector_field(vs, z, 1 - N)
        vs[j] = target.coeff(j + 1) - cur.coeff(j + 1)
    out = {0: _rational(1, mode)}
    out.update(vs)
    return out


# ---------------------------------------------------------------------------
# two-variable series


class BiSeries:
    """Series in two variables ``(a, b)`` expanded in a tagged region.

    ``region == "a>b"`` means ``|a| > |b|``; the dominant variable is ``a``.
    Exactness is tracked on two axes that are bounded above for every factor:
    the total degree ``D = pa + pb`` and the power ``P`` of the dominant
    variable.  Terms with ``D >= Dlo`` and ``P >= Plo`` are exact.
    """

    __slots__ = ("vars", "region", "terms", "Dlo", "Dhi", "Plo", "Phi", "mode")

    def __init__(
        self, vars: tuple[str, str], region: str, terms: Mapping[tuple[int, int], Any],
        Dlo: int, Dhi: int, Plo: int, Phi: int, mode: str = "exact",
    ) -> None:
        if region not in ("a>b", "b>a"):
            raise ValueError("region must be 'a>b' or 'b>a'")
        self.vars = vars
        self.region = region
        self.Dlo, self.Dhi, self.Plo, self.Phi = Dlo, Dhi, Plo, Phi
        self.mode = mode
        clean = {}
        for (pa, pb), c in terms.items():
            D, P = pa + pb, self._P(pa, pb)
            if D < Dlo or P < Plo or _is_zero(c):
                continue
            if D > Dhi or P > Phi:
                raise TruncationError("term above declared bounds")
            clean[(pa, pb)] = c
        self.terms = clean

    def _P(self, pa: int, pb: int) -> int:
        return pa if self.region == "a>b" else pb

    @property
    def region_label(self) -> str:
        a, b = self.vars
        return f"|{a}|>|{b}|" if self.region == "a>b" else f"|{b}|>|{a}|"

    def __repr__(self) -> str:
        return f"BiSeries[{self.vars}, {self.region_label}, {len(self.terms)} terms]"

    def _check(self, o: "BiSeries") -> None:
        if self.vars != o.vars:
            raise SeriesError("variable mismatch")
        if self.region != o.region:
            raise SeriesError(
                f"region mismatch: {self.region_label} vs {o.region_label}; re-expansion is a different value"
            )
        if self.mode != o.mode:
            raise ScalarModeError("cannot combine series of different scalar modes")

    @classmethod
    def lift(cls, f: TruncatedSeries, vars: tuple[str, str], region: str) -> "BiSeries":
        """Embed a one-variable series (in either of ``vars``) in a region."""
        if f.at != "inf":
            raise SeriesDomainError("only expansions at infinity can be lifted")
        which = vars.index(f.var)
        dominant = 0 if region == "a>b" else 1
        terms = {((n, 0) if which == 0 else (0, n)): c for n, c in f.coeffs.items()}
        if which == dominant:
            return cls(vars, region, terms, f.lo, f.hi, f.lo, f.hi, f.mode)
        return cls(vars, region, terms, f.lo, f.hi, NEG_INF, 0, f.mode)

    @classmethod
    def geometric(cls, vars: tuple[str, str], region: str, depth: int, mode: str = "exact") -> "BiSeries":
        """``1/(a - b)`` expanded in the region, dominant power down to ``-depth``."""
        one = _rational(1, mode)
        terms = {}
        for m in range(depth):
            if region == "a>b":
                terms[(-m - 1, m)] = one
            else:
                terms[(m, -m - 1)] = -one
        return cls(vars, region, terms, NEG_INF, -1, -depth, -1, mode)

    def __add__(self, o: "BiSeries") -> "BiSeries":
        self._check(o)
        out = dict(self.terms)
        for k, c in o.terms.items():
            out[k] = out[k] + c if k in out else c
        return BiSeries(
            self.vars, self.region, out, max(self.Dlo, o.Dlo), max(self.Dhi, o.Dhi),
            max(self.Plo, o.Plo), max(self.Phi, o.Phi), self.mode,
        )

    def __neg__(self) -> "BiSeries":
        return BiSeries(self.vars, self.region, {k: -c for k, c in self.terms.items()},
                        self.Dlo, self.Dhi, self.Plo, self.Phi, self.mode)

    def __sub__(self, o: "BiSeries") -> "BiSeries":
        return self + (-o)

    def scale(self, c: Any) -> "BiSeries":
        return BiSeries(self.vars, self.region, {k: c * v for k, v in self.terms.items()},
                        self.Dlo, self.Dhi, self.Plo, self.Phi, self.mode)

    def __mul__(self, o: Any) -> "BiSeries":
        if isinstance(o, TruncatedSeries):
            o = BiSeries.lift(o, self.vars, self.region)
        if not isinstance(o, BiSeries):
            return self.scale(o)
        self._check(o)
        Dlo = max(self.Dlo + o.Dhi, o.Dlo + self.Dhi)
        Plo = max(self.Plo + o.Phi, o.Plo + self.Phi)
        out: dict[tuple[int, int], Any] = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in o.terms.items():
                pa, pb = a1 + a2, b1 + b2
                if pa + pb < Dlo or self._P(pa, pb) < Plo:
                    continue
                p = c1 * c2
                k = (pa, pb)
                out[k] = out[k] + p if k in out else p
        return BiSeries(self.vars, self.region, out, Dlo, self.Dhi + o.Dhi, Plo, self.Phi + o.Phi, self.mode)

    def deriv(self, var: str) -> "BiSeries":
        i = self.vars.index(var)
        out = {}
        for (pa, pb), c in self.terms.items():
            p = (pa, pb)[i]
            if p == 0:
                continue
            out[(pa - 1, pb) if i == 0 else (pa, pb - 1)] = c * p
        dominant = 0 if self.region == "a>b" else 1
        dP = 1 if i == dominant else 0
        return BiSeries(self.vars, self.region, out, self.Dlo - 1, self.Dhi - 1,
                        self.Plo - dP, self.Phi - dP, self.mode)

    def residue(self, var: str) -> TruncatedSeries:
        """``Res_var``; returns a one-variable series in the other variable."""
        i = self.vars.index(var)
        other = self.vars[1 - i]
        dominant = 0 if self.region == "a>b" else 1
        out = {}
        for (pa, pb), c in self.terms.items():
            if (pa, pb)[i] == -1:
                out[(pa, pb)[1 - i]] = c
        # pick p_var = -1: remaining power q has D = q - 1
        if i == dominant:
            if self.Plo > -1:
                raise TruncationError(f"residue in {var} needs dominant power -1 in window")
            lo, hi = self.Dlo + 1, self.Dhi + 1
        else:
            lo = max(self.Dlo + 1, self.Plo)
            hi = min(self.Dhi + 1, self.Phi)
        return TruncatedSeries({n: c for n, c in out.items() if n >= lo}, lo, max(hi, lo), other, self.mode)

    def coefficient(self, pa: int, pb: int) -> Any:
        if pa + pb < self.Dlo or self._P(pa, pb) < self.Plo:
            raise TruncationError("coefficient outside exact window")
        return self.terms.get((pa, pb), 0)


def kernel_expand(
    g: TruncatedSeries,
    region: str,
    other: TruncatedSeries | None = None,
    vars: tuple[str, str] = ("w", "z"),
    depth: int | None = None,
) -> BiSeries:
    """``1/(g(a) - other(b))`` in the tagged region, with ``(a, b) = vars``.

    ``other`` defaults to ``g``; pass the identity to get ``1/(g(a) - b)``.
    The expansion is ``(a-b)^{-1} * sum_k (-Delta)^k`` with
    ``Delta = (G(a) - H(b))/(a - b)`` and ``G = g - id``, ``H = other - id``.
    ``depth`` bounds the dominant-variable power (defaults from g's window).
    """
    _is_aut(g)
    if other is None:
        other = g
    _is_aut(other)
    mode = g.mode
    a, b = vars
    if depth is None:
        depth = 2 - min(g.lo, other.lo) + 1
    ga = g.rename(a)
    hb = other.rename(b)
    G = BiSeries.lift(ga - TruncatedSeries.monomial(1, _rational(1, mode), var=a, mode=mode), vars, region)
    H = BiSeries.lift(hb - TruncatedSeries.monomial(1, _rational(1, mode), var=b, mode=mode), vars, region)
    inv = BiSeries.geometric(vars, region, depth, mode)
    delta = (G - H) * inv
    total = inv
    term = inv
    while True:
        term = -(term * delta)
        if not term.terms:
            break
        total = total + term
    # the sum is exact only down to the truncation of Delta's powers
    return total


# ---------------------------------------------------------------------------
# dense batched power series in u = 1/var
#
# Arrays have shape (..., K); entry [..., k] is the coefficient of u**k.
# Truncation at u**(K-1) is exact for products of power series, so these
# kernels need no window bookkeeping.


def ps_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = a.shape[-1]
    # coefficient axis first keeps the inner slices contiguous
    at = np.ascontiguousarray(np.moveaxis(a, -1, 0))
    bt = np.ascontiguousarray(np.moveaxis(b, -1, 0))
    out = np.zeros((K,) + np.broadcast_shapes(at.shape[1:], bt.shape[1:]), dtype=np.result_type(a, b))
    for i in range(K):
        if np.any(at[i]):
            out[i:] += at[i] * bt[: K - i]
    return np.moveaxis(out, 0, -1)


def ps_inv(a: np.ndarray) -> np.ndarray:
    """``1/a`` for ``a[..., 0] != 0``."""
    K = a.shape[-1]
    a0inv = 1.0 / a[..., 0]
    q = np.zeros_like(a, dtype=np.result_type(a, 1.0))
    q[..., 0] = a0inv
    for k in range(1, K):
        acc = np.einsum("...j,...j->...", a[..., 1 : k + 1], q[..., k - 1 :: -1][..., :k])
        q[..., k] = -acc * a0inv
    return q


def ps_exp(a: np.ndarray) -> np.ndarray:
    """``exp(a)`` for ``a[..., 0] == 0``; uses ``k y_k = sum_j j a_j y_{k-j}``."""
    K = a.shape[-1]
    y = np.zeros_like(a, dtype=np.result_type(a, 1.0))
    y[..., 0] = 1.0
    ja = a * np.arange(K)
    for k in range(1, K):
        y[..., k] = np.einsum("...j,...j->...", ja[..., 1 : k + 1], y[..., k - 1 :: -1][..., :k]) / k
    return y


def ps_log(d: np.ndarray) -> np.ndarray:
    """``log(d)`` for ``d[..., 0] == 1``."""
    K = d.shape[-1]
    y = np.zeros_like(d, dtype=np.result_type(d, 1.0))
    jy = np.zeros_like(y)
    for k in range(1, K):
        acc = np.einsum("...j,...j->...", jy[..., 1:k], d[..., k - 1 : 0 : -1]) if k > 1 else 0.0
        y[..., k] = (k * d[..., k] - acc) / k
        jy[..., k] = k * y[..., k]
    return y
