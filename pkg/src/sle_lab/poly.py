"""Sparse polynomials over Q in the martingale variables x, g_n, e_n, h_n, f_n.

Variables carry a weight (x: 1, g_n: 1 - n, e_n/h_n/f_n: -n).  A ring fixes
the windows: index ranges, total degree in the g/e/h/f variables, the power
of x and a weight cap.  Monomials outside the windows generate an ideal, so
every product is computed exactly in the quotient; dropped monomials are
counted on the ring.

Monomials are packed into one integer: 5 bits per exponent, then a weight
field and a degree field, so multiplying monomials is integer addition.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Iterable, Iterator, Mapping

__all__ = ["PolyRing", "Poly", "Var"]

Var = tuple[str, int]

_BITS = 5
_MASK = (1 << _BITS) - 1
_WBITS = 7
_WMASK = (1 << _WBITS) - 1


def var_weight(v: Var) -> int:
    kind, n = v
    if kind == "x":
        return 1
    if kind == "g":
        return 1 - n
    return -n


class PolyRing:
    """Truncated polynomial ring; see the module docstring."""

    def __init__(self, n_min: int = -6, d_max: int = 3, J: int = 6, w_max: int | None = None) -> None:
        if n_min > -1:
            raise ValueError("n_min must be <= -1")
        if not (0 <= d_max <= 15 and 0 <= J <= 15):
            raise ValueError("d_max and J must lie in [0, 15]")
        self.n_min, self.d_max, self.J = n_min, d_max, J
        self.w_max = max(-n_min, J) + 2 if w_max is None else w_max
        if self.w_max > 60:
            raise ValueError("weight cap too large for the monomial packing")
        self.vars: list[Var] = [("x", 0)]
        self.vars += [("g", n) for n in range(0, n_min, -1)]
        self.vars += [(k, n) for k in "ehf" for n in range(-1, n_min - 1, -1)]
        self.slot = {v: i for i, v in enumerate(self.vars)}
        self._wshift = _BITS * len(self.vars)
        self._dshift = self._wshift + _WBITS
        self.unit: dict[Var, int] = {}
        for v, i in self.slot.items():
            deg = 0 if v[0] == "x" else 1
            self.unit[v] = (1 << (_BITS * i)) | (var_weight(v) << self._wshift) | (deg << self._dshift)
        self.dropped = 0

    def __repr__(self) -> str:
        return f"PolyRing(n_min={self.n_min}, d_max={self.d_max}, J={self.J}, w_max={self.w_max})"

    # -- key helpers ------------------------------------------------------
    def ok(self, k: int) -> bool:
        return (
            (k >> self._dshift) <= self.d_max
            and ((k >> self._wshift) & _WMASK) <= self.w_max
            and (k & _MASK) <= self.J
        )

    def degree(self, k: int) -> int:
        return k >> self._dshift

    def weight(self, k: int) -> int:
        return (k >> self._wshift) & _WMASK

    def exponent(self, k: int, v: Var) -> int:
        return (k >> (_BITS * self.slot[v])) & _MASK

    def decode(self, k: int) -> dict[Var, int]:
        out = {}
        for i, v in enumerate(self.vars):
            a = (k >> (_BITS * i)) & _MASK
            if a:
                out[v] = a
        return out

    def encode(self, exps: Mapping[Var, int]) -> int | None:
        k = 0
        for v, a in exps.items():
            if a < 0:
                raise ValueError("negative exponent")
            if a == 0:
                continue
            if v not in self.slot:
                return None
            k += a * self.unit[v]
        return k if self.ok(k) else None

    # -- constructors -----------------------------------------------------
    def zero(self) -> "Poly":
        return Poly(self, {})

    def const(self, c: Any) -> "Poly":
        c = Fraction(c)
        return Poly(self, {0: c} if c else {})

    def var(self, kind: str, n: int = 0) -> "Poly":
        """The variable, or zero if it lies outside the index window."""
        v = (kind, n)
        if v not in self.slot:
            return self.zero()
        k = self.unit[v]
        return Poly(self, {k: Fraction(1)} if self.ok(k) else {})

    def monomial(self, exps: Mapping[Var, int], c: Any = 1) -> "Poly":
        k = self.encode(exps)
        c = Fraction(c)
        return Poly(self, {k: c} if k is not None and c else {})

    def has(self, v: Var) -> bool:
        return v in self.slot

    def variables(self, kinds: Iterable[str] = "xgehf") -> list[Var]:
        return [v for v in self.vars if v[0] in kinds]


class Poly:
    """Element of a :class:`PolyRing`.  Treat as immutable."""

    __slots__ = ("ring", "t")

    def __init__(self, ring: PolyRing, terms: dict[int, Fraction]) -> None:
        self.ring = ring
        self.t = terms

    # -- arithmetic -------------------------------------------------------
    def _lift(self, o: Any) -> "Poly":
        if isinstance(o, Poly):
            if o.ring is not self.ring:
                raise ValueError("polynomials from different rings")
            return o
        if isinstance(o, (int, Fraction)):
            return self.ring.const(o)
        raise TypeError(f"cannot combine Poly with {type(o).__name__}")

    def __add__(self, o: Any) -> "Poly":
        try:
            o = self._lift(o)
        except TypeError:
            return NotImplemented
        out = dict(self.t)
        for k, c in o.t.items():
            s = out.get(k, 0) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return Poly(self.ring, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(self.ring, {k: -c for k, c in self.t.items()})

    def __sub__(self, o: Any) -> "Poly":
        try:
            o = self._lift(o)
        except TypeError:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, o: Any) -> "Poly":
        return (-self) + o

    def scale(self, c: Any) -> "Poly":
        c = Fraction(c)
        if not c:
            return self.ring.zero()
        return Poly(self.ring, {k: c * v for k, v in self.t.items()})

    def __mul__(self, o: Any) -> "Poly":
        if isinstance(o, (int, Fraction)):
            return self.scale(o)
        if not isinstance(o, Poly):
            return NotImplemented
        o = self._lift(o)
        a, b = (self.t, o.t) if len(self.t) <= len(o.t) else (o.t, self.t)
        ring = self.ring
        ds, ws, dmax, wmax, J = ring._dshift, ring._wshift, ring.d_max, ring.w_max, ring.J
        out: dict[int, Fraction] = {}
        dropped = 0
        for k1, c1 in a.items():
            for k2, c2 in b.items():
                k = k1 + k2
                if (k >> ds) > dmax or ((k >> ws) & _WMASK) > wmax or (k & _MASK) > J:
                    dropped += 1
                    continue
                out[k] = out.get(k, 0) + c1 * c2
        ring.dropped += dropped
        return Poly(ring, {k: c for k, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        out = self.ring.const(1)
        for _ in range(n):
            out = out * self
        return out

    def inverse(self) -> "Poly":
        if not self.is_constant() or self.is_zero():
            raise ZeroDivisionError("only nonzero constants are invertible")
        return self.ring.const(1 / self.t[0])

    # -- predicates -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.t

    def is_constant(self) -> bool:
        return all(k == 0 for k in self.t)

    def __eq__(self, o: object) -> bool:
        if isinstance(o, (int, Fraction)):
            o = self.ring.const(o)
        if not isinstance(o, Poly):
            return NotImplemented
        return self.t == o.t

    def __hash__(self) -> int:
        return hash(frozenset(self.t.items()))

    def __bool__(self) -> bool:
        return bool(self.t)

    # -- calculus and evaluation -----------------------------------------
    def deriv(self, v: Var) -> "Poly":
        ring = self.ring
        if v not in ring.slot:
            return ring.zero()
        shift = _BITS * ring.slot[v]
        u = ring.unit[v]
        out = {}
        for k, c in self.t.items():
            a = (k >> shift) & _MASK
            if a:
                out[k - u] = c * a
        return Poly(ring, out)

    def variables(self) -> set[Var]:
        seen = set()
        for k in self.t:
            seen.update(self.ring.decode(k))
        return seen

    def evaluate(self, values: Mapping[Var, Any], default: Any = 0) -> Any:
        """Substitute numbers (or Fractions); missing variables take ``default``."""
        total: Any = 0
        for k, c in self.t.items():
            term: Any = c
            for v, a in self.ring.decode(k).items():
                term = term * values.get(v, default) ** a
            total = total + term
        return total

    def terms(self) -> Iterator[tuple[dict[Var, int], Fraction]]:
        for k, c in self.t.items():
            yield self.ring.decode(k), c

    def filter(self, keep) -> "Poly":
        """Sub-polynomial of monomials whose packed key satisfies ``keep``."""
        return Poly(self.ring, {k: c for k, c in self.t.items() if keep(k)})

    def max_abs(self) -> Fraction:
        return max((abs(c) for c in self.t.values()), default=Fraction(0))

    def __repr__(self) -> str:
        if not self.t:
            return "0"
        parts = []
        for k in sorted(self.t):
            mon = "*".join(
                (f"{v[0]}{v[1]}" if v[0] != "x" else "x") + (f"^{a}" if a > 1 else "")
                for v, a in self.ring.decode(k).items()
            )
            parts.append(f"{self.t[k]}" + (f"*{mon}" if mon else ""))
        return " + ".join(parts)
