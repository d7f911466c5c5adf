"""Closed-form local martingales, Monte Carlo drift certification and probes.

Observables are written once against a tiny backend (``mul``, ``exp``) so the
same formula evaluates either at a numeric point ``z`` or as a batched power
series in ``u = 1/z`` (for coefficient probes).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt
from typing import Callable, Iterable, Sequence

import numpy as np

from . import algebra as alg
from .sde import PathConfig, SLEPathState, driver_for, run_paths
from .series import BiSeries, TruncatedSeries, kernel_expand, ps_exp, ps_inv, ps_mul

KINDS = (
    "VirasoroBB",
    "HeisenbergCurrent",
    "HeisenbergVirasoro",
    "Sl2Current",
    "Sl2Virasoro",
    "HeisenbergResidueIdentity",
)


class ObservableError(ValueError):
    pass


@dataclass(frozen=True)
class ObservableSpec:
    """One closed-form martingale and where to probe it.

    ``bra``/``ket`` are +1 for ``v_Lambda`` and -1 for ``v_{-Lambda}``.
    Exactly one of ``z`` (numeric point, ``|z| >= z_min``) and ``coeff``
    (coefficient of ``z^{-coeff}``) is used; ``coeff`` wins when set.
    ``variant="printed"`` selects the sl2 current formulas exactly as
    printed, five of which are not matrix elements of the module (kept for
    comparison only).
    """

    kind: str
    X: str | None = None
    bra: int = 1
    ket: int = 1
    index: int = 1
    z: complex = 4.0
    coeff: int | None = None
    z_min: float = 3.0
    c: Fraction = Fraction(0)
    h: Fraction = Fraction(0)
    lam: Fraction = Fraction(0)
    rank: int = 1
    variant: str = "corrected"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ObservableError(f"unknown observable kind {self.kind!r}")
        if self.kind in ("Sl2Current",) and self.X not in ("E", "H", "F"):
            raise ObservableError("Sl2Current needs X in {E, H, F}")
        if self.bra not in (1, -1) or self.ket not in (1, -1):
            raise ObservableError("bra and ket must be +1 or -1")
        if self.coeff is None and abs(self.z) < self.z_min:
            raise ObservableError(f"probe |z| = {abs(self.z)} below z_min = {self.z_min}")
        if self.variant not in ("corrected", "printed"):
            raise ObservableError("variant must be 'corrected' or 'printed'")

    @property
    def id(self) -> str:
        sgn = lambda s: "+" if s > 0 else "-"  # noqa: E731
        base = {
            "VirasoroBB": f"virasoro_bb_c={self.c}_h={self.h}",
            "HeisenbergCurrent": f"heis_H{self.index}",
            "HeisenbergVirasoro": "heis_L",
            "Sl2Current": f"sl2_{self.X}_{sgn(self.bra)}{sgn(self.ket)}",
            "Sl2Virasoro": f"sl2_L_{sgn(self.bra)}{sgn(self.ket)}",
            "HeisenbergResidueIdentity": "heis_residue",
        }[self.kind]
        return base + ("_printed" if self.variant == "printed" else "")

    @property
    def probe_label(self) -> str:
        return f"coeff{self.coeff}" if self.coeff is not None else f"z={complex(self.z)}"


# ---------------------------------------------------------------------------
# constructors


def virasoro_bb(kappa: Fraction, z: complex = 4.0, **kw) -> ObservableSpec:
    c, h = alg.kappa_to_ch(Fraction(kappa))
    return ObservableSpec("VirasoroBB", c=c, h=h, z=z, **kw)


def sl2_observables(z: complex = 4.0, variant: str = "corrected", **kw) -> list[ObservableSpec]:
    """The twelve current and four Virasoro matrix elements."""
    out = []
    for X in ("E", "H", "F"):
        for bra in (1, -1):
            for ket in (1, -1):
                out.append(ObservableSpec("Sl2Current", X=X, bra=bra, ket=ket, z=z, variant=variant, **kw))
    for bra in (1, -1):
        for ket in (1, -1):
            out.append(ObservableSpec("Sl2Virasoro", bra=bra, ket=ket, z=z, **kw))
    return out


def heisenberg_observables(lam: Fraction, rank: int, z: complex = 4.0, **kw) -> list[ObservableSpec]:
    out = [ObservableSpec("HeisenbergCurrent", index=i, lam=Fraction(lam), rank=rank, z=z, **kw)
           for i in range(1, rank + 1)]
    out.append(ObservableSpec("HeisenbergVirasoro", lam=Fraction(lam), rank=rank, z=z, **kw))
    return out


# ---------------------------------------------------------------------------
# backends


class _Fields:
    """Base quantities ``R = rho'/rho``, ``S = S rho`` and internal fields."""

    def __init__(self, s: SLEPathState, z: complex | None, K: int) -> None:
        self.point = z is not None
        self.s = s
        self.z = z
        self.K = K
        P = s.P
        n = P.shape[0]
        KP = P.shape[1]
        k = np.arange(KP)
        # rho^(j) as u-series: rho' = sum (1-k) P_k u^k etc.
        d1 = (1 - k) * P
        d2 = np.zeros((n, KP + 1), dtype=complex)
        d2[:, 1:] = (1 - k) * (-k) * P
        d3 = np.zeros((n, KP + 2), dtype=complex)
        d3[:, 2:] = (1 - k) * (-k) * (-k - 1) * P
        if self.point:
            u = 1.0 / z
            ev = lambda a: np.polynomial.polynomial.polyval(u, a.T)  # noqa: E731
            rho = z * ev(P)
            r1, r2, r3 = ev(d1), ev(d2), ev(d3)
            self.R = r1 / rho
            self.S = r3 / r1 - 1.5 * (r2 / r1) ** 2
        else:
            L = K + 3
            pad = lambda a: _fit(a, L)  # noqa: E731
            inv1 = ps_inv(pad(d1))
            invP = ps_inv(pad(P))
            R = np.zeros((n, L), dtype=complex)
            R[:, 1:] = ps_mul(pad(d1), invP)[:, : L - 1]
            a = ps_mul(pad(d3), inv1)
            b = ps_mul(pad(d2), inv1)
            self.R = _fit(R, K)
            self.S = _fit(a - 1.5 * ps_mul(b, b), K)

    def series(self, arr: np.ndarray) -> np.ndarray:
        """Internal series (index k = coefficient of z^-k) in this backend."""
        if self.point:
            return np.polynomial.polynomial.polyval(1.0 / self.z, arr.T)
        return _fit(arr, self.K)

    def dseries(self, arr: np.ndarray) -> np.ndarray:
        K = arr.shape[-1]
        d = np.zeros(arr.shape[:-1] + (K + 1,), dtype=complex)
        d[..., 1:] = -np.arange(K) * arr
        return self.series(d)

    def mul(self, *xs: np.ndarray) -> np.ndarray:
        out = xs[0]
        for x in xs[1:]:
            out = out * x if self.point else ps_mul(out, x)
        return out

    def exp(self, x: np.ndarray) -> np.ndarray:
        return np.exp(x) if self.point else ps_exp(x)

    def q(self, a: int, b: int) -> float:
        return a / b

    def one(self) -> np.ndarray | float:
        if self.point:
            return 1.0
        o = np.zeros((self.s.n_paths, self.K), dtype=complex)
        o[:, 0] = 1.0
        return o

    def finish(self, val: np.ndarray, coeff: int | None) -> np.ndarray:
        if self.point:
            return np.broadcast_to(val, (self.s.n_paths,)).astype(complex)
        return val[:, coeff]


def _fit(a: np.ndarray, L: int) -> np.ndarray:
    K = a.shape[-1]
    if K >= L:
        return a[..., :L]
    out = np.zeros(a.shape[:-1] + (L,), dtype=np.result_type(a, complex))
    out[..., :K] = a
    return out


# ---------------------------------------------------------------------------
# formulas


def _sl2_current(F, X: str, bra: int, ket: int, printed: bool):
    # integer constants only, so exact backends can reuse these formulas
    s = F.s
    e, h, f = F.series(s.e), F.series(s.h), F.series(s.f)
    de, dh, df = F.dseries(s.e), F.dseries(s.h), F.dseries(s.f)
    m = F.mul
    E2 = F.exp(-2 * h)
    R = F.R
    one = F.one()
    if X == "E":
        if bra != ket:
            return m(E2, R) if bra > 0 else -m(E2, f, f, R)
        kterm = df if printed else m(E2, df)
        return ket * m(E2, f, R) - kterm
    if X == "H":
        if bra != ket:
            return 2 * m(E2, e, R) if bra > 0 else -m(2 * f + 2 * m(E2, e, f, f), R)
        return ket * m(one + 2 * m(E2, e, f), R) - (2 * dh + 2 * m(E2, e, df))
    # X == "F"
    if bra != ket:
        if bra > 0:
            return -m(E2, e, e, R)
        coef = 2 * m(e, f) + m(E2, e, e, f, f)
        if not printed:
            coef = coef + F.exp(2 * h)
        return m(coef, R)
    kterm = (2 * m(e, df) if printed else 2 * m(e, dh)) + m(E2, e, e, df) - de
    return -ket * m(e + m(E2, e, e, f), R) + kterm


def _sl2_virasoro(F, bra: int, ket: int):
    s = F.s
    h, f = F.series(s.h), F.series(s.f)
    de, dh, df = F.dseries(s.e), F.dseries(s.h), F.dseries(s.f)
    m = F.mul
    E2 = F.exp(-2 * h)
    R = F.R
    if bra != ket:
        if bra > 0:
            return -m(E2, de, R)
        return -m(df - 2 * m(f, dh) - m(E2, f, f, de), R)
    A = dh + m(E2, f, de)
    C = m(dh, dh) + m(E2, de, df)
    return F.q(1, 4) * m(R, R) - ket * m(A, R) + C + F.q(1, 12) * F.S


def _heis_fields(F: _Fields) -> tuple[list[np.ndarray], np.ndarray]:
    hs = F.s.hs
    dh = [F.dseries(hs[:, i]) for i in range(hs.shape[1])]
    return dh, F.R


def eval_observable(s: SLEPathState, o: ObservableSpec, K: int | None = None) -> np.ndarray:
    """Value of ``o`` on every path of ``s`` (array of shape (n_paths,))."""
    coeff = o.coeff
    if K is None:
        K = (s.e.shape[-1] if s.e is not None else s.hs.shape[-1] if s.hs is not None else s.P.shape[1] - 1)
    if coeff is not None and not (0 <= coeff < K):
        raise ObservableError(f"coefficient index {coeff} outside exact window [0, {K - 1}]")
    F = _Fields(s, None if coeff is not None else complex(o.z), K)
    if o.kind == "VirasoroBB":
        val = float(o.h) * F.mul(F.R, F.R) + float(o.c) / 12.0 * F.S
    elif o.kind == "Sl2Current":
        _need(s, "e", o)
        val = _sl2_current(F, o.X, o.bra, o.ket, o.variant == "printed")  # type: ignore[arg-type]
    elif o.kind == "Sl2Virasoro":
        _need(s, "e", o)
        val = _sl2_virasoro(F, o.bra, o.ket)
    elif o.kind == "HeisenbergCurrent":
        _need(s, "hs", o)
        dh, R = _heis_fields(F)
        lead = float(o.lam) * R if o.index == 1 else 0.0 * R
        val = lead - dh[o.index - 1]
    elif o.kind == "HeisenbergVirasoro":
        _need(s, "hs", o)
        dh, R = _heis_fields(F)
        lam = float(o.lam)
        val = lam**2 / 2 * F.mul(R, R) - lam * F.mul(dh[0], R) + o.rank / 12.0 * F.S
        for d in dh:
            val = val + 0.5 * F.mul(d, d)
    else:
        lhs, rhs = _residue_sides(s, o, F)
        val = lhs - rhs
    return F.finish(val, coeff)


def _need(s: SLEPathState, attr: str, o: ObservableSpec) -> None:
    if getattr(s, attr) is None:
        raise ObservableError(f"{o.id} needs a state from the matching case")


# ---------------------------------------------------------------------------
# residue identity


def residue_lhs_series(s: SLEPathState, depth: int | None = None) -> TruncatedSeries:
    """Batched double-residue expression of the identity, without the l/2.

    Coefficients are arrays over paths.  The first term (region |w|>|z|)
    contributes nothing; it is computed anyway rather than assumed.
    """
    P = s.P
    KP = P.shape[1]
    rho = TruncatedSeries({1 - k: P[:, k].copy() for k in range(KP)}, 2 - KP, 1, "z", "complex")
    depth = KP + 2 if depth is None else depth
    drz = rho.deriv()
    drw = drz.rename("w")
    # rho'(w) rho'(z) / ((w - z) (rho(w) - rho(z))^2), |w| > |z|
    k1 = kernel_expand(rho, "a>b", vars=("w", "z"), depth=depth)
    first = k1 * k1 * BiSeries.geometric(("w", "z"), "a>b", depth, mode="complex") * drz * drw
    # rho'(w) rho'(z) / ((z - w) (rho(z) - rho(w))^2), |z| > |w|
    k2 = kernel_expand(rho, "a>b", vars=("z", "w"), depth=depth)
    second = k2 * k2 * BiSeries.geometric(("z", "w"), "a>b", depth, mode="complex") * drz * drw
    return first.residue("w") + second.residue("w")


def _residue_sides(s: SLEPathState, o: ObservableSpec, F: _Fields) -> tuple[np.ndarray, np.ndarray]:
    lhs_ser = residue_lhs_series(s)
    ell = o.rank
    if F.point:
        z = complex(o.z)
        lhs = sum(np.asarray(c) * z**n for n, c in lhs_ser.coeffs.items())
        lhs = 0.5 * ell * np.broadcast_to(lhs, (s.n_paths,))
    else:
        arr = np.zeros((s.n_paths, F.K), dtype=complex)
        for n, c in lhs_ser.coeffs.items():
            if -F.K < n <= 0:
                arr[:, -n] = c
        if -(F.K - 1) < lhs_ser.lo:
            raise ObservableError("residue series window too short for the coefficient probe")
        lhs = 0.5 * ell * arr
    dh, _ = _heis_fields(F)
    rhs = ell / 12.0 * F.S
    for d in dh:
        rhs = rhs + 0.5 * F.mul(d, d)
    return lhs, rhs


@dataclass
class ResidueReport:
    z: complex
    times: np.ndarray
    lhs_mean: np.ndarray
    rhs_mean: np.ndarray
    diff_mean: np.ndarray
    diff_se: np.ndarray
    max_abs_pathwise: np.ndarray
    t0_lhs: complex
    t0_rhs: complex

    def rows(self) -> list[dict]:
        return [
            {
                "sample_time": float(t),
                "lhs_mean_re": lm.real, "lhs_mean_im": lm.imag,
                "rhs_mean_re": rm.real, "rhs_mean_im": rm.imag,
                "diff_mean_re": dm.real, "diff_mean_im": dm.imag,
                "diff_se_re": ds.real, "diff_se_im": ds.imag,
                "max_abs_pathwise_diff": float(mx),
            }
            for t, lm, rm, dm, ds, mx in zip(self.times, self.lhs_mean, self.rhs_mean,
                                              self.diff_mean, self.diff_se, self.max_abs_pathwise)
        ]


def residue_identity_probe(s: SLEPathState, z: complex = 4.0, rank: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the Heisenberg residue identity at ``z`` on every path."""
    if s.hs is None:
        raise ObservableError("residue identity probe needs a heisenberg state")
    rank = s.hs.shape[1] if rank is None else rank
    o = ObservableSpec("HeisenbergResidueIdentity", z=z, rank=rank)
    F = _Fields(s, complex(z), s.hs.shape[-1])
    return _residue_sides(s, o, F)


def residue_identity_report(cfg: PathConfig, n_paths: int, sample_times: Sequence[float], z: complex = 4.0) -> ResidueReport:
    probes = {
        "lhs": lambda st: residue_identity_probe(st, z, cfg.rank)[0],
        "rhs": lambda st: residue_identity_probe(st, z, cfg.rank)[1],
    }
    times = sorted(set([0.0] + list(sample_times)))
    tab = run_paths(cfg, probes, times, n_paths)
    L, Rr = tab.values["lhs"], tab.values["rhs"]
    D = L - Rr
    se = lambda a: np.array([_se(x.real) + 1j * _se(x.imag) for x in a])  # noqa: E731
    return ResidueReport(
        z=z, times=np.asarray(times), lhs_mean=L.mean(1), rhs_mean=Rr.mean(1), diff_mean=D.mean(1),
        diff_se=se(D), max_abs_pathwise=np.abs(D).max(1), t0_lhs=complex(L[0].mean()), t0_rhs=complex(Rr[0].mean()),
    )


# ---------------------------------------------------------------------------
# drift certification


def _se(x: np.ndarray) -> float:
    n = x.shape[0]
    if n < 2:
        return float("nan")
    return float(np.std(x, ddof=1) / sqrt(n))


def _z(diff: float, se: float) -> float:
    if se == 0 or np.isnan(se):
        return 0.0 if diff == 0 else float("inf")
    return abs(diff) / se


@dataclass
class DriftReport:
    observable_id: str
    probe: str
    M0: complex
    times: np.ndarray
    mean: np.ndarray
    se_re: np.ndarray
    se_im: np.ndarray
    z_re: np.ndarray
    z_im: np.ndarray
    threshold: float = 3.0
    metadata: dict = field(default_factory=dict)

    @property
    def zscore(self) -> np.ndarray:
        return np.maximum(self.z_re, self.z_im)

    @property
    def max_z(self) -> float:
        return float(self.zscore.max()) if len(self.zscore) else 0.0

    @property
    def passed(self) -> bool:
        return bool(np.all(self.zscore <= self.threshold))

    def rows(self) -> list[dict]:
        return [
            {
                "observable_id": self.observable_id, "probe": self.probe, "sample_time": float(t),
                "mean_re": float(m.real), "mean_im": float(m.imag),
                "se_re": float(sr), "se_im": float(si), "zscore": float(z),
                "pass": bool(z <= self.threshold),
            }
            for t, m, sr, si, z in zip(self.times, self.mean, self.se_re, self.se_im, self.zscore)
        ]


CSV_COLUMNS = ("observable_id", "probe", "sample_time", "mean_re", "mean_im", "se_re", "se_im", "zscore", "pass")


def reports_to_csv(reports: Iterable[DriftReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        for row in r.rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def summarize(values: np.ndarray, M0: complex) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-time mean, standard errors and z-scores for an (n_times, n_paths) table."""
    mean = values.mean(axis=1)
    se_re = np.array([_se(v.real) for v in values])
    se_im = np.array([_se(v.imag) for v in values])
    z_re = np.array([_z(m.real - M0.real, s) for m, s in zip(mean, se_re)])
    z_im = np.array([_z(m.imag - M0.imag, s) for m, s in zip(mean, se_im)])
    return mean, se_re, se_im, z_re, z_im


def drift_test(
    cfg: PathConfig,
    observables: ObservableSpec | Sequence[ObservableSpec],
    n_paths: int,
    sample_times: Sequence[float],
    threshold: float = 3.0,
) -> list[DriftReport]:
    """Certify ``E[M_t] = M_0`` at each sample time from one shared simulation."""
    obs = [observables] if isinstance(observables, ObservableSpec) else list(observables)
    probes: dict[str, Callable[[SLEPathState], np.ndarray]] = {}
    for o in obs:
        key = f"{o.id}@{o.probe_label}"
        probes[key] = lambda st, o=o: eval_observable(st, o)
    tab = run_paths(cfg, probes, list(sample_times), n_paths)
    M0s = {}
    from .sde import SLEPathState as _S  # local: initial state for M0

    s0 = _S.initial(cfg, 1)
    reports = []
    for o in obs:
        key = f"{o.id}@{o.probe_label}"
        M0 = complex(eval_observable(s0, o)[0])
        M0s[key] = M0
        mean, se_re, se_im, z_re, z_im = summarize(tab.values[key], M0)
        reports.append(DriftReport(o.id, o.probe_label, M0, np.asarray(sample_times, float), mean,
                                   se_re, se_im, z_re, z_im, threshold, dict(tab.metadata)))
    return reports


# ---------------------------------------------------------------------------
# exact one-step drift (quadrature over the Gaussian increments)


def one_step_drift(cfg: PathConfig, s: SLEPathState, o: ObservableSpec, nodes: int = 5) -> np.ndarray:
    """``(E[M(s_{dt})] - M(s)) / dt`` for one Euler step from each path of ``s``.

    The expectation over the increments is computed by tensor Gauss-Hermite
    quadrature, so the result carries no Monte Carlo noise.
    """
    from itertools import product as iproduct

    from .sde import advance

    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    var = np.array([cfg.kappa, *cfg.taus])
    dims = [r for r in range(len(var)) if var[r] > 0]
    base = eval_observable(s, o)
    acc = np.zeros(s.n_paths, dtype=complex)
    for combo in iproduct(range(nodes), repeat=len(dims)):
        incr = np.zeros((s.n_paths, len(var)))
        wt = 1.0
        for r, j in zip(dims, combo):
            incr[:, r] = x[j] * sqrt(var[r] * cfg.dt)
            wt *= w[j]
        acc += wt * eval_observable(advance(cfg, s, incr), o)
    return (acc - base) / cfg.dt


# ---------------------------------------------------------------------------
# vector martingale check


def _vector_module(cfg: PathConfig):
    if cfg.case == "sl2":
        spec = alg.LatticeSl2()
        return spec, alg.GradedVector.basis_vector(spec, spec.top(1), 2)
    if cfg.case == "heisenberg":
        spec = alg.HeisenbergFock(cfg.rank, Fraction(cfg.lam))
        return spec, alg.GradedVector.basis_vector(spec, spec.top(), 2)
    # in the Verma module the singular vector is nonzero, so individual
    # components are martingales only in the irreducible quotient
    raise ObservableError("vector_martingale_check needs an affine case (heisenberg or sl2)")


def _operator_matrix(spec, basis: list, index: dict, words: Sequence[tuple[list[tuple], complex]], D: int) -> np.ndarray:
    n = len(basis)
    Mx = np.zeros((n, n), dtype=complex)
    for j, mon in enumerate(basis):
        v = alg.GradedVector(spec, {mon: Fraction(1)}, D)
        for word, c in words:
            r = alg.apply_word(spec, word, v, upto=D)
            for mon2, a in r.terms.items():
                Mx[index[mon2], j] += complex(c) * complex(a)
    return Mx


@dataclass
class VectorMartingaleResult:
    basis: list
    reports: list[DriftReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def vector_martingale_check(
    cfg: PathConfig, D: int, n_paths: int, sample_times: Sequence[float] | None = None, threshold: float = 3.0,
) -> VectorMartingaleResult:
    """Evolve ``<u|G_t|v_Lambda>`` for every basis vector ``u`` of degree <= D.

    ``G`` is stepped as ``G <- G (1 + Omega dt + L_{-1} dB0 + s sum_r X_r(-1) dB^r)``
    on the truncated module (all increments raise degree, so truncation is
    exact), with ``s`` the configured noise sign.
    """
    cfg.validate()
    spec, top = _vector_module(cfg)
    basis = [mon for d in range(D + 1) for mon in spec.basis(d)]
    index = {m: i for i, m in enumerate(basis)}
    if cfg.case == "sl2":
        tau = Fraction(cfg.taus[0]).limit_denominator(10**9)
        s2 = 1 / sqrt(2)
        noise_words = [
            [([("H", -1)], s2)],
            [([("E", -1)], s2), ([("F", -1)], s2)],
            [([("E", -1)], 1j * s2), ([("F", -1)], -1j * s2)],
        ]
        tau_arg: object = tau
    elif cfg.case == "heisenberg":
        noise_words = [[([(f"H{i}", -1)], 1.0)] for i in range(1, cfg.rank + 1)]
        tau_arg = [Fraction(t).limit_denominator(10**9) for t in cfg.taus]
    kappa = Fraction(cfg.kappa).limit_denominator(10**9)
    omega_words = alg.annihilator_operator(spec, kappa, tau_arg)
    Om = _operator_matrix(spec, basis, index, omega_words, D)
    Lm1 = _operator_matrix(spec, basis, index, [([("L", -1)], 1)], D)
    Xs = [_operator_matrix(spec, basis, index, w, D) for w in noise_words]
    v0 = np.zeros(len(basis), dtype=complex)
    v0[index[next(iter(top.terms))]] = 1.0
    if sample_times is None:
        sample_times = [cfg.T]
    steps = sorted({int(round(t / cfg.dt)) for t in sample_times})
    drv = driver_for(cfg)
    incr = drv.increments(list(range(n_paths)), cfg.n_steps)
    sigma = cfg.sigma
    d = len(basis)
    G = np.broadcast_to(np.eye(d, dtype=complex), (n_paths, d, d)).copy()
    rec = []
    for k in range(max(steps) + 1):
        if k in steps:
            rec.append(G @ v0)
        if k == max(steps):
            break
        inc = Om[None] * cfg.dt + Lm1[None] * incr[:, k, 0][:, None, None]
        for r, Xr in enumerate(Xs):
            inc = inc + sigma * Xr[None] * incr[:, k, r + 1][:, None, None]
        G = G + G @ inc
    comps = np.stack(rec)  # (n_times, n_paths, d)
    reports = []
    times = np.array([k * cfg.dt for k in steps])
    for j, mon in enumerate(basis):
        vals = comps[:, :, j]
        mean, se_re, se_im, z_re, z_im = summarize(vals, complex(v0[j]))
        reports.append(DriftReport(f"component{mon}", f"deg{spec.degree(mon)}", complex(v0[j]), times, mean,
                                   se_re, se_im, z_re, z_im, threshold, cfg.metadata()))
    return VectorMartingaleResult(basis, reports)
