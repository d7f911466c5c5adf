"""Simulation of SLE(kappa) coupled to internal Heisenberg or sl2 degrees of freedom.

All series are stored densely in ``u = 1/z`` with a leading path axis:

* ``P[:, k]``: ``rho_t(z) = z * sum_k P[k] u^k``, so ``P[0] = 1`` and
  ``P[k]`` is the coefficient of ``z^{1-k}`` (k = 0..N+1).
* ``e, h, f`` (sl2) or ``hs[:, i]`` (Heisenberg): index k is the
  coefficient of ``zeta^{-k}``; index 0 is always zero.

Products of power series in ``u`` truncate exactly, so no coefficient inside
the retained window is ever contaminated by truncation.

Noise sign: ``sign_convention="appC"`` (default) uses
``G^{-1} dG = ... - sum_r X_r(-1) dB^r``, ``"sec5"`` flips it.  The laws of
all observables agree; the choice is echoed in output metadata.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt
from typing import Callable, Mapping, Sequence

import numpy as np

from .series import TruncatedSeries, ps_exp, ps_inv, ps_log, ps_mul

SQRT_HALF = sqrt(0.5)
CASES = ("virasoro-only", "heisenberg", "sl2")
INTEGRATORS = ("coefficient-euler", "multiplicative")
SIGNS = ("appC", "sec5")
LOEWNER_SCHEMES = ("trapezoid", "euler")


class ConfigError(ValueError):
    """Invalid simulation parameters; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]) -> None:
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class PathConfig:
    kappa: float
    case: str = "sl2"
    rank: int = 1
    lam: Fraction = Fraction(0)
    tau: float | tuple[float, ...] | None = None
    dt: float = 1e-3
    T: float = 0.25
    N: int = 16
    M: int = 12
    seed: int = 0
    integrator: str = "coefficient-euler"
    sign_convention: str = "appC"
    loewner_scheme: str = "trapezoid"
    allow_violation: bool = False

    # -- derived ----------------------------------------------------------
    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def dim(self) -> int:
        return {"virasoro-only": 0, "heisenberg": self.rank, "sl2": 3}[self.case]

    @property
    def taus(self) -> tuple[float, ...]:
        """Per-direction variances of the internal Brownian motions."""
        if self.case == "virasoro-only":
            return ()
        if self.case == "sl2":
            t = (4.0 - self.kappa) / 2.0 if self.tau is None else float(self.tau)  # type: ignore[arg-type]
            return (t, t, t)
        if self.tau is not None:
            return tuple(float(x) for x in self.tau)  # type: ignore[union-attr]
        lam = Fraction(self.lam)
        return (float(2 - 4 * lam**2),) + (2.0,) * (self.rank - 1)

    @property
    def violation(self) -> bool:
        """True when the parameters break the annihilator relation on purpose."""
        if self.case == "sl2":
            return abs(self.kappa + 2 * self.taus[0] - 4) > 1e-12
        if self.case == "heisenberg":
            expected = (float(2 - 4 * Fraction(self.lam) ** 2),) + (2.0,) * (self.rank - 1)
            return abs(self.kappa - 4) > 1e-12 or any(
                abs(a - b) > 1e-12 for a, b in zip(self.taus, expected)
            )
        return False

    @property
    def sigma(self) -> int:
        return -1 if self.sign_convention == "appC" else 1

    def validate(self) -> "PathConfig":
        errs = validate_path_config(self)
        if errs:
            raise ConfigError(errs)
        return self

    def metadata(self) -> dict:
        return {
            "sign_convention": self.sign_convention,
            "noise_sign": self.sigma,
            "loewner_scheme": self.loewner_scheme,
            "integrator": self.integrator,
            "taus": list(self.taus),
            "intentional_violation": self.violation,
        }


def validate_path_config(cfg: PathConfig) -> list[str]:
    errs: list[str] = []
    if cfg.case not in CASES:
        errs.append(f"case must be one of {CASES}, got {cfg.case!r}")
        return errs
    if cfg.kappa < 0:
        errs.append("kappa must be >= 0")
    if cfg.dt <= 0 or cfg.T < 0:
        errs.append("dt must be > 0 and T >= 0")
    elif abs(cfg.n_steps * cfg.dt - cfg.T) > 1e-9 * max(1.0, cfg.T):
        errs.append("T must be an integer multiple of dt")
    if cfg.N < 4:
        errs.append("N must be >= 4")
    if cfg.M < 2 or cfg.M > cfg.N + 1:
        errs.append("M must satisfy 2 <= M <= N+1 (1/rho is needed to order M)")
    if cfg.integrator not in INTEGRATORS:
        errs.append(f"integrator must be one of {INTEGRATORS}")
    if cfg.integrator == "multiplicative" and cfg.case != "sl2":
        errs.append("the multiplicative integrator is implemented for case sl2 only")
    if cfg.sign_convention not in SIGNS:
        errs.append(f"sign_convention must be one of {SIGNS}")
    if cfg.loewner_scheme not in LOEWNER_SCHEMES:
        errs.append(f"loewner_scheme must be one of {LOEWNER_SCHEMES}")
    if cfg.case == "heisenberg":
        lam = Fraction(cfg.lam)
        if cfg.rank < 1:
            errs.append("rank must be >= 1")
        if 2 - 4 * lam**2 < 0:
            errs.append(
                f"lambda = {lam} gives tau_1 = 2 - 4 lambda^2 = {2 - 4 * lam**2} < 0; "
                "the Heisenberg annihilator needs |lambda| <= 1/sqrt(2)"
            )
        if cfg.tau is not None:
            if len(cfg.tau) != cfg.rank:  # type: ignore[arg-type]
                errs.append("tau vector length must equal rank")
            elif any(t < 0 for t in cfg.tau):  # type: ignore[union-attr]
                errs.append("tau entries must be >= 0")
        if not cfg.allow_violation and errs == [] and cfg.violation:
            errs.append("heisenberg requires kappa = 4 and tau = (2 - 4 lambda^2, 2, ..., 2); "
                        "set allow_violation for a negative control")
    if cfg.case == "sl2":
        if cfg.taus[0] < 0:
            errs.append(f"tau = {cfg.taus[0]} < 0 (derived as (4 - kappa)/2 unless given)")
        if cfg.tau is not None and cfg.violation and not cfg.allow_violation:
            errs.append("explicit tau violates kappa + 2 tau = 4; set allow_violation for a negative control")
    return errs


# ---------------------------------------------------------------------------
# Brownian driver


@dataclass(frozen=True)
class BrownianDriver:
    """Independent per-path streams reproducible from (seed, path, stream)."""

    seed: int
    variances: tuple[float, ...]
    dt: float

    def increments(self, paths: Sequence[int], n_steps: int) -> np.ndarray:
        """Array (len(paths), n_steps, n_streams) of increments."""
        out = np.empty((len(paths), n_steps, len(self.variances)))
        scales = np.sqrt(np.asarray(self.variances) * self.dt)
        for a, p in enumerate(paths):
            for r, sc in enumerate(scales):
                ss = np.random.SeedSequence(self.seed, spawn_key=(int(p), r))
                out[a, :, r] = np.random.Generator(np.random.PCG64(ss)).standard_normal(n_steps) * sc
        return out


def driver_for(cfg: PathConfig) -> BrownianDriver:
    return BrownianDriver(cfg.seed, (float(cfg.kappa),) + cfg.taus, cfg.dt)


# ---------------------------------------------------------------------------
# state


@dataclass
class SLEPathState:
    t: float
    B0: np.ndarray
    P: np.ndarray
    e: np.ndarray | None = None
    h: np.ndarray | None = None
    f: np.ndarray | None = None
    hs: np.ndarray | None = None

    @classmethod
    def initial(cls, cfg: PathConfig, n_paths: int) -> "SLEPathState":
        P = np.zeros((n_paths, cfg.N + 2), dtype=complex)
        P[:, 0] = 1.0
        st = cls(0.0, np.zeros(n_paths), P)
        z = lambda: np.zeros((n_paths, cfg.M + 1), dtype=complex)  # noqa: E731
        if cfg.case == "sl2":
            st.e, st.h, st.f = z(), z(), z()
        elif cfg.case == "heisenberg":
            st.hs = np.zeros((n_paths, cfg.rank, cfg.M + 1), dtype=complex)
        return st

    @property
    def n_paths(self) -> int:
        return self.P.shape[0]

    def copy(self) -> "SLEPathState":
        cp = lambda a: None if a is None else a.copy()  # noqa: E731
        return SLEPathState(self.t, self.B0.copy(), self.P.copy(), cp(self.e), cp(self.h), cp(self.f), cp(self.hs))

    def rho_coeffs(self) -> np.ndarray:
        """Coefficients of rho: column k is the coefficient of z^{1-k}."""
        return self.P

    def g_coeffs(self) -> np.ndarray:
        g = self.P.copy()
        g[:, 1] += self.B0
        return g

    def rho_series(self, i: int) -> TruncatedSeries:
        K = self.P.shape[1]
        return TruncatedSeries({1 - k: complex(self.P[i, k]) for k in range(K)}, 2 - K, 1, "z", "complex")

    def internal_series(self, name: str, i: int, comp: int | None = None) -> TruncatedSeries:
        arr = getattr(self, name)
        row = arr[i] if comp is None else arr[i, comp]
        K = row.shape[-1]
        return TruncatedSeries({-k: complex(row[k]) for k in range(1, K)}, 1 - K, -1, "zeta", "complex")

    def take(self, idx: np.ndarray | slice) -> "SLEPathState":
        sel = lambda a: None if a is None else a[idx]  # noqa: E731
        return SLEPathState(self.t, self.B0[idx], self.P[idx], sel(self.e), sel(self.h), sel(self.f), sel(self.hs))

    def check_structure(self) -> None:
        for a in (self.e, self.h, self.f):
            if a is not None and np.any(a[:, 0] != 0):
                raise AssertionError("internal series acquired a constant term")
        if self.hs is not None and np.any(self.hs[:, :, 0] != 0):
            raise AssertionError("internal series acquired a constant term")
        if np.any(self.P[:, 0] != 1):
            raise AssertionError("rho lost its unit leading coefficient")


def concat_states(states: Sequence[SLEPathState]) -> SLEPathState:
    cat = lambda name: None if getattr(states[0], name) is None else np.concatenate([getattr(s, name) for s in states])  # noqa: E731
    return SLEPathState(states[0].t, cat("B0"), cat("P"), cat("e"), cat("h"), cat("f"), cat("hs"))


# ---------------------------------------------------------------------------
# steps


def _inv_rho_u(P: np.ndarray, M: int) -> np.ndarray:
    """``1/rho`` as a power series in u, length M+1 (index 0 is zero)."""
    invP = ps_inv(P[:, :M])
    s = np.zeros((P.shape[0], M + 1), dtype=complex)
    s[:, 1:] = invP
    return s


def _loewner_drift(P: np.ndarray) -> np.ndarray:
    """``u^2 / P`` times 2, as a P-increment per unit time."""
    inv = ps_inv(P[:, : P.shape[1] - 2])
    d = np.zeros_like(P)
    d[:, 2:] = 2.0 * inv
    return d


def step_loewner(s: SLEPathState, dB0: np.ndarray, dt: float, scheme: str = "euler") -> SLEPathState:
    """One step of ``d rho = 2/rho dt - dB0``.

    ``scheme="euler"`` is Euler-Maruyama.  ``"trapezoid"`` averages the drift
    over an Euler predictor; the noise is additive, so the Ito solution is
    unchanged while the deterministic part becomes second order.
    """
    P = s.P
    drift = _loewner_drift(P)
    P_new = P + drift * dt
    P_new[:, 1] -= dB0
    if scheme == "trapezoid":
        drift2 = _loewner_drift(P_new)
        P_new = P + 0.5 * (drift + drift2) * dt
        P_new[:, 1] -= dB0
    elif scheme != "euler":
        raise ValueError(f"unknown scheme {scheme!r}")
    out = s.copy()
    out.P = P_new
    out.B0 = s.B0 + dB0
    out.t = s.t + dt
    return out


def step_internal_heisenberg(s: SLEPathState, dB: np.ndarray, dt: float, sigma: int = -1) -> SLEPathState:
    """``dh^i = sigma * dB^i / rho`` (sigma = +1 is the form printed for Heisenberg)."""
    M = s.hs.shape[-1] - 1  # type: ignore[union-attr]
    inv = _inv_rho_u(s.P, M)
    out = s.copy()
    out.hs = s.hs + sigma * inv[:, None, :] * dB[:, :, None]  # type: ignore[operator]
    return out


def step_internal_sl2(s: SLEPathState, dB: np.ndarray, dt: float, tau: float, sigma: int = -1) -> SLEPathState:
    """Euler-Maruyama step of the (e, h, f) coefficient SDEs."""
    e, h, f = s.e, s.h, s.f
    M = e.shape[-1] - 1  # type: ignore[union-attr]
    inv = _inv_rho_u(s.P, M)
    # the printed equations are in the appC orientation; sec5 flips the noise
    d1, d2, d3 = (-sigma * dB[:, r][:, None] for r in range(3))
    dBp = d2 + 1j * d3
    e2h = ps_exp(2.0 * h)
    ff = ps_mul(f, f)
    one = np.zeros_like(f)
    one[:, 0] = 1.0
    de = -SQRT_HALF * ps_mul(e2h, inv) * dBp
    dh = -0.5 * tau * ps_mul(inv, inv) * dt + SQRT_HALF * (-inv * d1 + ps_mul(f, inv) * dBp)
    df = SQRT_HALF * (
        -2.0 * ps_mul(f, inv) * d1 - ps_mul(one - ff, inv) * d2 + 1j * ps_mul(one + ff, inv) * d3
    )
    out = s.copy()
    out.e, out.h, out.f = e + de, h + dh, f + df
    return out


def theta_matrix(e: np.ndarray, h: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, ...]:
    """Entries (A, B, C, D) of ``exp(eE) exp(hH) exp(fF)`` in the 2x2 representation."""
    eh = ps_exp(h)
    emh = ps_exp(-h)
    B = ps_mul(e, emh)
    C = ps_mul(emh, f)
    A = eh + ps_mul(B, f)
    return A, B, C, emh


def gauss_refactor(A: np.ndarray, B: np.ndarray, C: np.ndarray, D: np.ndarray) -> tuple[np.ndarray, ...]:
    if np.any(np.abs(D[:, 0] - 1.0) > 1e-9):
        raise AssertionError("Gauss decomposition failure: D entry not unipotent mod zeta^-1")
    Dinv = ps_inv(D)
    return ps_mul(B, Dinv), -ps_log(D), ps_mul(C, Dinv)


def step_multiplicative(s: SLEPathState, dB: np.ndarray, dt: float, sigma: int = -1) -> SLEPathState:
    """Right-multiply Theta by ``exp(sigma * sum_r X_r ⊗ rho^{-1} dB^r)``.

    The Ito drift ``tau/2 sum_r (X_r ⊗ rho^{-1})^2 dt`` is produced by the
    quadratic term of the exponential, so it is not added separately.
    """
    e, h, f = s.e, s.h, s.f
    M = e.shape[-1] - 1  # type: ignore[union-attr]
    inv = _inv_rho_u(s.P, M)
    d1, d2, d3 = (dB[:, r][:, None] for r in range(3))
    xa = sigma * SQRT_HALF * inv * d1
    xb = sigma * SQRT_HALF * inv * (d2 + 1j * d3)
    xc = sigma * SQRT_HALF * inv * (d2 - 1j * d3)
    delta = ps_mul(xa, xa) + ps_mul(xb, xc)
    # exp(Xi) = Ch(delta) I + Sh(delta) Xi with Xi^2 = delta I; delta = O(u^2)
    Ch = np.zeros_like(delta)
    Ch[:, 0] = 1.0
    Sh = Ch.copy()
    power = Ch.copy()
    for k in range(1, M // 2 + 1):
        power = ps_mul(power, delta)
        Ch = Ch + power / _fact(2 * k)
        Sh = Sh + power / _fact(2 * k + 1)
    X11 = Ch + ps_mul(Sh, xa)
    X12 = ps_mul(Sh, xb)
    X21 = ps_mul(Sh, xc)
    X22 = Ch - ps_mul(Sh, xa)
    A, B, C, D = theta_matrix(e, h, f)
    B2 = ps_mul(A, X12) + ps_mul(B, X22)
    C2 = ps_mul(C, X11) + ps_mul(D, X21)
    D2 = ps_mul(C, X12) + ps_mul(D, X22)
    out = s.copy()
    out.e, out.h, out.f = gauss_refactor(A, B2, C2, D2)
    for a in (out.e, out.h, out.f):
        a[:, 0] = 0.0
    return out


def _fact(n: int) -> float:
    r = 1.0
    for k in range(2, n + 1):
        r *= k
    return r


def advance(cfg: PathConfig, s: SLEPathState, incr: np.ndarray) -> SLEPathState:
    """One full step from increments ``incr[:, r]`` (r = 0 Loewner, r >= 1 internal)."""
    dt = cfg.dt
    if cfg.case == "sl2":
        if cfg.integrator == "multiplicative":
            s2 = step_multiplicative(s, incr[:, 1:4], dt, cfg.sigma)
        else:
            s2 = step_internal_sl2(s, incr[:, 1:4], dt, cfg.taus[0], cfg.sigma)
    elif cfg.case == "heisenberg":
        s2 = step_internal_heisenberg(s, incr[:, 1:], dt, cfg.sigma)
    else:
        s2 = s
    s3 = step_loewner(s, incr[:, 0], dt, cfg.loewner_scheme)
    s2.P, s2.B0, s2.t = s3.P, s3.B0, s3.t
    return s2


# ---------------------------------------------------------------------------
# path runner


Probe = Callable[[SLEPathState], np.ndarray]


@dataclass
class TrajectoryTable:
    """``values[name]`` has shape (n_times, n_paths, ...)."""

    times: np.ndarray
    values: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    final_state: SLEPathState | None = None


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("SLE_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _sample_steps(cfg: PathConfig, sample_times: Sequence[float]) -> list[int]:
    steps = []
    for t in sample_times:
        k = int(round(t / cfg.dt))
        if abs(k * cfg.dt - t) > 1e-9 or k < 0 or k > cfg.n_steps:
            raise ValueError(f"sample time {t} is not a grid time in [0, T]")
        steps.append(k)
    return steps


def _run_chunk(cfg: PathConfig, paths: range, probes: Mapping[str, Probe], steps: list[int],
               increments: np.ndarray | None = None) -> tuple[dict[str, list[np.ndarray]], SLEPathState]:
    incr = driver_for(cfg).increments(list(paths), cfg.n_steps) if increments is None else increments
    s = SLEPathState.initial(cfg, len(paths))
    rec: dict[str, list[np.ndarray]] = {k: [] for k in probes}
    last = max(steps) if steps else cfg.n_steps
    for k in range(last + 1):
        for _ in range(steps.count(k)):
            for name, fn in probes.items():
                rec[name].append(fn(s))
        if k < last:
            s = advance(cfg, s, incr[:, k, :])
    return rec, s


def run_paths(
    cfg: PathConfig,
    probes: Mapping[str, Probe],
    sample_times: Sequence[float],
    n_paths: int,
    chunk: int = 2500,
) -> TrajectoryTable:
    """Simulate ``n_paths`` paths, recording every probe at the sample times.

    Paths are split into chunks that may run on ``SLE_LAB_THREADS`` threads;
    chunks are reassembled in path order, so results do not depend on the
    thread count.
    """
    cfg.validate()
    order = sorted(range(len(sample_times)), key=lambda i: sample_times[i])
    times = np.asarray(sample_times, dtype=float)
    steps = _sample_steps(cfg, [sample_times[i] for i in order])
    table = TrajectoryTable(times=times, metadata=cfg.metadata())
    if n_paths == 0:
        for name in probes:
            table.values[name] = np.zeros((len(times), 0), dtype=complex)
        return table
    ranges = [range(a, min(a + chunk, n_paths)) for a in range(0, n_paths, chunk)]
    work = lambda r: _run_chunk(cfg, r, probes, steps)  # noqa: E731
    nt = n_threads()
    if nt > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(nt) as ex:
            results = list(ex.map(work, ranges))
    else:
        results = [work(r) for r in ranges]
    for name in probes:
        per_time = [np.concatenate([res[0][name][j] for res in results]) for j in range(len(steps))]
        arr = np.stack(per_time) if per_time else np.zeros((0, n_paths), dtype=complex)
        inv = np.argsort(order)
        table.values[name] = arr[inv] if len(order) else arr
    table.final_state = concat_states([res[1] for res in results])
    return table


def simulate(cfg: PathConfig, n_paths: int, increments: np.ndarray | None = None) -> SLEPathState:
    """Final state after ``cfg.T`` (optionally on supplied increments)."""
    cfg.validate()
    if increments is None:
        increments = driver_for(cfg).increments(list(range(n_paths)), cfg.n_steps)
    s = SLEPathState.initial(cfg, n_paths)
    for k in range(cfg.n_steps):
        s = advance(cfg, s, increments[:, k, :])
    return s
