"""Verification suites: each returns a list of :class:`CheckResult`.

The CLI and the acceptance tests share these functions, so thresholds live
here and nowhere else.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import algebra as alg
from . import symmetry as sym
from .martingales import (
    DriftReport,
    ObservableSpec,
    drift_test,
    heisenberg_observables,
    sl2_observables,
    virasoro_bb,
)
from .sde import PathConfig, driver_for, run_paths, simulate

Q = Fraction

# thresholds
DRIFT_SIGMA = 3.0
NEGATIVE_CONTROL_SIGMA = 5.0
KAPPA0_REL_TOL = 1e-4
A1_TOL = 1e-6
HALVING_RATIO = (1.4, 2.6)  # 2 +- 30%


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def row(self) -> dict:
        return {"check": self.name, "passed": self.passed, "seconds": round(self.seconds, 3), **self.detail}


def _timed(name: str, fn: Callable[[], tuple[bool, dict]]) -> CheckResult:
    t0 = time.perf_counter()
    ok, detail = fn()
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# exact algebra


def _on_curve(c: Fraction, h: Fraction) -> bool:
    if 2 * h + 1 == 0:
        return False
    kappa = Q(6) / (2 * h + 1)
    return kappa != 0 and alg.kappa_to_ch(kappa) == (c, h)


def check_singular_vectors(seed: int = 0, kappas: Sequence[Fraction] = (Q(2), Q(6), Q(8, 3))) -> list[CheckResult]:
    out = []
    for kappa in kappas:
        c, h = alg.kappa_to_ch(Q(kappa))
        r1, r2 = alg.singular_check(c, h, Q(kappa))
        out.append(CheckResult(f"singular kappa={kappa}", r1.is_zero() and r2.is_zero(),
                               {"c": str(c), "h": str(h)}))
    rng = random.Random(seed)
    n_bad = 0
    while n_bad < 5:
        c = Q(rng.randint(-40, 40), rng.randint(1, 9))
        h = Q(rng.randint(-20, 40), rng.randint(1, 9))
        if _on_curve(c, h):
            continue
        n_bad += 1
        kappa = Q(6) / (2 * h + 1) if 2 * h + 1 != 0 else Q(1)
        r1, r2 = alg.singular_check(c, h, kappa)
        out.append(CheckResult(f"non-conforming c={c} h={h}", not (r1.is_zero() and r2.is_zero()),
                               {"expect": "nonzero residual"}))
    return out


def check_annihilators() -> list[CheckResult]:
    out = []
    for rank in (1, 2):
        for lam in (Q(0), Q(1, 2)):
            spec = alg.HeisenbergFock(rank, lam)
            tau = [2 - 4 * lam**2] + [Q(2)] * (rank - 1)
            r = alg.annihilator_check(spec, Q(4), tau, alg.GradedVector.top(spec, 2))
            out.append(CheckResult(f"annihilator heisenberg rank={rank} lam={lam}", r.is_zero()))
            bad = alg.annihilator_check(spec, Q(4), [tau[0] + 1] + tau[1:], alg.GradedVector.top(spec, 2))
            out.append(CheckResult(f"annihilator heisenberg rank={rank} lam={lam} wrong tau",
                                   not bad.is_zero(), {"expect": "nonzero"}))
    L = alg.LatticeSl2()
    for kappa, tau in ((Q(2), Q(1)), (Q(1), Q(3, 2)), (Q(3), Q(1, 2))):
        for sign in (1, -1):
            top = alg.GradedVector.top(L, 2, sign=sign)
            r = alg.annihilator_check(L, kappa, tau, top)
            out.append(CheckResult(f"annihilator sl2 kappa={kappa} tau={tau} top={sign:+d}", r.is_zero()))
    for kappa, tau in ((Q(2), Q(2)), (Q(3), Q(1))):
        r = alg.annihilator_check(L, kappa, tau, alg.GradedVector.top(L, 2))
        out.append(CheckResult(f"annihilator sl2 kappa={kappa} tau={tau} (kappa+2tau!=4)",
                               not r.is_zero(), {"expect": "nonzero"}))
    return out


def _virasoro_bracket_failures(spec: alg.ModuleSpec, c: Fraction, D: int, modes: range) -> tuple[int, int]:
    bad = total = 0
    pad = max(abs(m) for m in modes) * 2
    for d in range(D + 1):
        for mon in spec.basis(d):
            v = alg.GradedVector.basis_vector(spec, mon, D + pad)
            first = {n: alg.sugawara_L(spec, n, v, upto=D + pad) for n in modes}
            single = {}
            for m, n in itertools.combinations(modes, 2):
                lhs = (alg.sugawara_L(spec, m, first[n], upto=D) - alg.sugawara_L(spec, n, first[m], upto=D))
                if m + n not in single:
                    single[m + n] = alg.sugawara_L(spec, m + n, v, upto=D)
                rhs = single[m + n].scale(m - n)
                if m + n == 0:
                    rhs = rhs + v.project(D).scale(c / 12 * (m**3 - m))
                total += 1
                bad += not (lhs - rhs).is_zero()
    return bad, total


def _affine_bracket_failures(spec: alg.ModuleSpec, D: int, modes: range) -> tuple[int, int]:
    gens = spec.lie
    bad = total = 0
    pad = 2 * max(abs(m) for m in modes) + 1
    for d in range(D + 1):
        for mon in spec.basis(d):
            v = alg.GradedVector.basis_vector(spec, mon, D + pad)
            for X, Y in itertools.product(gens, repeat=2):
                for m, n in itertools.product(modes, repeat=2):
                    a = alg.apply_word(spec, [(X, m), (Y, n)], v, upto=D + pad)
                    b = alg.apply_word(spec, [(Y, n), (X, m)], v, upto=D + pad)
                    rhs = alg.GradedVector(spec, {}, D)
                    for Z, cz in alg.lie_bracket(spec, X, Y).items():
                        rhs = rhs + alg.apply_generator(spec, (Z, m + n), v, upto=D).scale(cz)
                    if m + n == 0:
                        rhs = rhs + v.project(D).scale(m * alg.killing(spec, X, Y) * spec.level)
                    total += 1
                    bad += not ((a - b).project(D) - rhs).is_zero()
    return bad, total


def check_sugawara(D: int = 4, modes: range = range(-2, 3)) -> list[CheckResult]:
    out = []
    cases = [(alg.HeisenbergFock(1), Q(1)), (alg.HeisenbergFock(2), Q(2)), (alg.LatticeSl2(), Q(1))]
    for spec, c in cases:
        def run(spec=spec, c=c):
            bad, total = _virasoro_bracket_failures(spec, c, D, modes)
            return bad == 0, {"failures": bad, "brackets": total, "central_charge": str(c)}
        out.append(_timed(f"sugawara virasoro {type(spec).__name__} c={c}", run))
    for spec in (alg.LatticeSl2(), alg.LatticeSl2(Q(0))):
        def run(spec=spec):
            bad, total = _affine_bracket_failures(spec, D, modes)
            return bad == 0, {"failures": bad, "brackets": total}
        out.append(_timed(f"frenkel-kac affine brackets charge={spec.charge}", run))
    return out


def random_loop_series(rng: random.Random, depth: int = 4, positive: int = 0) -> dict[int, Fraction]:
    """Random rational ``sum_{n=-depth}^{positive} c_n zeta^n`` (negative part nonzero)."""
    out = {}
    for n in range(-depth, positive + 1):
        if n == 0 and positive == 0:
            continue
        out[n] = Q(rng.choice([-1, 1]) * rng.randint(1, 9), rng.randint(1, 7))
    return out


def check_conjugations(seed: int = 0, D: int = 4, depth: int = 4) -> list[CheckResult]:
    rng = random.Random(seed)
    out = []
    L = alg.LatticeSl2()
    a = {n: c for n, c in random_loop_series(rng, depth).items() if n < 0}
    x = random_loop_series(rng, 2, positive=2)
    for A, X in itertools.product("EHF", repeat=2):
        out.append(_timed(f"conjugation sl2 A={A} X={X}", lambda A=A, X=X: (
            not alg.conjugation_check(L, A, a, X, x, D), {"degree": D})))
    for A in "EHF":
        def run(A=A):
            bad = [n for n in range(-2, 3) if alg.virasoro_twist_residual(L, A, a, n, D)]
            return not bad, {"failing_modes": bad}
        out.append(_timed(f"virasoro twist sl2 A={A}", run))
    H = alg.HeisenbergFock(2)
    out.append(_timed("conjugation heisenberg A=H1 X=H1", lambda: (
        not alg.conjugation_check(H, "H1", a, "H1", x, D), {})))
    out.append(_timed("virasoro twist heisenberg A=H1", lambda: (
        not any(alg.virasoro_twist_residual(H, "H1", a, n, D) for n in range(-2, 3)), {})))
    return out


def algebra_suite(seed: int = 0, D: int = 4) -> list[CheckResult]:
    return check_singular_vectors(seed) + check_annihilators() + check_sugawara(D) + check_conjugations(seed, D)


# ---------------------------------------------------------------------------
# symmetry operators


def symmetry_suite(windows: sym.Windows = sym.Windows(), levels: range = range(-2, 3), seed: int = 0,
                   n_max: int = 3) -> tuple[list[CheckResult], list[sym.CommutatorReport], list[sym.GeneratingFunctionReport]]:
    checks: list[CheckResult] = []
    reports = []
    t0 = time.perf_counter()
    for A, B in itertools.product(sym.OPERATORS, repeat=2):
        for l, m in itertools.product(levels, repeat=2):
            reports.append(sym.commutator_check(A, l, B, m, windows=windows, seed=seed))
    failed = [r.key for r in reports if not r.passed]
    checks.append(CheckResult("symmetry brackets", not failed,
                              {"brackets": len(reports), "failures": failed[:20]}, time.perf_counter() - t0))
    for key in ("[E1,F-1]", "[H1,H-1]", "[L2,L-2]"):
        r = next((r for r in reports if r.key == key), None)
        if r is not None:
            checks.append(CheckResult(f"symmetry central term {key}", r.passed, {"checked_terms": r.checked_terms}))
    c = sym.central_charge(windows)
    checks.append(CheckResult("symmetry central charge", c == sym.CENTRAL_CHARGE, {"c": str(c)}))
    gfs = []
    for X in ("E", "H", "F", "L"):
        for bra, ket in itertools.product((1, -1), repeat=2):
            g = sym.generating_function_check(X, bra, ket, None, n_max, windows)
            gfs.append(g)
            checks.append(CheckResult(
                f"generating function {X} <{bra:+d}|.|{ket:+d}>", g.passed and g.numeric_residual == 0,
                {"sign": g.sign, "symbolic_residual": str(g.symbolic_residual),
                 "identity_residual": g.numeric_residual},
            ))
    return checks, reports, gfs


# ---------------------------------------------------------------------------
# simulation checks


def sqrt_expansion(t: float, n_terms: int) -> np.ndarray:
    """Coefficients of ``sqrt(z^2 + 4t) = z sum_k binom(1/2, k) (4t)^k z^{-2k}``;
    entry j is the coefficient of ``z^{1-j}``."""
    out = np.zeros(n_terms)
    for k in range(0, (n_terms + 1) // 2):
        j = 2 * k
        if j < n_terms:
            b = 1.0
            for i in range(k):
                b *= (0.5 - i) / (i + 1)
            out[j] = b * (4 * t) ** k
    return out


def check_kappa_zero(T: float = 0.25, dt: float = 1e-4, lowest: int = -7, scheme: str = "trapezoid") -> CheckResult:
    def run():
        cfg = PathConfig(kappa=0.0, case="virasoro-only", dt=dt, T=T, loewner_scheme=scheme)
        s = simulate(cfg, 1)
        n = 2 - lowest  # z^1 ... z^lowest
        ref = sqrt_expansion(T, n)
        got = s.P[0, :n].real
        rel = []
        for j in range(n):
            if ref[j] != 0:
                rel.append(abs(got[j] - ref[j]) / abs(ref[j]))
            else:
                rel.append(abs(got[j]))
        worst = max(rel)
        return worst <= KAPPA0_REL_TOL, {"max_rel_error": worst, "scheme": scheme, "lowest_power": lowest}
    return _timed(f"kappa=0 sqrt expansion ({scheme})", run)


def check_a1(cfg: PathConfig, n_paths: int = 200) -> CheckResult:
    def run():
        times = [k * cfg.T / 5 for k in range(6)]
        times = [round(round(t / cfg.dt) * cfg.dt, 12) for t in times]
        tab = run_paths(cfg, {"a1": lambda s: s.P[:, 2]}, times, n_paths)
        err = float(np.max(np.abs(tab.values["a1"] - 2 * tab.times[:, None])))
        return err <= A1_TOL, {"max_abs_error": err, "paths": n_paths, "case": cfg.case}
    return _timed(f"a1 = 2t ({cfg.case}, kappa={cfg.kappa})", run)


def internal_discrepancy(a, b, depth: int = 6) -> np.ndarray:
    """Mean over paths of squared differences of e, h, f coefficients 1..depth."""
    sq = 0.0
    for name in "ehf":
        d = getattr(a, name)[:, 1 : depth + 1] - getattr(b, name)[:, 1 : depth + 1]
        sq = sq + np.abs(d) ** 2
    return np.mean(sq, axis=0)


def check_integrator_halving(kappa: float = 2.0, dt: float = 1e-3, T: float = 0.25, n_paths: int = 1000,
                             seed: int = 0, depth: int = 6) -> CheckResult:
    """Coefficient-Euler vs multiplicative stepping on shared increments."""
    def run():
        fine = PathConfig(kappa=kappa, case="sl2", dt=dt / 2, T=T, seed=seed)
        inc = driver_for(fine).increments(list(range(n_paths)), fine.n_steps)
        coarse_inc = inc[:, 0::2] + inc[:, 1::2]
        disc = {}
        for label, step, incs in (("coarse", dt, coarse_inc), ("fine", dt / 2, inc)):
            base = PathConfig(kappa=kappa, case="sl2", dt=step, T=T, seed=seed)
            a = simulate(base, n_paths, incs)
            b = simulate(PathConfig(**{**base.__dict__, "integrator": "multiplicative"}), n_paths, incs)
            disc[label] = internal_discrepancy(a, b, depth)
        # the first coefficients agree exactly in both schemes
        nz = disc["fine"] > 1e-300
        ratios = [float(c / f) if k else None for c, f, k in zip(disc["coarse"], disc["fine"], nz)]
        ratio = float(np.sum(disc["coarse"]) / np.sum(disc["fine"]))
        lo, hi = HALVING_RATIO
        return lo <= ratio <= hi, {
            "ratio": ratio, "per_coefficient": [None if r is None else round(r, 3) for r in ratios],
            "mse_coarse": float(np.sum(disc["coarse"])), "mse_fine": float(np.sum(disc["fine"])),
            "paths": n_paths,
        }
    return _timed("integrator cross-validation (discrepancy halves with dt)", run)


def drift_suite(cfg: PathConfig, observables: Sequence[ObservableSpec], n_paths: int,
                sample_times: Sequence[float], threshold: float = DRIFT_SIGMA) -> tuple[list[CheckResult], list[DriftReport]]:
    t0 = time.perf_counter()
    reports = drift_test(cfg, observables, n_paths, sample_times, threshold)
    dt = time.perf_counter() - t0
    checks = [CheckResult(f"drift {r.observable_id}", r.passed, {"max_z": r.max_z, "threshold": threshold})
              for r in reports]
    if checks:
        checks[0].seconds = dt
    return checks, reports


def negative_control(reports: Iterable[DriftReport], sigma: float = NEGATIVE_CONTROL_SIGMA) -> CheckResult:
    reps = list(reports)
    worst = max((r.max_z for r in reps), default=0.0)
    flagged = [r.observable_id for r in reps if r.max_z > sigma]
    return CheckResult("negative control exceeds 5 sigma", bool(flagged),
                       {"max_z": worst, "flagged": flagged})


def default_observables(cfg: PathConfig, z: complex = 4.0) -> list[ObservableSpec]:
    if cfg.case == "sl2":
        return sl2_observables(z)
    if cfg.case == "heisenberg":
        return heisenberg_observables(Q(cfg.lam), cfg.rank, z)
    return [virasoro_bb(Q(cfg.kappa).limit_denominator(1000), z)]
