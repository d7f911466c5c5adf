from fractions import Fraction as Q

import numpy as np
import pytest

from sle_lab import suites
from sle_lab.sde import (
    BrownianDriver,
    ConfigError,
    PathConfig,
    SLEPathState,
    driver_for,
    gauss_refactor,
    run_paths,
    simulate,
    step_internal_heisenberg,
    step_internal_sl2,
    step_loewner,
    step_multiplicative,
    theta_matrix,
    validate_path_config,
)

# -- configuration ---------------------------------------------------------------


def test_sl2_tau_is_derived_from_kappa():
    cfg = PathConfig(kappa=2.0, case="sl2")
    assert cfg.taus == (1.0, 1.0, 1.0)
    assert not cfg.violation
    assert cfg.metadata()["taus"] == [1.0, 1.0, 1.0]


def test_heisenberg_taus_and_violation_flag():
    cfg = PathConfig(kappa=4.0, case="heisenberg", rank=2, lam=Q(1, 2))
    assert cfg.taus == (1.0, 2.0)
    assert not cfg.violation
    bad = PathConfig(kappa=4.0, case="heisenberg", rank=2, lam=Q(1, 2), tau=(2.0, 2.0), allow_violation=True)
    assert bad.violation
    bad.validate()


def test_explicit_violation_needs_opt_in():
    with pytest.raises(ConfigError):
        PathConfig(kappa=2.0, case="sl2", tau=2.0).validate()
    cfg = PathConfig(kappa=2.0, case="sl2", tau=2.0, allow_violation=True).validate()
    assert cfg.violation and cfg.metadata()["intentional_violation"]


def test_lambda_outside_range_is_explained():
    errs = validate_path_config(PathConfig(kappa=4.0, case="heisenberg", lam=Q(4, 5)))
    assert any("lambda = 4/5" in e and "1/sqrt(2)" in e for e in errs)


def test_all_errors_are_reported_together():
    errs = validate_path_config(PathConfig(kappa=-1.0, case="sl2", dt=1e-3, T=0.0105, N=2, integrator="rk4"))
    assert len(errs) >= 4


def test_multiplicative_needs_sl2():
    errs = validate_path_config(PathConfig(kappa=4.0, case="heisenberg", lam=Q(0), integrator="multiplicative"))
    assert any("multiplicative" in e for e in errs)


# -- driver ------------------------------------------------------------------------


def test_driver_is_reproducible_per_path():
    d = BrownianDriver(7, (2.0, 1.0), 1e-3)
    a = d.increments([0, 1, 2, 3], 50)
    b = d.increments([3], 50)
    assert a.shape == (4, 50, 2)
    assert np.array_equal(a[3], b[0])
    assert not np.array_equal(a[0], a[1])
    assert not np.array_equal(BrownianDriver(8, (2.0, 1.0), 1e-3).increments([0], 50), a[:1])


def test_driver_variances():
    d = BrownianDriver(0, (4.0, 0.5), 1e-2)
    x = d.increments(range(400), 50).reshape(-1, 2)
    n = x.shape[0]
    for r, v in enumerate((4.0, 0.5)):
        expected = v * 1e-2
        assert abs(x[:, r].var() - expected) < 5 * expected * np.sqrt(2 / n)
    assert abs(np.corrcoef(x[:, 0], x[:, 1])[0, 1]) < 5 / np.sqrt(n)


def test_driver_for_uses_kappa_then_taus():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-3)
    assert driver_for(cfg).variances == (2.0, 1.0, 1.0, 1.0)


# -- single steps ------------------------------------------------------------------


def state(case="sl2", n=3, **kw):
    cfg = PathConfig(kappa=2.0 if case == "sl2" else 4.0, case=case, **kw)
    return cfg, SLEPathState.initial(cfg, n)


def test_loewner_euler_step_from_identity():
    _, s = state()
    dB0 = np.array([0.1, -0.2, 0.0])
    out = step_loewner(s, dB0, 1e-3, "euler")
    assert np.allclose(out.P[:, 1], -dB0)
    assert np.allclose(out.P[:, 2], 2e-3)
    assert np.allclose(out.P[:, 3], 0)
    assert np.allclose(out.g_coeffs()[:, 1], 0)
    assert out.t == pytest.approx(1e-3)


def test_kappa_zero_matches_square_root():
    r = suites.check_kappa_zero(T=0.25, dt=1e-3)
    assert r.passed, r.detail


def test_euler_loewner_is_first_order():
    errs = [suites.check_kappa_zero(T=0.25, dt=dt, scheme="euler").detail["max_rel_error"] for dt in (2e-3, 1e-3)]
    assert 1.6 < errs[0] / errs[1] < 2.4


@pytest.mark.parametrize("case", ["sl2", "heisenberg", "virasoro-only"])
def test_half_capacity_coefficient(case):
    kw = {"lam": Q(1, 2)} if case == "heisenberg" else {}
    cfg = PathConfig(kappa=2.0 if case != "heisenberg" else 4.0, case=case, dt=1e-3, T=0.05, **kw)
    assert suites.check_a1(cfg, n_paths=20).passed


def test_heisenberg_step():
    _, s = state("heisenberg", rank=2, lam=Q(1, 2))
    assert step_internal_heisenberg(s, np.zeros((3, 2)), 1e-3).hs.tolist() == s.hs.tolist()
    dB = np.array([[0.1, 0.2], [0.0, -0.3], [1.0, 0.5]])
    for sigma in (1, -1):
        out = step_internal_heisenberg(s, dB, 1e-3, sigma)
        assert np.allclose(out.hs[:, :, 1], sigma * dB)
        assert np.allclose(out.hs[:, :, 2:], 0)


def test_heisenberg_leading_variance():
    cfg = PathConfig(kappa=4.0, case="heisenberg", lam=Q(1, 2), dt=1e-2, T=0.2, seed=3)
    s = simulate(cfg, 2000)
    x = s.hs[:, 0, 1].real
    expected = cfg.taus[0] * cfg.T
    assert abs(x.var() - expected) < 4 * expected * np.sqrt(2 / len(x))


def test_sl2_step_without_noise_only_moves_h():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1)
    s = SLEPathState.initial(cfg, 2)
    for _ in range(10):
        s = step_internal_sl2(s, np.zeros((2, 3)), cfg.dt, 1.0)
        s = step_loewner(s, np.zeros(2), cfg.dt, "trapezoid")
    assert np.all(s.e == 0) and np.all(s.f == 0)
    assert np.allclose(s.h[:, 2], -0.5 * 1.0 * 0.1)
    s.check_structure()


def test_sl2_first_step():
    _, s = state()
    dB = np.array([[0.1, 0.2, 0.3], [0.0, -0.1, 0.4], [0.5, 0.0, 0.0]])
    out = step_internal_sl2(s, dB, 1e-3, 1.0, sigma=-1)
    assert np.allclose(out.e[:, 1], -np.sqrt(0.5) * (dB[:, 1] + 1j * dB[:, 2]))
    assert np.allclose(out.h[:, 1], -np.sqrt(0.5) * dB[:, 0])
    # sec5 orientation flips every internal increment
    flipped = step_internal_sl2(s, -dB, 1e-3, 1.0, sigma=1)
    for name in "ehf":
        assert np.allclose(getattr(out, name), getattr(flipped, name))


def test_sign_conventions_are_pathwise_related():
    base = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1, seed=5)
    other = PathConfig(**{**base.__dict__, "sign_convention": "sec5"})
    inc = driver_for(base).increments(range(6), base.n_steps)
    neg = inc.copy()
    neg[:, :, 1:] *= -1
    a = simulate(base, 6, inc)
    b = simulate(other, 6, neg)
    for name in ("P", "e", "h", "f"):
        assert np.allclose(getattr(a, name), getattr(b, name))


def test_f_has_zero_mean():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.2, seed=11)
    s = simulate(cfg, 2000)
    for k in (1, 2):
        x = s.f[:, k]
        se = np.sqrt(x.real.var() / len(x)) + np.sqrt(x.imag.var() / len(x))
        assert abs(x.mean()) < 4 * se


def test_multiplicative_zero_increment_is_identity():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.05, seed=2)
    s = simulate(cfg, 4)
    out = step_multiplicative(s, np.zeros((4, 3)), cfg.dt)
    for name in "ehf":
        assert np.allclose(getattr(out, name), getattr(s, name), atol=1e-13)


def test_theta_refactor_round_trip():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.05, seed=4)
    s = simulate(cfg, 4)
    e, h, f = gauss_refactor(*theta_matrix(s.e, s.h, s.f))
    for a, b in ((e, s.e), (h, s.h), (f, s.f)):
        assert np.allclose(a[:, 1:], b[:, 1:], atol=1e-12)


def test_integrators_agree_to_leading_order():
    base = PathConfig(kappa=2.0, case="sl2", dt=1e-3, T=0.02, seed=1)
    mult = PathConfig(**{**base.__dict__, "integrator": "multiplicative"})
    inc = driver_for(base).increments(range(8), base.n_steps)
    a, b = simulate(base, 8, inc), simulate(mult, 8, inc)
    assert np.allclose(a.e[:, 1], b.e[:, 1], atol=1e-12)
    assert np.max(np.abs(a.f[:, 1:4] - b.f[:, 1:4])) < 0.05


# -- runner --------------------------------------------------------------------------


def probes():
    return {"a1": lambda s: s.P[:, 2], "f1": lambda s: s.f[:, 1]}


def test_run_paths_is_deterministic():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1, seed=9)
    a = run_paths(cfg, probes(), [0.05, 0.1], 10)
    b = run_paths(cfg, probes(), [0.05, 0.1], 10)
    for k in a.values:
        assert np.array_equal(a.values[k], b.values[k])
    assert a.values["f1"].shape == (2, 10)
    a.final_state.check_structure()


def test_run_paths_matches_simulate():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1, seed=9)
    tab = run_paths(cfg, probes(), [0.1], 5)
    s = simulate(cfg, 5)
    assert np.array_equal(tab.values["f1"][0], s.f[:, 1])


def test_run_paths_unsorted_times_and_zero():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1, seed=1)
    tab = run_paths(cfg, probes(), [0.1, 0.0], 3)
    assert np.allclose(tab.values["a1"][0], 0.2)
    assert np.allclose(tab.values["a1"][1], 0.0)


def test_run_paths_rejects_off_grid_times():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1)
    with pytest.raises(ValueError):
        run_paths(cfg, probes(), [0.015], 2)


def test_run_paths_zero_paths():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1)
    tab = run_paths(cfg, probes(), [0.1], 0)
    assert tab.values["a1"].shape == (1, 0)


def test_kappa_zero_paths_are_identical():
    cfg = PathConfig(kappa=0.0, case="virasoro-only", dt=1e-2, T=0.1, seed=3)
    tab = run_paths(cfg, {"P": lambda s: s.P[:, 4]}, [0.1], 4)
    assert np.all(tab.values["P"][0] == tab.values["P"][0, 0])


def test_thread_count_does_not_change_results(monkeypatch):
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.05, seed=6)
    monkeypatch.setenv("SLE_LAB_THREADS", "1")
    a = run_paths(cfg, probes(), [0.05], 7, chunk=3)
    monkeypatch.setenv("SLE_LAB_THREADS", "3")
    b = run_paths(cfg, probes(), [0.05], 7, chunk=3)
    c = run_paths(cfg, probes(), [0.05], 7)
    for k in a.values:
        assert np.array_equal(a.values[k], b.values[k])
        assert np.array_equal(a.values[k], c.values[k])


def test_check_structure_catches_constant_terms():
    _, s = state()
    s.e[0, 0] = 1.0
    with pytest.raises(AssertionError):
        s.check_structure()
