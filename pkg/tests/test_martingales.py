import csv
import io
from fractions import Fraction as Q

import numpy as np
import pytest

from sle_lab import algebra as A
from sle_lab.martingales import (
    CSV_COLUMNS,
    ObservableError,
    ObservableSpec,
    drift_test,
    eval_observable,
    heisenberg_observables,
    one_step_drift,
    reports_to_csv,
    residue_identity_probe,
    residue_identity_report,
    sl2_observables,
    vector_martingale_check,
    virasoro_bb,
)
from sle_lab.sde import PathConfig, SLEPathState, simulate

Z = 4.0
SL2 = PathConfig(kappa=2.0, case="sl2", dt=1e-3, T=0.05, seed=1)
HEIS = PathConfig(kappa=4.0, case="heisenberg", rank=2, lam=Q(1, 2), dt=1e-3, T=0.05, seed=1)


@pytest.fixture(scope="module")
def sl2_state():
    return simulate(SL2, 4)


# -- values at t = 0 come from the module -------------------------------------------


def zero_mode_element(X, bra, ket):
    lat = A.LatticeSl2()
    v = A.GradedVector.top(lat, 2, sign=ket)
    w = A.apply_generator(lat, (X, 0), v) if X != "L" else A.apply_L(lat, 0, v)
    return A.pairing(A.GradedVector.top(lat, 2, sign=bra), w)


def test_sl2_values_at_identity_match_module():
    s = SLEPathState.initial(SL2, 1)
    for o in sl2_observables(Z):
        X = o.X if o.kind == "Sl2Current" else "L"
        power = 1 if X != "L" else 2
        expected = float(zero_mode_element(X, o.bra, o.ket)) / Z**power
        assert eval_observable(s, o)[0] == pytest.approx(expected, abs=1e-15), o.id


def test_bb_at_identity():
    s = SLEPathState.initial(SL2, 1)
    o = virasoro_bb(Q(2), Z)
    assert (o.c, o.h) == (-2, 1)
    assert eval_observable(s, o)[0] == pytest.approx(1 / Z**2)
    assert eval_observable(s, virasoro_bb(Q(6), Z))[0] == 0


def test_heisenberg_values_at_identity():
    s = SLEPathState.initial(HEIS, 1)
    vals = {o.id: eval_observable(s, o)[0] for o in heisenberg_observables(Q(1, 2), 2, Z)}
    assert vals["heis_H1"] == pytest.approx(0.5 / Z)
    assert vals["heis_H2"] == 0
    assert vals["heis_L"] == pytest.approx(0.125 / Z**2)


def test_coefficient_probe_matches_point_probe(sl2_state):
    # sum of coefficients times z^{-k} reproduces the point value far from the hull
    o = sl2_observables(Z)[1]
    K = sl2_state.e.shape[-1]
    coeffs = [eval_observable(sl2_state, ObservableSpec(**{**o.__dict__, "coeff": k})) for k in range(K)]
    series = sum(c * Z ** (-k) for k, c in enumerate(coeffs))
    assert np.allclose(series, eval_observable(sl2_state, o), atol=1e-6)


def test_observable_errors(sl2_state):
    with pytest.raises(ObservableError):
        ObservableSpec("Sl2Current", X="E", z=1.0)
    with pytest.raises(ObservableError):
        ObservableSpec("Sl2Current", X="Q")
    with pytest.raises(ObservableError):
        eval_observable(sl2_state, ObservableSpec("Sl2Current", X="E", coeff=99))
    with pytest.raises(ObservableError):
        eval_observable(sl2_state, heisenberg_observables(Q(0), 1)[0])


# -- exact one-step drift -------------------------------------------------------------


def test_corrected_observables_have_no_drift(sl2_state):
    s = sl2_state.take(slice(0, 2))
    for o in sl2_observables(Z) + [virasoro_bb(Q(2), Z)]:
        assert np.max(np.abs(one_step_drift(SL2, s, o, nodes=3))) < 1e-4, o.id


def test_residual_drift_is_a_discretisation_effect(sl2_state):
    o = sl2_observables(Z)[1]
    fine = PathConfig(**{**SL2.__dict__, "dt": 2.5e-4})
    coarse_d = np.max(np.abs(one_step_drift(SL2, sl2_state, o)))
    fine_d = np.max(np.abs(one_step_drift(fine, sl2_state, o)))
    assert 2.5 < coarse_d / fine_d < 6


def test_printed_f_forms_drift(sl2_state):
    printed = {o.id: o for o in sl2_observables(Z, variant="printed")}
    for key in ("sl2_F_++_printed", "sl2_F_-+_printed", "sl2_F_--_printed"):
        assert np.max(np.abs(one_step_drift(SL2, sl2_state, printed[key]))) > 1e-2


def test_violation_produces_drift(sl2_state):
    bad = PathConfig(**{**SL2.__dict__, "tau": 2.0, "allow_violation": True})
    s = sl2_state.take(slice(0, 2))
    worst = max(np.max(np.abs(one_step_drift(bad, s, o, nodes=3))) for o in sl2_observables(Z))
    assert worst > 1e-2


def test_heisenberg_one_step_drift():
    s = simulate(HEIS, 4)
    for o in heisenberg_observables(Q(1, 2), 2, Z):
        assert np.max(np.abs(one_step_drift(HEIS, s, o))) < 1e-4, o.id


# -- Monte Carlo ------------------------------------------------------------------------


def test_small_drift_test_passes():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1, seed=3)
    reports = drift_test(cfg, sl2_observables(Z)[:4], 300, [0.05, 0.1], threshold=4.0)
    assert all(r.passed for r in reports), [(r.observable_id, r.max_z) for r in reports]
    assert reports[0].M0 == 0 and reports[1].M0 == pytest.approx(0.25)


def test_drift_csv_columns():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.05, seed=0)
    reports = drift_test(cfg, sl2_observables(Z)[:2], 20, [0.05])
    rows = list(csv.DictReader(io.StringIO(reports_to_csv(reports))))
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert len(rows) == 2
    assert rows[0]["observable_id"] == "sl2_E_++"


def test_vector_martingale_passes_and_detects_violation():
    cfg = PathConfig(kappa=2.0, case="sl2", dt=1e-2, T=0.1, seed=0)
    assert vector_martingale_check(cfg, 2, 500, [0.05, 0.1]).passed
    bad = PathConfig(**{**cfg.__dict__, "tau": 2.0, "allow_violation": True})
    assert not vector_martingale_check(bad, 2, 500, [0.05, 0.1]).passed


def test_vector_martingale_needs_affine_case():
    with pytest.raises(ObservableError):
        vector_martingale_check(PathConfig(kappa=2.0, case="virasoro-only"), 1, 10)


# -- residue identity ---------------------------------------------------------------------


def test_residue_sides_vanish_at_identity():
    lhs, rhs = residue_identity_probe(SLEPathState.initial(HEIS, 3), Z)
    assert np.all(lhs == 0) and np.all(rhs == 0)


def test_residue_difference_is_minus_half_current_square():
    cfg = PathConfig(kappa=4.0, case="heisenberg", rank=2, lam=Q(0), dt=1e-3, T=0.05, seed=2)
    s = simulate(cfg, 5)
    lhs, rhs = residue_identity_probe(s, Z)
    currents = [eval_observable(s, o) for o in heisenberg_observables(Q(0), 2, Z)[:2]]
    assert np.allclose(lhs - rhs, -0.5 * sum(c * c for c in currents), atol=1e-9)
    assert np.all(np.abs(lhs - rhs) > 0)


def test_residue_report_shape():
    cfg = PathConfig(kappa=4.0, case="heisenberg", lam=Q(1, 2), dt=1e-2, T=0.1, seed=0)
    r = residue_identity_report(cfg, 30, [0.05, 0.1])
    assert list(r.times) == [0.0, 0.05, 0.1]
    assert r.t0_lhs == 0 and r.t0_rhs == 0
    assert len(r.rows()) == 3 and r.rows()[0]["max_abs_pathwise_diff"] == 0
