import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sector_blowup.ode_blowup import (
    CornerState,
    Infinite,
    OdeTrajectory,
    RiccatiState,
    corner_blowup_time_quadrature,
    corner_invariant_fn,
    corner_invariants,
    integrate_corner,
    integrate_riccati,
    invariant_drift,
    riccati_blowup_time,
    riccati_domination,
    riccati_invariant,
    riccati_solution,
)

# T* for beta = 1/4, (A, B, C) = (1, -1, 1) from the quadrature of dA / C(A)
CORNER_T_STAR = 3.9915656136677917


# ---------------------------------------------------------------------------
# Riccati


def test_riccati_zero_is_fixed():
    tr = integrate_riccati(RiccatiState(0.0, 0.0, 0.0, 1.0), 5.0)
    assert tr.status == "Completed" and tr.t_star == Infinite
    assert not tr.y.any()


def test_riccati_closed_form_value():
    assert riccati_blowup_time(1.0, 0.0, 1.0) == pytest.approx(math.pi / math.sqrt(2), rel=1e-15)
    assert round(riccati_blowup_time(1.0, 0.0, 1.0), 5) == 2.22144


def test_riccati_integrator_reproduces_closed_form():
    rtol = 1e-8
    tr = integrate_riccati(RiccatiState(0.0, 0.0, 1.0, 1.0), 10.0, rtol)
    assert tr.status == "BlowupDetected"
    assert tr.t_star == pytest.approx(math.pi / math.sqrt(2), rel=5e-6)
    # tan profile A = sqrt2 tan(t / sqrt2) along the trajectory
    A = tr.component("A")
    ok = tr.t < 2.0
    np.testing.assert_allclose(A[ok], math.sqrt(2) * np.tan(tr.t[ok] / math.sqrt(2)), rtol=1e-6)
    assert max(invariant_drift(tr)) <= 10 * rtol


def test_riccati_b0_zero_never_blows_up():
    assert riccati_blowup_time(1.0, 2.0, 0.0) == Infinite
    tr = integrate_riccati(RiccatiState(0.0, 2.0, 0.0, 1.0), 3.0)
    assert tr.status == "Completed"
    np.testing.assert_array_equal(tr.component("A"), 2.0)


def test_riccati_c_two_halves_time():
    assert riccati_blowup_time(2.0, 0.3, 0.7) == pytest.approx(riccati_blowup_time(1.0, 0.3, 0.7) / 2, rel=1e-14)


def test_riccati_requires_positive_c():
    with pytest.raises(ValueError):
        integrate_riccati(RiccatiState(0.0, 0.0, 1.0, 0.0), 1.0)


@pytest.mark.parametrize("A0,B0", [(1.0, 0.5), (2.0, 0.5), (0.5, 2.0), (-1.0, 0.1)])
def test_riccati_cases_against_integrator(A0, B0):
    T = riccati_blowup_time(1.0, A0, B0)
    tr = integrate_riccati(RiccatiState(0.0, A0, B0, 1.0), 60.0, 1e-9)
    if math.isinf(T):
        assert tr.status == "Completed"
    else:
        assert tr.t_star == pytest.approx(T, rel=1e-3)


def test_riccati_solution_matches_integrator():
    tr = integrate_riccati(RiccatiState(0.0, 0.4, 0.3, 0.7), 3.0, 1e-10)
    A, B = riccati_solution(0.7, 0.4, 0.3, tr.t)
    np.testing.assert_allclose(A, tr.component("A"), rtol=1e-7)
    np.testing.assert_allclose(B, tr.component("B"), rtol=1e-7)


def test_riccati_domination_detects_undershoot():
    t = np.linspace(0, 1, 11)
    A, B = riccati_solution(1.0, 0.0, 1.0, t)
    assert riccati_domination(t, A, B, 1.0) == (0.0, 0.0)
    mA, mB = riccati_domination(t, A * 1.1, B, 1.0)
    assert mA >= 0 and mB == 0
    mA, _ = riccati_domination(t, A * 0.9, B, 1.0)
    assert mA < 0


def test_trajectory_csv(tmp_path):
    tr = integrate_riccati(RiccatiState(0.0, 0.0, 1.0, 1.0), 1.0)
    tr.write_csv(tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["t", "A", "B", "drift1"]
    assert len(rows) == tr.t.size + 1


# ---------------------------------------------------------------------------
# corner system


def test_corner_zero_is_fixed():
    tr = integrate_corner(CornerState(0.0, 0.0, 0.0, 0.0, 0.25), 5.0)
    assert tr.status == "Completed" and not tr.y.any()
    assert corner_invariants(tr) == (0.0, 0.0)


def test_corner_invariant_line():
    # C0 = B0 = 0 keeps A constant
    tr = integrate_corner(CornerState(0.0, 1.5, 0.0, 0.0, 0.25), 5.0)
    np.testing.assert_array_equal(tr.component("A"), 1.5)


def test_corner_initial_first_integrals():
    inv, _ = corner_invariant_fn(0.25)
    I = inv(np.array([1.0, -1.0, 1.0]))[0]
    assert I[0] == pytest.approx(-15 / 16, abs=1e-15)
    assert I[1] == pytest.approx(-7 / 15, abs=1e-15)


def test_corner_blowup_reproducible_and_conserving():
    rtol = 1e-8
    a = integrate_corner(CornerState(0.0, 1.0, -1.0, 1.0, 0.25), 20.0, rtol)
    b = integrate_corner(CornerState(0.0, 1.0, -1.0, 1.0, 0.25), 20.0, rtol / 10)
    assert a.status == b.status == "BlowupDetected"
    assert f"{a.t_star:.4g}" == f"{b.t_star:.4g}"
    assert a.t_star == pytest.approx(CORNER_T_STAR, rel=1e-6)
    d1, d2 = corner_invariants(a)
    assert d1 <= 10 * rtol and d2 <= 10 * rtol


def test_corner_quadrature_oracle_value():
    assert corner_blowup_time_quadrature(0.25, 1.0, -1.0, 1.0) == pytest.approx(CORNER_T_STAR, rel=1e-10)


def test_corner_invariants_time_derivative_vanishes():
    # finite-difference d/dt of each first integral along the computed trajectory
    tr = integrate_corner(CornerState(0.0, 0.5, -0.2, 0.3, 0.3), 1.0, 1e-10)
    I = tr.invariant_values()
    dI = np.diff(I, axis=0) / np.diff(tr.t)[:, None]
    assert np.max(np.abs(dI)) < 1e-6


def test_corner_detector_catches_corruption():
    tr = integrate_corner(CornerState(0.0, 0.5, -0.2, 0.3, 0.25), 1.0)
    y = tr.y.copy()
    y[len(y) // 2, 1] += 1.0
    bad = OdeTrajectory(tr.names, tr.t, y, tr.status, tr.t_star, tr.params, tr.invariants)
    assert max(corner_invariants(bad)) >= 0.1


def test_corner_rejects_half_beta():
    with pytest.raises(ValueError):
        integrate_corner(CornerState(0.0, 1.0, -1.0, 1.0, 0.5), 1.0)


def test_corner_invariants_needs_corner_trajectory():
    tr = integrate_riccati(RiccatiState(0.0, 0.0, 1.0, 1.0), 0.5)
    with pytest.raises(ValueError):
        corner_invariants(tr)


def test_invariant_drift_needs_two_points():
    tr = OdeTrajectory(("A", "B"), np.zeros(1), np.zeros((1, 2)), "Completed", Infinite, {"c": 1.0}, riccati_invariant)
    with pytest.raises(ValueError):
        invariant_drift(tr)


# ---------------------------------------------------------------------------
# properties


@given(st.floats(0.2, 5), st.floats(-2, 2), st.floats(0.05, 2))
@settings(max_examples=40, deadline=None)
def test_riccati_time_rescaling(lam, A0, B0):
    T1 = riccati_blowup_time(1.0, A0, B0)
    Tl = riccati_blowup_time(lam, A0, B0)
    if math.isinf(T1):
        assert math.isinf(Tl)
    else:
        assert Tl == pytest.approx(T1 / lam, rel=1e-12)


@given(st.floats(0.3, 3))
@settings(max_examples=8, deadline=None)
def test_corner_weighted_scaling_covariance(lam):
    # A' = C is linear, so the covariance is weighted: (lam A, lam^2 B, lam^2 C) runs lam times faster
    T1 = corner_blowup_time_quadrature(0.25, 1.0, -1.0, 1.0)
    Tl = corner_blowup_time_quadrature(0.25, lam, -lam**2, lam**2)
    assert Tl == pytest.approx(T1 / lam, rel=1e-8)


@given(st.floats(0.1, 1.5), st.floats(0.0, 1.0), st.floats(0.1, 1.0))
@settings(max_examples=15, deadline=None)
def test_riccati_first_integral_conserved(c, A0, B0):
    rtol = 1e-8
    tr = integrate_riccati(RiccatiState(0.0, A0, B0, c), 2.0, rtol)
    assert max(invariant_drift(tr)) <= 10 * rtol


@given(st.floats(0.05, 0.45), st.floats(0, 1), st.floats(-1, 0), st.floats(0.1, 1))
@settings(max_examples=10, deadline=None)
def test_corner_blowup_matches_quadrature(beta, A0, B0, C0):
    tr = integrate_corner(CornerState(0.0, A0, B0, C0, beta), 200.0, 1e-8)
    T = corner_blowup_time_quadrature(beta, A0, B0, C0)
    assert tr.status == "BlowupDetected"
    assert tr.t_star == pytest.approx(T, rel=1e-4)
