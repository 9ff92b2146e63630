import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_bvp

from sector_blowup.angular_field import ThetaField, make_grid
from sector_blowup.elliptic_1d import (
    QUARTER_PI,
    gprime_boundary,
    is_quarter_pi,
    mass_constant,
    solve_stream,
    solve_stream_fd,
    solve_stream_kernel,
    thomas,
    velocity_from_g,
)


def sin2(n, L=QUARTER_PI):
    return ThetaField.from_function(make_grid(L, n), lambda t: np.sin(2 * t), "odd")


def exact_sin2(theta):
    return -(theta / 4) * np.cos(2 * theta)


def test_zero_source_gives_zero_stream():
    g = ThetaField(make_grid(QUARTER_PI, 33), np.zeros(33), "odd")
    for sol in (solve_stream_kernel(g), solve_stream_fd(g)):
        assert not sol.G.values.any() and not sol.Gp.values.any()


def test_zero_source_general_angle():
    g = ThetaField(make_grid(0.6, 33), np.zeros(33), "odd")
    assert not solve_stream_fd(g).G.values.any()


def test_kernel_sin2_closed_form_and_spot_values():
    sol = solve_stream_kernel(sin2(257))
    th = sol.G.grid.nodes
    np.testing.assert_allclose(sol.G.values, exact_sin2(th), atol=1e-10)
    G8, _ = sol.evaluate(math.pi / 8)
    # -(pi/32) * sqrt(2)/2
    assert float(G8) == pytest.approx(-math.pi / 32 * math.sqrt(2) / 2, abs=1e-9)
    assert round(float(G8), 5) == -0.06942
    g0, gL = sol.boundary_derivatives()
    assert gL == pytest.approx(math.pi / 8, abs=1e-10)
    assert g0 == pytest.approx(-0.25, abs=1e-10)


def test_kernel_rejects_other_angles():
    with pytest.raises(ValueError, match="solve_stream_fd"):
        solve_stream_kernel(sin2(33, 0.6))


def test_even_source_rejected():
    g = ThetaField.from_function(make_grid(QUARTER_PI, 33), np.cos, "even")
    with pytest.raises(ValueError, match="odd"):
        solve_stream_fd(g)


def test_fd_is_second_order_against_closed_form():
    errs = [np.max(np.abs(solve_stream_fd(sin2(n)).G.values - exact_sin2(sin2(n).grid.nodes))) for n in (33, 65, 129, 257)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)
    # error constant C in |err| <= C h^2
    h = QUARTER_PI / 256
    assert errs[-1] <= 0.1 * h**2


def test_kernel_and_fd_agree_to_second_order():
    d = []
    for n in (65, 129):
        g = ThetaField.from_function(make_grid(QUARTER_PI, n), lambda t: t**3 - 0.2 * t, "odd")
        d.append(np.max(np.abs(solve_stream_kernel(g).G.values - solve_stream_fd(g).G.values)))
    assert math.log2(d[0] / d[1]) > 1.9


def test_fd_matches_scipy_bvp_at_general_angle():
    L = 0.6
    g = ThetaField.from_function(make_grid(L, 401), lambda t: t, "odd")
    sol = solve_stream_fd(g)
    ref = solve_bvp(
        lambda x, y: np.vstack([y[1], x - 4 * y[0]]),
        lambda ya, yb: np.array([ya[0], yb[0]]),
        np.linspace(0, L, 50),
        np.zeros((2, 50)),
        tol=1e-10,
    )
    np.testing.assert_allclose(sol.G.values, ref.sol(g.grid.nodes)[0], atol=1e-6)


def test_nonnegative_source_gives_nonpositive_stream():
    g = ThetaField.from_function(make_grid(QUARTER_PI, 129), lambda t: t, "odd")
    sol = solve_stream_kernel(g)
    assert np.all(sol.G.values <= 1e-14)


def test_general_angle_sign_properties():
    g = ThetaField.from_function(make_grid(0.6, 129), lambda t: t, "odd")
    sol = solve_stream_fd(g)
    assert np.all(sol.G.values <= 1e-14)
    assert np.all(sol.Gpp.values >= g.values - 1e-14)


def test_residual_is_small():
    sol = solve_stream_fd(sin2(129))
    h = sol.G.grid.h
    assert sol.residual() <= 10 * h**2


def test_gprime_boundary_sin2():
    g0, gL = gprime_boundary(sin2(129))
    assert g0 == pytest.approx(-0.25, abs=1e-8)
    assert gL == pytest.approx(math.pi / 8, abs=1e-8)


def test_gprime_boundary_zero_source():
    g = ThetaField(make_grid(0.5, 17), np.zeros(17), "odd")
    assert gprime_boundary(g) == (0.0, 0.0)


def test_gprime_boundary_agrees_with_solver_at_general_angle():
    g = ThetaField.from_function(make_grid(0.9, 513), lambda t: np.sin(3 * t) + t, "odd")
    g0, gL = gprime_boundary(g)
    sol = solve_stream_fd(g)
    a0, aL = sol.boundary_derivatives()
    assert abs(a0 - g0) < 1e-4 and abs(aL - gL) < 1e-4


def test_gprime_boundary_signs_for_monotone_source():
    g0, gL = gprime_boundary(ThetaField.from_function(make_grid(QUARTER_PI, 129), lambda t: t, "odd"))
    assert gL >= 0 >= g0
    assert g0 + gL >= 0


def test_gprime_boundary_checks_angle():
    with pytest.raises(ValueError):
        gprime_boundary(sin2(33), L=0.5)


def test_mass_constant_quarter_pi():
    # min over [L/2, L] of sin 2t is sin(pi/4); half the mass sits there
    assert mass_constant(QUARTER_PI) == pytest.approx(0.5 * math.sqrt(2) / 2, abs=1e-12)


def test_velocity_sin2_at_quarter_pi():
    sol = solve_stream_kernel(sin2(257))
    u = velocity_from_g(sol, 1.0, math.pi / 4)
    np.testing.assert_allclose(u, [-math.pi * math.sqrt(2) / 16] * 2, atol=1e-8)
    assert u[0] == pytest.approx(-0.2776, abs=1e-4)


def test_velocity_vanishes_at_origin_and_is_tangent_on_boundary():
    sol = solve_stream_kernel(sin2(65))
    assert not velocity_from_g(sol, 0.0, 0.3).any()
    u = velocity_from_g(sol, 2.0, QUARTER_PI)
    e_t = np.array([-math.sin(QUARTER_PI), math.cos(QUARTER_PI)])
    assert abs(u @ e_t) < 1e-14


def test_velocity_rejects_angle_outside_interval():
    sol = solve_stream_kernel(sin2(65))
    with pytest.raises(ValueError, match="outside"):
        velocity_from_g(sol, 1.0, 1.0)


def test_solve_stream_dispatch():
    assert is_quarter_pi(math.pi / 4)
    a = solve_stream(sin2(65))
    b = solve_stream_kernel(sin2(65))
    np.testing.assert_array_equal(a.G.values, b.G.values)
    c = solve_stream(sin2(65, 0.5))
    np.testing.assert_array_equal(c.G.values, solve_stream_fd(sin2(65, 0.5)).G.values)


def test_thomas_matches_dense_solve():
    rng = np.random.default_rng(3)
    n = 12
    lo, up = rng.random(n - 1), rng.random(n - 1)
    d = 4 + rng.random(n)
    b = rng.random(n)
    A = np.diag(d) + np.diag(lo, -1) + np.diag(up, 1)
    np.testing.assert_allclose(thomas(lo, d, up, b), np.linalg.solve(A, b), rtol=1e-12)


def test_thomas_zero_pivot_raises():
    with pytest.raises(np.linalg.LinAlgError):
        thomas(np.ones(1), np.zeros(2), np.ones(1), np.ones(2))


# ---------------------------------------------------------------------------
# properties


@given(
    st.lists(st.floats(0, 2), min_size=3, max_size=3),
    st.sampled_from([33, 65, 129]),
)
@settings(max_examples=40, deadline=None)
def test_monotone_mass_bound(coefs, n):
    # g = a t + b t^3 + c sin(2t) is odd with g, g' >= 0 on [0, pi/4]
    a, b, c = coefs
    g = ThetaField.from_function(make_grid(QUARTER_PI, n), lambda t: a * t + b * t**3 + c * np.sin(2 * t), "odd")
    _, gL = gprime_boundary(g)
    assert gL >= mass_constant(QUARTER_PI) * g.integral() - 1e-12


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0.1, 1.5))
@settings(max_examples=40, deadline=None)
def test_fd_is_linear_in_source(coefs, L):
    grid = make_grid(L, 65)
    a, b, c = coefs
    g1 = ThetaField.from_function(grid, lambda t: a * t, "odd")
    g2 = ThetaField.from_function(grid, lambda t: b * np.sin(t) + c * t**3, "odd")
    s = solve_stream_fd(g1.with_values(g1.values + g2.values)).G.values
    np.testing.assert_allclose(s, solve_stream_fd(g1).G.values + solve_stream_fd(g2).G.values, atol=1e-12 * (1 + np.abs(s).max()))


@given(st.lists(st.floats(0, 2), min_size=2, max_size=2), st.floats(0.1, 1.5))
@settings(max_examples=40, deadline=None)
def test_nonnegative_source_sign_propagation(coefs, L):
    a, b = coefs
    g = ThetaField.from_function(make_grid(L, 65), lambda t: a * t + b * np.sin(t), "odd")
    sol = solve_stream_fd(g)
    assert np.all(sol.G.values <= 1e-12)
    assert np.all(sol.Gpp.values >= g.values - 1e-12)
