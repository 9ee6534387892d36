import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ancient_neck import bryant_soliton as bs
from ancient_neck.warped_geometry import pde_rhs_jet

SQRT2 = math.sqrt(2.0)


def independent_u_at_minus_one(A, eps):
    """Integrate log(1 - u) from s = -sqrt2 + eps using only the leading tip term."""
    def rhs(s, L):
        y = math.exp(L[0])
        return [-(1 - y) * (2 - y) * s * s / ((s + SQRT2) * (SQRT2 - s) * (1 - y + s))]

    L0 = math.log(A) + (2 + SQRT2) * math.log(eps)
    sol = solve_ivp(rhs, (-SQRT2 + eps, -1.0), [L0], method="DOP853", rtol=1e-13, atol=1e-14)
    return 1.0 - math.exp(sol.y[0, -1])


@pytest.fixture(scope="module")
def trajectory():
    return bs.integrate_bryant_ode()


def test_u_at_minus_one_matches_independent_integration(trajectory):
    coarse = independent_u_at_minus_one(trajectory.A, 1e-3)
    fine = independent_u_at_minus_one(trajectory.A, 1e-4)
    # the start-up error is first order in eps, so extrapolate
    extrapolated = fine + (fine - coarse) / 9.0
    assert abs(fine - float(trajectory.u(-1.0))) < abs(coarse - float(trajectory.u(-1.0)))
    assert float(trajectory.u(-1.0)) == pytest.approx(extrapolated, abs=1e-7)


def test_endpoint_limits(trajectory):
    assert float(trajectory.u(-SQRT2 + 1e-8)) == pytest.approx(1.0, abs=1e-12)
    assert float(trajectory.u(-1e-6)) == pytest.approx(0.0, abs=1e-5)
    s = np.linspace(-SQRT2 + 1e-3, -1e-3, 500)
    u = trajectory.u(s)
    assert np.all((u > 0) & (u < 1))
    assert np.all(np.diff(u) < 0)


def test_trajectory_satisfies_ode(trajectory):
    s = np.linspace(-1.3, -0.05, 50)
    h = 1e-5
    du = (trajectory.u(s + h) - trajectory.u(s - h)) / (2 * h)
    np.testing.assert_allclose(du, bs.bryant_rhs(s, trajectory.u(s)), rtol=1e-6, atol=1e-9)


def test_series_coefficients_leading_terms():
    w = bs.w_series_coefficients()
    assert w[0] == 0.5 and w[1] == 0.25


def test_r_of_s_substitution(trajectory):
    r, phi, _, _ = bs.raw_jet(trajectory, np.array([-1.0]))
    u = float(trajectory.u(-1.0))
    assert r[0] == pytest.approx(math.sqrt((1 - u * u) / (u * u)), rel=1e-12)
    assert phi[0] == pytest.approx(1.0, rel=1e-14)


def test_phi_limits_at_both_ends(trajectory):
    r, phi, _, _ = bs.raw_jet(trajectory, np.array([-SQRT2 + 1e-4, -1e-3]))
    assert r[0] < 1e-2 and phi[0] > 1e3
    assert r[1] > 1e2 and phi[1] < 1e-5


def test_normalized_profile(soliton):
    assert soliton.tail_c2 == pytest.approx(1.0, abs=1e-6)
    assert soliton.tail_c4 == pytest.approx(2.0, rel=0.02)
    assert np.all(soliton.phi > 0)
    assert np.all(np.diff(soliton.phi) < 0)
    near_tip = soliton(np.array([1e-2, 1e-3, 1e-4, 1e-5]))
    assert np.all(np.diff(near_tip) > 0) and near_tip[-1] > 1e4


def test_tail_fit_window_stability(soliton):
    c4 = bs.fit_tail(soliton, 10.0, 100.0)[1]
    c4_wide = bs.fit_tail(soliton, 10.0, 200.0)[1]
    assert abs(c4_wide - c4) / abs(c4) < 0.005


def test_tail_remainder_scales_like_r_minus_4(soliton):
    r = np.geomspace(10.0, 100.0, 50)
    rem = np.abs(r**2 * soliton(r) - 1 - 2 / r**2)
    assert np.max(rem * r**4) < 50.0


def test_r_star(soliton):
    assert float(soliton(soliton.r_star)) == pytest.approx(2.0, abs=1e-10)
    assert bs.find_r_star(soliton) == soliton.r_star
    assert np.sum(np.diff(np.sign(soliton.phi - 2.0)) != 0) == 1


def test_steady_residual_via_geometry_module(soliton):
    r = np.geomspace(soliton.r_grid[0] * 2, soliton.r_grid[-1] / 2, 400)
    p0, p1, p2 = soliton.jet(r)
    assert np.max(np.abs(pde_rhs_jet(r, p0, p1, p2))) <= 1e-6


def test_tail_fit_rejects_short_window(soliton):
    with pytest.raises(bs.TailFitError):
        bs.fit_tail(soliton, 10.0, 15.0)


def test_bad_tolerance():
    with pytest.raises(ValueError):
        bs.integrate_bryant_ode(tolerance=0.0)


def test_r_star_outside_range(soliton):
    with pytest.raises(ValueError):
        bs.find_r_star(soliton, level=-1.0)
