import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ancient_neck import warped_geometry as wg
from ancient_neck.warped_geometry import GeometryError, RadialProfile


def profile(fn, lo=0.3, hi=0.7, n=41, **kw):
    r = np.linspace(lo, hi, n)
    return RadialProfile(r, fn(r), **kw)


def mid(p, value):
    return int(np.argmin(np.abs(p.r - value)))


def test_scalar_curvature_examples():
    flat = profile(lambda r: np.ones_like(r))
    cyl = profile(lambda r: np.zeros_like(r), 0.5, 1.5)
    sphere = profile(lambda r: 1 - r**2)
    assert wg.scalar_curvature(flat, mid(flat, 0.5)) == pytest.approx(0.0, abs=1e-12)
    assert wg.scalar_curvature(cyl, mid(cyl, 1.0)) == pytest.approx(2.0, abs=1e-12)
    assert wg.scalar_curvature(sphere, mid(sphere, 0.5)) == pytest.approx(6.0, abs=1e-10)


def test_velocity_examples():
    flat = profile(lambda r: np.ones_like(r))
    cyl = RadialProfile(np.linspace(1.0, 2.0, 41) + (math.sqrt(2) - 1.5), np.zeros(41))
    sphere = profile(lambda r: 1 - r**2)
    assert wg.velocity_v(flat, 3) == pytest.approx(0.0, abs=1e-12)
    assert wg.velocity_v(cyl, 20) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert wg.velocity_v(sphere, mid(sphere, 0.5)) == pytest.approx(1.0, abs=1e-10)


def test_pde_rhs_examples():
    flat = profile(lambda r: np.ones_like(r))
    half = profile(lambda r: np.full_like(r, 0.5), 0.5, 1.5)
    assert wg.pde_rhs(flat, 10) == pytest.approx(0.0, abs=1e-10)
    assert wg.pde_rhs(half, mid(half, 1.0)) == pytest.approx(0.5, abs=1e-12)


def test_harnack_examples():
    flat = profile(lambda r: np.ones_like(r))
    sphere = profile(lambda r: 1 - r**2)
    assert wg.harnack_quantity(flat, 5) == pytest.approx(0.0, abs=1e-12)
    assert wg.harnack_quantity(sphere, mid(sphere, 0.5)) == pytest.approx(22 / 3, rel=1e-9)


def test_xi_examples():
    flat = profile(lambda r: np.ones_like(r))
    half = profile(lambda r: np.full_like(r, 0.5), 0.5, 1.5)
    assert wg.xi_coefficient(flat, 5) == pytest.approx(0.0, abs=1e-12)
    assert wg.xi_coefficient(half, mid(half, 1.0)) == pytest.approx(1 / 3, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 2.0), st.floats(-1.0, 1.0), st.floats(-3.0, 3.0))
def test_harnack_closed_form_matches_direct_sum(r, u, ur, urr):
    direct = wg.harnack_jet(r, u, ur, urr)
    closed = wg.harnack_closed_form_jet(r, u, ur, urr)
    assert direct == pytest.approx(closed, rel=1e-9, abs=1e-9 * (1 + abs(direct)))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(0.1, 0.9))
def test_gradient_identity_on_sphere(rho0, frac):
    # Harnack gradient equals -(2/r)(1 + r v / (2u)) u_t/u for the exact sphere jet.
    r = frac * rho0
    u, ur, urr, urrr = 1 - r**2 / rho0**2, -2 * r / rho0**2, -2 / rho0**2, 0.0
    h = 1e-6
    q = lambda x: wg.harnack_jet(x, 1 - x**2 / rho0**2, -2 * x / rho0**2, urr)
    grad = (q(r + h) - q(r - h)) / (2 * h)
    assert grad == pytest.approx(wg.harnack_gradient_rhs_jet(r, u, ur, urr), abs=1e-5 * (1 + abs(grad)))


def test_identity_converges_at_second_order():
    errs = []
    for n in (41, 81, 161):
        p = profile(lambda r: 0.5 + 0.2 * np.cos(r), 0.5, 1.5, n)
        ur, urr = p.derivatives()
        exact_ur = -0.2 * np.sin(p.r)
        diff = wg.harnack_jet(p.r, p.u, ur) - wg.harnack_closed_form_jet(p.r, p.u, exact_ur)
        errs.append(np.max(np.abs(diff)))
    assert math.log2(errs[0] / errs[1]) >= 1.8
    assert math.log2(errs[1] / errs[2]) >= 1.8


def test_tip_limits_and_invariants():
    r = np.linspace(0.0, 0.5, 26)
    p = RadialProfile(r, 1 - r**2, tip_included=True, positive_curvature=True)
    assert p.check_invariants() == []
    assert wg.scalar_curvature(p, 0) == pytest.approx(6.0, abs=1e-10)
    assert wg.velocity_v(p, 0) == 0.0
    data = wg.geometric_data(p)
    assert np.all(data.v >= -1e-12)
    assert np.all(np.isfinite(data.harnack_q))


def test_tip_derivative_vanishes_under_refinement():
    vals = []
    for n in (11, 21, 41):
        r = np.linspace(0.0, 0.5, n)
        u = 1 - np.sin(r) ** 2
        vals.append(abs(r[1] and (u[1] - u[0]) / r[1]))
    assert vals[0] > vals[1] > vals[2]


def test_positive_curvature_violation_reported():
    r = np.linspace(0.1, 1.0, 20)
    p = RadialProfile(r, 0.5 + 0.1 * r, positive_curvature=True)
    assert "u_r > 0" in p.check_invariants()


@pytest.mark.parametrize("r,u,kw", [
    ([0.0, 0.1, 0.2, 0.3, 0.4], [1] * 5, {}),
    ([0.1, 0.2, 0.2, 0.3, 0.4], [1] * 5, {}),
    ([0.1, 0.2, 0.3, 0.4, 0.5], [1, 1, np.nan, 1, 1], {}),
    ([0.1, 0.2, 0.3, 0.4, 0.5], [1] * 5, {"tip_included": True}),
    ([0.1, 0.2, 0.3], [1] * 3, {}),
])
def test_invalid_profiles_rejected(r, u, kw):
    with pytest.raises(GeometryError):
        RadialProfile(np.array(r), np.array(u, dtype=float), **kw)


def test_nonpositive_u_rejected_for_harnack_and_xi():
    p = profile(lambda r: np.zeros_like(r), 0.5, 1.5)
    with pytest.raises(GeometryError):
        wg.harnack_quantity(p, 10)
    with pytest.raises(GeometryError):
        wg.xi_coefficient(p, 10)
