import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ancient_neck import acceptance as acc
from ancient_neck import barrier as bar


def test_zeta_at_one(zeta):
    assert float(zeta(np.array([1.0]))[0]) == pytest.approx(-1.75, abs=1e-12)
    assert 2 + float(zeta(np.array([1.0]))[0]) == pytest.approx(0.25, abs=1e-12)


def test_zeta_singular_coefficient():
    assert bar.zeta_singular_coefficient() == pytest.approx(-7 / 8, abs=1e-14)


def test_zeta_leading_behavior_at_zero(zeta):
    s = np.geomspace(1e-3, 1e-2, 200)
    c = np.polynomial.polynomial.polyfit(s, s**3 * zeta(s), 3)
    assert c[0] == pytest.approx(5.0, rel=1e-6)


@pytest.mark.parametrize("s", [0.01, 0.3, 0.9, 0.999, 1.001, 1.1, 1.125])
def test_zeta_closed_form_matches_quadrature(zeta, s):
    assert float(zeta(np.array([s]))[0]) == pytest.approx(bar.zeta_by_quadrature(s), rel=1e-8, abs=1e-9)


def test_zeta_smooth_across_one(zeta):
    jumps = []
    for h in (1e-3, 1e-4, 1e-5):
        v = zeta(np.array([1 - h, 1 + h]))
        d = zeta(np.array([1 - h, 1 + h]), 1)
        assert abs(v[1] - v[0]) < 10 * h
        jumps.append(abs(d[1] - d[0]))
    # jumps in value and slope shrink linearly with the gap
    assert jumps[0] / jumps[1] == pytest.approx(10, rel=0.05)
    assert jumps[1] / jumps[2] == pytest.approx(10, rel=0.05)


def test_zeta_satisfies_defining_ode(zeta):
    s = np.array([0.2, 0.5, 0.8, 1.05])
    w = lambda x: zeta(x) / (x**-2 - 1)
    h = 1e-6
    np.testing.assert_allclose((w(s + h) - w(s - h)) / (2 * h), bar.zeta_rhs(s), rtol=1e-6)


@pytest.mark.parametrize("grid", [np.array([0.0, 0.5, 1.0]), np.array([0.1, 1.2])])
def test_zeta_grid_errors(grid):
    with pytest.raises(ValueError):
        bar.build_zeta(grid)


def test_find_N_contract():
    N = acc.barrier_N()
    assert N == 5
    p = acc.soliton()
    z = acc.zeta()
    assert bar.find_N(p, z, a_values=(200.0, 400.0)) <= N


def test_outer_region_negative_for_every_a():
    for a in acc.A_VALUES:
        psi = acc.barrier_psi(a)
        s = np.geomspace(psi.s_junction, bar.S_MAX, 4000)
        assert np.max(bar.barrier_operator(psi, s)) < 0


def test_beta_boundary_values(psi100, zeta):
    a, N = psi100.a, psi100.N
    b, db, _ = psi100.beta.jet(np.array([float(N)]))
    z0, z1, _ = zeta.jet(np.array([N / a]))
    assert b[0] == pytest.approx(a**-3 * z0[0] - 1 / a, rel=1e-12)
    assert db[0] == pytest.approx(a**-4 * z1[0], rel=1e-12)


def test_beta_ode_residual(psi100):
    B = psi100.beta
    r = np.linspace(B.r_star * 1.01, B.N * 0.99, 20)
    scale = np.max(np.abs(B.jet(r)[2])) + np.max(np.abs(B.beta))
    assert np.max(np.abs(B.ode_residual(r))) / scale <= 1e-8


def test_beta_bounded_uniformly_in_a():
    sups = [np.max(np.abs(acc.barrier_psi(a).beta.beta)) for a in acc.A_VALUES]
    assert max(sups) / min(sups) < 1.01


def test_psi_values_at_endpoints(psi100):
    a = psi100.a
    b_star = psi100.beta.jet(np.array([psi100.soliton.r_star]))[0][0]
    assert float(psi100(psi100.s_min)[0]) == pytest.approx(2 + b_star / a, rel=1e-10)
    expected = float(psi100.soliton(a)) - a**-2 + a**-4 * -1.75
    assert float(psi100(1.0)[0]) == pytest.approx(expected, rel=1e-13)


def test_junction_is_c1(psi100):
    assert max(psi100.junction_jumps()) <= 1e-8


def test_D_near_one_matches_expansion():
    for a in (100.0, 400.0):
        rep = acc.barrier_report(a)
        assert rep.D_at_1_scaled == pytest.approx(-1.5, abs=30 / a**2)
        assert rep.D_at_9_8_scaled == pytest.approx(
            float(bar.expansion_D(9 / 8, 1.0)), rel=0.01)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 1.125))
def test_operator_tracks_leading_expansion_on_outer_piece(psi100, s):
    d = float(bar.barrier_operator(psi100, np.array([s]))[0])
    lead = float(bar.expansion_D(s, psi100.a))
    assert abs(d - lead) <= 0.05 * abs(lead) + 50 * psi100.a**-6 * s**-7


def test_theta_and_margin_near_one(psi100, zeta):
    theta, rep = bar.verify_positivity(psi100)
    assert theta > 0
    assert rep.min_margin_near_1 >= 0
    fine = bar.find_theta(zeta, n=16001)
    assert abs(fine - theta) <= 0.05 * theta


def test_inner_region_fails_positivity():
    # Known failure: beta_a(r_star) is near -6050 for every a, so psi_a < 0 near r_star/a.
    _, rep = bar.verify_positivity(acc.barrier_psi(200.0))
    assert rep.min_psi_scaled < 0
    with pytest.raises(bar.BarrierError):
        bar.cap_diameter_integral(acc.barrier_psi(200.0))


def test_cylinder_cap_integral_closed_form():
    a, lo = 100.0, 0.01
    s = np.linspace(lo, 0.25, 200_001)
    f = (a**-2 * (s**-2 - 1) + a**-4 / 16) ** -0.5
    numeric = np.trapezoid(f, s)
    assert bar.cylinder_cap_integral(a, lo) == pytest.approx(numeric, rel=1e-8)
    assert bar.cylinder_cap_integral(200.0, lo) > bar.cylinder_cap_integral(a, lo)


def test_operator_domain(psi100):
    with pytest.raises(ValueError):
        bar.barrier_operator(psi100, np.array([1.2]))
    with pytest.raises(ValueError):
        bar.barrier_operator(psi100, np.array([psi100.s_min / 2]))


def test_beta_rejects_small_a(soliton, zeta):
    with pytest.raises(ValueError):
        bar.build_beta(1.0, 5.0, soliton, zeta)
    with pytest.raises(ValueError):
        bar.build_beta(100.0, 0.5, soliton, zeta)
