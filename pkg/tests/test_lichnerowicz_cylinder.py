import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ancient_neck import lichnerowicz_cylinder as lc
from ancient_neck.s2_harmonics import S2Basis, SphereQuadrature


@pytest.fixture(scope="module")
def sphere():
    return S2Basis(4), SphereQuadrature.build(4)


def _constant_tensor(quad, mat):
    return np.broadcast_to(np.asarray(mat, dtype=float), (len(quad.weight), 3, 3)).copy()


def test_decompose_round_metric(sphere):
    basis, quad = sphere
    modes = lc.decompose(_constant_tensor(quad, np.diag([1.0, 1.0, 0.0])), basis, quad)
    Y00 = 1 / math.sqrt(4 * math.pi)
    assert modes.coeffs["omega"][0] == pytest.approx(1 / Y00, rel=1e-13)
    assert np.max(np.abs(modes.coeffs["omega"][1:])) < 1e-13
    for kind in ("chi", "sigma", "beta"):
        assert np.max(np.abs(modes.coeffs[kind])) < 1e-13


def test_decompose_dz_dz(sphere):
    basis, quad = sphere
    modes = lc.decompose(_constant_tensor(quad, np.diag([0.0, 0.0, 1.0])), basis, quad)
    omega_free = np.max(np.abs(modes.coeffs["omega"]))
    assert omega_free < 1e-13
    h = lc.assemble(modes, quad.theta, quad.phi)
    np.testing.assert_allclose(h[:, 2, 2], 1.0, atol=1e-13)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_round_trip_random_band_limited(seed):
    basis, quad = S2Basis(4), SphereQuadrature.build(4)
    rng = np.random.default_rng(seed)
    coeffs = {k: rng.normal(size=(len(basis.family(lc.FAMILY[k])), 3)) for k in lc.KINDS}
    modes = lc.CylinderTensorModes(basis, coeffs)
    h = lc.assemble(modes, quad.theta, quad.phi)
    back = lc.decompose(h, basis, quad)
    for k in lc.KINDS:
        np.testing.assert_allclose(back.coeffs[k], coeffs[k], atol=1e-10)


def test_decompose_rejects_asymmetric(sphere):
    basis, quad = sphere
    h = _constant_tensor(quad, [[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    with pytest.raises(lc.LichnerowiczError):
        lc.decompose(h, basis, quad)


def test_gbar_norm_of_round_metric():
    h = np.diag([1.0, 1.0, 0.0])
    assert lc.gbar_norm(h, -3.0) == pytest.approx(math.sqrt(2) / 6.0)


def test_kappa_lower_bounds(sphere):
    basis, _ = sphere
    assert lc.kappa_values(basis, "omega").min() == 0
    assert lc.kappa_values(basis, "sigma").min() == 2
    assert lc.kappa_values(basis, "chi").min() == 6


def test_neutral_mode_is_exact():
    z = np.linspace(-8, 8, 33)
    sol = lc.mode_evolve(2.0, z, -16.0, -1.0, 150, np.full_like(z, 16.0 * 0.7))
    np.testing.assert_allclose(sol.c, 0.7 * (-sol.t)[:, None] * np.ones_like(z), rtol=1e-12)
    assert lc.neutral_mode_residual(0.7, np.linspace(-16, -1, 20)) < 1e-14


def test_heat_kernel_for_zero_damping():
    t0, t1, s0 = -3.0, -1.0, 1.0
    errs = []
    for nz, nt in ((101, 25), (201, 50), (401, 100)):
        z = np.linspace(-20, 20, nz)
        gauss = lambda t: np.exp(-z**2 / (4 * (s0 + t - t0))) / np.sqrt(s0 + t - t0)
        sol = lc.mode_evolve(0.0, z, t0, t1, nt, gauss(t0), left=lambda t: gauss(t)[0],
                             right=lambda t: gauss(t)[-1])
        errs.append(np.max(np.abs(sol.c[-1] - gauss(t1))))
    assert errs[-1] < 1e-4
    assert math.log2(errs[0] / errs[1]) >= 1.8 and math.log2(errs[1] / errs[2]) >= 1.8


@pytest.mark.parametrize("kappa", [0.0, 2.0, 6.0, 20.0])
def test_damped_and_substituted_agree(kappa):
    z = np.linspace(-8, 8, 65)
    c0 = np.exp(-z**2) + 0.3
    a = lc.mode_evolve(kappa, z, -16.0, -1.0, 300, c0, form="substituted").c
    b = lc.mode_evolve(kappa, z, -16.0, -1.0, 300, c0, form="damped").c
    assert np.max(np.abs(a - b)) / np.max(np.abs(a)) <= 1e-8
    cn = lc.mode_evolve(kappa, z, -16.0, -1.0, 300, c0, form="damped_cn").c
    assert np.max(np.abs(a - cn)) / np.max(np.abs(a)) <= 1e-2


def test_mode_evolve_errors():
    z = np.linspace(0, 1, 5)
    with pytest.raises(lc.LichnerowiczError):
        lc.mode_evolve(1.0, z, -1.0, 0.5, 10, np.zeros(5))
    with pytest.raises(lc.LichnerowiczError):
        lc.mode_evolve(1.0, z**2, -2.0, -1.0, 10, np.zeros(5))
    with pytest.raises(ValueError):
        lc.mode_evolve(1.0, z, -2.0, -1.0, 10, np.zeros(5), form="explicit")


def test_prop51_neutral_mode_recovered():
    cfg = lc.Prop51Config(L=32.0)
    rep, _ = lc.run_prop51(cfg, lc.neutral_mode_data(cfg, (0.5, 0.0, -1.0)))
    np.testing.assert_allclose(rep.psi, [0.5, 0.0, -1.0], atol=1e-10)
    assert rep.sup_total < 1e-10


def test_prop51_random_data_hypothesis_and_averaging():
    cfg = lc.Prop51Config(L=32.0)
    rep, modes = lc.run_prop51(cfg, lc.random_prop51_data(cfg, seed=3))
    assert rep.hypothesis_ok
    assert rep.hypothesis_sup_early <= 1.0 + 1e-12
    assert rep.averaging_defect < 1e-12
    assert modes.L == 32.0


def test_prop51_rejects_bad_window():
    cfg = lc.Prop51Config(L=16.0, t_window=10.0)
    with pytest.raises(lc.LichnerowiczError):
        lc.run_prop51(cfg, lc.neutral_mode_data(cfg))


@pytest.mark.parametrize("name", ["rotation_x", "rotation_z", "translation_z", "conformal_cos"])
def test_lie_derivative_fields(name):
    chk = lc.lie_derivative_invariant_check(name)
    assert chk.identity_residual <= 1e-12
    tol = 1e-12 if chk.expected == "0" else 1e-10
    assert chk.evolution_residual <= tol


def test_residual_of_zero_and_of_beta_term():
    zero = lc.lichnerowicz_residual([], -1.5, n=16)
    assert zero.sup == 0.0
    beta = [lc.ModeTerm("beta", 0, lambda z: np.cos(z), lambda z: -np.cos(z))]
    assert lc.lichnerowicz_residual(beta, -1.5, n=24).sup < 1e-2


def test_residual_order_round_metric_times_first_harmonic():
    term = [lc.ModeTerm("omega", 1, lambda z: np.ones_like(z), lambda z: np.zeros_like(z))]
    _, orders = lc.residual_order(term, -1.5, n_values=(16, 32, 64))
    assert min(orders) >= 1.8


def test_residual_rejects_pole():
    with pytest.raises(lc.LichnerowiczError):
        lc.lichnerowicz_residual([], -1.0, box=((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)))


def test_fit_exponent():
    L = [64, 128, 256]
    assert lc.fit_exponent(L, [3.0 / x for x in L]) == pytest.approx(-1.0, abs=1e-12)
