import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ancient_neck import anderson_chow as ac
from ancient_neck.anderson_chow import RicciTriple

triples = st.lists(st.floats(0.0, 100.0), min_size=3, max_size=3).map(sorted).filter(
    lambda r: sum(r) > 1e-6)


def test_matrix_at_unit_triple():
    A = ac.build_A_rho(RicciTriple(1, 1, 1))
    np.testing.assert_array_equal(np.diag(A), 6.0)
    assert A[0, 1] == A[0, 2] == A[1, 2] == -3.0
    assert ac.det_A_rho(RicciTriple(1, 1, 1)) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(A @ np.ones(3), 0.0, atol=1e-14)


def test_matrix_at_degenerate_triple():
    A = ac.build_A_rho(RicciTriple(0, 0, 1))
    np.testing.assert_array_equal(np.diag(A), 2.0)
    assert (A[0, 1], A[0, 2], A[1, 2]) == (1.0, -1.0, -1.0)


def test_offdiagonal_vanishes_when_rho_reaches_R():
    A = ac.build_A_rho(np.array([0.2, 0.3, 0.5]), rho=1.0)
    assert np.all(A[~np.eye(3, dtype=bool)] == 0.0)


@settings(max_examples=100, deadline=None)
@given(triples, st.floats(0.0, 1.0))
def test_closed_form_determinant(r, frac):
    r = np.array(r)
    rho = frac * r.sum()
    A = ac.build_A_rho(r, rho)
    scale = (2 * np.sum(r * r)) ** 3 + 1e-300
    assert abs(ac.det_A_rho(r, rho) - np.linalg.det(A)) <= 1e-10 * scale


@pytest.mark.parametrize("r,value", [((1, 1, 1), 27.0), ((0, 0, 1), 3.0)])
def test_minor2_identity_examples(r, value):
    lhs, rhs, rel = ac.minor2_identity_check(np.array(r, dtype=float))
    assert lhs == pytest.approx(value) and rhs == pytest.approx(value) and rel < 1e-15


@settings(max_examples=200, deadline=None)
@given(triples)
def test_minor2_identity_random(r):
    assert ac.minor2_identity_check(np.array(r))[2] <= 1e-12


def test_minor2_requires_rho_zero():
    with pytest.raises(ac.AndersonChowError):
        ac.minor2_identity_check(RicciTriple(1, 1, 1, rho=0.5))


def test_S_examples():
    I = np.eye(3)
    S, form, gap = ac.S_quantity(np.diag([1.0, 0, 0]), I)
    assert (S, form, gap) == pytest.approx((3.0, 6.0, 0.0))
    S, form, gap = ac.S_quantity(I, I)
    assert (S, form, gap) == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(triples, st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.integers(0, 2**31 - 1))
def test_S_bound_in_a_rotated_common_frame(r, h, seed):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
    ric = Q @ np.diag(r) @ Q.T
    hm = Q @ np.diag(h) @ Q.T
    R = float(np.sum(r))
    S, form, gap = ac.S_quantity(hm, ric, rho=R / 20, commute_tol=1e-9)
    scale = (1 + np.sum(np.square(h))) * (1 + R * R)
    assert gap >= -1e-10 * scale


def test_S_rejects_noncommuting():
    with pytest.raises(ac.AndersonChowError):
        ac.S_quantity(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0.0]]), np.diag([1.0, 2, 3]))


def test_product_inequality_examples():
    lhs, pair, full = ac.product_terms(np.array([1.0, 1, 1]))
    assert lhs == -3.0 and full == pytest.approx(3.0)
    lhs, pair, full = ac.product_terms(np.array([0.0, 0, 1]))
    assert lhs == 1.0 and full == pytest.approx(1.0)


@settings(max_examples=300, deadline=None)
@given(triples)
def test_first_pairwise_bound_holds(r):
    m = ac.product_inequality_check(np.array(r))["pairwise"]
    assert m[0] >= -1e-12


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 5e-2])
def test_averaged_bound_fails_near_degenerate_triple(eps):
    # counterexample: LHS - RHS is about 4 eps / 3 at r = (eps, eps, 1)
    r = np.array([eps, eps, 1.0])
    lhs, _, full = ac.product_terms(r)
    assert lhs - full == pytest.approx(4 * eps / 3, abs=10 * eps**2)
    assert ac.product_inequality_check(r)["averaged"] < 0


def test_margins_are_scale_invariant():
    r = np.array([0.1, 0.3, 0.9])
    m1 = ac.product_inequality_check(r)
    m2 = ac.product_inequality_check(1e3 * r)
    np.testing.assert_allclose(m1["pairwise"], m2["pairwise"], rtol=1e-12)
    assert ac.scale_invariance_error(r, 0.05) < 1e-12


@settings(max_examples=100, deadline=None)
@given(triples, st.floats(1e-6, 0.1))
def test_determinant_expansion_remainder_is_bounded(r, frac):
    r = np.array(r)
    R = r.sum()
    rho = frac * R
    rem, w = ac.det_expansion_remainder(r, rho)
    assert rem >= -20.0 * w


def test_simplex_grid():
    g = ac.simplex_grid(40)
    np.testing.assert_allclose(g.sum(axis=1), 1.0)
    assert np.all(np.diff(g, axis=1) >= 0)
    assert np.all(ac.det_A_rho(g) >= -1e-12)


def test_certificate_on_coarse_grid():
    cert = ac.certify_constants(resolution=60, n_rho=8)
    assert cert.certified and cert.C_sharp == 10.0
    assert cert.c_sharp > 0 and cert.eigen_constant > 0
    d = cert.as_dict()
    assert d["C_sharp"] == 10.0


def test_random_sweep_is_reproducible():
    a = ac.random_sweep(20_000, seed=5).as_dict()
    b = ac.random_sweep(20_000, seed=5).as_dict()
    assert a == b
    assert a["minor2_max_rel"] <= 1e-12 and a["s_gap_min"] >= -1e-12


@pytest.mark.parametrize("args", [(1, 0, 2), (-1, 0, 1), (0, 0, 1, 2.0), (0, 1, 2, -0.1)])
def test_triple_validation(args):
    with pytest.raises(ac.AndersonChowError):
        RicciTriple(*args)
