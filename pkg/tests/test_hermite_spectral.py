import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ancient_neck import hermite_spectral as hs
from ancient_neck.hermite_spectral import HermiteCoefficients


def test_inner_product_of_ones():
    assert hs.weighted_inner_product(1.0, 1.0) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-14)


def test_hermite_orthogonality_and_norms():
    for m in range(13):
        for n in range(13):
            ip = hs.weighted_inner_product(hs.hermite_function(m), hs.hermite_function(n))
            if m == n:
                assert ip == pytest.approx(2 ** (n + 1) * math.factorial(n) * math.sqrt(math.pi),
                                           rel=1e-12)
            else:
                assert abs(ip) / hs.hermite_norm_sq(max(m, n)) < 1e-12


def test_drift_operator_examples():
    one = HermiteCoefficients([1.0])
    np.testing.assert_allclose(hs.drift_operator(one).coeffs, [-1.0])
    # H_2(xi/2) = xi^2 - 2 is in the kernel
    h2 = HermiteCoefficients([0, 0, 1.0])
    np.testing.assert_allclose(hs.drift_operator(h2).coeffs, 0.0, atol=1e-15)
    h3 = HermiteCoefficients([0, 0, 0, 1.0])
    err = hs.weighted_norm(hs.drift_operator(h3) - HermiteCoefficients([0, 0, 0, 0.5]))
    assert err <= 1e-8


def test_drift_operator_on_callables_matches_coefficients():
    xi = np.linspace(-3, 3, 13)
    f = (lambda x: x**3 - 6 * x, lambda x: 3 * x**2 - 6, lambda x: 6 * x)
    np.testing.assert_allclose(hs.drift_operator(f)(xi), 0.5 * (xi**3 - 6 * xi), atol=1e-12)
    with pytest.raises(TypeError):
        hs.drift_operator(lambda x: x)


@pytest.mark.parametrize("n", range(11))
def test_eigenrelation(n):
    assert hs.eigenrelation_error(n) <= 1e-6


def test_projection_of_xi_squared():
    p = hs.project(lambda x: x**2)
    xi = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(p.zero(xi), xi**2 - 2, atol=1e-12)
    np.testing.assert_allclose(p.plus(xi), 2.0, atol=1e-12)
    np.testing.assert_allclose(p.minus(xi), 0.0, atol=1e-12)


def test_projection_of_h1():
    p = hs.project(hs.hermite_function(1))
    xi = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(p.plus(xi), xi, atol=1e-12)
    assert hs.weighted_norm(p.zero) < 1e-12 and hs.weighted_norm(p.minus) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=11, max_size=11))
def test_projection_algebra_on_random_polynomials(c):
    f = lambda x: np.polyval(c, x)
    errs = hs.projection_algebra_errors(f)
    assert max(errs.values()) <= 1e-10
    p = hs.project(f)
    xi = np.linspace(-3, 3, 7)
    scale = 1 + np.max(np.abs(f(xi)))
    np.testing.assert_allclose((p.plus + p.zero + p.minus)(xi), f(xi), atol=1e-10 * scale)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=20))
def test_parseval(c):
    assert HermiteCoefficients(c).parseval_error() <= 1e-12


@pytest.mark.parametrize("f", [lambda x: x, np.arctan, lambda x: x**3 + x, np.tanh])
def test_monotone_obstruction_positive(f):
    assert hs.monotone_obstruction(f) > 0.1


def test_monotone_obstruction_rejects_nonmonotone():
    with pytest.raises(hs.HermiteError):
        hs.monotone_obstruction(lambda x: x**2)


def test_cutoff_chi():
    assert np.all(hs.cutoff_chi(np.array([-0.5, 0.0, 0.5])) == 1.0)
    assert np.all(hs.cutoff_chi(np.array([-2.0, -1.0, 1.0, 3.0])) == 0.0)
    x = np.linspace(-1, 1, 101)
    assert np.all(np.diff(hs.cutoff_chi(x[50:])) <= 0)


def test_gamma_of_zero_is_zero():
    seq = hs.gamma_sequences(lambda x, t: np.zeros_like(x), range(1, 5), delta=np.full(4, 0.1))
    for arr in (seq.gamma, seq.gamma_plus, seq.gamma_zero, seq.gamma_minus):
        assert np.all(arr == 0)


def test_neutral_mode_injection_dominates():
    G = lambda x, t: math.exp(t) * (x**2 - 2)
    seq = hs.gamma_sequences(G, range(1, 6), radius=8.0)
    assert np.all(seq.gamma_zero >= 10 * np.maximum(seq.gamma_plus, seq.gamma_minus))
    assert seq.equivalence_constant <= 1.01
    assert np.all(np.diff(seq.Gamma) <= 0)


def test_gamma_window_coverage():
    with pytest.raises(hs.HermiteError):
        hs.gamma_sequences(lambda x, t: x, range(1, 4), delta=np.ones(3), available=(-3.0, 0.0))


def test_merle_zaag_examples():
    k = np.arange(1, 16, dtype=float)
    d = np.exp(-k / 4)
    e = np.exp
    assert hs.merle_zaag_classify(e(-k), e(-2 * k), e(-3 * k), d, 1.0).label == "plus_dominated"
    assert hs.merle_zaag_classify(e(-k), np.ones_like(k), e(-k), d, 1.0).label == "zero_dominated"
    assert hs.merle_zaag_classify(e(-k), e(-2 * k), 1e-6 * e(k), d, 1.0).label == \
        "hypotheses_violated"


def test_merle_zaag_inconclusive_when_no_alternative():
    k = np.arange(1, 16, dtype=float)
    g = np.exp(-k)
    rep = hs.merle_zaag_classify(g, g, 0.5 * g * np.exp(-k), np.exp(-k / 4), 10.0)
    assert rep.label == "inconclusive"


def test_merle_zaag_needs_ten_terms():
    with pytest.raises(hs.HermiteError):
        hs.merle_zaag_classify(np.ones(5), np.ones(5), np.ones(5), 0.1, 1.0)


def test_synthetic_suites_labels():
    for name, (gp, g0, gm, d, C, expected) in hs.synthetic_suites().items():
        assert hs.merle_zaag_classify(gp, g0, gm, d, C).label == expected, name
