import numpy as np
import pytest

from ancient_neck.s2_harmonics import S2Basis, SphereQuadrature, gram_matrix, orthonormality_certificate


@pytest.fixture(scope="module")
def basis():
    return S2Basis(4)


def test_family_sizes_and_spectra(basis):
    assert len(basis.scalar) == 25
    assert len(basis.vector) == 2 * 24
    assert len(basis.tensor) == 2 * 21
    assert sorted({e.eigenvalue for e in basis.scalar}) == [0, 2, 6, 12, 20]
    assert min(e.eigenvalue for e in basis.vector) == 1
    assert min(e.eigenvalue for e in basis.tensor) == 2
    assert all(basis.eigenvalue_certificate().values())


def test_orthonormality(basis):
    cert = orthonormality_certificate(basis)
    assert max(cert.values()) < 1e-12


def test_quadrature_exact_on_sphere_area():
    q = SphereQuadrature.build(4)
    assert np.sum(q.weight) == pytest.approx(4 * np.pi, rel=1e-14)


def test_scalar_harmonics_are_laplacian_eigenfunctions(basis):
    th, ph, h = 1.1, 0.7, 1e-4
    for e in basis.scalar[1:9]:
        f = lambda a, b: float(basis.evaluate(e, a, b))
        lap = ((f(th + h, ph) - 2 * f(th, ph) + f(th - h, ph)) / h**2
               + np.cos(th) / np.sin(th) * (f(th + h, ph) - f(th - h, ph)) / (2 * h)
               + (f(th, ph + h) - 2 * f(th, ph) + f(th, ph - h)) / (h**2 * np.sin(th) ** 2))
        assert -lap == pytest.approx(e.eigenvalue * f(th, ph), abs=1e-5)


def test_gram_matrix_shape(basis):
    q = SphereQuadrature.build(4)
    assert gram_matrix(basis, "tensor", q).shape == (42, 42)


def test_rejects_small_degree():
    with pytest.raises(ValueError):
        S2Basis(1)
