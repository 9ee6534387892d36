"""Real spherical harmonics and the derived vector and tracefree tensor bases on S^2.

Everything is expressed in the orthonormal frame e1 = d/dtheta,
e2 = (1/sin theta) d/dphi of the round metric. For l >= 1 the vector basis
consists of dY/sqrt(lam) and its rotation by 90 degrees (rough Laplacian
eigenvalue lam - 1). For l >= 2 the tensor basis consists of the
normalized tracefree Hessian of Y and its rotation (eigenvalue lam - 4).
A tracefree symmetric tensor [[a, b], [b, -a]] is stored as the pair (a, b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp


@dataclass(frozen=True)
class BasisElement:
    kind: str          # "scalar", "vector" or "tensor"
    l: int
    m: int
    variant: str       # "", "grad", "rot", "hess", "hess_rot"
    eigenvalue: float  # of minus the rough Laplacian

    @property
    def label(self) -> str:
        v = f"_{self.variant}" if self.variant else ""
        return f"{self.kind}_l{self.l}_m{self.m}{v}"


@lru_cache(maxsize=None)
def _harmonic_jets(l_max: int):
    """Lambdified (Y, Y_t, Y_p, Y_tt, Y_tp, Y_pp) for every (l, m) with l <= l_max."""
    th, ph = sp.symbols("theta phi", real=True)
    out = {}
    for l in range(l_max + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            norm = sp.sqrt(sp.Rational(2 * l + 1, 4) / sp.pi
                           * sp.factorial(l - am) / sp.factorial(l + am))
            x = sp.Symbol("x")
            P = sp.sin(th) ** am * sp.diff(sp.legendre(l, x), x, am).subs(x, sp.cos(th))
            if m == 0:
                Y = norm * P
            elif m > 0:
                Y = sp.sqrt(2) * norm * P * sp.cos(am * ph)
            else:
                Y = sp.sqrt(2) * norm * P * sp.sin(am * ph)
            exprs = [Y, sp.diff(Y, th), sp.diff(Y, ph), sp.diff(Y, th, 2),
                     sp.diff(Y, th, ph), sp.diff(Y, ph, 2)]
            out[(l, m)] = sp.lambdify((th, ph), exprs, "numpy")
    return out


class S2Basis:
    """Finite eigenbases on the unit sphere up to degree ``l_max``."""

    def __init__(self, l_max: int = 4):
        if l_max < 2:
            raise ValueError("l_max must be at least 2")
        self.l_max = l_max
        self._jets = _harmonic_jets(l_max)
        self.scalar = [BasisElement("scalar", l, m, "", float(l * (l + 1)))
                       for l in range(l_max + 1) for m in range(-l, l + 1)]
        self.vector = [BasisElement("vector", l, m, v, float(l * (l + 1) - 1))
                       for l in range(1, l_max + 1) for m in range(-l, l + 1)
                       for v in ("grad", "rot")]
        self.tensor = [BasisElement("tensor", l, m, v, float(l * (l + 1) - 4))
                       for l in range(2, l_max + 1) for m in range(-l, l + 1)
                       for v in ("hess", "hess_rot")]

    def family(self, kind: str):
        return {"scalar": self.scalar, "vector": self.vector, "tensor": self.tensor}[kind]

    def _jet(self, l, m, th, ph):
        vals = self._jets[(l, m)](th, ph)
        return [np.broadcast_to(np.asarray(v, dtype=float), np.broadcast(th, ph).shape)
                for v in vals]

    def evaluate(self, e: BasisElement, th, ph) -> np.ndarray:
        """Frame components: shape (...,) for scalars, (..., 2) otherwise."""
        th = np.asarray(th, dtype=float)
        ph = np.asarray(ph, dtype=float)
        Y, Yt, Yp, Ytt, Ytp, Ypp = self._jet(e.l, e.m, th, ph)
        s, c = np.sin(th), np.cos(th)
        lam = e.l * (e.l + 1)
        if e.kind == "scalar":
            return np.array(Y)
        if e.kind == "vector":
            g1, g2 = Yt / math.sqrt(lam), Yp / (s * math.sqrt(lam))
            return np.stack([g1, g2] if e.variant == "grad" else [-g2, g1], axis=-1)
        H11 = Ytt
        H12 = (Ytp - c / s * Yp) / s
        H22 = (Ypp + s * c * Yt) / s**2
        nrm = math.sqrt(lam * (lam - 2) / 2.0)
        a, b = 0.5 * (H11 - H22) / nrm, H12 / nrm
        return np.stack([a, b] if e.variant == "hess" else [-b, a], axis=-1)

    def evaluate_family(self, kind: str, th, ph) -> np.ndarray:
        """Stacked values, leading axis over the family."""
        return np.stack([self.evaluate(e, th, ph) for e in self.family(kind)])

    def eigenvalue_certificate(self) -> dict:
        """Lower bounds asserted for the spectra: lam >= 0, mu >= 1, nu > 0."""
        return {"scalar": min(e.eigenvalue for e in self.scalar) >= 0,
                "vector": min(e.eigenvalue for e in self.vector) >= 1,
                "tensor": min(e.eigenvalue for e in self.tensor) > 0}


@dataclass(frozen=True)
class SphereQuadrature:
    theta: np.ndarray
    phi: np.ndarray
    weight: np.ndarray

    @classmethod
    def build(cls, l_max: int):
        """Gauss-Legendre in cos(theta) times the trapezoid rule in phi.

        Exact for products of two band-limited fields of degree <= l_max.
        """
        n_t = l_max + 3
        n_p = 2 * l_max + 4
        x, w = np.polynomial.legendre.leggauss(n_t)
        phi = 2 * np.pi * np.arange(n_p) / n_p
        T, P = np.meshgrid(np.arccos(x), phi, indexing="ij")
        W = np.repeat(w[:, None], n_p, axis=1) * (2 * np.pi / n_p)
        return cls(T.ravel(), P.ravel(), W.ravel())


def gram_matrix(basis: S2Basis, kind: str, quad: SphereQuadrature) -> np.ndarray:
    vals = basis.evaluate_family(kind, quad.theta, quad.phi)
    if kind == "scalar":
        return np.einsum("iq,jq,q->ij", vals, vals, quad.weight)
    factor = 2.0 if kind == "tensor" else 1.0
    return factor * np.einsum("iqa,jqa,q->ij", vals, vals, quad.weight)


def orthonormality_certificate(basis: S2Basis, quad: SphereQuadrature | None = None) -> dict:
    """Max deviation of each family's Gram matrix from the identity."""
    quad = SphereQuadrature.build(basis.l_max) if quad is None else quad
    return {k: float(np.max(np.abs(gram_matrix(basis, k, quad) - np.eye(len(basis.family(k))))))
            for k in ("scalar", "vector", "tensor")}
