"""Geometry of rotationally symmetric metrics u^{-1} dr^2 + r^2 g_{S^2}.

Every quantity is a function of the jet (r, u, u_r, u_rr). The ``*_jet``
functions take arrays of those values directly; the node functions take a
:class:`RadialProfile` and an index and build the derivatives from a local
finite-difference stencil.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stencils import derivative_matrices, node_stencil


class GeometryError(ValueError):
    """Raised for profiles or nodes where a quantity is undefined."""


@dataclass(frozen=True)
class RadialProfile:
    """The function u on a radial grid at time t.

    ``tip_included`` means ``r[0] == 0`` and u is smooth and even there.
    ``positive_curvature`` marks data expected to satisfy u <= 1 and u_r <= 0.
    """

    r: np.ndarray
    u: np.ndarray
    t: float = 0.0
    tip_included: bool = False
    positive_curvature: bool = False

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        u = np.asarray(self.u, dtype=float)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "u", u)
        if r.ndim != 1 or r.shape != u.shape:
            raise GeometryError("r and u must be 1-D arrays of equal length")
        if len(r) < 5:
            raise GeometryError("profile needs at least 5 nodes")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise GeometryError("r must be nonnegative and strictly increasing")
        if not np.all(np.isfinite(u)):
            raise GeometryError("u has non-finite values")
        if self.tip_included and r[0] != 0.0:
            raise GeometryError("tip_included requires r[0] == 0")
        if not self.tip_included and r[0] == 0.0:
            raise GeometryError("r[0] == 0 requires tip_included")

    def derivatives(self):
        """First and second radial derivatives at every node."""
        d1, d2 = derivative_matrices(self.r, even_tip=self.tip_included)
        return d1 @ self.u, d2 @ self.u

    def node_jet(self, i: int):
        """(r, u, u_r, u_rr) at node ``i`` from its local stencil."""
        n = len(self.r)
        if not -n <= i < n:
            raise IndexError(i)
        i %= n
        idx, w = node_stencil(self.r, i, even_tip=self.tip_included)
        uu = self.u[idx]
        return self.r[i], self.u[i], float(w[0] @ uu), float(w[1] @ uu)

    def check_invariants(self, tol: float = 1e-10) -> list[str]:
        """Names of violated invariants (empty when all hold)."""
        bad = []
        if self.tip_included and abs(self.u[0] - 1.0) > tol:
            bad.append("u(0) != 1")
        if self.positive_curvature:
            ur, _ = self.derivatives()
            if np.any(self.u > 1.0 + tol):
                bad.append("u > 1")
            if np.any(ur[1:-1] > tol):
                bad.append("u_r > 0")
        return bad


@dataclass(frozen=True)
class GeometricPointData:
    R: np.ndarray
    v: np.ndarray
    harnack_q: np.ndarray
    xi: np.ndarray


def _tip_mask(r):
    r = np.asarray(r, dtype=float)
    return r == 0.0


def _safe_r(r):
    r = np.asarray(r, dtype=float)
    return np.where(r == 0.0, 1.0, r)


def scalar_curvature_jet(r, u, ur, urr=None):
    """R = 2 r^{-2} (1 - u - r u_r); at r = 0 the limit -3 u_rr."""
    r, u, ur = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, u, ur)))
    rs = _safe_r(r)
    out = 2.0 / rs**2 * (1.0 - u - rs * ur)
    tip = _tip_mask(r)
    if np.any(tip):
        if urr is None:
            raise GeometryError("tip value of R needs u_rr")
        out = np.where(tip, -3.0 * np.broadcast_to(urr, r.shape), out)
    return out


def velocity_jet(r, u, ur):
    """v = r^{-1}(1 - u - r u_r / 2); zero at the tip."""
    r, u, ur = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, u, ur)))
    rs = _safe_r(r)
    return np.where(_tip_mask(r), 0.0, (1.0 - u - 0.5 * rs * ur) / rs)


def pde_rhs_jet(r, u, ur, urr):
    """u_t = u u_rr - u_r^2/2 + r^{-2}(1 - u)(r u_r + 2u); zero at the tip."""
    r, u, ur, urr = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (r, u, ur, urr)))
    rs = _safe_r(r)
    val = u * urr - 0.5 * ur**2 + (1.0 - u) * (rs * ur + 2.0 * u) / rs**2
    return np.where(_tip_mask(r), 0.0, val)


def harnack_jet(r, u, ur, urr=None):
    """R + u^{-1} v^2 as the direct sum of its two terms."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise GeometryError("R + v^2/u needs u > 0")
    R = scalar_curvature_jet(r, u, ur, urr)
    v = velocity_jet(r, u, ur)
    return R + v**2 / u


def harnack_closed_form_jet(r, u, ur, urr=None):
    """r^{-2} u^{-1} (1 + u - r u_r/2)^2 - 2 r^{-2} (1 + u)."""
    r, u, ur = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, u, ur)))
    if np.any(u <= 0):
        raise GeometryError("R + v^2/u needs u > 0")
    rs = _safe_r(r)
    val = ((1.0 + u - 0.5 * rs * ur) ** 2 / u - 2.0 * (1.0 + u)) / rs**2
    tip = _tip_mask(r)
    if np.any(tip):
        if urr is None:
            raise GeometryError("tip value needs u_rr")
        val = np.where(tip, -3.0 * np.broadcast_to(urr, r.shape), val)
    return val


def xi_jet(r, u, ur, urr):
    """The first-order coefficient Xi in the evolution of R + u^{-1} v^2."""
    r, u, ur, urr = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (r, u, ur, urr)))
    if np.any(u <= 0):
        raise GeometryError("Xi needs u > 0")
    rs = _safe_r(r)
    a = 1.0 + u - 0.5 * rs * ur
    if np.any(np.abs(a[~_tip_mask(r)]) < 1e-14):
        raise GeometryError("1 + u - r u_r / 2 vanishes")
    # d/dr [u^{-2} a] with a_r = u_r/2 - r u_rr/2
    d = -2.0 * ur * a / u**3 + (0.5 * ur - 0.5 * rs * urr) / u**2
    val = ((1.0 - 0.5 * rs * ur) * (1.0 - u - 0.5 * rs * ur) / rs - u**3 * d) / a
    return np.where(_tip_mask(r), 0.0, val)


def harnack_gradient_rhs_jet(r, u, ur, urr):
    """-(2/r)(1 + (r/2) u^{-1} v) u^{-1} u_t, the radial derivative of R + v^2/u."""
    r = np.asarray(r, dtype=float)
    rs = _safe_r(r)
    v = velocity_jet(r, u, ur)
    ut = pde_rhs_jet(r, u, ur, urr)
    val = -(2.0 / rs) * (1.0 + 0.5 * rs * v / u) * ut / u
    return np.where(_tip_mask(r), 0.0, val)


def _check_node(profile: RadialProfile, i: int):
    r, u, ur, urr = profile.node_jet(i)
    if not np.isfinite(u):
        raise GeometryError("non-finite u")
    return r, u, ur, urr


def scalar_curvature(profile: RadialProfile, i: int) -> float:
    return float(scalar_curvature_jet(*_check_node(profile, i)))


def velocity_v(profile: RadialProfile, i: int) -> float:
    r, u, ur, _ = _check_node(profile, i)
    return float(velocity_jet(r, u, ur))


def pde_rhs(profile: RadialProfile, i: int) -> float:
    return float(pde_rhs_jet(*_check_node(profile, i)))


def harnack_quantity(profile: RadialProfile, i: int) -> float:
    return float(harnack_jet(*_check_node(profile, i)))


def xi_coefficient(profile: RadialProfile, i: int) -> float:
    return float(xi_jet(*_check_node(profile, i)))


def geometric_data(profile: RadialProfile) -> GeometricPointData:
    """All pointwise quantities at every node."""
    ur, urr = profile.derivatives()
    r, u = profile.r, profile.u
    return GeometricPointData(
        R=scalar_curvature_jet(r, u, ur, urr),
        v=velocity_jet(r, u, ur),
        harnack_q=harnack_jet(r, u, ur, urr),
        xi=xi_jet(r, u, ur, urr),
    )


def pde_rhs_all(profile: RadialProfile) -> np.ndarray:
    ur, urr = profile.derivatives()
    return pde_rhs_jet(profile.r, profile.u, ur, urr)
