"""Singular steady soliton profile from Bryant's ODE.

The trajectory of du/ds = u (1-u^2) s^2 / ((2-s^2)(u+s)) on (-sqrt2, 0) is
parametrized in three pieces, each in a variable that avoids cancellation:

* near s = -sqrt2, y = 1 - u behaves like A eps^(2+sqrt2) with eps = s + sqrt2;
  log y is integrated in eps, starting from the exact solution of the
  linearized equation;
* on [-1, s_match], w = (u + s)/s^3 is integrated (u + s is tiny near s = 0);
* on [s_match, 0), w is given by its power series in s^2. The series is
  asymptotic to every solution of the ODE: nearby trajectories approach it
  like exp(-1/s^2), so the differences are far below rounding.

The profile is phi = s^2/(2 - s^2) as a function of
r = sqrt((1 - u^2)/(u^2 (2 - s^2))). Derivatives in r are obtained by the
chain rule, so phi, phi' and phi'' are available to rounding accuracy at any r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

SQRT2 = np.sqrt(2.0)
TIP_EXPONENT = 2.0 + SQRT2
S_TIP_SWITCH = -1.0


class ShootingError(RuntimeError):
    """No admissible trajectory was found."""


class BranchError(RuntimeError):
    """u + s changed sign during integration (wrong branch)."""


class TailFitError(ValueError):
    """The tail fit window is too short or badly conditioned."""


@lru_cache(maxsize=None)
def w_series_coefficients(n_terms: int = 18) -> tuple:
    """Exact coefficients of w = sum_k w_k s^(2k) near s = 0.

    With x = s^2 the ODE for w reads
    2 x^2 w_x (2 - x) w = (2w - 1) + x(1 - 6w^2) + x^2(3w^2 - 3w) + 3x^3 w^2 - x^4 w^3,
    which is solved order by order (w_0 = 1/2, w_1 = 1/4, ...).
    """

    def mul(a, b, n):
        return [sum(a[i] * b[k - i] for i in range(k + 1) if i < len(a) and k - i < len(b))
                for k in range(n)]

    w = [Fraction(1, 2)]
    for m in range(1, n_terms):

        def residual(wm):
            ww = w + [wm]
            n = m + 1
            w2 = mul(ww, ww, n)
            w3 = mul(w2, ww, n)
            wx = [(k + 1) * ww[k + 1] for k in range(len(ww) - 1)]
            t = mul(wx, ww, n)
            t2 = [2 * t[k] - (t[k - 1] if k >= 1 else 0) for k in range(n)]
            lhs = 2 * (t2[m - 2] if m >= 2 else 0)
            rhs = 2 * ww[m] + (1 if m == 1 else 0) - 6 * w2[m - 1]
            if m >= 2:
                rhs += 3 * w2[m - 2] - 3 * ww[m - 2]
            if m >= 3:
                rhs += 3 * w2[m - 3]
            if m >= 4:
                rhs -= w3[m - 4]
            return lhs - rhs

        r0, r1 = residual(Fraction(0)), residual(Fraction(1))
        w.append(-r0 / (r1 - r0))
    return tuple(w)


def bryant_rhs(s, u):
    """du/ds for Bryant's ODE."""
    return u * (1.0 - u * u) * s * s / ((2.0 - s * s) * (u + s))


def _rhs_w(s, w):
    x = s * s
    num = (2 * w - 1) + x * (1 - 6 * w * w) + x * x * (3 * w * w - 3 * w) \
        + 3 * x**3 * w * w - x**4 * w**3
    return num / ((2 - x) * w * s**3)


def _rhs_logy(eps, L):
    y = np.exp(L)
    s = eps - SQRT2
    return -(1 - y) * (2 - y) * s * s / (eps * (2 * SQRT2 - eps) * (1 - y + s))


def _logy_linear(A, eps):
    """log(1 - u) for the linearized equation at s = -sqrt2 (exact solution)."""
    s = eps - SQRT2
    return (np.log(A) + TIP_EXPONENT * np.log(eps)
            + (2 - SQRT2) * np.log((SQRT2 - s) / (2 * SQRT2))
            + 2 * np.log((SQRT2 - 1) / np.abs(1 + s)))


@dataclass(frozen=True)
class BryantTrajectory:
    """A solution u(s) of Bryant's ODE on (-sqrt2, 0)."""

    A: float
    eps0: float
    s_match: float
    s_end: float
    tip_sol: object = field(repr=False)
    bulk_sol: object = field(repr=False)
    series: np.ndarray = field(repr=False)
    match_defect: float = 0.0

    # --- pointwise evaluation -------------------------------------------
    def _y_tip(self, s):
        eps = s + SQRT2
        L = self.tip_sol(np.clip(eps, self.eps0, SQRT2 - 1))[0]
        with np.errstate(divide="ignore"):
            lin = _logy_linear(self.A, np.maximum(eps, 1e-300))
        return np.exp(np.where(eps < self.eps0, lin, L))

    def state(self, s):
        """Return (u, 1 - u, w, du/ds, dw/ds) at the parameter values ``s``."""
        s = np.asarray(s, dtype=float)
        if np.any((s <= -SQRT2) | (s >= 0)):
            raise ValueError("s must lie in (-sqrt2, 0)")
        flat = np.atleast_1d(s).ravel()
        u = np.empty_like(flat)
        y = np.empty_like(flat)
        w = np.empty_like(flat)
        du = np.empty_like(flat)
        dw = np.empty_like(flat)

        tip = flat <= S_TIP_SWITCH
        if np.any(tip):
            st = flat[tip]
            yt = self._y_tip(st)
            ut = 1.0 - yt
            eps = st + SQRT2
            du_t = ut * yt * (2 - yt) * st * st / (eps * (2 * SQRT2 - eps) * (ut + st))
            u[tip] = ut
            y[tip] = yt
            du[tip] = du_t
            w[tip] = (ut + st) / st**3
            dw[tip] = (du_t + 1) / st**3 - 3 * (ut + st) / st**4

        bulk = (~tip) & (flat <= self.s_match)
        if np.any(bulk):
            sb = flat[bulk]
            wb = self.bulk_sol(sb)[0]
            w[bulk] = wb
            dw[bulk] = _rhs_w(sb, wb)

        ser = flat > self.s_match
        if np.any(ser):
            sx = flat[ser]
            x = sx * sx
            w[ser] = P.polyval(x, self.series)
            dw[ser] = 2 * sx * P.polyval(x, P.polyder(self.series))

        rest = ~tip
        sr = flat[rest]
        u[rest] = -sr + sr**3 * w[rest]
        du[rest] = -1 + 3 * sr**2 * w[rest] + sr**3 * dw[rest]
        y[rest] = 1.0 - u[rest]
        shape = s.shape
        return tuple(a.reshape(shape) for a in (u, y, w, du, dw))

    def u(self, s):
        return self.state(s)[0]


def integrate_bryant_ode(tolerance: float = 1e-13, A: float = 1.0, eps0: float = 1e-6,
                         s_match: float = -0.05, s_end: float = -1e-6,
                         n_series: int = 18) -> BryantTrajectory:
    """Integrate the trajectory leaving s = -sqrt2 with 1 - u ~ A eps^(2+sqrt2)."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if not -1.0 < s_match < 0 or not s_match < s_end < 0:
        raise ValueError("need -1 < s_match < s_end < 0")
    atol = tolerance * 1e-2
    tip = solve_ivp(_rhs_logy, (eps0, SQRT2 - 1), [_logy_linear(A, eps0)], method="DOP853",
                    rtol=tolerance, atol=atol, dense_output=True)
    if tip.status != 0:
        raise ShootingError(f"tip integration failed: {tip.message}")
    y1 = np.exp(tip.y[0, -1])
    u1 = 1.0 - y1
    if not 0.0 < u1 < 1.0:
        raise ShootingError("u left (0, 1) near the tip")
    w1 = y1  # (u + s)/s^3 at s = -1
    if w1 <= 0:
        raise BranchError("u + s >= 0 at s = -1")

    def crossing(s, w):
        return w[0]

    crossing.terminal = True
    bulk = solve_ivp(_rhs_w, (S_TIP_SWITCH, s_match), [w1], method="DOP853",
                     rtol=tolerance, atol=atol, dense_output=True, events=crossing)
    if bulk.status == 1:
        raise BranchError(f"u + s reached zero at s = {bulk.t_events[0][0]:.6g}")
    if bulk.status != 0:
        raise ShootingError(f"integration failed: {bulk.message}")
    series = np.array([float(c) for c in w_series_coefficients(n_series)])
    defect = abs(bulk.y[0, -1] - P.polyval(s_match**2, series))
    if defect > 1e3 * tolerance:
        raise ShootingError(f"trajectory misses the s -> 0 asymptote (defect {defect:.3g})")
    return BryantTrajectory(A=A, eps0=eps0, s_match=s_match, s_end=s_end,
                            tip_sol=tip.sol, bulk_sol=bulk.sol, series=series,
                            match_defect=float(defect))


def shoot_bryant(tolerance: float = 1e-13, A0: float = 1.0, budget: int = 12) -> BryantTrajectory:
    """Try A0, A0/2, 2 A0, A0/4, ... until an admissible trajectory is found."""
    last = None
    for k in range(budget):
        A = A0 * 2.0 ** ((k + 1) // 2 * (-1 if k % 2 else 1))
        try:
            return integrate_bryant_ode(tolerance, A=A)
        except (ShootingError, BranchError) as exc:
            last = exc
    raise ShootingError(f"no trajectory found in {budget} attempts: {last}")


# --- change of variables to phi(r) -------------------------------------------

def raw_jet(traj: BryantTrajectory, s):
    """(r, phi, phi_r, phi_rr) of the unnormalized profile at parameters ``s``."""
    s = np.asarray(s, dtype=float)
    u, y, w, du, dw = traj.state(s)
    two = (s + SQRT2) * (SQRT2 - s)
    r = np.sqrt(y * (2 - y) / (u * u * two))
    phi = s * s / two
    dlogr = u / (two * s * s * w)
    phi_r = 4 * s**3 * w / (r * u * two)
    dlog_phir = 3 / s + dw / w - dlogr - du / u + 2 * s / two
    phi_rr = phi_r * dlog_phir / (r * dlogr)
    return r, phi, phi_r, phi_rr


def raw_log_r(traj: BryantTrajectory, s):
    """(log r, d log r / ds) at parameters ``s``."""
    u, y, w, _, _ = traj.state(s)
    s = np.asarray(s, dtype=float)
    two = (s + SQRT2) * (SQRT2 - s)
    logr = 0.5 * np.log(y * (2 - y) / (u * u * two))
    return logr, u / (two * s * s * w)


def _parameter_table(eps0: float, s_end: float, n: int = 1500) -> np.ndarray:
    a = -SQRT2 + np.geomspace(eps0, SQRT2 - 1, n // 3, endpoint=False)
    b = np.linspace(-1.0, -0.05, n // 3, endpoint=False)
    c = -np.geomspace(0.05, -s_end, n - 2 * (n // 3))
    return np.concatenate([a, b, c])


@dataclass(frozen=True)
class SolitonProfile:
    """Tabulated profile phi(r) = phi_raw(c r) with exact pointwise evaluation."""

    r_grid: np.ndarray
    phi: np.ndarray
    tail_c2: float
    tail_c4: float
    r_star: float
    scale_c: float
    trajectory: BryantTrajectory = field(repr=False)
    s_grid: np.ndarray = field(repr=False)

    def parameter_at(self, r) -> np.ndarray:
        return _invert_r(self.trajectory, np.asarray(r, dtype=float) * self.scale_c,
                         self.s_grid, np.log(self.r_grid * self.scale_c))

    def jet(self, r):
        """(phi, phi', phi'') at radii ``r``."""
        c = self.scale_c
        s = self.parameter_at(r)
        _, p0, p1, p2 = raw_jet(self.trajectory, s)
        return p0, c * p1, c * c * p2

    def __call__(self, r):
        return self.jet(r)[0]

    def steady_residual(self, r) -> np.ndarray:
        from .warped_geometry import pde_rhs_jet

        p0, p1, p2 = self.jet(r)
        return pde_rhs_jet(np.asarray(r, dtype=float), p0, p1, p2)

    def as_csv_rows(self):
        return [(float(a), float(b)) for a, b in zip(self.r_grid, self.phi)]


def _invert_r(traj, r, s_tab, logr_tab):
    """Solve r(s) = r for s by table lookup followed by Newton in log r."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    target = np.log(r)
    lo = -SQRT2 + traj.eps0
    if np.any(target < raw_log_r(traj, lo)[0]):
        raise ValueError("r is closer to the tip than the integrated trajectory")
    s = np.interp(target, logr_tab, s_tab)
    beyond = target > logr_tab[-1]
    if np.any(beyond):
        # outside the table: u ~ 1/(sqrt2 r) and s ~ -u
        s = np.where(beyond, -1.0 / (SQRT2 * np.exp(target)), s)
    for _ in range(30):
        lr, dlr = raw_log_r(traj, s)
        step = (lr - target) / dlr
        s_new = np.clip(s - step, lo, -1e-300)
        s_new = np.where(s_new >= 0, 0.5 * s, s_new)
        done = np.all(np.abs(s_new - s) <= 1e-15 * np.abs(s) + 1e-300)
        s = s_new
        if done:
            break
    return s


def to_phi_profile(traj: BryantTrajectory, n: int = 1500,
                   eps_table: float = 1e-2) -> SolitonProfile:
    """Tabulate the unnormalized profile (scale_c = 1, no tail fit yet).

    The table starts at s = -sqrt2 + eps_table, where phi is about 70. Closer to
    the tip the terms of the steady equation grow like eps^-4.4, so rounding
    alone would swamp an absolute residual check; the pointwise evaluator
    still works down to eps0.
    """
    s_tab = _parameter_table(eps_table, traj.s_end, n)
    r, phi, _, _ = raw_jet(traj, s_tab)
    if np.any(np.diff(r) <= 0):
        raise ShootingError("r(s) is not monotone; the integration is unreliable")
    return SolitonProfile(r_grid=r, phi=phi, tail_c2=np.nan, tail_c4=np.nan,
                          r_star=np.nan, scale_c=1.0, trajectory=traj, s_grid=s_tab)


def fit_tail(profile: SolitonProfile, r_lo: float = 10.0, r_hi: float = 100.0,
             n_terms: int = 4, n_samples: int = 400):
    """Least-squares fit r^2 phi = c2 + c4 r^-2 + c6 r^-4 + ... on [r_lo, r_hi]."""
    if r_hi < 2 * r_lo:
        raise TailFitError("fit window must span at least a factor of 2")
    r = np.geomspace(r_lo, r_hi, n_samples)
    y = r**2 * profile(r)
    X = np.stack([r ** (-2.0 * k) for k in range(n_terms)], axis=1)
    if np.linalg.cond(X) > 1e14:
        raise TailFitError("tail fit is ill-conditioned")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def raw_tail_limit(traj: BryantTrajectory) -> float:
    """Exact limit of r^2 phi_raw as r -> oo.

    With u = -s (1 - s^2 w), r^2 phi = (1 - u^2)/((1 - s^2 w)^2 (2 - s^2)^2),
    which tends to 1/4 at s = 0 for every trajectory on the attracting branch.
    """
    w0 = traj.series[0]
    assert w0 == 0.5
    return 0.25


def normalize_tail(profile: SolitonProfile, r_lo: float = 10.0, r_hi: float = 100.0,
                   fit_tol: float = 1e-6) -> SolitonProfile:
    """Rescale r so the r^-2 tail coefficient is 1; the fitted c4 is then a check.

    The scale uses the exact limit of r^2 phi; a least-squares fit on
    [r_lo, r_hi] must reproduce c2 = 1 within ``fit_tol``. A fitted scale would
    carry the fit's truncation error (about 1e-8) into every later use of phi.
    """
    c = np.sqrt(raw_tail_limit(profile.trajectory))
    out = _rescaled(profile, c)
    coef = fit_tail(out, r_lo, r_hi)
    if abs(coef[0] - 1.0) > fit_tol:
        raise TailFitError(f"fitted c2 = {coef[0]!r} disagrees with the exact limit")
    out = _replace(out, tail_c2=float(coef[0]), tail_c4=float(coef[1]))
    return _replace(out, r_star=find_r_star(out))


def _rescaled(profile, c):
    return SolitonProfile(r_grid=profile.r_grid * profile.scale_c / c, phi=profile.phi,
                          tail_c2=np.nan, tail_c4=np.nan, r_star=np.nan, scale_c=c,
                          trajectory=profile.trajectory, s_grid=profile.s_grid)


def _replace(profile, **kw):
    from dataclasses import replace

    return replace(profile, **kw)


def find_r_star(profile: SolitonProfile, level: float = 2.0) -> float:
    """The unique radius with phi(r_star) = level."""
    phi = profile.phi
    if not (phi.min() < level < phi.max()):
        raise ValueError(f"{level} is outside the tabulated range of phi")
    k = int(np.searchsorted(-phi, -level))
    a, b = profile.r_grid[k - 1], profile.r_grid[k]
    return float(brentq(lambda x: float(profile(x)) - level, a, b, xtol=1e-15, rtol=1e-15))


def build_soliton(tolerance: float = 1e-13, A: float = 1.0) -> SolitonProfile:
    """Integrate, tabulate and normalize in one call."""
    traj = integrate_bryant_ode(tolerance, A=A)
    return normalize_tail(to_phi_profile(traj))
