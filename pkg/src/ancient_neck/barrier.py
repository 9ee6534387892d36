"""Self-similar barrier psi_a for the radial Ricci flow near a neck.

In the variables s = r / sqrt(-2t), tau = -log(-t)/2 a profile u(r, t) = U(s, tau)
of the radial flow satisfies U_tau = D[U] with

    D[psi] = psi psi'' - psi'^2/2 + s^-2 (1 - psi)(s psi' + 2 psi) - s psi'.

A time-independent psi with D[psi] < 0 is therefore a supersolution. The
barrier glues phi(a s) + a^-1 beta_a(a s) (inside s = N/a) to
phi(a s) - a^-2 + a^-4 zeta(s) (outside), where phi is the normalized soliton.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp

from .bryant_soliton import SolitonProfile

S_MAX = 9.0 / 8.0


class BarrierError(RuntimeError):
    """A barrier inequality or construction step failed."""


# --- zeta ---------------------------------------------------------------------

def zeta_rhs(s):
    """d/ds of w = zeta/(s^-2 - 1): (2s - 5s^-2 - s^31/2)/(1 - s^2)^2."""
    s = np.asarray(s, dtype=float)
    return (2 * s - 5 / s**2 - 0.5 * s**31) / (1 - s * s) ** 2


@lru_cache(maxsize=None)
def _zeta_closed_form():
    """Callables for zeta, zeta', zeta'' and the regularized antiderivative.

    w = -(7/8)/(1 - s) + H(s) where H' = zeta_rhs + (7/8)(1 - s)^-2 has no pole
    at s = 1 (the residue there vanishes) and H(1) = 0. Then
    zeta = (s^-2 - 1) w = -(7/8)(1 + s)/s^2 + (s^-2 - 1) H, which is smooth.
    """
    import sympy as sp

    s = sp.symbols("s", positive=True)
    f = (2 * s - 5 / s**2 - sp.Rational(1, 2) * s**31) / (1 - s**2) ** 2
    singular = sp.limit(f * (1 - s) ** 2, s, 1)
    h = sp.cancel(sp.together(f - singular / (1 - s) ** 2))
    parts = sp.apart(h, s)
    H = sp.integrate(parts, s)
    H = H - H.subs(s, 1)
    zeta = -sp.Rational(7, 8) * (1 + s) / s**2 + (s**-2 - 1) * H
    fns = [sp.lambdify(s, sp.diff(zeta, s, k), "numpy") for k in range(3)]
    return fns, float(singular), sp.lambdify(s, H, "numpy")


def zeta_singular_coefficient() -> float:
    """Coefficient c in zeta_rhs(s) = c (1 - s)^-2 + O(1) near s = 1."""
    return _zeta_closed_form()[1]


@dataclass(frozen=True)
class ZetaFunction:
    """zeta on (0, 9/8], normalized by the regularized antiderivative vanishing at s = 1."""

    s_grid: np.ndarray
    zeta: np.ndarray
    antiderivative_base: str = "regularized antiderivative of w' vanishing at s = 1"

    def __call__(self, s, k: int = 0):
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0) or np.any(s > S_MAX * (1 + 1e-12)):
            raise ValueError("zeta is defined on (0, 9/8]")
        return np.asarray(_zeta_closed_form()[0][k](s), dtype=float) + 0.0 * s

    def jet(self, s):
        return self(s, 0), self(s, 1), self(s, 2)


def build_zeta(grid=None) -> ZetaFunction:
    """Tabulate zeta on ``grid`` (default: 10^4 log-spaced nodes on [1e-3, 9/8])."""
    if grid is None:
        grid = np.geomspace(1e-3, S_MAX, 10_000)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("zeta grid must stay away from s = 0")
    if np.any(grid > S_MAX * (1 + 1e-12)):
        raise ValueError("zeta grid must end at or before 9/8")
    fns = _zeta_closed_form()[0]
    return ZetaFunction(s_grid=grid, zeta=np.asarray(fns[0](grid), dtype=float))


def zeta_by_quadrature(s: float) -> float:
    """zeta(s) from adaptive quadrature of the regularized integrand.

    Independent of the closed form; used as a cross-check. Within 1e-4 of s = 1
    the integrand is replaced by the chord through its values at 1 -+ 1e-4,
    which avoids the cancellation there at a cost far below 1e-9.
    """
    c = -7.0 / 8.0
    d = 1e-4

    def h_raw(x):
        return float(zeta_rhs(x)) - c / (1.0 - x) ** 2

    h_lo, h_hi = h_raw(1 - d), h_raw(1 + d)

    def h(x):
        if abs(x - 1.0) < d:
            return h_lo + (h_hi - h_lo) * (x - 1 + d) / (2 * d)
        return h_raw(x)

    if s == 1.0:
        return -1.75
    pts = [1 - d, 1 + d]
    pts = [p for p in pts if min(1.0, s) < p < max(1.0, s)]
    H, _ = quad(h, 1.0, s, epsabs=1e-12, epsrel=1e-11, limit=400, points=pts or None)
    return (s**-2 - 1.0) * (c / (1.0 - s) + H)


# --- beta_a --------------------------------------------------------------------

@dataclass(frozen=True)
class BetaSolution:
    """beta_a on [r_star, N] from the linear correction equation."""

    a: float
    N: float
    r_star: float
    r_grid: np.ndarray
    beta: np.ndarray
    dbeta: np.ndarray
    sol: object = field(repr=False)
    soliton: SolitonProfile = field(repr=False)

    def jet(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r_star * (1 - 1e-12)) or np.any(r > self.N * (1 + 1e-12)):
            raise ValueError("beta is defined on [r_star, N]")
        y = self.sol(np.clip(r, self.r_star, self.N))
        b, db = y[0], y[1]
        return b, db, _beta_second(r, b, db, self.soliton)

    def ode_residual(self, r):
        """Residual of the linear equation from an independent derivative estimate."""
        r = np.asarray(r, dtype=float)
        b, db, _ = self.jet(r)
        h = 1e-3 * r
        f = lambda x: self.sol(x)[1]
        ddb = (-f(r + 2 * h) + 8 * f(r + h) - 8 * f(r - h) + f(r - 2 * h)) / (12 * h)
        p0, p1, p2 = self.soliton.jet(r)
        return (p0 * ddb + p2 * b - p1 * db + (1 - p0) * (r * db + 2 * b) / r**2
                - b * (r * p1 + 2 * p0) / r**2 + 1.0)


def _beta_second(r, b, db, soliton):
    p0, p1, p2 = soliton.jet(r)
    rhs = (-1.0 - p2 * b + p1 * db - (1 - p0) * (r * db + 2 * b) / r**2
           + b * (r * p1 + 2 * p0) / r**2)
    return rhs / p0


def build_beta(a: float, N: float, soliton: SolitonProfile, zeta: ZetaFunction,
               rtol: float = 1e-12) -> BetaSolution:
    """Integrate the beta_a equation from r = N back to r = r_star."""
    r_star = soliton.r_star
    if not r_star < N:
        raise ValueError("N must exceed r_star")
    if N / a < zeta.s_grid[0] * (1 - 1e-12):
        raise ValueError("a is too small for the tabulated zeta range")
    z0, z1, _ = zeta.jet(N / a)
    y0 = [a**-3 * z0 - 1.0 / a, a**-4 * z1]

    def rhs(r, y):
        return [y[1], float(_beta_second(r, y[0], y[1], soliton))]

    sol = solve_ivp(rhs, (N, r_star), y0, method="DOP853", rtol=rtol, atol=rtol * 1e-3,
                    dense_output=True)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise BarrierError(f"beta integration failed: {sol.message}")
    grid = np.linspace(r_star, N, 400)
    vals = sol.sol(grid)
    return BetaSolution(a=a, N=N, r_star=r_star, r_grid=grid, beta=vals[0], dbeta=vals[1],
                        sol=sol.sol, soliton=soliton)


# --- psi_a ---------------------------------------------------------------------

@dataclass(frozen=True)
class BarrierFunction:
    a: float
    N: float
    soliton: SolitonProfile = field(repr=False)
    zeta: ZetaFunction = field(repr=False)
    beta: BetaSolution = field(repr=False)

    @property
    def s_min(self) -> float:
        return self.soliton.r_star / self.a

    @property
    def s_junction(self) -> float:
        return self.N / self.a

    def outer_jet(self, s):
        a = self.a
        p0, p1, p2 = self.soliton.jet(a * s)
        z0, z1, z2 = self.zeta.jet(s)
        return p0 - a**-2 + a**-4 * z0, a * p1 + a**-4 * z1, a * a * p2 + a**-4 * z2

    def inner_jet(self, s):
        a = self.a
        p0, p1, p2 = self.soliton.jet(a * s)
        b0, b1, b2 = self.beta.jet(a * s)
        return p0 + b0 / a, a * p1 + b1, a * a * p2 + a * b2

    def jet(self, s):
        """(psi, psi', psi'') at ``s``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s < self.s_min * (1 - 1e-12)) or np.any(s > S_MAX * (1 + 1e-12)):
            raise ValueError("s outside [r_star/a, 9/8]")
        out = np.empty((3, len(s)))
        inner = s <= self.s_junction
        if np.any(inner):
            out[:, inner] = self.inner_jet(s[inner])
        if np.any(~inner):
            out[:, ~inner] = self.outer_jet(s[~inner])
        return out[0], out[1], out[2]

    def __call__(self, s):
        return self.jet(s)[0]

    def junction_jumps(self):
        """Relative jumps of psi and psi' across s = N/a."""
        sj = np.array([self.s_junction])
        i = self.inner_jet(sj)
        o = self.outer_jet(sj)
        return (float(abs(i[0][0] - o[0][0]) / abs(o[0][0])),
                float(abs(i[1][0] - o[1][0]) / abs(o[1][0])))


def operator_D(s, psi, dpsi, ddpsi):
    """D[psi] from the jet (psi, psi', psi'') at s."""
    return (psi * ddpsi - 0.5 * dpsi**2 + (1 - psi) * (s * dpsi + 2 * psi) / s**2
            - s * dpsi)


def barrier_operator(psi: BarrierFunction, s):
    s = np.asarray(s, dtype=float)
    return operator_D(s, *psi.jet(s))


def assemble_psi(a: float, N: float, soliton: SolitonProfile, zeta: ZetaFunction,
                 beta: BetaSolution | None = None, junction_tol: float = 1e-8) -> BarrierFunction:
    if beta is None:
        beta = build_beta(a, N, soliton, zeta)
    if beta.a != a or beta.N != N or beta.r_star != soliton.r_star:
        raise ValueError("beta was built for different parameters")
    bf = BarrierFunction(a=a, N=N, soliton=soliton, zeta=zeta, beta=beta)
    jumps = bf.junction_jumps()
    if max(jumps) > junction_tol:
        raise BarrierError(f"junction jumps {jumps} exceed {junction_tol}")
    return bf


def barrier_grid(a: float, r_star: float, n: int = 10_000, extra=()) -> np.ndarray:
    g = np.geomspace(r_star / a, S_MAX, n)
    return np.unique(np.concatenate([g, np.asarray(extra, dtype=float)]))


def find_N(soliton: SolitonProfile, zeta: ZetaFunction, a_values=(100.0, 200.0, 400.0),
           N_start: int = 2, budget: int = 200, n_grid: int = 10_000) -> int:
    """Smallest integer N for which D[psi_a] < 0 on [N/a, 9/8] for every tested a.

    Only the outer piece is involved, so beta is not needed for the search.
    """
    N = max(N_start, int(np.floor(soliton.r_star)) + 1)
    for _ in range(budget):
        ok = True
        for a in a_values:
            s = np.geomspace(N / a, S_MAX, n_grid)
            a_ = float(a)
            p0, p1, p2 = soliton.jet(a_ * s)
            z0, z1, z2 = zeta.jet(s)
            d = operator_D(s, p0 - a_**-2 + a_**-4 * z0, a_ * p1 + a_**-4 * z1,
                           a_ * a_ * p2 + a_**-4 * z2)
            if np.max(d) >= 0:
                ok = False
                break
        if ok:
            return N
        N += 1
    raise BarrierError(f"no N found within {budget} steps")


@dataclass
class BarrierReport:
    a: float
    N: int
    max_D: float
    D_at_1_scaled: float
    D_at_9_8_scaled: float
    junction_value_jump: float
    junction_slope_jump: float
    n_points: int


def verify_barrier(psi: BarrierFunction, n: int = 10_000) -> BarrierReport:
    s = barrier_grid(psi.a, psi.soliton.r_star, n, extra=(1.0, psi.s_junction))
    d = barrier_operator(psi, s)
    d1 = float(barrier_operator(psi, np.array([1.0]))[0])
    d98 = float(barrier_operator(psi, np.array([S_MAX]))[0])
    jv, js = psi.junction_jumps()
    return BarrierReport(a=psi.a, N=int(psi.N), max_D=float(d.max()), D_at_1_scaled=d1 * psi.a**4,
                         D_at_9_8_scaled=d98 * psi.a**4, junction_value_jump=jv,
                         junction_slope_jump=js, n_points=len(s))


def expansion_D(s, a):
    """Leading a^-4 term of D on the outer piece: a^-4 (4 s^-4 - 5 s^-5 - s^28/2)."""
    s = np.asarray(s, dtype=float)
    return a**-4 * (4 * s**-4 - 5 * s**-5 - 0.5 * s**28)


# --- positivity and the cap integral --------------------------------------------

@dataclass
class PositivityReport:
    a: float
    theta: float
    two_plus_zeta1: float
    min_margin_near_1: float
    min_psi_scaled: float
    ok: bool


def find_theta(zeta: ZetaFunction, level: float = 0.125, theta_max: float = 0.125,
               n: int = 4001) -> float:
    """Largest theta <= theta_max with 2 s^-4 + zeta(s) >= level on [1 - theta, 1 + theta]."""
    d = np.linspace(0.0, theta_max, n)
    lo = 2 * (1 - d) ** -4 + zeta(1 - d)
    hi = 2 * (1 + d) ** -4 + zeta(np.minimum(1 + d, S_MAX))
    good = (lo >= level) & (hi >= level)
    if not good[0]:
        raise BarrierError("2 + zeta(1) is below the required level")
    bad = np.nonzero(~good)[0]
    return float(d[-1] if len(bad) == 0 else d[bad[0] - 1])


def verify_positivity(psi: BarrierFunction, n: int = 10_000, theta: float | None = None):
    """Check psi >= a^-2 (s^-2 - 1) + a^-4/16 near s = 1 and psi >= a^-4/32 up to 1 + a^-2/100."""
    a = psi.a
    if theta is None:
        theta = find_theta(psi.zeta)
    s1 = np.linspace(1 - theta, 1 + theta, n)
    margin = psi(s1) - (a**-2 * (s1**-2 - 1) + a**-4 / 16)
    s2 = barrier_grid(a, psi.soliton.r_star, n, extra=(1 + a**-2 / 100,))
    s2 = s2[s2 <= 1 + a**-2 / 100]
    low = psi(s2) * a**4
    two_plus = float(2 + psi.zeta(np.array([1.0]))[0])
    ok = bool(margin.min() >= 0 and low.min() >= 1 / 32)
    return theta, PositivityReport(a=a, theta=theta, two_plus_zeta1=two_plus,
                                   min_margin_near_1=float(margin.min()) * a**4,
                                   min_psi_scaled=float(low.min()), ok=ok)


def cap_diameter_integral(psi: BarrierFunction, upper: float = 0.25):
    """Integral of psi^-1/2 over [r_star/a, upper] and its ratio to a."""
    s = barrier_grid(psi.a, psi.soliton.r_star, 20_001)
    s = np.unique(np.concatenate([s[s < upper], [upper]]))
    vals = psi(s)
    if np.any(vals <= 0):
        raise BarrierError("psi is not positive on the cap range")
    x, w = np.polynomial.legendre.leggauss(8)
    lo, hi = s[:-1], s[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    f = psi(pts) ** -0.5
    total = float(np.sum((half[:, None] * w[None, :]).ravel() * f))
    return total, total / psi.a


def cylinder_cap_integral(a: float, s_lo: float, s_hi: float = 0.25) -> float:
    """Closed form of the integral of (a^-2 (s^-2 - 1) + a^-4/16)^-1/2 over [s_lo, s_hi]."""
    k = 1.0 - a**-2 / 16.0

    def F(s):
        return -a * np.sqrt(1.0 - k * s * s) / k

    return float(F(s_hi) - F(s_lo))
