"""Hermite analysis in the Gaussian space L^2(e^{-xi^2/4} d xi).

Functions are expanded in H_n(xi/2). The drift operator
L f = -f'' + xi f'/2 - f has eigenvalues n/2 - 1 on H_n(xi/2); the modes
n <= 1, n = 2 and n >= 3 span the unstable, neutral and stable parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import hermite as H

N_MAX = 32
QUAD_ORDER = 64
PLUS_MODES = (0, 1)
ZERO_MODES = (2,)


class HermiteError(ValueError):
    pass


@lru_cache(maxsize=None)
def _gauss_hermite(order: int):
    """Nodes in xi and weights for the weight e^{-xi^2/4} (x = xi/2 substitution)."""
    x, w = H.hermgauss(order)
    return 2.0 * x, 2.0 * w


def hermite_norm_sq(n: int) -> float:
    """||H_n(xi/2)||^2 = 2^{n+1} n! sqrt(pi)."""
    return 2.0 ** (n + 1) * math.factorial(n) * math.sqrt(math.pi)


def hermite_function(n: int) -> Callable:
    """xi -> H_n(xi/2)."""
    c = np.zeros(n + 1)
    c[n] = 1.0
    return lambda xi: H.hermval(np.asarray(xi, dtype=float) / 2.0, c)


def _values(f, xi):
    if isinstance(f, HermiteCoefficients):
        return f(xi)
    if callable(f):
        return np.asarray(f(xi), dtype=float) * np.ones_like(xi)
    return np.full_like(xi, float(f))


def weighted_inner_product(f, g, order: int = QUAD_ORDER) -> float:
    """Integral of e^{-xi^2/4} f g by Gauss-Hermite quadrature.

    Exact when f g is a polynomial of degree below 2 * order.
    """
    xi, w = _gauss_hermite(order)
    val = float(np.sum(w * _values(f, xi) * _values(g, xi)))
    if not math.isfinite(val):
        raise HermiteError("quadrature did not produce a finite value")
    return val


def weighted_norm(f, order: int = QUAD_ORDER) -> float:
    return math.sqrt(max(weighted_inner_product(f, f, order), 0.0))


@dataclass(frozen=True)
class HermiteCoefficients:
    """f(xi) = sum_n coeffs[n] H_n(xi/2)."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))

    @property
    def n_max(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def from_function(cls, f, n_max: int = N_MAX, order: int = QUAD_ORDER):
        xi, w = _gauss_hermite(order)
        fv = _values(f, xi)
        x = xi / 2.0
        # H_n at the nodes by the three-term recurrence
        c = np.empty(n_max + 1)
        h_prev, h = np.zeros_like(x), np.ones_like(x)
        for n in range(n_max + 1):
            c[n] = np.sum(w * fv * h) / hermite_norm_sq(n)
            h_prev, h = h, 2 * x * h - 2 * n * h_prev
        return cls(c)

    def __call__(self, xi):
        return H.hermval(np.asarray(xi, dtype=float) / 2.0, self.coeffs)

    def norm_sq(self) -> float:
        """Weighted L^2 norm squared from the coefficients (Parseval)."""
        return float(sum(c * c * hermite_norm_sq(n) for n, c in enumerate(self.coeffs)))

    def parseval_error(self, order: int = QUAD_ORDER) -> float:
        q = weighted_inner_product(self, self, order)
        return abs(self.norm_sq() - q) / max(q, 1e-300)

    def padded(self, n: int) -> "HermiteCoefficients":
        out = np.zeros(max(n + 1, len(self.coeffs)))
        out[:len(self.coeffs)] = self.coeffs
        return HermiteCoefficients(out)

    def __add__(self, other):
        n = max(self.n_max, other.n_max)
        return HermiteCoefficients(self.padded(n).coeffs + other.padded(n).coeffs)

    def __sub__(self, other):
        n = max(self.n_max, other.n_max)
        return HermiteCoefficients(self.padded(n).coeffs - other.padded(n).coeffs)

    def as_rows(self):
        return [{"n": n, "coefficient": float(c), "norm_sq": hermite_norm_sq(n)}
                for n, c in enumerate(self.coeffs)]


def drift_operator(f):
    """-f'' + xi f'/2 - f.

    For :class:`HermiteCoefficients` the operator is applied exactly in
    coefficient space. For a tuple ``(f, df, ddf)`` of callables a callable is
    returned.
    """
    if isinstance(f, HermiteCoefficients):
        c = f.coeffs
        # in x = xi/2: L = -f_xx/4 + x f_x/2 - f
        d1 = H.hermder(c, 1)
        d2 = H.hermder(c, 2)
        out = np.zeros(len(c) + 1)
        t = -0.25 * d2
        out[:len(t)] += t
        t = 0.5 * H.hermmulx(d1)
        out[:len(t)] += t
        out[:len(c)] -= c
        return HermiteCoefficients(out[:len(c)])
    if isinstance(f, tuple) and len(f) == 3:
        g, dg, ddg = f
        return lambda xi: -ddg(xi) + 0.5 * np.asarray(xi) * dg(xi) - g(xi)
    raise TypeError("drift_operator needs HermiteCoefficients or (f, f', f'')")


def eigenrelation_error(n: int, n_max: int = N_MAX) -> float:
    """||L H_n(xi/2) - (n/2 - 1) H_n(xi/2)|| in the weighted norm."""
    c = np.zeros(max(n_max, n) + 1)
    c[n] = 1.0
    f = HermiteCoefficients(c)
    return weighted_norm(drift_operator(f) - HermiteCoefficients((n / 2 - 1) * c))


@dataclass(frozen=True)
class Projections:
    plus: HermiteCoefficients
    zero: HermiteCoefficients
    minus: HermiteCoefficients


def _mask(coeffs, modes):
    out = np.zeros_like(coeffs)
    for n in modes:
        if n < len(coeffs):
            out[n] = coeffs[n]
    return HermiteCoefficients(out)


def project(f, n_max: int = N_MAX) -> Projections:
    """Split f into the spans of {H_0, H_1}, {H_2} and the remaining modes."""
    c = f if isinstance(f, HermiteCoefficients) else HermiteCoefficients.from_function(f, n_max)
    plus = _mask(c.coeffs, PLUS_MODES)
    zero = _mask(c.coeffs, ZERO_MODES)
    minus = HermiteCoefficients(c.coeffs - plus.coeffs - zero.coeffs)
    return Projections(plus, zero, minus)


def projection_algebra_errors(f, n_max: int = N_MAX) -> dict:
    """Idempotence, mutual orthogonality and completeness defects for f."""
    c = f if isinstance(f, HermiteCoefficients) else HermiteCoefficients.from_function(f, n_max)
    p = project(c)
    scale = weighted_norm(c)
    if scale == 0.0:
        return {"idempotence": 0.0, "orthogonality": 0.0, "completeness": 0.0}
    idem = max(weighted_norm(project(p.plus).plus - p.plus),
               weighted_norm(project(p.zero).zero - p.zero),
               weighted_norm(project(p.minus).minus - p.minus)) / scale
    orth = max(abs(weighted_inner_product(a, b)) for a, b in
               ((p.plus, p.zero), (p.plus, p.minus), (p.zero, p.minus))) / scale**2
    complete = weighted_norm(p.plus + p.zero + p.minus - c) / scale
    return {"idempotence": idem, "orthogonality": orth, "completeness": complete}


def monotone_obstruction(f, lo: float = -6.0, hi: float = 6.0, n_check: int = 2001) -> float:
    """Weighted distance from f/||f|| to span{H_2(xi/2)}.

    Raises if f is not strictly increasing on [lo, hi].
    """
    x = np.linspace(lo, hi, n_check)
    if np.any(np.diff(_values(f, x)) <= 0):
        raise HermiteError("f is not strictly increasing on the window")
    h2 = hermite_function(2)
    nf = weighted_norm(f)
    cos = weighted_inner_product(f, h2) / (nf * math.sqrt(hermite_norm_sq(2)))
    return math.sqrt(max(0.0, 1.0 - cos * cos))


# --- cutoff and gamma sequences -----------------------------------------------

def cutoff_chi(x):
    """C^2 smoothstep: 1 on [-1/2, 1/2], 0 outside [-1, 1]."""
    a = np.abs(np.asarray(x, dtype=float))
    t = np.clip(2.0 * a - 1.0, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _cutoff_quadrature(radius: float, panels: int = 24, per_panel: int = 16):
    """Composite Gauss-Legendre nodes on [-R, R] with breaks at the cutoff kinks."""
    gx, gw = np.polynomial.legendre.leggauss(per_panel)
    breaks = np.unique(np.concatenate([np.linspace(-radius, -radius / 2, panels // 4 + 1),
                                       np.linspace(-radius / 2, radius / 2, panels // 2 + 1),
                                       np.linspace(radius / 2, radius, panels // 4 + 1)]))
    a, b = breaks[:-1], breaks[1:]
    x = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * gx[None, :]
    w = (0.5 * (b - a))[:, None] * gw[None, :]
    return x.ravel(), (w * np.exp(-x**2 / 4)).ravel()


def mode_energies(values_fn, radius: float):
    """(total, plus, zero, minus) weighted energies of f * chi(xi/R)."""
    xi, w = _cutoff_quadrature(radius)
    g = np.asarray(values_fn(xi), dtype=float) * cutoff_chi(xi / radius)
    total = float(np.sum(w * g * g))
    parts = []
    for modes in (PLUS_MODES, ZERO_MODES):
        e = 0.0
        for n in modes:
            hn = hermite_function(n)(xi)
            c = np.sum(w * g * hn) / hermite_norm_sq(n)
            e += c * c * hermite_norm_sq(n)
        parts.append(e)
    minus = max(total - parts[0] - parts[1], 0.0)
    return total, parts[0], parts[1], minus


@dataclass
class GammaSequences:
    j: np.ndarray
    gamma: np.ndarray
    gamma_plus: np.ndarray
    gamma_zero: np.ndarray
    gamma_minus: np.ndarray
    delta: np.ndarray
    radius: np.ndarray
    equivalence_constant: float
    cutoff: str = "C2 smoothstep, 1 on [-1/2,1/2], 0 outside [-1,1]"

    @staticmethod
    def _tail_sup(x):
        return np.maximum.accumulate(x[::-1])[::-1]

    @property
    def Gamma(self):
        return self._tail_sup(self.gamma)

    @property
    def Gamma_plus(self):
        return self._tail_sup(self.gamma_plus)

    @property
    def Gamma_zero(self):
        return self._tail_sup(self.gamma_zero)

    @property
    def Gamma_minus(self):
        return self._tail_sup(self.gamma_minus)

    def as_rows(self):
        cols = dict(j=self.j, gamma=self.gamma, gamma_plus=self.gamma_plus,
                    gamma_zero=self.gamma_zero, gamma_minus=self.gamma_minus,
                    Gamma=self.Gamma, Gamma_plus=self.Gamma_plus, Gamma_zero=self.Gamma_zero,
                    Gamma_minus=self.Gamma_minus, delta=self.delta, radius=self.radius)
        return [{k: float(v[i]) for k, v in cols.items()} for i in range(len(self.j))]


def delta_sequence(G: Callable, j_values: Sequence[int], n_tau: int = 9,
                   G_xi: Callable | None = None, h: float = 1e-5) -> np.ndarray:
    """delta_k = sup over tau <= -k of |G(0,tau)| + G_xi(0,tau) on the sampled windows."""
    j_values = np.asarray(j_values)
    per_window = []
    for j in j_values:
        taus = np.linspace(-j - 1, -j, n_tau)
        vals = []
        for tau in taus:
            g0 = float(np.asarray(G(np.array([0.0]), tau))[0])
            if G_xi is None:
                gp = float((np.asarray(G(np.array([h]), tau))[0]
                            - np.asarray(G(np.array([-h]), tau))[0]) / (2 * h))
            else:
                gp = float(np.asarray(G_xi(np.array([0.0]), tau))[0])
            vals.append(abs(g0) + gp)
        per_window.append(max(vals))
    return np.maximum.accumulate(np.array(per_window)[::-1])[::-1]


def gamma_sequences(G: Callable, j_values: Sequence[int], delta: Sequence[float] | None = None,
                    radius: float | Sequence[float] | None = None, n_tau: int = 9,
                    available: tuple[float, float] | None = None) -> GammaSequences:
    """Window suprema of the weighted energy of G chi(xi / R_j) and of its projections.

    ``G(xi, tau)`` is vectorized in xi. The cutoff radius is
    R_j = delta_j^{-1/100} unless ``radius`` overrides it. ``available`` is the
    tau interval covered by the data.
    """
    j_values = np.asarray(j_values, dtype=int)
    if available is not None:
        lo, hi = available
        if np.any(-j_values - 1 < lo - 1e-12) or np.any(-j_values > hi + 1e-12):
            raise HermiteError("window not covered by data")
    if delta is None:
        delta = delta_sequence(G, j_values, n_tau)
    delta = np.asarray(delta, dtype=float)
    if radius is None:
        if np.any(delta <= 0):
            raise HermiteError("delta must be positive to set the cutoff radius")
        R = delta ** (-1.0 / 100.0)
    else:
        R = np.broadcast_to(np.asarray(radius, dtype=float), j_values.shape).copy()
    out = np.zeros((4, len(j_values)))
    ratio = 1.0
    for i, j in enumerate(j_values):
        best = np.zeros(4)
        for tau in np.linspace(-j - 1, -j, n_tau):
            e = mode_energies(lambda x: G(x, tau), R[i])
            best = np.maximum(best, e)
        out[:, i] = best
        if best[0] > 0:
            ratio = max(ratio, (best[1] + best[2] + best[3]) / best[0])
    return GammaSequences(j=j_values, gamma=out[0], gamma_plus=out[1], gamma_zero=out[2],
                          gamma_minus=out[3], delta=delta, radius=R,
                          equivalence_constant=float(ratio))


# --- Merle-Zaag dichotomy -----------------------------------------------------

@dataclass
class MerleZaagReport:
    label: str
    recursion_failures: list
    tail_ratio_plus: float
    tail_ratio_zero: float
    notes: list = field(default_factory=list)


def recursion_failures(Gp, G0, Gm, Gamma, delta, C: float, rtol: float = 1e-12) -> list:
    """Indices k where a Gamma recursion or monotonicity fails.

    Uses Gamma+_{k+1} <= e^-1 Gamma+_k + C d Gamma_k,
    |Gamma0_{k+1} - Gamma0_k| <= C d Gamma_k and
    Gamma-_{k+1} >= e Gamma-_k - C d Gamma_k with d = delta_k^{1/200}.
    """
    fails = []
    d = np.asarray(delta, dtype=float) ** (1.0 / 200.0)
    for k in range(len(Gp) - 1):
        slack = C * d[k] * Gamma[k]
        tol = rtol * max(Gamma[k], 1e-300)
        if Gp[k + 1] > math.exp(-1) * Gp[k] + slack + tol:
            fails.append((k, "plus"))
        if abs(G0[k + 1] - G0[k]) > slack + tol:
            fails.append((k, "zero"))
        if Gm[k + 1] < math.e * Gm[k] - slack - tol:
            fails.append((k, "minus"))
        for name, seq in (("Gamma_plus", Gp), ("Gamma_zero", G0), ("Gamma_minus", Gm),
                          ("Gamma", Gamma)):
            if seq[k + 1] > seq[k] * (1 + rtol) + 1e-300:
                fails.append((k, f"{name} increasing"))
    return fails


def _trend_ok(r, rtol=1e-9):
    return bool(np.all(np.diff(r) <= rtol * np.abs(r[:-1]) + 1e-300))


def merle_zaag_classify(Gamma_plus, Gamma_zero, Gamma_minus, delta, C: float,
                        Gamma=None, eps: float = 0.1, equivalence_constant: float = 1.01
                        ) -> MerleZaagReport:
    """Label the tail of the Gamma sequences.

    Returns ``plus_dominated`` or ``zero_dominated`` when the competing ratio
    is below ``eps`` and nonincreasing over the last third,
    ``hypotheses_violated`` when a recursion, monotonicity or the norm
    equivalence fails, and ``inconclusive`` otherwise.
    """
    Gp, G0, Gm = (np.asarray(x, dtype=float) for x in (Gamma_plus, Gamma_zero, Gamma_minus))
    n = len(Gp)
    if n < 10 or len(G0) != n or len(Gm) != n:
        raise HermiteError("need three sequences of equal length >= 10")
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (n,))
    total = Gp + G0 + Gm
    Gamma = total if Gamma is None else np.asarray(Gamma, dtype=float)
    notes = []
    if np.any(np.concatenate([Gp, G0, Gm]) < 0):
        notes.append("negative entries")
    if np.any(Gamma > equivalence_constant * total * (1 + 1e-12)):
        notes.append("norm equivalence fails")
    fails = recursion_failures(Gp, G0, Gm, Gamma, delta, C)
    tail = slice(n - max(n // 3, 3), n)
    with np.errstate(divide="ignore", invalid="ignore"):
        rp = (G0 + Gm) / Gp
        rz = (Gp + Gm) / G0
    rp_t, rz_t = rp[tail], rz[tail]
    if fails or notes:
        label = "hypotheses_violated"
    elif np.all(np.isfinite(rp_t)) and rp_t[-1] < eps and _trend_ok(rp_t):
        label = "plus_dominated"
    elif np.all(np.isfinite(rz_t)) and rz_t[-1] < eps and _trend_ok(rz_t):
        label = "zero_dominated"
    else:
        label = "inconclusive"
    return MerleZaagReport(label=label, recursion_failures=fails,
                           tail_ratio_plus=float(rp[-1]), tail_ratio_zero=float(rz[-1]),
                           notes=notes)


def classify_gamma(seq: GammaSequences, C: float, eps: float = 0.1) -> MerleZaagReport:
    return merle_zaag_classify(seq.Gamma_plus, seq.Gamma_zero, seq.Gamma_minus, seq.delta, C,
                               Gamma=seq.Gamma, eps=eps,
                               equivalence_constant=max(1.01, seq.equivalence_constant))


# --- synthetic suites ---------------------------------------------------------

def synthetic_suites(n: int = 15) -> dict:
    """Named test suites with their expected labels.

    Each entry maps to (Gamma_plus, Gamma_zero, Gamma_minus, delta, C, expected).
    """
    k = np.arange(1, n + 1, dtype=float)
    delta = np.exp(-k / 4)
    e = np.exp
    suites = {
        "plus_geometric": (e(-k), e(-2 * k), e(-3 * k), delta, 1.0, "plus_dominated"),
        "plus_slow_zero": (e(-k), 0.5 * e(-1.5 * k), 0.1 * e(-2 * k), delta, 1.0,
                           "plus_dominated"),
        "zero_constant": (e(-k), np.ones_like(k), e(-k), delta, 1.0, "zero_dominated"),
        "zero_algebraic": (0.5 * e(-k), 1.0 / k, 0.2 * e(-2 * k), delta, 1.0, "zero_dominated"),
        "violated_minus_growth": (e(-k), e(-2 * k), e(k) * 1e-6, delta, 1.0,
                                  "hypotheses_violated"),
        "violated_zero_jumps": (e(-k), 1.0 + 0.5 * (k % 2 == 0) - 0.01 * k, e(-2 * k), delta,
                                0.05, "hypotheses_violated"),
        # look dominated by their ratios but break a hypothesis
        "adversarial_plus_growth": (e(0.05 * k), 1e-3 * e(-k), 1e-3 * e(-2 * k), delta, 1e-3,
                                    "hypotheses_violated"),
        "adversarial_minus_decay": (1e-3 * e(-k), np.ones_like(k), 0.09 * 0.8 ** k, delta, 0.1,
                                    "hypotheses_violated"),
    }
    return suites
