"""Algebraic core of the Anderson-Chow type estimate in dimension three.

For ordered Ricci eigenvalues r1 <= r2 <= r3 with R = r1 + r2 + r3 and a
shift rho, the quadratic form A_rho bounds 2S from below in the commuting
case. This module builds A_rho, checks the displayed identities and
inequalities on random and grid samples, and searches for constants
(C_#, c_#) with det A_rho >= c_# rho R^5 whenever R >= C_# rho.

Every routine accepts arrays of triples of shape (..., 3) so that sweeps are
vectorized.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

C_SHARP_CANDIDATES = (10.0, 20.0, 50.0, 100.0)


class AndersonChowError(ValueError):
    pass


@dataclass(frozen=True)
class RicciTriple:
    r1: float
    r2: float
    r3: float
    rho: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.r1 <= self.r2 <= self.r3):
            raise AndersonChowError("need 0 <= r1 <= r2 <= r3")
        if self.rho < 0.0:
            raise AndersonChowError("rho must be nonnegative")
        if self.R <= self.rho and self.rho > 0.0:
            raise AndersonChowError("need R > rho")

    @property
    def R(self) -> float:
        return self.r1 + self.r2 + self.r3

    @property
    def r(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3])


def _split(r):
    r = np.asarray(r, dtype=float)
    return r[..., 0], r[..., 1], r[..., 2]


def _off_diagonal(r):
    """(a, b, c) = (r3-r1-r2, r2-r3-r1, r1-r2-r3), the entries (12), (13), (23)."""
    r1, r2, r3 = _split(r)
    return r3 - r1 - r2, r2 - r3 - r1, r1 - r2 - r3


def _coerce(triple, rho=None):
    if isinstance(triple, RicciTriple):
        return triple.r, triple.rho if rho is None else rho
    return np.asarray(triple, dtype=float), 0.0 if rho is None else rho


def build_A_rho(triple, rho=None) -> np.ndarray:
    """The symmetric matrix A_rho, shape (..., 3, 3)."""
    r, rho = _coerce(triple, rho)
    R = r.sum(axis=-1)
    d = 2.0 * np.sum(r * r, axis=-1)
    a, b, c = _off_diagonal(r)
    s = R - np.asarray(rho, dtype=float)
    A = np.zeros(np.broadcast(d, s).shape + (3, 3))
    A[..., 0, 0] = A[..., 1, 1] = A[..., 2, 2] = d
    A[..., 0, 1] = A[..., 1, 0] = s * a
    A[..., 0, 2] = A[..., 2, 0] = s * b
    A[..., 1, 2] = A[..., 2, 1] = s * c
    return A


def det_A_rho(triple, rho=None) -> np.ndarray:
    """Closed form D^3 - D (R-rho)^2 (a^2+b^2+c^2) + 2 (R-rho)^3 abc, D = 2 sum r^2."""
    r, rho = _coerce(triple, rho)
    s = r.sum(axis=-1) - np.asarray(rho, dtype=float)
    d = 2.0 * np.sum(r * r, axis=-1)
    a, b, c = _off_diagonal(r)
    return d**3 - d * s**2 * (a * a + b * b + c * c) + 2.0 * s**3 * a * b * c


def minor2_identity_check(triple):
    """Both sides of 4|r|^4 - R^2 (r3-r1-r2)^2 = (r1-r2)^4 + ... + 3 r3^4 at rho = 0.

    Returns (lhs, rhs, relative difference).
    """
    r, rho = _coerce(triple)
    if np.any(np.asarray(rho) != 0.0):
        raise AndersonChowError("the second-minor identity holds at rho = 0")
    r1, r2, r3 = _split(r)
    R = r1 + r2 + r3
    q = r1 * r1 + r2 * r2 + r3 * r3
    lhs = 4.0 * q * q - R * R * (r3 - r1 - r2) ** 2
    rhs = ((r1 - r2) ** 4 + 2.0 * (r1 * r1 - r2 * r2) ** 2
           + 8.0 * (r1 * r1 + r2 * r2) * r3 * r3
           + 2.0 * (r1 + r2) ** 2 * r3 * r3 + 3.0 * r3**4)
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), np.finfo(float).tiny)
    return lhs, rhs, np.abs(lhs - rhs) / scale


def S_quantity(h, ric, rho=0.0, commute_tol=1e-12):
    """S from the matrix formula and the gap 2S - h^T A_rho h.

    ``h`` and ``ric`` are symmetric 3x3 matrices (or stacks) that commute.
    Both are diagonalized in a common frame; the Ricci eigenvalues are
    sorted increasingly and the eigenvalues of h are carried along.
    Returns (S, quadratic form, gap).
    """
    h = np.asarray(h, dtype=float)
    ric = np.asarray(ric, dtype=float)
    scale = max(float(np.max(np.abs(h))), 1.0) * max(float(np.max(np.abs(ric))), 1.0)
    if np.max(np.abs(h @ ric - ric @ h)) > commute_tol * scale:
        raise AndersonChowError("h and Ric must commute")
    R = np.trace(ric, axis1=-2, axis2=-1)
    trh = np.trace(h, axis1=-2, axis2=-1)
    h2 = h @ h
    inner = np.einsum("...ij,...ij->...", ric, trh[..., None, None] * h - h2)
    hsq = np.einsum("...ij,...ij->...", h, h)
    ricsq = np.einsum("...ij,...ij->...", ric, ric)
    S = (-2.0 * (R - rho) * inner + 0.5 * R * (R - rho) * (trh**2 - hsq) + hsq * ricsq)

    # common eigenframe: diagonalize a generic combination
    _, V = np.linalg.eigh(ric + math.pi * 1e-3 * h)
    rd = np.einsum("...ki,...kl,...li->...i", V, ric, V)
    hd = np.einsum("...ki,...kl,...li->...i", V, h, V)
    order = np.argsort(rd, axis=-1)
    rd = np.take_along_axis(rd, order, axis=-1)
    hd = np.take_along_axis(hd, order, axis=-1)
    A = build_A_rho(rd, rho)
    form = np.einsum("...i,...ij,...j->...", hd, A, hd)
    return S, form, 2.0 * S - form


def product_terms(triple):
    """LHS R abc and the four right-hand sides (three pairwise, one averaged)."""
    r, _ = _coerce(triple)
    a, b, c = _off_diagonal(r)
    R = r.sum(axis=-1)
    q = np.sum(r * r, axis=-1)
    lhs = R * a * b * c
    pair = np.stack([0.5 * q * (c * c + b * b),
                     0.5 * q * (b * b + a * a),
                     0.5 * q * (a * a + c * c)], axis=-1)
    full = q * (a * a + b * b + c * c) / 3.0
    return lhs, pair, full


def product_inequality_check(triple):
    """Margins RHS - LHS for the three pairwise bounds and the averaged bound.

    Returns a dict with arrays ``pairwise`` (..., 3) and ``averaged`` (...),
    each divided by R^4 (both sides are homogeneous of degree 4) so that the
    tolerance is scale free.
    """
    r, _ = _coerce(triple)
    lhs, pair, full = product_terms(r)
    R4 = np.maximum(r.sum(axis=-1), np.finfo(float).tiny) ** 4
    return {"pairwise": (pair - lhs[..., None]) / R4[..., None],
            "averaged": (full - lhs) / R4}


def det_expansion_remainder(triple, rho):
    """det A_rho minus det A_0 and its first-order terms in rho.

    Returns (remainder, rho^2 R^4 + rho^3 R^3) so that the constant C in
    det A_rho >= det A_0 + first order - C (rho^2 R^4 + rho^3 R^3) can be fitted.
    """
    r, _ = _coerce(triple)
    rho = np.asarray(rho, dtype=float)
    R = r.sum(axis=-1)
    q = np.sum(r * r, axis=-1)
    a, b, c = _off_diagonal(r)
    first = (4.0 * rho * R * q * (a * a + b * b + c * c) - 6.0 * rho * R * R * a * b * c)
    rem = det_A_rho(r, rho) - det_A_rho(r, 0.0) - first
    return rem, rho**2 * R**4 + rho**3 * R**3


def fit_remainder_constant(triple, rho) -> float:
    """Smallest C >= 0 with remainder >= -C (rho^2 R^4 + rho^3 R^3) on the samples."""
    rem, weight = det_expansion_remainder(triple, rho)
    return float(max(0.0, np.max(-rem / weight)))


def simplex_grid(resolution: int = 400) -> np.ndarray:
    """Ordered barycentric lattice on {r1+r2+r3 = 1, 0 <= r1 <= r2 <= r3}."""
    i, j = np.meshgrid(np.arange(resolution + 1), np.arange(resolution + 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    k = resolution - i - j
    keep = (k >= 0) & (i <= j) & (j <= k)
    return np.stack([i[keep], j[keep], k[keep]], axis=-1) / resolution


def random_triples(n: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted nonnegative triples with log-uniform overall scale and some exact ties."""
    r = rng.random((n, 3))
    r *= 10.0 ** rng.uniform(-3, 3, size=(n, 1))
    tie = rng.random(n) < 0.05
    r[tie, 1] = r[tie, 0]
    zero = rng.random(n) < 0.05
    r[zero, 0] = 0.0
    return np.sort(r, axis=-1)


@dataclass
class Certificate:
    C_sharp: float | None
    c_sharp: float | None
    eigen_constant: float | None
    minimizer: dict | None
    det_A0_min_over_R6: float
    grid: dict
    tried: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.C_sharp is not None

    def as_dict(self) -> dict:
        d = asdict(self)
        d["certified"] = self.certified
        return d


def certify_constants(resolution: int = 400, n_rho: int = 24, rho_min_ratio: float = 1e-6,
                      candidates=C_SHARP_CANDIDATES) -> Certificate:
    """Search C_# in ``candidates`` for det A_rho / (rho R^5) > 0 on the grid.

    The grid is the normalized simplex (R = 1) times a geometric grid of rho
    in [rho_min_ratio / C, 1 / C]. For the first C_# that works, c_# is the
    grid minimum of det A_rho / (rho R^5) and the eigenvalue constant is the
    minimum of lambda_min(A_rho) / (rho R).
    """
    r = simplex_grid(resolution)
    det0 = det_A_rho(r, 0.0)
    grid = {"resolution": resolution, "n_simplex": int(len(r)), "n_rho": n_rho,
            "rho_min_ratio": rho_min_ratio}
    tried = []
    for C in candidates:
        rho = np.geomspace(rho_min_ratio / C, 1.0 / C, n_rho)
        ratio = det_A_rho(r[:, None, :], rho[None, :]) / rho[None, :]
        k = int(np.argmin(ratio))
        m = float(ratio.flat[k])
        tried.append({"C_sharp": C, "min_det_ratio": m})
        if m > 0.0:
            i, j = np.unravel_index(k, ratio.shape)
            lam = np.linalg.eigvalsh(build_A_rho(r[:, None, :], rho[None, :]))[..., 0]
            eig = lam / rho[None, :]
            positive_minors = bool(np.all(lam > 0.0))
            tried[-1]["leading_minors_positive"] = positive_minors
            return Certificate(C, m, float(eig.min()),
                               {"r": r[i].tolist(), "rho": float(rho[j])},
                               float(det0.min()), grid, tried)
    return Certificate(None, None, None, None, float(det0.min()), grid, tried)


def scale_invariance_error(triple, rho, lambdas=(0.1, 10.0)) -> float:
    """Max relative change of det A_rho / (rho R^5) under (r, rho) -> (lam r, lam rho)."""
    r, _ = _coerce(triple)
    rho = np.asarray(rho, dtype=float)
    base = det_A_rho(r, rho) / (rho * r.sum(axis=-1) ** 5)
    err = 0.0
    for lam in lambdas:
        scaled = det_A_rho(lam * r, lam * rho) / (lam * rho * (lam * r.sum(axis=-1)) ** 5)
        err = max(err, float(np.max(np.abs(scaled - base) / np.maximum(np.abs(base), 1e-300))))
    return err


@dataclass
class RandomSweep:
    n: int
    minor2_max_rel: float
    product_min_margin: float
    pairwise_min_margin: list
    product_violation_fraction: float
    pairwise_violation_fraction: list
    worst_product_triple: list
    s_gap_min: float
    det_expansion_C: float
    det_closed_form_max_rel: float

    def as_dict(self) -> dict:
        return asdict(self)


def random_sweep(n: int = 10**6, seed: int = 0, chunk: int = 250_000,
                 tol: float = 1e-12) -> RandomSweep:
    """Randomized checks of every identity and inequality on ``n`` triples.

    Product margins are reported on triples normalized to R = 1, and a
    sample counts as a violation when its margin is below ``-tol``.
    """
    rng = np.random.default_rng(seed)
    m2, gap, cfit, dcf = 0.0, np.inf, 0.0, 0.0
    prod, pair = np.inf, np.full(3, np.inf)
    n_prod, n_pair = 0, np.zeros(3, dtype=int)
    worst = None
    idx = np.arange(3)
    done = 0
    while done < n:
        k = min(chunk, n - done)
        r = random_triples(k, rng)
        R = r.sum(axis=-1)
        rho = R / 20.0
        m2 = max(m2, float(minor2_identity_check(r)[2].max()))

        margins = product_inequality_check(r / R[:, None])
        av, pw = margins["averaged"], margins["pairwise"]
        n_prod += int(np.sum(av < -tol))
        n_pair += np.sum(pw < -tol, axis=0)
        pair = np.minimum(pair, pw.min(axis=0))
        i = int(np.argmin(av))
        if av[i] < prod:
            prod, worst = float(av[i]), (r[i] / R[i]).tolist()

        h = rng.standard_normal((k, 3))
        hm = np.zeros((k, 3, 3))
        rm = np.zeros((k, 3, 3))
        hm[:, idx, idx] = h
        rm[:, idx, idx] = r
        _, _, g = S_quantity(hm, rm, rho)
        gap = min(gap, float(np.min(g / (np.sum(h * h, axis=-1) * R * R))))

        cfit = max(cfit, fit_remainder_constant(r, rho * rng.random(k)))
        d_np = np.linalg.det(build_A_rho(r, rho))
        dcf = max(dcf, float(np.max(np.abs(d_np - det_A_rho(r, rho)) / R**6)))
        done += k
    return RandomSweep(n, m2, prod, pair.tolist(), n_prod / n, (n_pair / n).tolist(),
                       worst, gap, cfit, dcf)


__all__ = [
    "AndersonChowError", "RicciTriple", "build_A_rho", "det_A_rho", "minor2_identity_check",
    "S_quantity", "product_terms", "product_inequality_check", "det_expansion_remainder",
    "fit_remainder_constant", "simplex_grid", "random_triples", "Certificate",
    "certify_constants", "scale_invariance_error", "RandomSweep", "random_sweep",
    "C_SHARP_CANDIDATES",
]
