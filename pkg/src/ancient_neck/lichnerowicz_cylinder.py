"""The parabolic Lichnerowicz equation on shrinking cylinders.

Background: gbar(t) = (-2t) g_S2 + dz^2 for t < 0. A symmetric tensor is split as
h = omega g_S2 + chi + dz*sigma + sigma*dz + beta dz^2 and each part is
expanded in an S^2 eigenbasis. Every coefficient then solves

    c_t = c_zz - kappa c / (-2t),

with kappa = lam for omega and beta, mu + 1 for sigma and nu + 4 for chi.
Tensors on S^2 are stored in the orthonormal frame (d_theta, d_phi / sin theta);
a full tensor is an array (..., 3, 3) with index 2 the z direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.linalg import solve_banded

from .s2_harmonics import S2Basis, SphereQuadrature

KINDS = ("omega", "chi", "sigma", "beta")
FAMILY = {"omega": "scalar", "beta": "scalar", "sigma": "vector", "chi": "tensor"}
KAPPA_SHIFT = {"omega": 0.0, "beta": 0.0, "sigma": 1.0, "chi": 4.0}


class LichnerowiczError(ValueError):
    pass


def kappa_values(basis: S2Basis, kind: str) -> np.ndarray:
    return np.array([e.eigenvalue + KAPPA_SHIFT[kind] for e in basis.family(FAMILY[kind])])


# --- decomposition ------------------------------------------------------------

@dataclass
class CylinderTensorModes:
    """Mode coefficients per kind, each of shape (n_modes, *grid_shape)."""

    basis: S2Basis
    coeffs: dict
    L: float | None = None
    z_grid: np.ndarray | None = None
    t_grid: np.ndarray | None = None

    def eigenvalues(self, kind: str) -> np.ndarray:
        return np.array([e.eigenvalue for e in self.basis.family(FAMILY[kind])])

    def kappa(self, kind: str) -> np.ndarray:
        return kappa_values(self.basis, kind)

    def labels(self, kind: str) -> list:
        return [f"{kind}:{e.label}" for e in self.basis.family(FAMILY[kind])]

    def as_rows(self):
        rows = []
        for kind in KINDS:
            c = self.coeffs[kind]
            for lab, kap, vals in zip(self.labels(kind), self.kappa(kind), c):
                rows.append({"mode": lab, "kappa": float(kap),
                             "max_abs": float(np.max(np.abs(vals))) if vals.size else 0.0})
        return rows


def decompose(h: np.ndarray, basis: S2Basis, quad: SphereQuadrature,
              sym_tol: float = 1e-12) -> CylinderTensorModes:
    """Split h given on quadrature points, shape (..., n_quad, 3, 3)."""
    h = np.asarray(h, dtype=float)
    if h.shape[-2:] != (3, 3) or h.shape[-3] != len(quad.weight):
        raise LichnerowiczError("h must have shape (..., n_quad, 3, 3)")
    scale = max(np.max(np.abs(h)), 1e-300)
    if np.max(np.abs(h - np.swapaxes(h, -1, -2))) > sym_tol * scale:
        raise LichnerowiczError("h is not symmetric")
    w = quad.weight
    Ys = basis.evaluate_family("scalar", quad.theta, quad.phi)
    Vs = basis.evaluate_family("vector", quad.theta, quad.phi)
    Ts = basis.evaluate_family("tensor", quad.theta, quad.phi)
    omega = 0.5 * (h[..., 0, 0] + h[..., 1, 1])
    a = 0.5 * (h[..., 0, 0] - h[..., 1, 1])
    b = 0.5 * (h[..., 0, 1] + h[..., 1, 0])
    sig = 0.5 * (h[..., :2, 2] + h[..., 2, :2])
    beta = h[..., 2, 2]

    def proj_s(f):
        return np.moveaxis(np.einsum("...q,jq,q->...j", f, Ys, w), -1, 0)

    coeffs = {
        "omega": proj_s(omega),
        "beta": proj_s(beta),
        "sigma": np.moveaxis(np.einsum("...qa,jqa,q->...j", sig, Vs, w), -1, 0),
        "chi": np.moveaxis(2.0 * (np.einsum("...q,jq,q->...j", a, Ts[..., 0], w)
                                  + np.einsum("...q,jq,q->...j", b, Ts[..., 1], w)), -1, 0),
    }
    return CylinderTensorModes(basis=basis, coeffs=coeffs)


def assemble(modes: CylinderTensorModes, theta, phi, kinds=KINDS) -> np.ndarray:
    """Frame components (..., n_points, 3, 3) from mode coefficients."""
    basis = modes.basis
    Ys = basis.evaluate_family("scalar", theta, phi)
    out = None
    for kind in kinds:
        c = modes.coeffs[kind]
        if kind in ("omega", "beta"):
            f = np.einsum("j...,jq->...q", c, Ys)
            shape = f.shape
        elif kind == "sigma":
            f = np.einsum("j...,jqa->...qa", c, basis.evaluate_family("vector", theta, phi))
            shape = f.shape[:-1]
        else:
            f = np.einsum("j...,jqa->...qa", c, basis.evaluate_family("tensor", theta, phi))
            shape = f.shape[:-1]
        if out is None:
            out = np.zeros(shape + (3, 3))
        if kind == "omega":
            out[..., 0, 0] += f
            out[..., 1, 1] += f
        elif kind == "beta":
            out[..., 2, 2] += f
        elif kind == "sigma":
            out[..., :2, 2] += f
            out[..., 2, :2] += f
        else:
            out[..., 0, 0] += f[..., 0]
            out[..., 1, 1] -= f[..., 0]
            out[..., 0, 1] += f[..., 1]
            out[..., 1, 0] += f[..., 1]
    return out


def gbar_norm(h: np.ndarray, t) -> np.ndarray:
    """|h|_gbar(t) for frame components; t broadcasts against h[..., 0, 0]."""
    A = -2.0 * np.asarray(t, dtype=float)
    sph = np.sum(h[..., :2, :2] ** 2, axis=(-1, -2))
    mix = np.sum(h[..., :2, 2] ** 2, axis=-1) + np.sum(h[..., 2, :2] ** 2, axis=-1)
    return np.sqrt(sph / A**2 + mix / A + h[..., 2, 2] ** 2)


# --- mode solvers -------------------------------------------------------------

def _second_difference_bands(nz: int, dz: float, coef: float):
    """Banded (1,1) storage of I - coef * D2 with identity rows at both ends."""
    ab = np.zeros((3, nz))
    r = coef / dz**2
    ab[1, :] = 1.0 + 2.0 * r
    ab[0, 1:] = -r
    ab[2, :-1] = -r
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = 0.0
    ab[2, -2] = 0.0
    return ab


def _apply_explicit(c, dz, coef):
    """(I + coef * D2) c on interior rows; boundary rows untouched."""
    out = c.copy()
    out[1:-1] = c[1:-1] + coef / dz**2 * (c[2:] - 2 * c[1:-1] + c[:-2])
    return out


@dataclass
class ModeSolution:
    z: np.ndarray
    t: np.ndarray
    c: np.ndarray  # shape (n_t, n_z)
    form: str


def mode_evolve(kappa: float, z: np.ndarray, t0: float, t1: float, n_steps: int,
                c0: np.ndarray, left=None, right=None, form: str = "substituted") -> ModeSolution:
    """Solve c_t = c_zz - kappa c / (-2t) on [z0, z1] x [t0, t1] by Crank-Nicolson.

    ``form="substituted"`` evolves c_hat = (-t)^(-kappa/2) c by the heat
    equation and converts back. ``form="damped"`` works on c itself: each
    step is a diffusion step followed by the exact damping factor
    (t_{n+1}/t_n)^(kappa/2), which is exact because damping and diffusion
    commute. ``form="damped_cn"`` puts the damping into the Crank-Nicolson
    matrix at the midpoint time, a second-order scheme used as an
    independent check. Boundary values default to the z-independent
    solution through the initial endpoint values.
    """
    if not t0 < t1 < 0:
        raise LichnerowiczError("need t0 < t1 < 0")
    z = np.asarray(z, dtype=float)
    dz = z[1] - z[0]
    if not np.allclose(np.diff(z), dz, rtol=1e-12, atol=0):
        raise LichnerowiczError("z grid must be uniform")
    c0 = np.asarray(c0, dtype=float)
    if left is None:
        cl = c0[0]
        left = lambda t: cl * (t / t0) ** (kappa / 2)
    if right is None:
        cr = c0[-1]
        right = lambda t: cr * (t / t0) ** (kappa / 2)
    dt = (t1 - t0) / n_steps
    ts = t0 + dt * np.arange(n_steps + 1)
    ts[-1] = t1
    out = np.empty((n_steps + 1, len(z)))
    out[0] = c0
    if form == "substituted":
        ab = _second_difference_bands(len(z), dz, 0.5 * dt)
        ch = c0 * (-t0) ** (-kappa / 2)
        for n in range(n_steps):
            rhs = _apply_explicit(ch, dz, 0.5 * dt)
            tn = ts[n + 1]
            s = (-tn) ** (-kappa / 2)
            rhs[0], rhs[-1] = left(tn) * s, right(tn) * s
            ch = solve_banded((1, 1), ab, rhs)
            out[n + 1] = ch * (-tn) ** (kappa / 2)
    elif form == "damped":
        ab = _second_difference_bands(len(z), dz, 0.5 * dt)
        c = c0.copy()
        for n in range(n_steps):
            tn = ts[n + 1]
            rho = (tn / ts[n]) ** (kappa / 2)
            rhs = _apply_explicit(c, dz, 0.5 * dt)
            rhs[0], rhs[-1] = left(tn) / rho, right(tn) / rho
            c = rho * solve_banded((1, 1), ab, rhs)
            out[n + 1] = c
    elif form == "damped_cn":
        c = c0.copy()
        for n in range(n_steps):
            tm = 0.5 * (ts[n] + ts[n + 1])
            d = 0.5 * dt * kappa / (-2 * tm)
            ab = _second_difference_bands(len(z), dz, 0.5 * dt)
            ab[1, 1:-1] += d
            rhs = _apply_explicit(c, dz, 0.5 * dt)
            rhs[1:-1] -= d * c[1:-1]
            tn = ts[n + 1]
            rhs[0], rhs[-1] = left(tn), right(tn)
            c = solve_banded((1, 1), ab, rhs)
            out[n + 1] = c
    else:
        raise ValueError("form must be 'substituted', 'damped' or 'damped_cn'")
    return ModeSolution(z=z, t=ts, c=out, form=form)


def neutral_mode_residual(q: float, t, kappa: float = 2.0) -> float:
    """Residual of c = q (-t) in c_t = c_zz - kappa c / (-2t)."""
    t = np.asarray(t, dtype=float)
    c = q * (-t)
    return float(np.max(np.abs(-q - (-kappa * c / (-2 * t)))))


# --- Prop 5.1 pipeline --------------------------------------------------------

@dataclass
class Prop51Config:
    L: float
    l_max: int = 4
    dz: float = 0.5
    dt: float = 0.05
    z_window: float = 10.0
    t_window: float = 10.0
    window_stride_z: int = 2
    window_stride_t: int = 10


@dataclass
class Prop51Report:
    L: float
    psi: np.ndarray
    sup_chi: float
    sup_sigma: float
    sup_beta_dev: float
    sup_omega_dev: float
    sup_total: float
    hypothesis_ok: bool
    hypothesis_sup_early: float
    hypothesis_sup_late: float
    averaging_defect: float
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {"L": self.L, "psi": [float(x) for x in self.psi], "sup_chi": self.sup_chi,
                "sup_sigma": self.sup_sigma, "sup_beta_dev": self.sup_beta_dev,
                "sup_omega_dev": self.sup_omega_dev, "sup_total": self.sup_total,
                "hypothesis_ok": self.hypothesis_ok, "averaging_defect": self.averaging_defect}


def prop51_grids(cfg: Prop51Config):
    zmax = cfg.L / 3.0
    nz = int(round(2 * zmax / cfg.dz)) + 1
    z = np.linspace(-zmax, zmax, nz)
    t0 = -cfg.L / 2.0
    n_steps = int(round((-1.0 - t0) / cfg.dt))
    return z, t0, n_steps


def random_prop51_data(cfg: Prop51Config, seed: int = 0, kinds=KINDS, n_fourier: int = 6,
                       amplitude: float = 0.4) -> dict:
    """Random smooth coefficient profiles at t0 = -L/2 with sup |h|_gbar = amplitude."""
    rng = np.random.default_rng(seed)
    basis = S2Basis(cfg.l_max)
    z, t0, _ = prop51_grids(cfg)
    zmax = z[-1]
    natural = {"omega": -t0, "chi": -t0, "sigma": math.sqrt(-t0), "beta": 1.0}
    data = {}
    for kind in KINDS:
        n = len(basis.family(FAMILY[kind]))
        if kind not in kinds:
            data[kind] = np.zeros((n, len(z)))
            continue
        k = np.arange(1, n_fourier + 1)
        amp = rng.normal(size=(n, n_fourier)) / k
        ph = rng.uniform(0, 2 * np.pi, size=(n, n_fourier))
        base = rng.normal(size=(n, 1))
        prof = base + np.einsum("jk,jkz->jz", amp,
                                np.cos(np.pi * k[None, :, None] * z[None, None, :] / (2 * zmax)
                                       + ph[:, :, None]))
        data[kind] = natural[kind] * prof
    quad = SphereQuadrature.build(cfg.l_max)
    h = assemble(CylinderTensorModes(basis, data), quad.theta, quad.phi)
    sup = float(np.max(gbar_norm(h, t0)))
    return {k: v * amplitude / sup for k, v in data.items()}


def _evolve_all(kappa: np.ndarray, z, t0, dt, n_steps, c0: np.ndarray, keep):
    """Crank-Nicolson for every c_hat column at once; lateral c_hat held constant.

    ``keep(n, t)`` selects the steps to record. Returns (times, list of c arrays).
    """
    dz = z[1] - z[0]
    ab = _second_difference_bands(len(z), dz, 0.5 * dt)
    ch = (c0 * (-t0) ** (-kappa[:, None] / 2)).T.copy()  # (nz, m)
    times, store = [], []
    if keep(0, t0):
        times.append(t0)
        store.append(c0.copy())
    for n in range(1, n_steps + 1):
        rhs = _apply_explicit(ch, dz, 0.5 * dt)
        ch = solve_banded((1, 1), ab, rhs, overwrite_b=True, check_finite=False)
        t = t0 + n * dt if n < n_steps else -1.0
        if keep(n, t):
            times.append(t)
            store.append((ch * (-t) ** (kappa[None, :] / 2)).T.copy())
    return np.array(times), store


def run_prop51(cfg: Prop51Config, initial: dict) -> tuple[Prop51Report, CylinderTensorModes]:
    """Evolve all modes from t0 = -L/2 and measure the Prop 5.1 defect on the window.

    Lateral data are the z-independent solutions through the initial endpoint
    values. The window is |z| <= z_window, t in [-t_window, -1]; psi is
    extracted from the l = 1 scalar modes of omega averaged over t in [-10, -1].
    """
    basis = S2Basis(cfg.l_max)
    quad = SphereQuadrature.build(cfg.l_max)
    z, t0, n_steps = prop51_grids(cfg)
    if cfg.t_window >= -t0:
        raise LichnerowiczError("time window must lie inside [-L/2, -1]")
    order = list(KINDS)
    sizes = [len(basis.family(FAMILY[k])) for k in order]
    kappa = np.concatenate([kappa_values(basis, k) for k in order])
    c0 = np.concatenate([np.asarray(initial[k], dtype=float) for k in order])
    if c0.shape != (len(kappa), len(z)):
        raise LichnerowiczError("initial data have the wrong shape")

    n_hyp = 16
    hyp_steps = set(np.linspace(0, n_steps, 4 * n_hyp + 1).round().astype(int))
    win_first = int(round((-cfg.t_window - t0) / cfg.dt))
    decade_first = int(round((-10.0 - t0) / cfg.dt))

    def keep(n, t):
        return (n in hyp_steps or (n >= win_first and (n - win_first) % cfg.window_stride_t == 0)
                or n == n_steps or (n >= decade_first and (n - decade_first) % 10 == 0))

    times, store = _evolve_all(kappa, z, t0, cfg.dt, n_steps, c0, keep)
    C = np.stack(store, axis=1)  # (modes, n_t, nz)
    split = np.cumsum(sizes)[:-1]
    parts = dict(zip(order, np.split(C, split, axis=0)))
    modes = CylinderTensorModes(basis=basis, coeffs=parts, L=cfg.L, z_grid=z, t_grid=times)

    # hypothesis pattern, sampled
    zs = slice(None, None, 4)
    early = (times <= -cfg.L / 4 + 1e-12)
    late = ~early
    sub = CylinderTensorModes(basis, {k: v[:, :, zs] for k, v in parts.items()})
    hn = gbar_norm(assemble(sub, quad.theta, quad.phi), times[:, None, None])
    sup_early = float(np.max(hn[early]))
    sup_late = float(np.max(hn[late])) if np.any(late) else 0.0
    hyp_ok = sup_early <= 1.0 + 1e-12 and sup_late <= cfg.L ** 101

    # psi from the l = 1 omega modes at z = 0
    iz0 = int(np.argmin(np.abs(z)))
    l1 = [i for i, e in enumerate(basis.scalar) if e.l == 1]
    dec = (times >= -10.0 - 1e-9) & (times <= -1.0 + 1e-9)
    q = np.array([np.mean(parts["omega"][i, dec, iz0] / (-times[dec])) for i in l1])

    # window
    tw = (times >= -cfg.t_window - 1e-9)
    tw_idx = np.nonzero(tw)[0]
    zw_idx = np.nonzero(np.abs(z) <= cfg.z_window + 1e-12)[0][::cfg.window_stride_z]
    win = {k: v[:, tw_idx][:, :, zw_idx] for k, v in parts.items()}
    T = times[tw_idx][:, None, None]
    w = CylinderTensorModes(basis, win)
    chi_n = gbar_norm(assemble(w, quad.theta, quad.phi, kinds=("chi",)), T)
    sig_n = gbar_norm(assemble(w, quad.theta, quad.phi, kinds=("sigma",)), T)
    dev = {k: v.copy() for k, v in win.items()}
    i00 = [i for i, e in enumerate(basis.scalar) if e.l == 0]
    for i in i00:
        dev["omega"][i] = 0.0
        dev["beta"][i] = 0.0
    for qi, i in zip(q, l1):
        dev["omega"][i] = dev["omega"][i] - qi * (-T[..., 0])
    wd = CylinderTensorModes(basis, dev)
    beta_n = gbar_norm(assemble(wd, quad.theta, quad.phi, kinds=("beta",)), T)
    omega_n = gbar_norm(assemble(wd, quad.theta, quad.phi, kinds=("omega",)), T)
    total_n = gbar_norm(assemble(wd, quad.theta, quad.phi), T)

    # averaging: the l = 0 part carries the sphere average, the rest integrates to zero
    rest = {k: (v if k in ("omega", "beta") else np.zeros_like(v)) for k, v in win.items()}
    for i in i00:
        rest["omega"] = rest["omega"].copy()
        rest["beta"] = rest["beta"].copy()
        rest["omega"][i] = 0.0
        rest["beta"][i] = 0.0
    hr = assemble(CylinderTensorModes(basis, rest), quad.theta, quad.phi, kinds=("omega", "beta"))
    avg_defect = float(max(np.max(np.abs(np.einsum("...q,q->...", hr[..., 0, 0], quad.weight))),
                           np.max(np.abs(np.einsum("...q,q->...", hr[..., 2, 2], quad.weight)))))

    rep = Prop51Report(L=cfg.L, psi=q, sup_chi=float(chi_n.max()), sup_sigma=float(sig_n.max()),
                       sup_beta_dev=float(beta_n.max()), sup_omega_dev=float(omega_n.max()),
                       sup_total=float(total_n.max()), hypothesis_ok=hyp_ok,
                       hypothesis_sup_early=sup_early, hypothesis_sup_late=sup_late,
                       averaging_defect=avg_defect)
    return rep, modes


@dataclass
class DecayStudy:
    L_values: list
    reports: list
    exponents: dict

    def as_dict(self):
        return {"L_values": list(self.L_values), "exponents": self.exponents,
                "reports": [r.as_dict() for r in self.reports]}


def fit_exponent(L_values, values) -> float:
    """Least-squares slope of log(values) against log(L)."""
    x = np.log(np.asarray(L_values, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def decay_study(L_values=(64, 128, 256), seed: int = 0, **cfg_kwargs) -> DecayStudy:
    reports = []
    for L in L_values:
        cfg = Prop51Config(L=float(L), **cfg_kwargs)
        rep, _ = run_prop51(cfg, random_prop51_data(cfg, seed=seed))
        reports.append(rep)
    ex = {name: fit_exponent(L_values, [getattr(r, f"sup_{name}") for r in reports])
          for name in ("chi", "sigma", "beta_dev", "omega_dev", "total")}
    return DecayStudy(list(L_values), reports, ex)


def neutral_mode_data(cfg: Prop51Config, q=(1.0, 0.0, 0.0)) -> dict:
    """h = (-t) psi g_S2 with psi = sum q_i Y_(1,i), as initial data at t0 = -L/2."""
    basis = S2Basis(cfg.l_max)
    z, t0, _ = prop51_grids(cfg)
    data = {k: np.zeros((len(basis.family(FAMILY[k])), len(z))) for k in KINDS}
    l1 = [i for i, e in enumerate(basis.scalar) if e.l == 1]
    for qi, i in zip(q, l1):
        data["omega"][i] = qi * (-t0)
    return data


# --- Lie derivatives of the background ----------------------------------------

_TH, _PH, _Z, _T = sp.symbols("theta phi z t", real=True)


def _background_metric():
    A = -2 * _T
    return sp.diag(A, A * sp.sin(_TH) ** 2, 1)


def lie_derivative_of_background(V) -> sp.Matrix:
    """Coordinate components of L_V gbar(t) for V = (V^theta, V^phi, V^z) in sympy."""
    g = _background_metric()
    x = (_TH, _PH, _Z)
    out = sp.zeros(3, 3)
    for i in range(3):
        for j in range(3):
            e = sum(V[k] * sp.diff(g[i, j], x[k]) for k in range(3))
            e += sum(g[k, j] * sp.diff(V[k], x[i]) + g[i, k] * sp.diff(V[k], x[j])
                     for k in range(3))
            out[i, j] = sp.simplify(e)
    return out


VECTOR_FIELDS = {
    "rotation_x": (-sp.sin(_PH), -sp.cot(_TH) * sp.cos(_PH), 0),
    "rotation_z": (0, 1, 0),
    "translation_z": (0, 0, 1),
    # g_S2(xi, .) = -d(cos theta)/4
    "conformal_cos": (sp.sin(_TH) / 4, 0, 0),
}


def _coordinate_to_frame(hc: np.ndarray, theta) -> np.ndarray:
    s = np.sin(theta)
    out = hc.copy()
    out[..., 0, 1] /= s
    out[..., 1, 0] /= s
    out[..., 1, 1] /= s**2
    out[..., 1, 2] /= s
    out[..., 2, 1] /= s
    return out


def _frame_to_coordinate(hf: np.ndarray, theta) -> np.ndarray:
    s = np.sin(theta)
    out = hf.copy()
    out[..., 0, 1] *= s
    out[..., 1, 0] *= s
    out[..., 1, 1] *= s**2
    out[..., 1, 2] *= s
    out[..., 2, 1] *= s
    return out


@dataclass
class LieCheck:
    field: str
    identity_residual: float
    evolution_residual: float
    expected: str


def lie_derivative_invariant_check(field_name: str, t0: float = -8.0, t1: float = -1.0,
                                   l_max: int = 4, n_steps: int = 70) -> LieCheck:
    """Compare L_V gbar(t) with its predicted value and evolve it through the mode system.

    Killing fields must give 0; the conformal field with g_S2(xi, .) = -dpsi/4
    and psi = cos theta must give (-t) psi g_S2.
    """
    V = VECTOR_FIELDS[field_name]
    Lg = lie_derivative_of_background(V)
    conformal = field_name.startswith("conformal")
    g_s2 = sp.diag(1, sp.sin(_TH) ** 2, 0)
    expected = (-_T) * sp.cos(_TH) * g_s2 if conformal else sp.zeros(3, 3)
    fn = sp.lambdify((_TH, _PH, _Z, _T), Lg, "numpy")
    fe = sp.lambdify((_TH, _PH, _Z, _T), expected, "numpy")
    basis = S2Basis(l_max)
    quad = SphereQuadrature.build(l_max)
    zs = np.linspace(-2, 2, 9)

    def frame_field(f, t):
        vals = np.empty((len(zs), len(quad.theta), 3, 3))
        for a, zz in enumerate(zs):
            for q, (th, ph) in enumerate(zip(quad.theta, quad.phi)):
                vals[a, q] = np.array(f(th, ph, zz, t), dtype=float)
        return _coordinate_to_frame(vals, quad.theta[None, :])

    h0 = frame_field(fn, t0)
    ident = 0.0
    for t in (t0, 0.5 * (t0 + t1), t1):
        ident = max(ident, float(np.max(np.abs(frame_field(fn, t) - frame_field(fe, t)))))
    modes = decompose(h0, basis, quad)
    # evolve every mode over z with the z-independent lateral data
    evolved = {}
    for kind in KINDS:
        kap = kappa_values(basis, kind)
        c = modes.coeffs[kind]
        res = np.empty_like(c)
        for j in range(len(kap)):
            sol = mode_evolve(kap[j], zs, t0, t1, n_steps, c[j])
            res[j] = sol.c[-1]
        evolved[kind] = res
    h1 = assemble(CylinderTensorModes(basis, evolved), quad.theta, quad.phi)
    evo = float(np.max(np.abs(h1 - frame_field(fe, t1))))
    return LieCheck(field=field_name, identity_residual=ident, evolution_residual=evo,
                    expected="(-t) psi g_S2" if conformal else "0")


# --- Lichnerowicz Laplacian by finite differences on a chart -------------------

@dataclass
class ModeTerm:
    """One coefficient function times one basis element."""

    kind: str
    index: int
    f: object      # z -> value
    f_zz: object   # z -> second derivative


def _christoffel(theta):
    """Gamma^k_ij of gbar in (theta, phi, z); independent of t."""
    G = np.zeros(theta.shape + (3, 3, 3))
    s, c = np.sin(theta), np.cos(theta)
    G[..., 0, 1, 1] = -s * c
    G[..., 1, 0, 1] = c / s
    G[..., 1, 1, 0] = c / s
    return G


def _assemble_terms(terms, basis, TH, PH, Zg, t, second=False):
    """Frame-component h (or the mode-system right-hand side) on a 3-D chart grid."""
    shape = TH.shape
    h = np.zeros(shape + (3, 3))
    A = -2.0 * t
    for term in terms:
        fam = FAMILY[term.kind]
        e = basis.family(fam)[term.index]
        val = basis.evaluate(e, TH, PH)
        if second:
            kap = e.eigenvalue + KAPPA_SHIFT[term.kind]
            cz = term.f_zz(Zg) - kap / A * term.f(Zg)
        else:
            cz = term.f(Zg)
        if term.kind == "omega":
            h[..., 0, 0] += cz * val
            h[..., 1, 1] += cz * val
        elif term.kind == "beta":
            h[..., 2, 2] += cz * val
        elif term.kind == "sigma":
            h[..., :2, 2] += cz[..., None] * val
            h[..., 2, :2] += cz[..., None] * val
        else:
            h[..., 0, 0] += cz * val[..., 0]
            h[..., 1, 1] -= cz * val[..., 0]
            h[..., 0, 1] += cz * val[..., 1]
            h[..., 1, 0] += cz * val[..., 1]
    return h


def lichnerowicz_laplacian_fd(hc: np.ndarray, TH, spacing, t: float) -> np.ndarray:
    """Delta_L h for coordinate components hc on a uniform (theta, phi, z) grid.

    Uses second-order central differences for the covariant derivatives and
    the exact curvature of gbar(t).
    """
    A = -2.0 * t
    s = np.sin(TH)
    ginv = np.zeros(TH.shape + (3, 3))
    ginv[..., 0, 0] = 1.0 / A
    ginv[..., 1, 1] = 1.0 / (A * s**2)
    ginv[..., 2, 2] = 1.0
    g = np.zeros_like(ginv)
    g[..., 0, 0] = A
    g[..., 1, 1] = A * s**2
    g[..., 2, 2] = 1.0
    G = _christoffel(TH)

    def partial(f):
        """Partial derivatives along the three chart axes, stacked after the grid axes."""
        return np.stack([np.gradient(f, spacing[k], axis=k) for k in range(3)], axis=3)

    # nabla_b h_ik
    dh = partial(hc)  # (..., b, i, k)
    Dh = (dh - np.einsum("...pbi,...pk->...bik", G, hc)
          - np.einsum("...pbk,...ip->...bik", G, hc))
    dDh = partial(Dh)  # (..., a, b, i, k)
    DDh = (dDh - np.einsum("...pab,...pik->...abik", G, Dh)
           - np.einsum("...pai,...bpk->...abik", G, Dh)
           - np.einsum("...pak,...bip->...abik", G, Dh))
    lap = np.einsum("...ab,...abik->...ik", ginv, DDh)
    # curvature of the sphere factor: R_ijkl = (g_ik g_jl - g_il g_jk) / A on theta, phi
    gs = g.copy()
    gs[..., 2, 2] = 0.0
    hup = np.einsum("...ja,...lb,...ab->...jl", ginv, ginv, hc)
    R_term = (np.einsum("...ik,...jl,...jl->...ik", gs, gs, hup)
              - np.einsum("...il,...jk,...jl->...ik", gs, gs, hup)) * (2.0 / A)
    ric_mixed = np.zeros_like(g)
    ric_mixed[..., 0, 0] = ric_mixed[..., 1, 1] = 1.0 / A
    ric = (np.einsum("...il,...kl->...ik", ric_mixed, hc)
           + np.einsum("...kl,...il->...ik", ric_mixed, hc))
    return lap + R_term - ric


@dataclass
class ResidualField:
    residual: np.ndarray
    sup: float
    n: int


def lichnerowicz_residual(terms, t: float, n: int = 32, box=((0.6, 2.4), (0.3, 1.8), (-1.0, 1.0)),
                          l_max: int = 4, trim: int = 2) -> ResidualField:
    """Delta_L of the assembled h minus the mode-system right-hand side.

    The chart box must stay away from the poles theta = 0, pi.
    """
    (ta, tb), (pa, pb), (za, zb) = box
    if ta <= 0.05 or tb >= np.pi - 0.05:
        raise LichnerowiczError("chart box touches a pole")
    basis = S2Basis(l_max)
    th = np.linspace(ta, tb, n)
    ph = np.linspace(pa, pb, n)
    zz = np.linspace(za, zb, n)
    TH, PH, ZG = np.meshgrid(th, ph, zz, indexing="ij")
    spacing = (th[1] - th[0], ph[1] - ph[0], zz[1] - zz[0])
    hf = _assemble_terms(terms, basis, TH, PH, ZG, t)
    hc = _frame_to_coordinate(hf, TH)
    lap = lichnerowicz_laplacian_fd(hc, TH, spacing, t)
    rhs = _frame_to_coordinate(_assemble_terms(terms, basis, TH, PH, ZG, t, second=True), TH)
    res = (lap - rhs)[trim:-trim, trim:-trim, trim:-trim]
    return ResidualField(residual=res, sup=float(np.max(np.abs(res))), n=n)


def residual_order(terms, t: float, n_values=(24, 48, 96), **kw) -> tuple[list, list]:
    """Sup residuals and observed orders under grid refinement."""
    sups = [lichnerowicz_residual(terms, t, n=n, **kw).sup for n in n_values]
    h = [1.0 / (n - 1) for n in n_values]
    orders = [math.log(sups[i] / sups[i + 1]) / math.log(h[i] / h[i + 1])
              for i in range(len(sups) - 1)]
    return sups, orders
