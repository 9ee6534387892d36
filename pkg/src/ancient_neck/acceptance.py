"""Acceptance checks, one function per criterion.

Each ``criterion_NN`` returns a list of :class:`Check`. Runtime limits are
measured by the test suite, not here, so that reports stay deterministic.
Expensive shared objects (the soliton, zeta, the barrier functions) are cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import anderson_chow as ac
from . import barrier as bar
from . import bryant_soliton as bs
from . import flow_evolver as fe
from . import hermite_spectral as hs
from . import lichnerowicz_cylinder as lc
from .warped_geometry import RadialProfile

A_VALUES = (100.0, 200.0, 400.0)
COMPARISON_A = (100.0, 400.0)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float | str
    tolerance: float | str

    def as_dict(self) -> dict:
        v = self.value
        return {"name": self.name, "pass": bool(self.passed),
                "value": float(v) if isinstance(v, (int, float, np.floating)) else v,
                "tolerance": self.tolerance}


def _le(name, value, tol):
    value = float(value)
    return Check(name, bool(value <= tol), value, tol)


def _ge(name, value, tol):
    value = float(value)
    return Check(name, bool(value >= tol), value, f">= {tol!r}")


# --- cached objects -------------------------------------------------------------

@lru_cache(maxsize=None)
def soliton() -> bs.SolitonProfile:
    return bs.build_soliton()


@lru_cache(maxsize=None)
def zeta() -> bar.ZetaFunction:
    return bar.build_zeta()


@lru_cache(maxsize=None)
def barrier_N() -> int:
    return bar.find_N(soliton(), zeta(), a_values=A_VALUES)


@lru_cache(maxsize=None)
def barrier_psi(a: float) -> bar.BarrierFunction:
    return bar.assemble_psi(float(a), barrier_N(), soliton(), zeta())


@lru_cache(maxsize=None)
def barrier_report(a: float, n: int = 10_000) -> bar.BarrierReport:
    return bar.verify_barrier(barrier_psi(a), n=n)


@lru_cache(maxsize=None)
def decay(L_values=(64, 128, 256), seed: int = 0) -> lc.DecayStudy:
    return lc.decay_study(tuple(L_values), seed=seed)


# --- soliton and barrier ------------------------------------------------------

def criterion_01():
    c2, c4 = bs.fit_tail(soliton(), 10.0, 100.0)[:2]
    return [_le("tail_c2_relative_error", abs(c2 - 1.0), 0.02),
            _le("tail_c4_relative_error", abs(c4 - 2.0) / 2.0, 0.02)]


def criterion_02(tol: float = 1e-6):
    p = soliton()
    return [_le("steady_residual_sup", np.max(np.abs(p.steady_residual(p.r_grid))), tol)]


def criterion_03():
    z = zeta()
    z1 = float(z(np.array([1.0]))[0])
    s = np.geomspace(1e-3, 1e-2, 200)
    coef = np.polynomial.polynomial.polyfit(s, s**3 * z(s), 3)
    return [_le("zeta_at_1_error", abs(z1 + 1.75), 1e-6),
            _le("s3_zeta_limit_relative_error", abs(coef[0] - 5.0) / 5.0, 0.01)]


def criterion_04(a_values=A_VALUES, n: int = 10_000):
    out = []
    for a in a_values:
        rep = barrier_report(float(a), n)
        out.append(Check(f"max_D_a{int(a)}", bool(rep.max_D < 0.0 and rep.n_points >= 10_000),
                         rep.max_D, "< 0"))
    d1 = barrier_report(400.0, n).D_at_1_scaled
    out.append(Check("D_at_1_times_a4_a400", bool(-1.6 <= d1 <= -1.4), d1, "[-1.6, -1.4]"))
    return out


def criterion_05(a_values=A_VALUES):
    out = []
    for a in a_values:
        rep = barrier_report(float(a))
        out.append(_le(f"junction_value_jump_a{int(a)}", rep.junction_value_jump, 1e-8))
        out.append(_le(f"junction_slope_jump_a{int(a)}", rep.junction_slope_jump, 1e-8))
    return out


def criterion_06(a_values=A_VALUES):
    out = []
    two_plus = None
    for a in a_values:
        _, rep = bar.verify_positivity(barrier_psi(float(a)))
        two_plus = rep.two_plus_zeta1
        out.append(_ge(f"margin_near_1_times_a4_a{int(a)}", rep.min_margin_near_1, 0.0))
        out.append(_ge(f"min_psi_times_a4_a{int(a)}", rep.min_psi_scaled, 1.0 / 32.0))
    out.append(_le("two_plus_zeta1_error", abs(two_plus - 0.25), 1e-6))
    return out


# --- flow ---------------------------------------------------------------------

def comparison_reports(a_values=COMPARISON_A, n: int = 1500, tau_span: float = 1.0,
                       dt: float = 0.01):
    """Comparison runs for the five initial data below psi_a at each ``a``."""
    reports = []
    for a in a_values:
        psi = barrier_psi(float(a))
        s = np.geomspace(psi.N / a, 1.0 + a**-2 / 100.0, n)
        for name, u0 in fe.comparison_initial_data(psi(s), s).items():
            reports.append(fe.comparison_check(psi, u0, s, tau_span=tau_span, dt=dt, name=name))
    return reports


def criterion_07(a_values=COMPARISON_A, n: int = 1500, tau_span: float = 1.0, dt: float = 0.01,
                 tol: float = 1e-6, reports=None):
    if reports is None:
        reports = comparison_reports(a_values, n, tau_span, dt)
    out = []
    for rep in reports:
        out.append(_ge(f"comparison_gap_{rep.name}_a{int(rep.a)}", rep.min_gap, -tol))
        out.append(_ge(f"comparison_relative_gap_{rep.name}_a{int(rep.a)}",
                       rep.min_relative_gap, -tol))
    # tau = -log(-t), so one doubling of -t is a tau span of log 2
    out.append(_ge("tau_span_over_log2", min(r.tau_span for r in reports) / math.log(2.0), 1.0))
    return out


def _sphere_run(dt, n=200, r_max=0.7, t_final=0.1):
    r = np.linspace(0.0, r_max, n)
    p = RadialProfile(r, fe.shrinking_sphere(r, 0.0), tip_included=True, positive_curvature=True)
    right = fe.Dirichlet(lambda t: float(fe.shrinking_sphere(r_max, t)))
    return fe.evolve(p, t_final, dt, right=right)


def observed_orders(errors, ratio=2.0):
    return [math.log(errors[i] / errors[i + 1]) / math.log(ratio) for i in range(len(errors) - 1)]


SPHERE_DT = (0.01, 0.005, 0.0025)


@lru_cache(maxsize=None)
def sphere_errors(dts=SPHERE_DT):
    """Max error against the exact shrinking sphere at t = 0.1 for each time step."""
    errs = []
    for dt in dts:
        last = _sphere_run(dt).snapshots[-1]
        errs.append(float(np.max(np.abs(last.u - fe.shrinking_sphere(last.r, 0.1)))))
    return tuple(errs)


def criterion_08():
    order = min(observed_orders(sphere_errors()))
    r = np.linspace(1.0, 5.0, 100)
    flat = fe.evolve(RadialProfile(r, np.ones_like(r)), 1.0, 0.05)
    flat_err = np.max(np.abs(flat.snapshots[-1].u - 1.0))
    r = np.linspace(1.0, 6.0, 2000)
    u = soliton()(r)
    br = fe.evolve(RadialProfile(r, u), 1.0, 0.05)
    br_err = np.max(np.abs(br.snapshots[-1].u - u))
    return [_ge("sphere_temporal_order", order, 1.8), _le("flat_static_error", flat_err, 1e-8),
            _le("bryant_static_error", br_err, 1e-8)]


def arclength_profiles():
    """ArclengthProfiles on constant, round-sphere and soliton data."""
    out = {}
    r = np.linspace(1.0, 3.0, 400)
    out["constant"] = fe.compute_F(RadialProfile(r, np.full_like(r, 0.5)), 2.0)
    r = np.linspace(0.0, 0.7, 400)
    out["sphere"] = fe.compute_F(RadialProfile(r, fe.shrinking_sphere(r, 0.0), tip_included=True),
                                 0.3)
    r = np.linspace(1.0, 20.0, 2000)
    out["soliton"] = fe.compute_F(RadialProfile(r, soliton()(r)), 5.0)
    return out


def criterion_09():
    out = []
    for name, A in arclength_profiles().items():
        e1, e2 = A.identity_errors()
        out.append(_le(f"F_z_identity_{name}", e1, 1e-6))
        out.append(_le(f"F_zz_identity_{name}", e2, 1e-6))
    errs = []
    for dt in SPHERE_DT:
        tr = _sphere_run(dt, n=400)
        rb = fe.track_marked_radius(tr, 0.3)
        _, res = fe.residual_F(tr, rbar=rb, index=len(tr.snapshots) // 2)
        errs.append(float(np.max(np.abs(res))))
    out.append(_ge("residual_F_order_sphere", min(observed_orders(errs)), 1.8))
    return out


# --- Hermite and Merle-Zaag ---------------------------------------------------

def criterion_10(seed: int = 0):
    eig = max(hs.eigenrelation_error(n) for n in range(11))
    rng = np.random.default_rng(seed)
    c = rng.normal(size=11)
    alg = hs.projection_algebra_errors(lambda x: np.polyval(c, x))
    one = abs(hs.weighted_inner_product(1.0, 1.0) - 2.0 * math.sqrt(math.pi))
    out = [_le("eigenrelation_error_n_le_10", eig, 1e-6)]
    out += [_le(f"projection_{k}", v, 1e-10) for k, v in sorted(alg.items())]
    out.append(_le("inner_product_of_ones_error", one, 1e-10))
    return out


def criterion_11():
    out = []
    for name, (gp, g0, gm, d, C, expected) in hs.synthetic_suites().items():
        label = hs.merle_zaag_classify(gp, g0, gm, d, C).label
        out.append(Check(f"suite_{name}", label == expected, label, expected))
    return out


# --- Lichnerowicz -------------------------------------------------------------

DECAY_TARGETS = {"chi": (-1.0, 0.2), "sigma": (-0.5, 0.2), "beta_dev": (-1.0, 0.2)}


def criterion_12(L_values=(64, 128, 256), seed: int = 0):
    ex = decay(tuple(int(L) for L in L_values), seed).exponents
    out = [Check(f"decay_exponent_{k}", bool(abs(ex[k] - c) <= w), ex[k], f"{c} +- {w}")
           for k, (c, w) in DECAY_TARGETS.items()]
    out.append(_le("decay_exponent_total", ex["total"], -0.4))
    return out


def residual_test_terms():
    """Pole-avoiding test tensors, one per kind plus a mixed sum."""
    def cos_term(kind, index, k):
        return lc.ModeTerm(kind, index, lambda z: np.cos(k * z), lambda z: -k * k * np.cos(k * z))

    return {
        "omega_l1": [cos_term("omega", 2, 1.3)],
        "chi_l2": [cos_term("chi", 0, 1.3)],
        "sigma_l1": [cos_term("sigma", 0, 1.3)],
        "beta_l2": [cos_term("beta", 4, 1.3)],
        "mixed": [cos_term("omega", 5, 0.7), cos_term("chi", 7, 1.1), cos_term("sigma", 5, 0.9)],
    }


def criterion_13():
    out = []
    for name, terms in residual_test_terms().items():
        _, orders = lc.residual_order(terms, -1.5, n_values=(16, 32, 64))
        out.append(_ge(f"lichnerowicz_residual_order_{name}", min(orders), 1.8))
    z = np.linspace(-16.0, 16.0, 129)
    c0 = 5.0 * np.exp(-z**2 / 8.0) + np.sin(z / 3.0)
    worst = 0.0
    for kap in (0.0, 2.0, 6.0, 12.0, 20.0):
        a = lc.mode_evolve(kap, z, -32.0, -1.0, 620, c0, form="substituted").c
        b = lc.mode_evolve(kap, z, -32.0, -1.0, 620, c0, form="damped").c
        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    out.append(_le("damped_vs_substituted_relative", worst, 1e-8))
    return out


NEUTRAL_Q = (1.0, -0.5, 0.25)


def criterion_14():
    cfg = lc.Prop51Config(L=64.0)
    rep, _ = lc.run_prop51(cfg, lc.neutral_mode_data(cfg, NEUTRAL_Q))
    psi_err = float(np.max(np.abs(rep.psi - np.array(NEUTRAL_Q))))
    ode = lc.neutral_mode_residual(1.0, np.linspace(-32.0, -1.0, 50))
    return [_le("neutral_psi_extraction_error", psi_err, 1e-6),
            _le("neutral_prop51_residual", rep.sup_total, 1e-8),
            _le("neutral_mode_ode_residual", ode, 1e-8)]


# --- Anderson-Chow ------------------------------------------------------------

def criterion_15(n_samples: int = 10**6, seed: int = 0, resolution: int = 400):
    sw = ac.random_sweep(n_samples, seed=seed)
    cert = ac.certify_constants(resolution)
    out = [_le("minor2_identity_relative_error", sw.minor2_max_rel, 1e-12),
           _ge("det_A0_over_R6_min", cert.det_A0_min_over_R6, -1e-10),
           Check("C_sharp_certified_le_100",
                 bool(cert.certified and cert.C_sharp <= 100.0),
                 cert.C_sharp if cert.certified else "none", "<= 100"),
           Check("c_sharp_positive", bool(cert.certified and cert.c_sharp > 0.0),
                 cert.c_sharp if cert.certified else "none", "> 0"),
           _ge("product_inequality_min_margin", sw.product_min_margin, -1e-12)]
    for i, m in enumerate(sw.pairwise_min_margin):
        out.append(_ge(f"pairwise_product_inequality_{i + 1}_min_margin", m, -1e-12))
    out.append(_ge("S_bound_gap_min", sw.s_gap_min, -1e-12))
    return out


CRITERIA = {
    1: ("Bryant soliton tail coefficients", criterion_01),
    2: ("Steady residual", criterion_02),
    3: ("zeta anchors", criterion_03),
    4: ("Barrier negativity", criterion_04),
    5: ("C1 junction", criterion_05),
    6: ("Positivity", criterion_06),
    7: ("Maximum-principle comparison", criterion_07),
    8: ("Exact-solution regression", criterion_08),
    9: ("F identities", criterion_09),
    10: ("Hermite algebra", criterion_10),
    11: ("Merle-Zaag classifier", criterion_11),
    12: ("Lichnerowicz decay exponents", criterion_12),
    13: ("Mode and assembled consistency", criterion_13),
    14: ("Neutral mode", criterion_14),
    15: ("Anderson-Chow algebra", criterion_15),
}
