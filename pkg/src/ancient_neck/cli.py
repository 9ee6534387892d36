"""Command-line scenario runner.

Every subcommand writes one JSON summary ``summary.json`` and data tables
(CSV by default, JSON with ``--format json``) into ``--out``. Exit status:
0 when every check passes, 1 when a check fails (artifacts are still
written), 2 for a configuration or output-directory error (nothing written).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acceptance as acc

SCHEMA_VERSION = 1
SCENARIOS = ("soliton", "barrier", "evolve", "neck-spectral", "lichnerowicz", "anderson-chow",
             "verify-all")


class ConfigError(ValueError):
    pass


# --- configuration -----------------------------------------------------------

def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


# section -> key -> (parser, default, positive)
SCHEMA = {
    "soliton": {"residual_tol": (float, 1e-6, True)},
    "barrier": {"a_values": (_floats, acc.A_VALUES, True), "n_points": (int, 10_000, True)},
    "evolve": {"a_values": (_floats, acc.COMPARISON_A, True),
               "n_points": (int, 1500, True), "tau_span": (float, 1.0, True),
               "dt": (float, 0.01, True), "comparison_tol": (float, 1e-6, True)},
    "neck-spectral": {},
    "lichnerowicz": {"L_values": (_ints, (64, 128, 256), True)},
    "anderson-chow": {"n_samples": (int, 10**6, True), "resolution": (int, 400, True)},
}


def load_config(path: str | None) -> dict:
    """Parse the key = value file into typed parameters; unknown names are errors."""
    params = {sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()}
    if path is None:
        return params
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            conv, _, positive = SCHEMA[sec][key]
            try:
                value = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key} = {raw!r}: {exc}") from exc
            vals = value if isinstance(value, tuple) else (value,)
            if not vals:
                raise ConfigError(f"[{sec}] {key} is empty")
            if any(not math.isfinite(v) for v in vals) or (positive and any(v <= 0 for v in vals)):
                raise ConfigError(f"[{sec}] {key} must be finite and positive")
            params[sec][key] = value
    return params


# --- results -----------------------------------------------------------------

@dataclass
class Table:
    header: list
    rows: list


@dataclass
class ScenarioResult:
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    documents: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def extend(self, prefix, checks):
        self.checks += [acc.Check(f"{prefix}.{c.name}", c.passed, c.value, c.tolerance)
                        for c in checks]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _timed(result, key, fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    result.timings[key] = time.perf_counter() - t
    return out


# --- scenarios -----------------------------------------------------------------

def run_soliton(p, seed):
    res = ScenarioResult()
    res.extend("criterion_01", _timed(res, "criterion_01", acc.criterion_01))
    res.extend("criterion_02", _timed(res, "criterion_02", acc.criterion_02,
                                      p["soliton"]["residual_tol"]))
    sol = acc.soliton()
    r = sol.r_grid
    res.tables["soliton_profile"] = Table(["r", "phi", "steady_residual"],
                                          list(zip(r, sol.phi, sol.steady_residual(r))))
    res.tables["soliton_tail"] = Table(["quantity", "value"],
                                       [("tail_c2", sol.tail_c2), ("tail_c4", sol.tail_c4),
                                        ("r_star", sol.r_star), ("scale_c", sol.scale_c)])
    return res


def run_barrier(p, seed):
    a_values = p["barrier"]["a_values"]
    n = p["barrier"]["n_points"]
    res = ScenarioResult()
    res.extend("criterion_03", _timed(res, "criterion_03", acc.criterion_03))
    res.extend("criterion_04", _timed(res, "criterion_04", acc.criterion_04, a_values, n))
    res.extend("criterion_05", _timed(res, "criterion_05", acc.criterion_05, a_values))
    res.extend("criterion_06", _timed(res, "criterion_06", acc.criterion_06, a_values))
    from .barrier import barrier_grid, barrier_operator

    for a in a_values:
        psi = acc.barrier_psi(float(a))
        s = barrier_grid(psi.a, psi.soliton.r_star, n, extra=(1.0, psi.s_junction))
        res.tables[f"barrier_a{a:g}"] = Table(["s", "psi", "D"],
                                              list(zip(s, psi(s), barrier_operator(psi, s))))
    reps = [acc.barrier_report(float(a), n) for a in a_values]
    res.tables["barrier_summary"] = Table(
        ["a", "N", "max_D", "D_at_1_times_a4", "D_at_9_8_times_a4"],
        [(r.a, r.N, r.max_D, r.D_at_1_scaled, r.D_at_9_8_scaled) for r in reps])
    return res


def run_evolve(p, seed):
    q = p["evolve"]
    res = ScenarioResult()
    reports = _timed(res, "comparisons", acc.comparison_reports, q["a_values"], q["n_points"],
                     q["tau_span"], q["dt"])
    res.extend("criterion_07", acc.criterion_07(tol=q["comparison_tol"], reports=reports))
    res.extend("criterion_08", _timed(res, "criterion_08", acc.criterion_08))
    res.extend("criterion_09", _timed(res, "criterion_09", acc.criterion_09))
    res.tables["comparison"] = Table(
        ["a", "initial_data", "tau_span", "min_gap", "min_relative_gap"],
        [(r.a, r.name, r.tau_span, r.min_gap, r.min_relative_gap) for r in reports])
    res.tables["sphere_convergence"] = Table(["dt", "max_error"],
                                             list(zip(acc.SPHERE_DT, acc.sphere_errors())))
    return res


def run_neck_spectral(p, seed):
    from . import hermite_spectral as hs

    res = ScenarioResult()
    res.extend("criterion_10", _timed(res, "criterion_10", acc.criterion_10, seed))
    res.extend("criterion_11", _timed(res, "criterion_11", acc.criterion_11))
    res.tables["hermite_eigenrelation"] = Table(
        ["n", "eigenvalue", "error"],
        [(n, n / 2.0 - 1.0, hs.eigenrelation_error(n)) for n in range(11)])
    rows = []
    for name, (gp, g0, gm, d, C, expected) in hs.synthetic_suites().items():
        rep = hs.merle_zaag_classify(gp, g0, gm, d, C)
        rows.append((name, expected, rep.label, rep.tail_ratio_plus, rep.tail_ratio_zero))
    res.tables["merle_zaag_suites"] = Table(
        ["suite", "expected", "label", "tail_ratio_plus", "tail_ratio_zero"], rows)
    return res


def run_lichnerowicz(p, seed):
    L_values = p["lichnerowicz"]["L_values"]
    res = ScenarioResult()
    res.extend("criterion_12", _timed(res, "criterion_12", acc.criterion_12, L_values, seed))
    res.extend("criterion_13", _timed(res, "criterion_13", acc.criterion_13))
    res.extend("criterion_14", _timed(res, "criterion_14", acc.criterion_14))
    st = acc.decay(tuple(int(L) for L in L_values), seed)
    res.tables["lichnerowicz_decay"] = Table(
        ["L", "sup_chi", "sup_sigma", "sup_beta_dev", "sup_omega_dev", "sup_total", "psi_1",
         "psi_2", "psi_3"],
        [(r.L, r.sup_chi, r.sup_sigma, r.sup_beta_dev, r.sup_omega_dev, r.sup_total, *r.psi)
         for r in st.reports])
    res.tables["lichnerowicz_exponents"] = Table(["quantity", "exponent"],
                                                 sorted(st.exponents.items()))
    return res


def run_anderson_chow(p, seed):
    from . import anderson_chow as ac

    q = p["anderson-chow"]
    res = ScenarioResult()
    res.extend("criterion_15", _timed(res, "criterion_15", acc.criterion_15, q["n_samples"], seed,
                                      q["resolution"]))
    cert = ac.certify_constants(q["resolution"])
    sweep = ac.random_sweep(min(q["n_samples"], 100_000), seed=seed)
    grid = ac.simplex_grid(min(q["resolution"], 100))
    doc = cert.as_dict()
    doc["scale_invariance_error"] = ac.scale_invariance_error(grid, 0.01)
    doc["det_expansion_C_fitted"] = sweep.det_expansion_C
    res.documents["anderson_chow_certificate"] = doc
    res.tables["anderson_chow_candidates"] = Table(
        ["C_sharp", "min_det_ratio"], [(t["C_sharp"], t["min_det_ratio"]) for t in cert.tried])
    return res


def _determinism_probe(seed):
    """Serialize two seeded computations twice and compare the bytes."""
    from . import anderson_chow as ac
    from . import lichnerowicz_cylinder as lc

    def once():
        cfg = lc.Prop51Config(L=64.0)
        data = lc.random_prop51_data(cfg, seed=seed)
        sweep = ac.random_sweep(20_000, seed=seed)
        blob = {k: np.asarray(v).tolist() for k, v in sorted(data.items())}
        return json.dumps([blob, sweep.as_dict()], sort_keys=True).encode()

    return once() == once()


def run_verify_all(p, seed):
    res = ScenarioResult()
    kwargs = {
        2: (p["soliton"]["residual_tol"],),
        4: (p["barrier"]["a_values"], p["barrier"]["n_points"]),
        5: (p["barrier"]["a_values"],),
        6: (p["barrier"]["a_values"],),
        7: (p["evolve"]["a_values"], p["evolve"]["n_points"], p["evolve"]["tau_span"],
            p["evolve"]["dt"], p["evolve"]["comparison_tol"]),
        10: (seed,),
        12: (p["lichnerowicz"]["L_values"], seed),
        15: (p["anderson-chow"]["n_samples"], seed, p["anderson-chow"]["resolution"]),
    }
    rows = []
    for k, (title, fn) in acc.CRITERIA.items():
        key = f"criterion_{k:02d}"
        checks = _timed(res, key, fn, *kwargs.get(k, ()))
        res.extend(key, checks)
        rows.append((k, title, all(c.passed for c in checks), len(checks)))
    same = _timed(res, "criterion_16", _determinism_probe, seed)
    res.checks.append(acc.Check("criterion_16.seeded_rerun_identical", same, str(same), "True"))
    rows.append((16, "Determinism", same, 1))
    res.tables["criteria"] = Table(["criterion", "title", "pass", "n_checks"], rows)
    return res


RUNNERS = {"soliton": run_soliton, "barrier": run_barrier, "evolve": run_evolve,
           "neck-spectral": run_neck_spectral, "lichnerowicz": run_lichnerowicz,
           "anderson-chow": run_anderson_chow, "verify-all": run_verify_all}


# --- output --------------------------------------------------------------------

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def write_csv(path, table: Table):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path) -> Table:
    """Read a table written by :func:`write_csv`, converting numeric and boolean cells."""
    def conv(x):
        if x in ("true", "false"):
            return x == "true"
        for t in (int, float):
            try:
                return t(x)
            except ValueError:
                pass
        return x

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return Table(rows[0], [[conv(x) for x in r] for r in rows[1:]])


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def summary_document(scenario, result: ScenarioResult, with_timings: bool) -> dict:
    return {"schema_version": SCHEMA_VERSION, "scenario": scenario,
            "checks": [c.as_dict() for c in result.checks],
            "timings": dict(sorted(result.timings.items())) if with_timings else {}}


def emit_report(out_dir, scenario, result: ScenarioResult, fmt="csv", with_timings=False,
                figures=False) -> list:
    """Write tables, documents and the summary into ``out_dir``; returns the file names.

    Files are staged in a temporary directory and moved into place at the end.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    names = []
    with tempfile.TemporaryDirectory(dir=out) as tmp:
        tmp = Path(tmp)
        for name, table in result.tables.items():
            if fmt == "csv":
                write_csv(tmp / f"{name}.csv", table)
                names.append(f"{name}.csv")
            else:
                (tmp / f"{name}.json").write_text(
                    _dump({"header": table.header, "rows": table.rows}), encoding="utf-8")
                names.append(f"{name}.json")
        for name, doc in result.documents.items():
            (tmp / f"{name}.json").write_text(_dump(doc), encoding="utf-8")
            names.append(f"{name}.json")
        (tmp / "summary.json").write_text(
            _dump(summary_document(scenario, result, with_timings)), encoding="utf-8")
        names.append("summary.json")
        if figures:
            names += _figures(tmp, result)
        for n in names:
            shutil.move(str(tmp / n), str(out / n))
    return names


def _figures(directory: Path, result: ScenarioResult) -> list:
    """One PNG per numeric table: the first column against the others."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = []
    for name, table in result.tables.items():
        try:
            data = np.array(table.rows, dtype=float)
        except (TypeError, ValueError):
            continue
        if data.ndim != 2 or data.shape[1] < 2 or len(data) < 2:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        for j in range(1, data.shape[1]):
            ax.plot(data[:, 0], data[:, j], label=table.header[j])
        ax.set_xlabel(table.header[0])
        ax.set_title(name)
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(directory / f"{name}.png", dpi=100, metadata={"Software": None})
        plt.close(fig)
        names.append(f"{name}.png")
    return names


# --- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value file with a section per module")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of the data tables; the summary is always JSON")
    common.add_argument("--seed", type=int, default=0, metavar="N", help="seed for random data")
    common.add_argument("--timings", action="store_true", help="record wall-clock timings")
    common.add_argument("--figures", action="store_true", help="also write PNG figures")
    parser = argparse.ArgumentParser(prog="ancient-neck", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result = RUNNERS[args.scenario](params, args.seed)
    try:
        emit_report(args.out, args.scenario, result, args.format, args.timings, args.figures)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 2
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={_cell(c.value)} "
              f"tolerance={c.tolerance}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
