"""One test per acceptance criterion, at the stated tolerances."""

import subprocess
import sys
import time

import pytest

from ancient_neck import acceptance as acc
from ancient_neck.acceptance import Check

from conftest import CRITERION_LINES

RUNTIME_LIMITS = {1: 10.0, 4: 60.0, 12: 300.0, 15: 120.0}


def report(k, checks):
    for c in checks:
        line = (f"{'PASS' if c.passed else 'FAIL'} criterion {k}: {c.name} "
                f"value={c.value!r} tolerance={c.tolerance}")
        print(line)
        CRITERION_LINES.append(line)
    failed = [c.name for c in checks if not c.passed]
    title = acc.CRITERIA[k][0] if k in acc.CRITERIA else "Determinism"
    summary = f"{'FAIL' if failed else 'PASS'} criterion {k} ({title})"
    print(summary)
    CRITERION_LINES.append(summary)
    assert not failed, f"criterion {k} failed: {failed}"


def run(k):
    start = time.perf_counter()
    checks = list(acc.CRITERIA[k][1]())
    elapsed = time.perf_counter() - start
    if k in RUNTIME_LIMITS:
        limit = RUNTIME_LIMITS[k]
        checks.append(Check("runtime_seconds", elapsed < limit, elapsed, f"< {limit:g}"))
    report(k, checks)


@pytest.mark.parametrize("k", range(1, 16))
def test_criterion(k):
    run(k)


def test_criterion_16_determinism(tmp_path):
    dirs = [tmp_path / "run1", tmp_path / "run2"]
    codes = []
    for d in dirs:
        proc = subprocess.run([sys.executable, "-m", "ancient_neck", "verify-all", "--out", str(d),
                               "--seed", "0"], capture_output=True, text=True)
        codes.append(proc.returncode)
    names = sorted(p.name for p in dirs[0].iterdir())
    identical = (names == sorted(p.name for p in dirs[1].iterdir()) and len(names) > 0 and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names))
    checks = [Check("exit_codes_equal", codes[0] == codes[1] and codes[0] in (0, 1), codes,
                    "equal"),
              Check("reports_byte_identical", identical, identical, True)]
    report(16, checks)
