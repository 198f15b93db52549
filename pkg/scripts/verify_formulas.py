#!/usr/bin/env python3
"""Check every closed-form formula against brute-force enumeration.

Runs the library's verification battery (update covariances, indicator
variances, pseudo-determinant downdates, Gaussian and discrete leakage) on
random tiny instances where exact enumeration is feasible, and prints one
line per formula. --corrupt deliberately perturbs a named constant to confirm
the battery actually detects a broken formula. Exit code 0 iff all pass.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gnqaudit.oracle import run_oracle_checks


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="seed for the random instances")
    parser.add_argument(
        "--corrupt",
        default=None,
        help="name of a constant to corrupt (e.g. kappa) to test detection",
    )
    args = parser.parse_args()

    start = time.monotonic()
    report = run_oracle_checks(seed=args.seed, corrupt=args.corrupt)
    width = max(len(c.formula) for c in report.checks)
    for check in report.checks:
        tol = "unbounded" if not math.isfinite(check.tolerance) else f"{check.tolerance:.0e}"
        status = "ok  " if check.passed else "FAIL"
        note = f"  ({check.note})" if check.note else ""
        print(
            f"{status} {check.formula:<{width}}  scheme={check.scheme:<22} "
            f"max err {check.max_abs_error:.3e}  tol {tol}{note}"
        )
    verdict = "all passed" if report.passed else "FAILURES: " + ", ".join(report.failures)
    print(f"{len(report.checks)} checks, {verdict} [{time.monotonic() - start:.1f}s]")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
