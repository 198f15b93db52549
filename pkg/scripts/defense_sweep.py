#!/usr/bin/env python3
"""Sweep the rank-and-remove defense over removal fractions.

For each fraction p the pipeline audits a baseline run, drops the top
ceil(p*N) pool examples by cumulative uniqueness, retrains with the same base
seed, and attacks both models. Prints a before/after table and optionally
writes the same sweep CSV the CLI emits.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gnqaudit.data import make_blobs
from gnqaudit.defense import run_defense_sweep
from gnqaudit.models import ModelSpec
from gnqaudit.reports import write_sweep_csv
from gnqaudit.sampling import SamplingConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--fractions",
        type=float,
        nargs="+",
        default=[0.0, 0.05, 0.10, 0.20],
        help="removal fractions in [0, 1)",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--per-class", type=int, default=250)
    parser.add_argument("--held-out", type=int, default=100)
    parser.add_argument("--input-dim", type=int, default=16)
    parser.add_argument("--hidden-dim", type=int, default=10)
    parser.add_argument("--center-distance", type=float, default=2.5)
    parser.add_argument("--spread", type=float, default=1.75)
    parser.add_argument("--batch-size", type=int, default=25)
    parser.add_argument("--iters", type=int, default=400)
    parser.add_argument("--learning-rate", type=float, default=1.0)
    parser.add_argument("--csv", type=Path, default=None, help="optional sweep CSV")
    args = parser.parse_args()

    data = make_blobs(
        [args.per_class, args.per_class],
        args.input_dim,
        args.center_distance,
        args.spread,
        seed=100 + args.seed,
    )
    n_pool = 2 * args.per_class - args.held_out
    cfg = SamplingConfig(
        n_total=n_pool,
        n_train=n_pool // 2,
        batch_size=args.batch_size,
        n_iters=args.iters,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    model = ModelSpec(
        "mlp",
        input_dim=args.input_dim,
        hidden_dim=args.hidden_dim,
        n_classes=2,
        init="seeded_gaussian",
        init_scale=0.1,
    )

    start = time.monotonic()
    reports = run_defense_sweep(cfg, model, data, list(args.fractions))
    print(f"{'p':>6}  {'auc before':>10}  {'auc after':>9}  {'acc before':>10}  "
          f"{'acc after':>9}  {'removed':>7}  {'pe mean before':>14}  {'pe mean after':>13}")
    for rep in reports:
        print(
            f"{rep.removed_fraction:6.2f}  {rep.auc_before:10.4f}  {rep.auc_after:9.4f}  "
            f"{rep.test_accuracy_before:10.3f}  {rep.test_accuracy_after:9.3f}  "
            f"{len(rep.removed_ids):7d}  {rep.bound_before.pe_lower_mean:14.4f}  "
            f"{rep.bound_after.pe_lower_mean:13.4f}"
        )
    print(f"[{time.monotonic() - start:.0f}s]")

    if args.csv is not None:
        write_sweep_csv(args.csv, reports)
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
