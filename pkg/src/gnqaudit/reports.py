"""Deterministic report and table writers.

Reruns with the same config and seed must produce byte-identical artifacts,
so the main report files contain no timestamps, no environment strings, and
no dict-order dependence: JSON is written with sorted keys and floats in
round-trip repr form, CSVs with LF newlines. Wall-clock metadata goes to a
`.meta.json` sidecar next to each report.
"""

from __future__ import annotations

import csv
import datetime
import enum
import hashlib
import json
from pathlib import Path

import numpy as np

from ._version import __version__
from .attack import AttackResult, BinnedCurve
from .defense import DefenseReport
from .oracle import OracleReport
from .training import AuditRecord


def _jsonable(obj):
    """Recursively coerce numpy scalars/arrays, enums, tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def canonical_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def config_hash(config: dict) -> str:
    """Stable hash of a config dict; key order and whitespace do not matter."""
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def finalize_report(kind: str, payload: dict, config: dict) -> dict:
    out = dict(payload)
    out["report_kind"] = kind
    out["library_version"] = __version__
    out["config_hash"] = config_hash(config)
    out["config"] = _jsonable(config)
    return out


def write_report(path: str | Path, payload: dict) -> Path:
    """Write the report plus a timestamp sidecar (kept out of the report)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload), encoding="utf-8")
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    meta = {
        "report": path.name,
        "written_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _write_rows(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_scores_csv(path: str | Path, record: AuditRecord) -> Path:
    rows = [
        (it, ex, score.mode.value, repr(float(score.value)), int(score.range_ok))
        for (it, ex), score in sorted(record.scores.items())
    ]
    return _write_rows(path, ["iteration", "example_id", "mode", "gnq", "range_ok"], rows)


def write_gradients_csv(path: str | Path, per_iteration: dict[int, np.ndarray]) -> Path:
    """Dump per-example gradient rows; keys are iterations, values (N, Np)."""
    dims = {mat.shape[1] for mat in per_iteration.values()}
    if len(dims) != 1:
        raise ValueError("all gradient matrices must share the parameter dimension")
    n_params = dims.pop()
    header = ["iteration", "example_id"] + [f"g_{p}" for p in range(n_params)]
    rows = [
        [it, ex] + [repr(float(v)) for v in mat[ex]]
        for it, mat in sorted(per_iteration.items())
        for ex in range(mat.shape[0])
    ]
    return _write_rows(path, header, rows)


def write_attack_csv(path: str | Path, attack: AttackResult) -> Path:
    rows = [
        (
            ex,
            repr(float(attack.per_example_score[ex])),
            int(attack.per_example_success[ex]),
            int(attack.membership[ex]),
        )
        for ex in range(attack.per_example_score.shape[0])
    ]
    return _write_rows(path, ["example_id", "score", "success", "membership"], rows)


def write_sweep_csv(path: str | Path, reports: list[DefenseReport]) -> Path:
    rows = [
        (
            repr(float(r.removed_fraction)),
            repr(float(r.auc_before)),
            repr(float(r.auc_after)),
            repr(float(r.test_accuracy_before)),
            repr(float(r.test_accuracy_after)),
        )
        for r in reports
    ]
    return _write_rows(
        path, ["p", "auc_before", "auc_after", "acc_before", "acc_after"], rows
    )


def audit_report(record: AuditRecord, config: dict, ranking: np.ndarray) -> dict:
    """Per-example audit summary: cumulative scores, bounds, ranking, flags.

    total_bits counts every audited iteration including the one at the
    initial parameters; total_bits_excluding_first drops that first audit
    point for consumers who treat the init as public.
    """
    per_example = []
    for bound in record.bounds:
        entry = bound.to_json_dict()
        entry["cumulative_gnq"] = float(record.cumulative_gnq[bound.example])
        entry["total_bits_excluding_first"] = float(sum(bound.per_iteration_bits[1:]))
        per_example.append(entry)
    range_violations = sorted(
        {ex for (_, ex), score in record.scores.items() if not score.range_ok}
    )
    payload = {
        "mode": record.mode.value,
        "cadence": record.cadence.value,
        "tol": record.tol,
        "audited_iterations": list(record.audited_iterations),
        "per_example": per_example,
        "ranking": [int(i) for i in ranking],
        "flags": {
            "range_violations": [int(i) for i in range_violations],
            "vacuous_bounds": [int(b.example) for b in record.bounds if b.vacuous],
        },
    }
    return finalize_report("audit", payload, config)


def _curve_dict(curve: BinnedCurve) -> dict:
    return {
        "zero_count": int(curve.zero_count),
        "zero_mean_success": float(curve.zero_mean_success),
        "bin_edges": [float(e) for e in curve.bin_edges],
        "bin_counts": [int(c) for c in curve.bin_counts],
        "bin_mean_success": [float(m) for m in curve.bin_mean_success],
        "spearman": float(curve.spearman),
    }


def attack_report(attack: AttackResult, config: dict, curve: BinnedCurve | None = None) -> dict:
    payload = {
        "auc": float(attack.auc),
        "threshold": float(attack.threshold),
        "n_examples": int(attack.membership.shape[0]),
        "n_members": int(attack.membership.sum()),
    }
    if curve is not None:
        payload["success_vs_gnq"] = _curve_dict(curve)
    return finalize_report("attack", payload, config)


def defense_report(report: DefenseReport, config: dict) -> dict:
    payload = {
        "removed_fraction": float(report.removed_fraction),
        "removed_ids": [int(i) for i in report.removed_ids],
        "n_removed": len(report.removed_ids),
        "n_train_after": int(report.n_train_after),
        "auc_before": float(report.auc_before),
        "auc_after": float(report.auc_after),
        "test_accuracy_before": float(report.test_accuracy_before),
        "test_accuracy_after": float(report.test_accuracy_after),
        "bound_before": {
            "pe_lower_min": float(report.bound_before.pe_lower_min),
            "pe_lower_mean": float(report.bound_before.pe_lower_mean),
        },
        "bound_after": {
            "pe_lower_min": float(report.bound_after.pe_lower_min),
            "pe_lower_mean": float(report.bound_after.pe_lower_mean),
        },
        "survivor_pe_mean_before": float(report.survivor_pe_mean_before),
        "survivor_pe_mean_after": float(report.survivor_pe_mean_after),
        "survivor_bound_improved": bool(report.survivor_bound_improved),
    }
    return finalize_report("defense", payload, config)


def oracle_report(report: OracleReport, config: dict) -> dict:
    payload = {
        "passed": report.passed,
        "failures": list(report.failures),
        "checks": [c.to_json_dict() for c in report.checks],
    }
    return finalize_report("oracle", payload, config)
