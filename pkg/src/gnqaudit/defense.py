"""Rank -> remove -> retrain defense and its privacy/utility report.

The pipeline audits a baseline run, ranks the pool by cumulative uniqueness,
drops the top ceil(p * N) candidates from the pool entirely, retrains on the
filtered pool with the same base seed, and attacks both models. The input
dataset must be larger than the configured pool: a seeded permutation takes
the first n_total rows as the pool and holds the remainder out as the test
set for utility numbers.

After removal the pool shrinks to N' = N - k, and the retrain uses
n_train' = round(n_train * N'/N) so the membership prior (and with it the
prior-entropy term of every bound) stays comparable before and after.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .attack import AttackResult, loss_attack
from .data import Dataset
from .errors import ConfigurationError
from .geometry import GramMode
from .models import ModelSpec, accuracy
from .sampling import _SPLIT_TAG, SamplingConfig, stream
from .training import AuditCadence, AuditRecord, TrainingTrajectory, audit, train


@dataclass(frozen=True)
class BoundSummary:
    """Distribution summary of per-example Fano floors."""

    pe_lower_min: float
    pe_lower_mean: float

    @classmethod
    def from_record(cls, record: AuditRecord) -> "BoundSummary":
        pe = np.array([b.pe_lower for b in record.bounds])
        return cls(pe_lower_min=float(pe.min()), pe_lower_mean=float(pe.mean()))


@dataclass(frozen=True)
class DefenseReport:
    removed_fraction: float
    removed_ids: tuple[int, ...]
    auc_before: float
    auc_after: float
    test_accuracy_before: float
    test_accuracy_after: float
    bound_before: BoundSummary
    bound_after: BoundSummary
    # Survivor-only comparison: mean Fano floor over the kept examples, from
    # the baseline audit vs the retrain audit. Removing the riskiest points
    # should not lower it; violations are flagged, not fatal.
    survivor_pe_mean_before: float
    survivor_pe_mean_after: float
    survivor_bound_improved: bool
    n_train_after: int
    seed_offset: int


def rank_examples(record: AuditRecord) -> np.ndarray:
    """Example indices by descending cumulative uniqueness, ties by ascending index."""
    cum = np.asarray(record.cumulative_gnq, dtype=np.float64)
    return np.lexsort((np.arange(cum.shape[0]), -cum))


@dataclass(frozen=True)
class DefenseRun:
    """One trained-and-attacked configuration inside the defense pipeline."""

    trajectory: TrainingTrajectory
    record: AuditRecord
    attack: AttackResult
    test_accuracy: float
    pool_ids: np.ndarray  # positions in the original pool, for survivor bookkeeping


def split_pool(data: Dataset, cfg: SamplingConfig) -> tuple[Dataset, Dataset]:
    """Seeded permutation split: first n_total rows are the pool, rest held out."""
    if len(data) <= cfg.n_total:
        raise ConfigurationError(
            f"defense needs held-out rows: dataset has {len(data)} rows, "
            f"pool takes n_total={cfg.n_total}"
        )
    order = stream(cfg.seed, _SPLIT_TAG).permutation(len(data))
    pool = data.subset(order[: cfg.n_total], name=data.name + " [pool]")
    held_out = data.subset(order[cfg.n_total :], name=data.name + " [held-out]")
    return pool, held_out


def _run_one(
    cfg: SamplingConfig,
    model: ModelSpec,
    pool: Dataset,
    test: Dataset,
    pool_ids: np.ndarray,
    audit_mode: GramMode,
    cadence: AuditCadence,
    tol: float,
) -> DefenseRun:
    traj = train(cfg, model, pool)
    record = audit(traj, pool, mode=audit_mode, cadence=cadence, tol=tol)
    attacked = loss_attack(model, traj.final_params, pool.with_membership(traj.train_indicator))
    return DefenseRun(
        trajectory=traj,
        record=record,
        attack=attacked,
        test_accuracy=accuracy(model, traj.final_params, test.features, test.targets),
        pool_ids=pool_ids,
    )


def run_defense(
    cfg: SamplingConfig,
    model: ModelSpec,
    data: Dataset,
    p: float,
    audit_mode: GramMode = GramMode.FULL_EXACT,
    cadence: AuditCadence = AuditCadence.EVERY_EPOCH,
    tol: float = 1e-10,
) -> DefenseReport:
    """Full before/after comparison at removal fraction p.

    p = 0 removes nothing and, because the retrain reuses the same base seed
    (seed_offset 0), reproduces the baseline bit for bit.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f"removal fraction must be in [0, 1), got {p}")
    pool, test = split_pool(data, cfg)
    baseline = _run_one(
        cfg, model, pool, test, np.arange(len(pool)), audit_mode, cadence, tol
    )

    n_pool = len(pool)
    k = math.ceil(p * n_pool)
    ranked = rank_examples(baseline.record)
    removed = ranked[:k]
    survivors = np.setdiff1d(np.arange(n_pool), removed)

    n_after = n_pool - k
    n_train_after = int(round(cfg.n_train * n_after / n_pool))
    if not cfg.batch_size <= n_train_after:
        raise ConfigurationError(
            f"removal fraction {p} leaves n_train={n_train_after} below "
            f"batch_size={cfg.batch_size}"
        )
    cfg_after = dc_replace(cfg, n_total=n_after, n_train=n_train_after)
    filtered = _run_one(
        cfg_after, model, pool.subset(survivors), test, survivors, audit_mode, cadence, tol
    )

    pe_before = np.array([b.pe_lower for b in baseline.record.bounds])
    pe_after = np.array([b.pe_lower for b in filtered.record.bounds])
    survivor_before = float(pe_before[survivors].mean())
    survivor_after = float(pe_after.mean())
    return DefenseReport(
        removed_fraction=p,
        removed_ids=tuple(int(i) for i in removed),
        auc_before=baseline.attack.auc,
        auc_after=filtered.attack.auc,
        test_accuracy_before=baseline.test_accuracy,
        test_accuracy_after=filtered.test_accuracy,
        bound_before=BoundSummary.from_record(baseline.record),
        bound_after=BoundSummary.from_record(filtered.record),
        survivor_pe_mean_before=survivor_before,
        survivor_pe_mean_after=survivor_after,
        survivor_bound_improved=survivor_after >= survivor_before,
        n_train_after=n_train_after,
        seed_offset=0,
    )


def run_defense_sweep(
    cfg: SamplingConfig,
    model: ModelSpec,
    data: Dataset,
    fractions: list[float],
    audit_mode: GramMode = GramMode.FULL_EXACT,
    cadence: AuditCadence = AuditCadence.EVERY_EPOCH,
    tol: float = 1e-10,
) -> list[DefenseReport]:
    if not fractions:
        raise ConfigurationError("sweep needs at least one removal fraction")
    return [run_defense(cfg, model, data, p, audit_mode, cadence, tol) for p in fractions]
