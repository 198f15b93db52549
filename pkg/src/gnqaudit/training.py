"""Mini-batch SGD with two-level sampling, trajectory capture, and audits.

Training follows the update theta_{i+1} = theta_i - eta * g_hat_i with

    g_hat_i = (1/B) * sum_n T_n M_in g_in,

i.e. the gradient sum over the realized batch normalized by the expected
batch size B, never the realized count. An empty realized batch contributes a
zero update but still counts as an iteration. Batch-member gradients are
accumulated in ascending example-index order (numpy's fixed-shape pairwise
reduction over the member rows), so trajectories are bit-identical across
runs and platforms for identical (config, data).

An audit walks recorded parameter vectors, recomputes every example's
gradient there, scores uniqueness in the requested mode, and converts each
example's per-iteration scores into a leakage bound. Storing parameters and
recomputing gradients keeps memory at O(N_p * n_iters + N * N_p) instead of
O(N * n_iters * N_p).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import geometry
from .bounds import LeakageBound, make_leakage_bound, per_iteration_leakage
from .data import Dataset
from .errors import CapacityError, ConfigurationError, DivergenceError, ShapeError
from .geometry import GnqScore, GradientSet, GramMode, GramSummary, gnq_all_exact, gnq_diagonal
from .models import ModelSpec, gradient_all, init_params
from .sampling import IndicatorDraw, SamplingConfig, draw_indicators

TrainHook = Callable[[int, np.ndarray, IndicatorDraw, np.ndarray], None]

TRAJECTORY_FORMAT_VERSION = 1


class AuditCadence(enum.Enum):
    EVERY_ITERATION = "every_iteration"
    EVERY_EPOCH = "every_epoch"
    FINAL_ONLY = "final_only"


@dataclass(frozen=True)
class TrainingTrajectory:
    """Everything needed to replay or audit one training run."""

    cfg: SamplingConfig
    model: ModelSpec
    params_per_iter: np.ndarray  # (n_iters + 1, n_params); row i is theta_i
    batch_log: tuple[IndicatorDraw, ...]

    def __post_init__(self) -> None:
        expected = (self.cfg.n_iters + 1, self.model.n_params)
        if self.params_per_iter.shape != expected:
            raise ShapeError(
                f"params_per_iter shape {self.params_per_iter.shape} != {expected}"
            )
        if len(self.batch_log) != self.cfg.n_iters:
            raise ShapeError(
                f"batch log has {len(self.batch_log)} entries for {self.cfg.n_iters} iterations"
            )

    @property
    def final_params(self) -> np.ndarray:
        return self.params_per_iter[-1]

    @property
    def train_indicator(self) -> np.ndarray:
        return self.batch_log[0].t


@dataclass(frozen=True)
class AuditRecord:
    """Per-iteration uniqueness scores plus derived leakage bounds.

    scores maps (iteration, example) to the GnqScore recorded there;
    cumulative_gnq[j] is the sum of example j's recorded score values;
    bounds[j] chains those same recorded iterations into a Fano floor.
    batch_sources maps an audited iteration to the iteration whose realized
    batch fed a batch-restricted mode.
    """

    mode: GramMode
    cadence: AuditCadence
    audited_iterations: tuple[int, ...]
    scores: dict[tuple[int, int], GnqScore]
    cumulative_gnq: np.ndarray
    bounds: tuple[LeakageBound, ...]
    batch_sources: dict[int, int]
    tol: float

    @property
    def n_examples(self) -> int:
        return self.cumulative_gnq.shape[0]

    @property
    def range_violations(self) -> tuple[tuple[int, int], ...]:
        return tuple(key for key, s in sorted(self.scores.items()) if not s.range_ok)


def train(
    cfg: SamplingConfig,
    model: ModelSpec,
    data: Dataset,
    hooks: Sequence[TrainHook] = (),
) -> TrainingTrajectory:
    """Run SGD for cfg.n_iters iterations and record the full trajectory.

    Raises DivergenceError (naming the iteration) as soon as a batch gradient
    or updated parameter vector stops being finite.
    """
    if len(data) != cfg.n_total:
        raise ConfigurationError(
            f"dataset has {len(data)} rows but config says n_total={cfg.n_total}"
        )
    if data.input_dim != model.input_dim:
        raise ShapeError(
            f"dataset dim {data.input_dim} != model input_dim {model.input_dim}"
        )
    params = init_params(model, cfg.seed)
    trajectory = np.empty((cfg.n_iters + 1, model.n_params))
    trajectory[0] = params
    batch_log: list[IndicatorDraw] = []
    for i in range(cfg.n_iters):
        draw = draw_indicators(cfg, i)
        members = draw.batch_indices
        # Overflow on the way to divergence is expected and raised, not warned.
        with np.errstate(over="ignore", invalid="ignore"):
            if members.size:
                grads = gradient_all(
                    model, params, data.features[members], data.targets[members]
                )
                if not np.all(np.isfinite(grads)):
                    raise DivergenceError(f"non-finite gradient at iteration {i}", iteration=i)
                g_hat = grads.sum(axis=0) / cfg.batch_size
            else:
                g_hat = np.zeros(model.n_params)
            params = params - cfg.learning_rate * g_hat
        if not np.all(np.isfinite(params)):
            raise DivergenceError(f"non-finite parameters after iteration {i}", iteration=i)
        trajectory[i + 1] = params
        batch_log.append(draw)
        for hook in hooks:
            hook(i, trajectory[i], draw, g_hat)
    return TrainingTrajectory(
        cfg=cfg, model=model, params_per_iter=trajectory, batch_log=tuple(batch_log)
    )


def audited_iterations(cfg: SamplingConfig, cadence: AuditCadence) -> tuple[int, ...]:
    """Which parameter snapshots an audit visits.

    EVERY_ITERATION visits the pre-update state of each executed iteration
    (0 .. n_iters-1). EVERY_EPOCH visits multiples of the epoch length
    max(1, n_train // batch_size) plus the final state. FINAL_ONLY visits the
    final state alone.
    """
    if cadence is AuditCadence.EVERY_ITERATION:
        return tuple(range(cfg.n_iters))
    if cadence is AuditCadence.FINAL_ONLY:
        return (cfg.n_iters,)
    epoch = max(1, cfg.n_train // cfg.batch_size)
    marks = list(range(epoch, cfg.n_iters + 1, epoch))
    if not marks or marks[-1] != cfg.n_iters:
        marks.append(cfg.n_iters)
    return tuple(marks)


def _score_batch_mode(
    grads: GradientSet,
    members: np.ndarray,
    mode: GramMode,
    tol: float,
) -> list[GnqScore]:
    """Score every example against a Gram built from one realized batch."""
    n = grads.n_examples
    it = grads.iteration
    if members.size == 0:
        # Degenerate empty batch: nothing spans anything; flag, don't fail.
        return [
            GnqScore(example=j, iteration=it, value=0.0, mode=mode, range_ok=False)
            for j in range(n)
        ]
    bg = grads.vectors[members]
    member_set = set(int(m) for m in members)
    if mode is GramMode.BATCH_DIAGONAL:
        summary = GramSummary(
            mode=mode, total=np.sum(bg**2, axis=0), contributing=tuple(int(m) for m in members)
        )
        return [
            gnq_diagonal(summary, grads.vectors[j], example=j, iteration=it)
            for j in range(n)
        ]
    s_batch = bg.T @ bg
    w, v, _ = geometry._psd_eig(s_batch, tol)
    g = grads.vectors
    if w.size:
        coeff = v.T @ g.T
        q = np.sum(coeff**2 / w[:, None], axis=0)
    else:
        q = np.zeros(n)
    scores = []
    for j in range(n):
        gj = g[j]
        in_range = geometry._in_range(v, gj, tol)
        qj = float(q[j])
        if j not in member_set:
            # Non-members score against the whole batch Gram directly.
            scores.append(
                GnqScore(example=j, iteration=it, value=qj, mode=mode, range_ok=in_range)
            )
        elif qj < 1.0 - tol and in_range:
            scores.append(
                GnqScore(
                    example=j,
                    iteration=it,
                    value=max(qj / (1.0 - qj), 0.0),
                    mode=mode,
                    range_ok=True,
                )
            )
        else:
            others = bg[members != j]
            sj = others.T @ others if others.size else np.zeros_like(s_batch)
            wj, vj, _ = geometry._psd_eig(sj, tol)
            scores.append(
                GnqScore(
                    example=j,
                    iteration=it,
                    value=geometry._pinv_quadform(wj, vj, gj),
                    mode=mode,
                    range_ok=geometry._in_range(vj, gj, tol),
                )
            )
    return scores


def audit(
    traj: TrainingTrajectory,
    data: Dataset,
    mode: GramMode = GramMode.FULL_EXACT,
    cadence: AuditCadence = AuditCadence.EVERY_EPOCH,
    tol: float = geometry.DEFAULT_TOL,
) -> AuditRecord:
    """Recompute gradients along the trajectory and score every example.

    Batch-restricted modes use the batch realized at the audited iteration;
    the final state, where no batch was drawn, reuses the last executed
    iteration's batch (recorded in batch_sources).
    """
    if len(data) != traj.cfg.n_total:
        raise ConfigurationError(
            f"dataset has {len(data)} rows but trajectory says n_total={traj.cfg.n_total}"
        )
    exact = mode in (GramMode.FULL_EXACT, GramMode.BATCH_EXACT)
    if exact and traj.model.n_params > geometry.EXACT_MODE_DIM_CAP:
        raise CapacityError(
            f"exact mode caps n_params at {geometry.EXACT_MODE_DIM_CAP}, "
            f"got {traj.model.n_params}; use a diagonal mode"
        )
    iters = audited_iterations(traj.cfg, cadence)
    n = traj.cfg.n_total
    scores: dict[tuple[int, int], GnqScore] = {}
    batch_sources: dict[int, int] = {}
    per_iter_values = np.zeros((len(iters), n))
    for row, i in enumerate(iters):
        grads = GradientSet(
            iteration=i,
            vectors=gradient_all(traj.model, traj.params_per_iter[i], data.features, data.targets),
        )
        if mode is GramMode.FULL_EXACT:
            iteration_scores = gnq_all_exact(grads, tol)
        elif mode is GramMode.DIAGONAL:
            summary = geometry.full_gram(grads.vectors, tuple(range(n)), GramMode.DIAGONAL)
            iteration_scores = [
                gnq_diagonal(summary, grads.vectors[j], example=j, iteration=i)
                for j in range(n)
            ]
        else:
            source = min(i, traj.cfg.n_iters - 1)
            batch_sources[i] = source
            members = traj.batch_log[source].batch_indices
            iteration_scores = _score_batch_mode(grads, members, mode, tol)
        for s in iteration_scores:
            scores[(i, s.example)] = s
            per_iter_values[row, s.example] = s.value
    bounds = tuple(
        make_leakage_bound(
            j,
            [per_iteration_leakage(float(v), traj.cfg) for v in per_iter_values[:, j]],
            traj.cfg,
        )
        for j in range(n)
    )
    return AuditRecord(
        mode=mode,
        cadence=cadence,
        audited_iterations=iters,
        scores=scores,
        cumulative_gnq=per_iter_values.sum(axis=0),
        bounds=bounds,
        batch_sources=batch_sources,
        tol=tol,
    )


def _bits_to_str(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


def _str_to_bits(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")


def save_trajectory(path: str | Path, traj: TrainingTrajectory) -> None:
    """Write a replayable JSON checkpoint (floats via repr, bit-exact)."""
    payload = {
        "format_version": TRAJECTORY_FORMAT_VERSION,
        "sampling": traj.cfg.to_json_dict(),
        "model": traj.model.to_json_dict(),
        "params_per_iter": [[float(v) for v in row] for row in traj.params_per_iter],
        "train_indicator": _bits_to_str(traj.train_indicator),
        "batch_indicators": [_bits_to_str(d.m) for d in traj.batch_log],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_trajectory(path: str | Path) -> TrainingTrajectory:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"trajectory file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc
    version = payload.get("format_version")
    if version != TRAJECTORY_FORMAT_VERSION:
        raise ConfigurationError(
            f"{path}: unsupported trajectory format_version {version!r}"
        )
    cfg = SamplingConfig.from_json_dict(payload["sampling"])
    model = ModelSpec.from_json_dict(payload["model"])
    t = _str_to_bits(payload["train_indicator"]).astype(np.uint8)
    batch_log = tuple(
        IndicatorDraw(t=t, m=_str_to_bits(m).astype(np.uint8))
        for m in payload["batch_indicators"]
    )
    return TrainingTrajectory(
        cfg=cfg,
        model=model,
        params_per_iter=np.array(payload["params_per_iter"], dtype=np.float64),
        batch_log=batch_log,
    )
