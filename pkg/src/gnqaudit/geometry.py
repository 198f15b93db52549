"""Gradient-uniqueness scores and the rank-one spectral identities behind them.

The uniqueness score of example j at one iteration is the quadratic form

    gnq_j = g_j^T S^+ g_j,    S = sum_{k != j} g_k g_k^T,

where S^+ is the Moore-Penrose pseudoinverse with singular values below
tol * sigma_max treated as zero. The score measures how far g_j sticks out of
the span and spectrum of everyone else's gradients: it is 0 when g_j is
indistinguishable from the bulk and grows without bound as g_j approaches a
direction no other example covers. Each score carries a range_ok flag telling
whether g_j actually lies in range(S) within tolerance; out-of-range scores
are reported, never fatal.

`gnq_all_exact` scores every example from one eigendecomposition of
S_total = sum_k g_k g_k^T. With q_j = g_j^T S_total^+ g_j, removing g_j's own
contribution gives gnq_j = q_j / (1 - q_j); q_j = 1 signals exactly the
degenerate cases (rank drop or g_j outside the remaining span), which fall
back to a per-example pseudoinverse.

The module also carries the scalar helpers used by the leakage bound:
`pdet_rank_one` for pdet(A + q q^T) = pdet(A) (1 + q^T A^+ q) with q in
range(A), and `leakage_growth_factor` f(x) = (1 + c1^2 x) / sqrt(1 + c2^2 x),
strictly increasing iff 2 c1^2 > c2^2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, ShapeError

DEFAULT_TOL = 1e-10
# S is N_p x N_p in exact mode; above this, use a diagonal mode.
EXACT_MODE_DIM_CAP = 4096


class GramMode(enum.Enum):
    FULL_EXACT = "full_exact"
    DIAGONAL = "diagonal"
    BATCH_EXACT = "batch_exact"
    BATCH_DIAGONAL = "batch_diagonal"


@dataclass(frozen=True)
class GradientSet:
    """Per-example gradients at one iteration, as rows of an (N, N_p) array."""

    iteration: int
    vectors: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeError(f"gradient array must be 2-d (N, N_p), got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("gradient set contains non-finite entries")
        object.__setattr__(self, "vectors", v)

    @property
    def n_examples(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class GramSummary:
    """The Gram accumulator S in full or diagonal form.

    total is the (N_p, N_p) symmetric matrix for *_EXACT modes and the length
    N_p diagonal vector for *_DIAGONAL modes. contributing lists the example
    indices whose gradients were summed.
    """

    mode: GramMode
    total: np.ndarray
    contributing: tuple[int, ...]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.total) if self.total.ndim == 2 else self.total


@dataclass(frozen=True)
class GnqScore:
    example: int
    iteration: int
    value: float
    mode: GramMode
    range_ok: bool


def _psd_eig(s: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Eigendecomposition of symmetric PSD s with a relative cutoff.

    Returns (kept eigenvalues, kept eigenvectors, cutoff). Eigenvalues at or
    below cutoff = tol * max(eig, 0) count as zero.
    """
    w, v = np.linalg.eigh(s)
    cutoff = tol * max(float(w[-1]), 0.0)
    keep = w > cutoff
    return w[keep], v[:, keep], cutoff


def _pinv_quadform(w: np.ndarray, v: np.ndarray, g: np.ndarray) -> float:
    coeff = v.T @ g
    return float(np.sum(coeff**2 / w)) if w.size else 0.0


def _in_range(v: np.ndarray, g: np.ndarray, tol: float) -> bool:
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return True
    resid = g - v @ (v.T @ g) if v.size else g
    return float(np.linalg.norm(resid)) <= tol * gnorm


def gnq_exact(grads: GradientSet, j: int, tol: float = DEFAULT_TOL) -> GnqScore:
    """Exact uniqueness score of example j against all other examples.

    Builds S = sum_{k != j} g_k g_k^T explicitly and evaluates g_j^T S^+ g_j.
    An all-zero S with nonzero g_j yields value 0 with range_ok False.
    """
    if tol <= 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    if grads.n_examples < 2:
        raise InsufficientDataError("need at least 2 examples for a leave-one-out score")
    if not 0 <= j < grads.n_examples:
        raise ConfigurationError(f"example index {j} out of range")
    g = grads.vectors[j]
    others = np.delete(grads.vectors, j, axis=0)
    s = others.T @ others
    w, v, _ = _psd_eig(s, tol)
    value = _pinv_quadform(w, v, g)
    return GnqScore(
        example=j,
        iteration=grads.iteration,
        value=value,
        mode=GramMode.FULL_EXACT,
        range_ok=_in_range(v, g, tol),
    )


def gnq_all_exact(grads: GradientSet, tol: float = DEFAULT_TOL) -> list[GnqScore]:
    """Score every example from a single factorization of S_total.

    With q_j = g_j^T S_total^+ g_j, the leave-one-out score is
    q_j / (1 - q_j). In exact arithmetic q_j <= 1, and q_j = 1 exactly when
    dropping g_j loses rank or g_j lies outside the others' span; any j with
    |1 - q_j| < tol (or q_j outside [0, 1] by rounding) is recomputed with its
    own leave-one-out pseudoinverse.
    """
    if tol <= 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    if grads.n_examples < 2:
        raise InsufficientDataError("need at least 2 examples for leave-one-out scores")
    g = grads.vectors
    s_total = g.T @ g
    w, v, _ = _psd_eig(s_total, tol)
    in_span = v @ (v.T @ g.T)  # (N_p, N) projections onto range(S_total)
    gnorm = np.linalg.norm(g, axis=1)
    resid = np.linalg.norm(g.T - in_span, axis=0)
    range_ok_total = resid <= tol * gnorm
    if w.size:
        coeff = v.T @ g.T
        q = np.sum(coeff**2 / w[:, None], axis=0)
    else:
        q = np.zeros(grads.n_examples)

    trace = float(np.sum(gnorm**2))
    scores: list[GnqScore] = []
    for j in range(grads.n_examples):
        qj = float(q[j])
        if qj < 1.0 - tol and range_ok_total[j]:
            # No rank drop and g_j inside the shared span: the downdate is safe.
            scores.append(
                GnqScore(
                    example=j,
                    iteration=grads.iteration,
                    value=max(qj / (1.0 - qj), 0.0),
                    mode=GramMode.FULL_EXACT,
                    range_ok=True,
                )
            )
        elif gnorm[j] ** 2 <= 0.9 * trace:
            # Degenerate downdate: rebuild S by subtracting the rank-one term
            # (cheap) instead of re-summing; safe while g_j is not so dominant
            # that the subtraction cancels catastrophically.
            s = s_total - np.outer(g[j], g[j])
            wj, vj, _ = _psd_eig(s, tol)
            scores.append(
                GnqScore(
                    example=j,
                    iteration=grads.iteration,
                    value=_pinv_quadform(wj, vj, g[j]),
                    mode=GramMode.FULL_EXACT,
                    range_ok=_in_range(vj, g[j], tol),
                )
            )
        else:
            scores.append(gnq_exact(grads, j, tol))
    return scores


def gnq_diagonal(
    summary: GramSummary,
    g_j: np.ndarray,
    *,
    example: int = -1,
    iteration: int = -1,
) -> GnqScore:
    """Diagonal surrogate: sum_p g_jp^2 / G_p over the Gram diagonal G.

    Coordinates where G_p = 0 contribute 0; if such a coordinate has
    g_jp != 0 the score is flagged range_ok False (the diagonal cannot see
    that direction). Whether G includes example j's own contribution is the
    caller's choice; the audit pipeline includes it, matching the ranking
    algorithm's approximate mode.
    """
    diag = summary.diagonal()
    g_j = np.asarray(g_j, dtype=np.float64)
    if g_j.shape != diag.shape:
        raise ShapeError(f"gradient shape {g_j.shape} does not match diagonal {diag.shape}")
    zero = diag == 0.0
    range_ok = bool(np.all(g_j[zero] == 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(zero, 0.0, g_j**2 / np.where(zero, 1.0, diag))
    mode = summary.mode if summary.mode in (GramMode.DIAGONAL, GramMode.BATCH_DIAGONAL) else GramMode.DIAGONAL
    return GnqScore(
        example=example,
        iteration=iteration,
        value=float(terms.sum()),
        mode=mode,
        range_ok=range_ok,
    )


def gnq_batch(batch_grads: GradientSet, j: int, tol: float = DEFAULT_TOL) -> GnqScore:
    """Exact score of batch member j against the other batch members only."""
    if batch_grads.n_examples < 2:
        raise InsufficientDataError(
            f"batch mode needs at least 2 batch members, got {batch_grads.n_examples}"
        )
    score = gnq_exact(batch_grads, j, tol)
    return replace(score, mode=GramMode.BATCH_EXACT)


def pdet_rank_one(pdet_a: float, a_pinv_quadform: float) -> float:
    """pdet(A + q q^T) from pdet(A) and q^T A^+ q, valid for q in range(A).

    The update leaves the rank unchanged and multiplies the product of nonzero
    eigenvalues by (1 + q^T A^+ q).
    """
    if pdet_a <= 0:
        raise ConfigurationError(f"pdet_a must be positive, got {pdet_a}")
    if a_pinv_quadform < 0:
        raise ConfigurationError(f"quadratic form must be nonnegative, got {a_pinv_quadform}")
    return pdet_a * (1.0 + a_pinv_quadform)


def pdet_and_rank(s: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[float, int]:
    """Pseudo-determinant (product of eigenvalues above the relative cutoff) and rank."""
    w, _, _ = _psd_eig(np.asarray(s, dtype=np.float64), tol)
    if w.size == 0:
        return 1.0, 0
    return float(np.prod(w)), int(w.size)


def leakage_growth_factor(x: float, c1_sq: float, c2_sq: float) -> float:
    """f(x) = (1 + c1^2 x) / sqrt(1 + c2^2 x); strictly increasing iff 2 c1^2 > c2^2."""
    if x < 0:
        raise ConfigurationError(f"x must be nonnegative, got {x}")
    if c1_sq <= 0 or c2_sq <= 0:
        raise ConfigurationError("c1_sq and c2_sq must be positive")
    return (1.0 + c1_sq * x) / np.sqrt(1.0 + c2_sq * x)


def full_gram(vectors: np.ndarray, contributing: tuple[int, ...], mode: GramMode) -> GramSummary:
    """Gram summary over the given rows, full matrix or diagonal per mode."""
    v = np.asarray(vectors, dtype=np.float64)
    if mode in (GramMode.FULL_EXACT, GramMode.BATCH_EXACT):
        total = v.T @ v
    else:
        total = np.sum(v**2, axis=0)
    return GramSummary(mode=mode, total=total, contributing=tuple(contributing))
