"""Two-level inclusion sampling for mini-batch SGD and its closed-form moments.

Membership is modeled by two layers of indicators over a public pool of N
examples: a training indicator T_n selecting the n_train-point training set,
and a per-iteration batch indicator M_in with P[M_in = 1 | T_n = 1] = B/n_train.
An example contributes to the iteration-i gradient iff T_n * M_in = 1, so the
realized batch size is random with mean B.

Two training-set schemes are supported:

* without_replacement: the training set is a uniformly random size-n_train
  subset of the pool, so popcount(t) = n_train exactly and the T_n are
  exchangeable but dependent.
* independent_bernoulli: each T_n ~ Bernoulli(n_train / n_total) i.i.d., the
  model under which the product indicators of distinct examples are exactly
  independent.

`indicator_moments` returns the closed-form variances of T_n M_in
(unconditional and conditional on another example's membership T_j) plus the
asymptotic variance ratio

    kappa = (N / n_train) * (1 - B/n_train) / (1 - B/N),

which is the large-N limit of V[M_ij | T_j = 1] / V[T_n M_in | T_j = 1] and is
exact at finite N under the independent_bernoulli scheme.
`enumerate_exact_moments` recomputes all of these (and the pairwise cross
covariances the closed forms neglect) by exhaustive enumeration over all 3^N
joint indicator states; it is the oracle the formulas are tested against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, ConfigurationError

# Enumeration over joint (t, m) states is 3^N; 14 keeps the state count under
# five million and the digit table under ~70 MB.
ENUMERATION_MAX_N = 14

# Substream tags keep the training draw, batch draws, model init, and data
# generation on disjoint streams of one base seed.
_TRAIN_TAG = 1
_BATCH_TAG = 2
_INIT_TAG = 3
_DATA_TAG = 4
_SPLIT_TAG = 5


class SamplingScheme(enum.Enum):
    WITHOUT_REPLACEMENT = "without_replacement"
    INDEPENDENT_BERNOULLI = "independent_bernoulli"


def stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *path).

    Each (seed, path) pair owns an independent stream, so draws are
    reproducible regardless of the order in which callers ask for them.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *path])))


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling and optimization parameters; governs everything stochastic.

    Attributes:
        n_total: pool size N.
        n_train: training-set size (or Bernoulli mean size) n_train.
        batch_size: expected mini-batch size B.
        n_iters: number of SGD iterations.
        learning_rate: step size, must be positive.
        scheme: training-set sampling scheme.
        seed: base seed for every stream derived from this config.
    """

    n_total: int
    n_train: int
    batch_size: int
    n_iters: int
    learning_rate: float
    scheme: SamplingScheme = SamplingScheme.WITHOUT_REPLACEMENT
    seed: int = 0

    def __post_init__(self) -> None:
        if not (1 <= self.batch_size <= self.n_train <= self.n_total):
            raise ConfigurationError(
                "need 1 <= batch_size <= n_train <= n_total, got "
                f"B={self.batch_size}, n_train={self.n_train}, n_total={self.n_total}"
            )
        if self.n_iters < 1:
            raise ConfigurationError(f"n_iters must be >= 1, got {self.n_iters}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigurationError(
                f"learning_rate must be positive and finite, got {self.learning_rate}"
            )
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigurationError(f"seed must fit in u64, got {self.seed}")

    @property
    def membership_prior(self) -> float:
        return self.n_train / self.n_total

    def to_json_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_train": self.n_train,
            "batch_size": self.batch_size,
            "n_iters": self.n_iters,
            "learning_rate": self.learning_rate,
            "scheme": self.scheme.value,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SamplingConfig":
        try:
            scheme = SamplingScheme(obj.get("scheme", "without_replacement"))
        except ValueError as exc:
            raise ConfigurationError(f"unknown sampling scheme: {obj.get('scheme')!r}") from exc
        try:
            return cls(
                n_total=int(obj["n_total"]),
                n_train=int(obj["n_train"]),
                batch_size=int(obj["batch_size"]),
                n_iters=int(obj["n_iters"]),
                learning_rate=float(obj["learning_rate"]),
                scheme=scheme,
                seed=int(obj.get("seed", 0)),
            )
        except KeyError as exc:
            raise ConfigurationError(f"sampling config missing key: {exc}") from exc


@dataclass(frozen=True)
class IndicatorDraw:
    """One iteration's indicator realization.

    t[n] is the training indicator, m[n] the batch indicator; an example is in
    the realized batch iff t[n] * m[n] = 1. m is only ever set where t is set.
    """

    t: np.ndarray
    m: np.ndarray

    @property
    def effective_batch(self) -> int:
        return int((self.t * self.m).sum())

    @property
    def batch_indices(self) -> np.ndarray:
        return np.flatnonzero(self.t * self.m)


@dataclass(frozen=True)
class IndicatorMoments:
    """Closed-form indicator variances and the asymptotic variance ratio kappa.

    All quantities refer to the product indicator Z_n = T_n M_in of a fixed
    other example n != j, except var_self_given_in which is V[M_ij | T_j = 1]
    for the conditioned example itself.
    """

    var_unconditional: float
    var_given_out: float
    var_given_in: float
    var_self_given_in: float
    kappa: float


def train_indicator(cfg: SamplingConfig) -> np.ndarray:
    """Training membership t, keyed by cfg.seed alone (fixed across iterations)."""
    rng = stream(cfg.seed, _TRAIN_TAG)
    t = np.zeros(cfg.n_total, dtype=np.uint8)
    if cfg.scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        chosen = rng.choice(cfg.n_total, size=cfg.n_train, replace=False)
        t[chosen] = 1
    else:
        t[rng.random(cfg.n_total) < cfg.n_train / cfg.n_total] = 1
    return t


def draw_indicators(cfg: SamplingConfig, iteration: int) -> IndicatorDraw:
    """Draw the iteration's indicators.

    The training indicator depends only on cfg.seed, so every iteration of one
    run shares it; the batch indicator stream is keyed by (seed, iteration),
    so draws for distinct iterations can be produced in any order and still
    match a sequential run bit for bit.
    """
    if iteration < 0:
        raise ConfigurationError(f"iteration must be >= 0, got {iteration}")
    t = train_indicator(cfg)
    rng = stream(cfg.seed, _BATCH_TAG, iteration)
    # Bernoulli(B / n_train) per training member; B = n_train forces m = t.
    u = rng.random(cfg.n_total)
    m = np.where(t == 1, (u < cfg.batch_size / cfg.n_train).astype(np.uint8), 0).astype(np.uint8)
    return IndicatorDraw(t=t, m=m)


def indicator_moments(cfg: SamplingConfig) -> IndicatorMoments:
    """Closed-form variances of the product indicators, per scheme.

    Under without_replacement, for n != j:

        V[Z_n]            = (B/N)(1 - B/N)
        V[Z_n | T_j = 0]  = p0 (1 - p0),  p0 = B/(N-1)
        V[Z_n | T_j = 1]  = p1 (1 - p1),  p1 = (B/(N-1)) * ((n_train-1)/n_train)
        V[M_ij | T_j = 1] = (B/n_train)(1 - B/n_train)

    each a Bernoulli variance at the corresponding conditional inclusion
    probability. Under independent_bernoulli, conditioning on T_j changes
    nothing for n != j, so both conditional variances equal the unconditional
    one. The conditional-on-T_j values are meaningful only when both T_j
    outcomes have positive probability, i.e. n_train < n_total.
    """
    n = cfg.n_total
    nt = cfg.n_train
    b = cfg.batch_size
    p = b / n
    var_unconditional = p * (1.0 - p)
    var_self = (b / nt) * (1.0 - b / nt)
    if cfg.scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        if n > 1:
            # T_j = 0 is a null event when n_train = n_total; report the
            # unconditional law instead of evaluating an undefined formula.
            p0 = b / (n - 1) if nt < n else p
            p1 = (b / (n - 1)) * ((nt - 1) / nt)
        else:
            p0 = p1 = 0.0
        var_given_out = p0 * (1.0 - p0)
        var_given_in = p1 * (1.0 - p1)
    else:
        var_given_out = var_unconditional
        var_given_in = var_unconditional
    kappa = (n / nt) * (1.0 - b / nt) / (1.0 - b / n) if b < n else 0.0
    return IndicatorMoments(
        var_unconditional=var_unconditional,
        var_given_out=var_given_out,
        var_given_in=var_given_in,
        var_self_given_in=var_self,
        kappa=kappa,
    )


@dataclass(frozen=True)
class ExactMomentTable:
    """Exhaustive-enumeration moments of Z_n = T_n M_in, conditioned on example j.

    Arrays are indexed by example. The conditional arrays hold, at position j
    itself, the self terms: var_given_in[j] = V[M_ij | T_j = 1] and
    var_given_out[j] = 0 (an excluded example is never batched).
    cov_unconditional is the full N x N covariance matrix of Z with the
    variances on its diagonal.
    """

    j: int
    var_unconditional: np.ndarray
    var_given_out: np.ndarray
    var_given_in: np.ndarray
    cov_unconditional: np.ndarray

    @property
    def var_self_given_in(self) -> float:
        return float(self.var_given_in[self.j])


@lru_cache(maxsize=4)
def _digit_table(n: int) -> np.ndarray:
    """All 3^n joint states as base-3 digit rows: 0 out, 1 in-train, 2 batched."""
    codes = np.arange(3**n, dtype=np.int64)
    digits = np.empty((3**n, n), dtype=np.int8)
    for pos in range(n):
        digits[:, pos] = codes % 3
        codes //= 3
    return digits


def _state_probabilities(cfg: SamplingConfig, digits: np.ndarray) -> np.ndarray:
    """Exact probability of every joint indicator state under cfg's scheme."""
    n, nt, b = cfg.n_total, cfg.n_train, cfg.batch_size
    n_in = (digits >= 1).sum(axis=1, dtype=np.int64)
    n_batched = (digits == 2).sum(axis=1, dtype=np.int64)
    n_unbatched = n_in - n_batched
    pb = b / nt
    if cfg.scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        base = np.where(n_in == nt, 1.0 / math.comb(n, nt), 0.0)
    else:
        pt = nt / n
        base = pt**n_in * (1.0 - pt) ** (n - n_in)
    # 0.0 ** 0 == 1.0 covers the pb = 1 edge (batch always equals training set).
    return base * pb**n_batched * (1.0 - pb) ** n_unbatched


def _weighted_moments(
    digits: np.ndarray, weights: np.ndarray, chunk: int = 1 << 18
) -> tuple[np.ndarray, np.ndarray]:
    """First and second moments of the batched indicator under given weights.

    Returns (mean vector E[Z], raw second-moment matrix E[Z Z^T]). Chunked so
    the float64 expansion of the digit table never exceeds ~30 MB.
    """
    n = digits.shape[1]
    mean = np.zeros(n)
    second = np.zeros((n, n))
    for start in range(0, digits.shape[0], chunk):
        z = (digits[start : start + chunk] == 2).astype(np.float64)
        w = weights[start : start + chunk]
        mean += w @ z
        second += z.T @ (z * w[:, None])
    return mean, second


def enumerate_exact_moments(cfg: SamplingConfig, j: int) -> ExactMomentTable:
    """Exact indicator moments by exhaustive enumeration; oracle for the formulas.

    Sums over all 3^N joint (t, m) assignments with their exact probabilities.
    Accumulation is float64 over probability-weighted 0/1 indicators with
    pairwise reduction, which keeps the result within ~1e-14 of exact; the
    closed-form agreement tests run at 1e-12.

    Args:
        cfg: sampling configuration with n_total <= ENUMERATION_MAX_N.
        j: example whose membership is conditioned on.

    Raises:
        CapacityError: n_total too large to enumerate.
        ConfigurationError: j out of range, or conditioning degenerate
            (n_train = n_total leaves T_j = 0 with probability zero).
    """
    if cfg.n_total > ENUMERATION_MAX_N:
        raise CapacityError(
            f"exact enumeration needs n_total <= {ENUMERATION_MAX_N}, got {cfg.n_total}"
        )
    if not 0 <= j < cfg.n_total:
        raise ConfigurationError(f"conditioning index {j} out of range for N={cfg.n_total}")
    if cfg.n_train == cfg.n_total:
        raise ConfigurationError(
            "conditional moments need n_train < n_total; T_j = 0 is impossible otherwise"
        )
    digits = _digit_table(cfg.n_total)
    probs = _state_probabilities(cfg, digits)

    mean, second = _weighted_moments(digits, probs)
    cov = second - np.outer(mean, mean)

    cond = {}
    for label, mask in (("out", digits[:, j] == 0), ("in", digits[:, j] >= 1)):
        w = np.where(mask, probs, 0.0)
        total = w.sum()
        w = w / total
        cmean, csecond = _weighted_moments(digits, w)
        cond[label] = csecond.diagonal() - cmean**2
    return ExactMomentTable(
        j=j,
        var_unconditional=cov.diagonal().copy(),
        var_given_out=cond["out"],
        var_given_in=cond["in"],
        cov_unconditional=cov,
    )
