"""Loss-threshold attack and attack-vs-uniqueness evaluation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnqaudit import (
    ConfigurationError,
    Dataset,
    GramMode,
    ModelKind,
    ModelSpec,
    SamplingConfig,
    loss_attack,
    rank_auc,
    success_vs_gnq,
    train,
)
from gnqaudit.attack import AttackResult
from gnqaudit.training import AuditCadence, AuditRecord
from oracles import ref_auc


def fake_record(gnq):
    gnq = np.asarray(gnq, dtype=np.float64)
    return AuditRecord(
        mode=GramMode.FULL_EXACT,
        cadence=AuditCadence.FINAL_ONLY,
        audited_iterations=(1,),
        scores={},
        cumulative_gnq=gnq,
        bounds=(),
        batch_sources={},
        tol=1e-10,
    )


def fake_attack(success):
    success = np.asarray(success, dtype=np.uint8)
    return AttackResult(
        per_example_score=success.astype(np.float64),
        per_example_success=success,
        membership=success,
        auc=0.5,
        threshold=0.0,
    )


# rank-based AUC -------------------------------------------------------------------


def test_auc_perfect_separation():
    assert rank_auc(np.array([3.0, 2.0, 1.0]), np.array([1, 1, 0])) == 1.0


def test_auc_reversed_separation():
    assert rank_auc(np.array([1.0, 2.0, 3.0]), np.array([1, 1, 0])) == 0.0


def test_auc_constant_scores_is_half():
    assert rank_auc(np.ones(6), np.array([1, 0, 1, 0, 1, 0])) == 0.5


def test_auc_single_class_rejected():
    with pytest.raises(ConfigurationError, match="AUC"):
        rank_auc(np.array([1.0, 2.0]), np.array([1, 1]))


def test_auc_matches_pairwise_reference():
    rng = np.random.default_rng(13)
    for _ in range(30):
        n = int(rng.integers(4, 40))
        scores = rng.choice([0.0, 0.5, 1.0, 2.0, 3.0], size=n)
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        assert rank_auc(scores, labels) == pytest.approx(ref_auc(scores, labels), abs=1e-12)


def test_auc_random_scores_near_half():
    rng = np.random.default_rng(99)
    scores = rng.normal(size=500)
    labels = rng.integers(0, 2, size=500)
    assert abs(rank_auc(scores, labels) - 0.5) < 0.1


def test_auc_negation_flips():
    rng = np.random.default_rng(5)
    scores = rng.normal(size=50)
    labels = rng.integers(0, 2, size=50)
    labels[0], labels[1] = 0, 1
    assert rank_auc(-scores, labels) == pytest.approx(1.0 - rank_auc(scores, labels), abs=1e-12)


@settings(deadline=None, max_examples=60)
@given(
    # quantized so distinct scores stay distinct after the affine/exp maps
    st.lists(st.floats(-50, 50).map(lambda v: round(v, 3)), min_size=4, max_size=30),
    st.integers(0, 2**32 - 1),
)
def test_auc_invariant_under_monotone_transform(vals, seed):
    scores = np.asarray(vals)
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=scores.size)
    labels[0], labels[1] = 0, 1
    base = rank_auc(scores, labels)
    assert rank_auc(3.0 * scores + 7.0, labels) == pytest.approx(base, abs=1e-12)
    assert rank_auc(np.exp(scores / 50.0), labels) == pytest.approx(base, abs=1e-12)


# loss attack ----------------------------------------------------------------------


def run_small_attack(seed=3):
    spec = ModelSpec(kind=ModelKind.LINEAR2D, input_dim=1)
    rng = np.random.default_rng(seed)
    feats = rng.uniform(0.0, 2.0, size=(8, 1))
    targs = feats[:, 0] + rng.normal(0.0, 0.2, size=8)
    cfg = SamplingConfig(n_total=8, n_train=4, batch_size=2, n_iters=10, learning_rate=0.1, seed=seed)
    traj = train(cfg, spec, Dataset(name="s", features=feats, targets=targs))
    ds = Dataset(name="s", features=feats, targets=targs, membership=traj.train_indicator)
    return spec, traj, ds


def test_loss_attack_requires_membership():
    spec, traj, ds = run_small_attack()
    bare = Dataset(name="s", features=ds.features, targets=ds.targets)
    with pytest.raises(ConfigurationError, match="membership"):
        loss_attack(spec, traj.final_params, bare)


def test_loss_attack_shapes_and_success_definition():
    spec, traj, ds = run_small_attack()
    res = loss_attack(spec, traj.final_params, ds)
    assert res.per_example_score.shape == (8,)
    assert set(np.unique(res.per_example_success)) <= {0, 1}
    predicted = res.per_example_score >= res.threshold
    assert np.array_equal(res.per_example_success, (predicted == ds.membership.astype(bool)).astype(np.uint8))
    assert 0.0 <= res.auc <= 1.0


def test_loss_attack_perfectly_separable_scores():
    # members fit exactly, non-members sit far off the line: the oracle
    # threshold then classifies everyone correctly
    spec = ModelSpec(kind=ModelKind.LINEAR2D, input_dim=1)
    feats = np.array([[0.0], [1.0], [2.0], [3.0]])
    targs = np.array([0.0, 1.0, 12.0, 13.0])
    member = np.array([1, 1, 0, 0], dtype=np.uint8)
    ds = Dataset(name="sep", features=feats, targets=targs, membership=member)
    params = np.array([1.0, 0.0])  # zero loss on the two members
    res = loss_attack(spec, params, ds)
    assert res.auc == 1.0
    assert np.all(res.per_example_success == 1)


# success-vs-uniqueness curve ------------------------------------------------------


def test_curve_bin_counts_cover_everyone():
    gnq = np.array([0.0, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    success = np.array([0, 1, 0, 0, 1, 1, 1, 1])
    curve = success_vs_gnq(fake_attack(success), fake_record(gnq), 3)
    assert curve.zero_count == 2
    assert curve.bin_counts.sum() == 6
    assert curve.total_count == 8
    assert curve.zero_mean_success == pytest.approx(0.5)


def test_curve_max_value_lands_in_last_bin():
    gnq = np.array([1.0, 2.0, 4.0, 8.0])
    curve = success_vs_gnq(fake_attack([0, 0, 1, 1]), fake_record(gnq), 2)
    assert curve.bin_counts[-1] >= 1
    assert curve.bin_counts.sum() == 4


def test_curve_spearman_tracks_median_split():
    gnq = np.linspace(0.1, 10.0, 40)
    success = (gnq > np.median(gnq)).astype(int)
    curve = success_vs_gnq(fake_attack(success), fake_record(gnq), 4)
    assert curve.spearman > 0.8


def test_curve_spearman_negative_for_anti_correlation():
    gnq = np.linspace(0.1, 10.0, 40)
    success = (gnq < np.median(gnq)).astype(int)
    curve = success_vs_gnq(fake_attack(success), fake_record(gnq), 4)
    assert curve.spearman < -0.8


def test_curve_degenerate_uniqueness_rejected():
    with pytest.raises(ConfigurationError, match="degenerate"):
        success_vs_gnq(fake_attack([0, 1, 0]), fake_record([2.0, 2.0, 2.0]), 2)


def test_curve_too_few_bins_rejected():
    with pytest.raises(ConfigurationError, match="n_bins"):
        success_vs_gnq(fake_attack([0, 1]), fake_record([1.0, 2.0]), 1)


def test_curve_shape_mismatch_rejected():
    with pytest.raises(ConfigurationError):
        success_vs_gnq(fake_attack([0, 1, 0]), fake_record([1.0, 2.0]), 2)
