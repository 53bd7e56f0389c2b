import numpy as np
import pytest
from hypothesis import given, strategies as st

from beta3irt.core import Family, ResponseMatrix
from beta3irt.errors import DomainError, InsufficientData
from beta3irt.evaluation import (HoldoutPlan, ability_noise_scan, classifier_metrics, compare_models,
                                 flag_noisy_items, holdout_seeds, noise_flagging, odds_ratio,
                                 stratified_holdout)
from beta3irt.mle import MleConfig
from beta3irt.stats import spearman
from beta3irt.synth import ClassifierResponseSet, GeneratorSpec, sample_dataset, simulate_classifier_panel
from beta3irt.vi import PosteriorSet, ViConfig


def _rows(m: ResponseMatrix):
    return sorted(zip(m.respondent.tolist(), m.item.tolist(), m.response.tolist()))


# holdout

def test_ten_observations_split_nine_one():
    data = ResponseMatrix.from_dense(np.full((3, 10), 0.5))
    for train, test in stratified_holdout(data, HoldoutPlan(repetitions=3)):
        assert np.bincount(train.respondent).tolist() == [9, 9, 9]
        assert np.bincount(test.respondent).tolist() == [1, 1, 1]


@given(st.integers(0, 2**31), st.floats(0.3, 1.0))
def test_partition_and_coverage(seed, density):
    data, _ = sample_dataset(GeneratorSpec(M=6, N=8, observation_density=density, responses_per_pair=2, seed=seed))
    for train, test in stratified_holdout(data, HoldoutPlan(repetitions=2, seed=seed)):
        assert sorted(_rows(train) + _rows(test)) == _rows(data)
        assert len(train) + len(test) == len(data)
        assert np.bincount(train.respondent, minlength=6).min() >= 1
        assert np.bincount(train.item, minlength=8).min() >= 1
        assert len(test) >= 1


def test_item_only_in_test_share_is_moved_to_train():
    # Items 2..9 are seen once each, by respondent 0, so whichever lands in
    # that respondent's 10% test share must be moved back.
    r = [0] * 10 + [1] * 12
    j = list(range(10)) + [0, 1, 10, 11] * 3
    data = ResponseMatrix(2, 12, r, j, np.full(22, 0.5))
    moved = 0
    for train, test in stratified_holdout(data, HoldoutPlan(repetitions=20)):
        assert np.bincount(train.item, minlength=12).min() >= 1
        moved += np.sum(test.respondent == 0) == 0
    assert moved > 0


def test_single_observations_raise():
    data = ResponseMatrix(1, 1, [0], [0], [0.5])
    with pytest.raises(InsufficientData):
        stratified_holdout(data, HoldoutPlan(repetitions=1))


def test_plan_validation_and_seeds():
    with pytest.raises(DomainError):
        HoldoutPlan(repetitions=0)
    with pytest.raises(DomainError):
        HoldoutPlan(train_fraction=1.0)
    assert holdout_seeds(HoldoutPlan(repetitions=4)) == holdout_seeds(HoldoutPlan(repetitions=4))
    assert len(set(holdout_seeds(HoldoutPlan(repetitions=30)))) == 30


# comparison

def test_model_against_itself_has_no_effect():
    data, _ = sample_dataset(GeneratorSpec(M=8, N=10, seed=0))
    cfg = MleConfig(iterations=50, batch_size=40)
    row = compare_models(data, HoldoutPlan(repetitions=6), cfg, cfg, name="self")
    assert row.p_value == 1.0 and row.mean_a == row.mean_b
    assert not row.significant and not row.a_wins
    assert len(row.losses_a) == 6


def test_compare_reports_finite_summaries():
    data, _ = sample_dataset(GeneratorSpec(M=8, N=10, seed=1))
    cfg = MleConfig(iterations=60, batch_size=40)
    row = compare_models(data, HoldoutPlan(repetitions=5), cfg,
                         MleConfig(iterations=60, batch_size=40, family=Family.TWOPL_ND), name="d")
    assert row.dataset == "d"
    assert np.isfinite([row.mean_a, row.std_a, row.mean_b, row.std_b, row.p_value]).all()


# classifier metrics

def _panel(p1_rows, labels):
    p1 = np.asarray(p1_rows, dtype=float)
    return ClassifierResponseSet(np.stack([1 - p1, p1], axis=2), labels)


def test_metric_examples():
    labels = np.array([0, 1] * 50)
    panel = _panel([labels.astype(float), np.full(100, 0.5), np.ones(100)], labels)
    rep = classifier_metrics(panel, [0.9, 0.5, 0.2])
    perfect, const, pos = rep.rows
    assert (perfect.accuracy, perfect.f1, perfect.brier, perfect.auc) == (1.0, 1.0, 0.0, 1.0)
    assert (const.accuracy, const.brier, const.auc, const.avg_response) == (0.5, 0.25, 0.5, 0.5)
    assert pos.f1 == pytest.approx(2 / 3)
    assert perfect.log_loss == pytest.approx(-np.log(1 - 1e-15))
    assert rep.column("ability").tolist() == [0.9, 0.5, 0.2]


def test_metrics_against_sklearn_style_formulas():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 2, 200)
    p1 = rng.random((1, 200))
    m = classifier_metrics(_panel(p1, labels), [0.5]).rows[0]
    pred = p1[0] >= 0.5
    y = labels == 1
    assert m.brier == pytest.approx(np.mean((p1[0] - y) ** 2))
    pc = np.where(y, p1[0], 1 - p1[0])
    assert m.log_loss == pytest.approx(-np.mean(np.log(pc)))
    tp = np.sum(pred & y)
    assert m.f1 == pytest.approx(2 * tp / (2 * tp + np.sum(pred & ~y) + np.sum(~pred & y)))


def test_undefined_auc_is_nan_and_skipped_in_correlations():
    panel = _panel([[0.2, 0.9, 0.4], [0.3, 0.6, 0.8], [0.9, 0.1, 0.7]], [1, 1, 1])
    rep = classifier_metrics(panel, [0.1, 0.5, 0.9])
    assert np.isnan(rep.column("auc")).all()
    mat = rep.spearman_matrix()
    assert np.isnan(mat[-1, -1])
    assert mat[1, 1] == 1.0


def test_metrics_reject_multiclass():
    panel = simulate_classifier_panel(30, K=3, seed=0)
    with pytest.raises(DomainError):
        classifier_metrics(panel, np.full(12, 0.5))


def test_spearman_examples():
    x = np.array([0.5, 1.0, 2.0, 3.5])
    assert spearman(x, x ** 2) == 1.0
    assert spearman(x, x[::-1]) == -1.0


@given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=30, unique=True))
def test_spearman_is_invariant_under_monotone_maps(xs):
    x = np.array(xs, dtype=float)
    y = np.sin(np.arange(x.size))
    assert spearman(x ** 3 + x, y) == pytest.approx(spearman(x, y), abs=1e-12)
    assert spearman(x, np.arctan(y)) == pytest.approx(spearman(x, y), abs=1e-12)


# noise flagging

def _posteriors(a_mu):
    n = len(a_mu)
    return PosteriorSet([0.0], [0.0], np.zeros(n), np.zeros(n), a_mu, np.zeros(n))


def test_flagging_examples():
    assert flag_noisy_items(_posteriors(np.ones(5))) == []
    flagged = flag_noisy_items(_posteriors([0.3, -0.2, -1.5, 2.0]))
    assert flagged == [(2, -1.5), (1, -0.2)]
    everything = flag_noisy_items(_posteriors([0.3, -0.2, 2.0]), threshold=np.inf)
    assert [j for j, _ in everything] == [1, 0, 2]
    assert flag_noisy_items(_posteriors([0.3, -0.2]), threshold=-np.inf) == []


def test_odds_ratio():
    flagged = [True] * 6 + [False] * 14
    truth = [True] * 4 + [False] * 2 + [True] * 2 + [False] * 12
    assert odds_ratio(flagged, truth) == pytest.approx((4 * 12) / (2 * 2))
    # empty cell triggers the 0.5 correction
    assert odds_ratio([True, False, False], [True, False, True]) == pytest.approx((1.5 * 1.5) / (0.5 * 1.5))


# ability scan

def test_zero_fraction_reproduces_clean_fit():
    from beta3irt.synth import to_response_matrix
    from beta3irt.vi import fit_vi, posterior_point_estimates
    panel = simulate_classifier_panel(40, seed=3)
    cfg = ViConfig(outer_iterations=2, inner_max_steps=30)
    rows = ability_noise_scan(panel, [0.0, 0.3], cfg)
    clean = posterior_point_estimates(fit_vi(to_response_matrix(panel), cfg)).abilities
    first = [r.ability for r in rows if r.fraction == 0.0]
    assert first == clean.tolist()
    acc0 = np.mean([r.accuracy for r in rows if r.fraction == 0.0][:9])
    acc3 = np.mean([r.accuracy for r in rows if r.fraction == 0.3][:9])
    assert acc3 < acc0
    with pytest.raises(DomainError):
        ability_noise_scan(panel, [1.0], cfg)


def test_training_block_enters_the_fit():
    from beta3irt.synth import joint_response_matrix, simulate_train_test_panels
    from beta3irt.vi import fit_vi, posterior_point_estimates
    train, test = simulate_train_test_panels(30, 20, seed=1)
    cfg = ViConfig(outer_iterations=2, inner_max_steps=30)
    rows = ability_noise_scan(test, [0.0], cfg, train=train)
    joint = posterior_point_estimates(fit_vi(joint_response_matrix(test, train), cfg)).abilities
    assert [r.ability for r in rows] == joint.tolist()


def test_noise_flagging_scores_test_items_only():
    from beta3irt.synth import simulate_train_test_panels
    train, test = simulate_train_test_panels(30, 20, seed=1)
    report = noise_flagging(test, 0.25, ViConfig(outer_iterations=2, inner_max_steps=30), noise_seed=5, train=train)
    assert report.flagged.shape == report.flipped.shape == (20,)
    assert report.flipped.sum() == 5
    assert report.posteriors.discrimination_mu.size == 50
    assert np.array_equal(report.flagged, report.posteriors.discrimination_mu[30:] < 0)
    assert report.flagged_noisy + report.flagged_clean == report.flagged.sum()
    assert report.odds_ratio == odds_ratio(report.flagged, report.flipped)
