import math

import numpy as np
import pytest
from scipy.special import expit

from beta3irt.core import Family, ModelParams, ResponseMatrix
from beta3irt.errors import DomainError, IndexOutOfRange, LengthMismatch
from beta3irt.mle import (CountInit, MleConfig, batch_loss_and_grad, count_statistics, fit_mle,
                          holdout_log_loss, initialize_params, log_loss, predict)
from beta3irt.synth import GeneratorSpec, sample_dataset, sample_responses
from oracles import oracle_loss, random_mle_config


@pytest.mark.parametrize("family", list(Family))
def test_gradient_matches_central_differences(family):
    rng = np.random.default_rng(7 if family is Family.BETA3 else 8)
    eps, h = 1e-3, 1e-5
    checked = 0
    while checked < 100:
        x, y, a, r, j, p, w = random_mle_config(rng, family)
        z = a[j] * (x[r] - y[j])
        q = expit(z)
        # Finite differences are meaningless across the clip kink.
        if np.any(np.abs(q - eps) < 1e-3) or np.any(np.abs(q - (1 - eps)) < 1e-3):
            continue
        _, gx, gy, ga = batch_loss_and_grad(x, y, a, r, j, p, w, eps)
        for vec, g in ((x, gx), (y, gy), (a, ga)):
            for k in range(vec.size):
                old = vec[k]
                vec[k] = old + h
                up = oracle_loss(family, x, y, a, r, j, p, w, eps)
                vec[k] = old - h
                down = oracle_loss(family, x, y, a, r, j, p, w, eps)
                vec[k] = old
                fd = (up - down) / (2 * h)
                scale = max(abs(fd), abs(g[k]), 1e-6)
                assert abs(fd - g[k]) / scale < 1e-4, (family, k, fd, g[k])
        checked += 1


def test_clipped_predictions_have_zero_gradient():
    x, y, a = np.array([5.0]), np.array([-5.0]), np.array([3.0])
    loss, gx, gy, ga = batch_loss_and_grad(x, y, a, np.array([0]), np.array([0]), np.array([0.2]),
                                           np.array([1.0]), 1e-3)
    assert gx[0] == gy[0] == ga[0] == 0.0
    assert loss == pytest.approx(-(0.2 * math.log(1 - 1e-3) + 0.8 * math.log(1e-3)))


# log-loss

def test_log_loss_examples():
    assert log_loss([0.5], [0.5]) == pytest.approx(math.log(2))
    assert log_loss([0.999], [1.0]) == pytest.approx(-math.log(0.999))
    grid = np.linspace(0.01, 0.99, 99)
    losses = [log_loss([g], [0.37]) for g in grid]
    assert grid[int(np.argmin(losses))] == pytest.approx(0.37)
    with pytest.raises(LengthMismatch):
        log_loss([0.5, 0.5], [1.0])


def test_log_loss_weights_act_as_multiplicities():
    assert log_loss([0.3, 0.8], [0.0, 1.0], [2, 1]) == pytest.approx(log_loss([0.3, 0.3, 0.8], [0, 0, 1]))


# counts and init

def test_count_statistics_examples():
    data = ResponseMatrix(2, 3, [0, 0, 0, 1, 1], [0, 1, 2, 0, 1], [1, 1, 0, 1, 1])
    c = count_statistics(data)
    assert (c.correct_per_respondent[0], c.incorrect_per_respondent[0]) == (2, 1)
    assert (c.correct_per_respondent[1], c.incorrect_per_respondent[1]) == (2, 1)  # lifted
    item = ResponseMatrix(2, 1, [0, 1], [0, 0], [0.9, 0.2])
    c = count_statistics(item)
    assert (c.correct_per_item[0], c.incorrect_per_item[0]) == (1, 1)


def test_init_is_deterministic_and_follows_counts():
    counts = CountInit(np.array([100.0] * 200), np.array([1.0] * 200), np.array([3.0]), np.array([1.0]))
    cfg = MleConfig()
    p1 = initialize_params(counts, cfg, np.random.default_rng(3))
    p2 = initialize_params(counts, cfg, np.random.default_rng(3))
    assert p1 == p2
    assert np.mean(p1.abilities > 0.9) > 0.95


def test_2plnd_init_is_standard_normal():
    counts = CountInit(np.ones(1000), np.ones(1000), np.ones(5), np.ones(5))
    p = initialize_params(counts, MleConfig(family=Family.TWOPL_ND), np.random.default_rng(0))
    assert abs(p.abilities.mean()) < 0.2
    assert p.family is Family.TWOPL_ND


def test_config_validation():
    with pytest.raises(DomainError):
        MleConfig(iterations=0)
    with pytest.raises(DomainError):
        MleConfig(clip_epsilon=0.2)
    assert MleConfig().step_size(4) == pytest.approx(0.25)
    assert MleConfig(lr_schedule="constant", learning_rate=0.1).step_size(100) == 0.1


# fitting

def test_fit_is_deterministic():
    data, _ = sample_dataset(GeneratorSpec(M=5, N=8, seed=1))
    cfg = MleConfig(iterations=200, batch_size=16, seed=4)
    p1, t1 = fit_mle(data, cfg)
    p2, t2 = fit_mle(data, cfg)
    assert p1 == p2
    assert np.array_equal(t1, t2)
    assert len(t1) == 200


def test_single_observation_at_half_puts_ability_on_difficulty():
    data = ResponseMatrix(1, 1, [0], [0], [0.5])
    cfg = MleConfig(iterations=2000, batch_size=1, learn_discrimination=False)
    init = ModelParams(Family.BETA3, [0.8], [0.3], [1.0])
    params, _ = fit_mle(data, cfg, init)
    assert params.discriminations[0] == 1.0
    assert params.abilities[0] == pytest.approx(params.difficulties[0], abs=1e-3)


@pytest.mark.parametrize("family", list(Family))
def test_loss_decreases_in_aggregate(family):
    data, _ = sample_dataset(GeneratorSpec(M=10, N=30, seed=2))
    for seed in range(10):
        _, trace = fit_mle(data, MleConfig(iterations=300, batch_size=100, seed=seed, family=family))
        epoch = len(data) // 100
        assert np.mean(trace[-epoch:]) <= trace[0]


def test_bounded_parameters_stay_inside_unit_interval():
    data = ResponseMatrix.from_dense(np.array([[1.0, 1.0], [0.0, 0.0]]))
    params, _ = fit_mle(data, MleConfig(iterations=3000, batch_size=4, lr_schedule="constant", learning_rate=5.0))
    for arr in (params.abilities, params.difficulties):
        assert np.all((arr > 0) & (arr < 1))


def test_recovery_ordering_on_separated_abilities():
    true_theta = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        N = 200
        truth = ModelParams(Family.BETA3, true_theta, rng.beta(1, 1, N), rng.normal(1, 1, N))
        r, j = np.divmod(np.arange(5 * N), N)
        data = ResponseMatrix(5, N, r, j, sample_responses(truth, r, j, rng))
        params, _ = fit_mle(data, MleConfig(seed=seed, iterations=1000))
        # Kendall tau is 1 exactly when the fitted order is the true order.
        wins += bool(np.all(np.diff(params.abilities) > 0))
    assert wins >= 9


# prediction

def test_predict_examples():
    b = ModelParams(Family.BETA3, [0.4], [0.4], [2.0])
    t = ModelParams(Family.TWOPL_ND, [1.3], [1.3], [2.0])
    assert predict(b, [(0, 0)]) == [0.5]
    assert predict(t, [(0, 0)]) == [0.5]
    assert predict(b, []) == []
    with pytest.raises(IndexOutOfRange):
        predict(b, [(1, 0)])
    with pytest.raises(IndexOutOfRange):
        predict(b, [(0, -1)])


def test_holdout_log_loss_clips_predictions():
    params = ModelParams(Family.TWOPL_ND, [50.0], [0.0], [1.0])
    test = ResponseMatrix(1, 1, [0], [0], [0.0])
    assert holdout_log_loss(params, test, 1e-3) == pytest.approx(-math.log(1e-3))
