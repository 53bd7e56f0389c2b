import numpy as np
import pytest

from beta3irt.core import Family, ModelParams, ResponseMatrix
from beta3irt.errors import DomainError
from beta3irt.stats import spearman
from beta3irt.synth import GeneratorSpec, sample_dataset, sample_responses
from oracles import HALF_LOG_2PI_E, oracle_bounds, tiny_problem
from beta3irt.vi import (AdamSettings, LogitNormalQ, NormalQ, PosteriorSet, ViConfig, _Observations,
                         discrimination_kl, elbo_global, elbo_local, fit_vi, global_bound, global_phase,
                         local_bound, local_phase, posterior_point_estimates)

def test_bounds_match_oracle():
    data, q = tiny_problem()
    rng = np.random.default_rng(1)
    zt, zd, za = rng.standard_normal((50, 2)), rng.standard_normal((50, 2)), rng.standard_normal((50, 2))
    obs = _Observations(data, 1e-3)
    l1, l2 = oracle_bounds(data, q, zt, zd, za, 1.3)
    assert local_bound(obs, q, zt, zd, za, grad=False)[0] == pytest.approx(l1, rel=1e-12)
    assert global_bound(obs, q, zt, zd, za, 1.3, grad=False)[0] == pytest.approx(l2, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_mc_gradients_match_finite_differences(seed):
    data, q = tiny_problem(seed)
    rng = np.random.default_rng(100 + seed)
    S = 1000
    zt, zd, za = rng.standard_normal((S, 2)), rng.standard_normal((S, 2)), rng.standard_normal((S, 2))
    obs = _Observations(data, 1e-3)
    sigma0 = 1.0
    _, g1 = local_bound(obs, q, zt, zd, za)
    _, g2 = global_bound(obs, q, zt, zd, za, sigma0)
    h = 1e-5
    for which, grads in ((0, g1), (1, g2)):
        for key, g in grads.items():
            for k in range(g.size):
                base = np.array(getattr(q, key))
                up, down = base.copy(), base.copy()
                up[k] += h
                down[k] -= h
                f_up = oracle_bounds(data, PosteriorSet(**{**_fields(q), key: up}), zt, zd, za, sigma0)[which]
                f_dn = oracle_bounds(data, PosteriorSet(**{**_fields(q), key: down}), zt, zd, za, sigma0)[which]
                fd = (f_up - f_dn) / (2 * h)
                assert abs(fd - g[k]) <= 5e-3 * max(abs(fd), abs(g[k]), 1e-3), (key, k, fd, g[k])


def _fields(q):
    return {k: getattr(q, k) for k in ("ability_mu", "ability_log_sigma", "difficulty_mu",
                                       "difficulty_log_sigma", "discrimination_mu", "discrimination_log_sigma")}


def test_uniform_likelihood_and_zero_prior_term():
    data = ResponseMatrix(1, 1, [0], [0], [0.5])
    # Near point-mass q at theta = delta = 0.5, a = 1: Beta(1, 1) density is 1.
    q = PosteriorSet([0.0], [-30.0], [0.0], [-30.0], [1.0], [-30.0])
    obs = _Observations(data, 1e-3)
    z = np.zeros((1, 1))
    l1, _ = local_bound(obs, q, z, z, z, grad=False)
    entropy = 2 * (HALF_LOG_2PI_E - 30.0) + 2 * np.log(0.25)
    assert l1 - entropy == pytest.approx(0.0, abs=1e-12)


def test_kl_examples():
    assert discrimination_kl(1.0, np.log(1.0), 1.0) == 0.0
    assert discrimination_kl(1.0, np.log(2.0), 2.0) == pytest.approx(0.0, abs=1e-15)
    prior_terms = [discrimination_kl(-2.0, np.log(0.5), s0) for s0 in (0.5, 1.0, 2.0)]
    assert prior_terms[0] > prior_terms[1] > prior_terms[2] > 0


def test_mc_variance_shrinks_with_samples():
    data, q = tiny_problem()
    variances = []
    for S in (1, 5, 25):
        rng = np.random.default_rng(S)
        est = [elbo_local(data, q, rng, mc_samples=S) for _ in range(1000)]
        variances.append(np.var(est))
    for lo, hi in zip(variances, variances[1:]):
        assert 3.0 < lo / hi < 8.0


def test_global_estimate_is_finite():
    data, q = tiny_problem()
    assert np.isfinite(elbo_global(data, q, np.random.default_rng(0)))


# posterior summaries

def test_posterior_summaries():
    assert LogitNormalQ(0.0, 1.0).median() == 0.5
    assert LogitNormalQ(2.1972, 0.5).median() == pytest.approx(0.9, abs=1e-4)
    assert NormalQ(-0.4, 0.2).mean() == -0.4
    with pytest.raises(DomainError):
        LogitNormalQ(0.0, 0.0)


def test_samples_stay_inside_unit_interval():
    x = LogitNormalQ(3.0, 4.0).sample(np.random.default_rng(0), 10_000)
    assert np.all((x > 0) & (x < 1))


def test_point_estimates():
    q = PosteriorSet([0.0, np.log(9)], [0, 0], [0.0], [0.0], [-0.4], [0.0])
    p = posterior_point_estimates(q)
    assert p.family is Family.BETA3
    assert p.abilities.tolist() == pytest.approx([0.5, 0.9])
    assert p.discriminations.tolist() == [-0.4]


def test_config_validation():
    with pytest.raises(DomainError):
        ViConfig(mc_samples=0)
    with pytest.raises(DomainError):
        ViConfig(sigma0=0)
    assert ViConfig(adam={"step_size": 0.1}).adam == AdamSettings(step_size=0.1)


# phases and fits

def test_frozen_blocks_are_bitwise_unchanged():
    data, _ = sample_dataset(GeneratorSpec(M=4, N=6, seed=0))
    q = PosteriorSet.initial(4, 6, np.random.default_rng(0))
    cfg = ViConfig(inner_max_steps=30)
    after_local, _ = local_phase(data, q, cfg, np.random.default_rng(1))
    assert np.array_equal(after_local.discrimination_mu, q.discrimination_mu)
    assert np.array_equal(after_local.discrimination_log_sigma, q.discrimination_log_sigma)
    assert not np.array_equal(after_local.ability_mu, q.ability_mu)
    after_global, _ = global_phase(data, after_local, cfg, np.random.default_rng(2))
    for key in ("ability_mu", "ability_log_sigma", "difficulty_mu", "difficulty_log_sigma"):
        assert np.array_equal(getattr(after_global, key), getattr(after_local, key))
    assert not np.array_equal(after_global.discrimination_mu, after_local.discrimination_mu)


def test_single_global_step_variant():
    data, _ = sample_dataset(GeneratorSpec(M=3, N=4, seed=0))
    q = fit_vi(data, ViConfig(outer_iterations=2, inner_max_steps=20, single_global_step=True))
    assert sum(1 for row in q.step_trace if row[1] == "global") == 2


def test_fit_is_deterministic():
    data, _ = sample_dataset(GeneratorSpec(M=5, N=10, seed=2))
    cfg = ViConfig(outer_iterations=2, inner_max_steps=40, seed=9)
    a, b = fit_vi(data, cfg), fit_vi(data, cfg)
    assert a.elbo_trace == b.elbo_trace
    assert np.array_equal(a.discrimination_mu, b.discrimination_mu)
    assert len(a.elbo_trace) == 2


def test_inner_loop_improves_smoothed_bound():
    data, _ = sample_dataset(GeneratorSpec(M=6, N=20, seed=4))
    total = good = 0
    for seed in range(10):
        q = fit_vi(data, ViConfig(outer_iterations=3, inner_max_steps=150, seed=seed))
        for t in range(3):
            values = [row[3] for row in q.step_trace if row[0] == t and row[1] == "local"]
            total += 1
            good += np.mean(values[-10:]) >= np.mean(values[:10])
    assert good / total >= 0.95


def test_recovers_difficulty_ranking():
    # Difficulty is unidentified as a -> 0, so items are drawn discriminating.
    rng = np.random.default_rng(3)
    M, N = 12, 400
    truth = ModelParams(Family.BETA3, rng.beta(1, 1, M), rng.beta(1, 1, N), rng.normal(1, 0.5, N))
    r, j = np.divmod(np.arange(M * N), N)
    data = ResponseMatrix(M, N, r, j, sample_responses(truth, r, j, rng))
    q = fit_vi(data, ViConfig(seed=0))
    est = posterior_point_estimates(q)
    assert spearman(est.difficulties, truth.difficulties) >= 0.7


def test_no_negative_discriminations_without_noise():
    rng = np.random.default_rng(5)
    M, N = 12, 200
    truth = ModelParams(Family.BETA3, rng.beta(1, 1, M), rng.beta(1, 1, N), np.ones(N))
    r, j = np.divmod(np.arange(M * N), N)
    data = ResponseMatrix(M, N, r, j, sample_responses(truth, r, j, rng))
    q = fit_vi(data, ViConfig(seed=0))
    assert np.mean(q.discrimination_mu < 0) < 0.02
