"""Coordinate-ascent variational inference for the Beta^3 model.

Abilities and difficulties get logit-normal posteriors q(theta) =
logistic(N(mu, sigma^2)); discriminations get normal posteriors. The local
bound L1 is maximized over the ability/difficulty posteriors with the
discrimination posterior frozen, then the global bound L2 over the
discrimination posterior with the others frozen. Both bounds are estimated
with reparameterized Monte-Carlo draws and optimized with Adam using
gradients derived by hand below.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import betaln, digamma, expit

from .core import Family, ModelParams, ResponseMatrix
from .errors import DegenerateResponse, DomainError

_HALF_LOG_2PI_E = 0.5 * np.log(2.0 * np.pi * np.e)
# exp() of log-shapes beyond this would over/underflow.
_LOG_SHAPE_LIMIT = 700.0


@dataclass(frozen=True)
class LogitNormalQ:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")

    def median(self) -> float:
        return float(expit(self.mu))

    def sample(self, rng: np.random.Generator, size=None):
        return expit(self.mu + self.sigma * rng.standard_normal(size))


@dataclass(frozen=True)
class NormalQ:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")

    def mean(self) -> float:
        return float(self.mu)


@dataclass(frozen=True)
class AdamSettings:
    step_size: float = 0.05
    decay1: float = 0.9
    decay2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class ViConfig:
    outer_iterations: int = 10
    inner_max_steps: int = 500
    inner_tolerance: float = 1e-4
    window: int = 10
    mc_samples: int = 5
    adam: AdamSettings = field(default_factory=AdamSettings)
    sigma0: float = 1.0
    clip_epsilon: float = 1e-3
    seed: int = 0
    # Take one Adam step on the discrimination posterior per outer iteration
    # instead of running it to convergence.
    single_global_step: bool = False

    def __post_init__(self):
        for name in ("outer_iterations", "inner_max_steps", "mc_samples", "window"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")
        if self.inner_tolerance <= 0 or self.sigma0 <= 0:
            raise DomainError("inner_tolerance and sigma0 must be positive")
        if not (0.0 < self.clip_epsilon < 0.1):
            raise DomainError("clip_epsilon must lie in (0, 0.1)")
        if isinstance(self.adam, dict):
            object.__setattr__(self, "adam", AdamSettings(**self.adam))


@dataclass(frozen=True, eq=False)
class PosteriorSet:
    """Variational parameters, stored as (mu, log sigma) arrays.

    ``elbo_trace`` holds the smoothed (L1, L2) at the end of each outer
    iteration; ``step_trace`` holds (outer, phase, step, estimate) rows.
    """

    ability_mu: np.ndarray
    ability_log_sigma: np.ndarray
    difficulty_mu: np.ndarray
    difficulty_log_sigma: np.ndarray
    discrimination_mu: np.ndarray
    discrimination_log_sigma: np.ndarray
    elbo_trace: tuple = ()
    step_trace: tuple = ()

    def __post_init__(self):
        for name in ("ability_mu", "ability_log_sigma", "difficulty_mu", "difficulty_log_sigma",
                     "discrimination_mu", "discrimination_log_sigma"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.ability_mu.shape != self.ability_log_sigma.shape:
            raise DomainError("ability arrays differ in length")
        n = self.difficulty_mu.shape
        if not (self.difficulty_log_sigma.shape == self.discrimination_mu.shape
                == self.discrimination_log_sigma.shape == n):
            raise DomainError("item arrays differ in length")

    @property
    def num_respondents(self) -> int:
        return self.ability_mu.size

    @property
    def num_items(self) -> int:
        return self.difficulty_mu.size

    @property
    def ability_q(self) -> list[LogitNormalQ]:
        return [LogitNormalQ(m, s) for m, s in zip(self.ability_mu, np.exp(self.ability_log_sigma))]

    @property
    def difficulty_q(self) -> list[LogitNormalQ]:
        return [LogitNormalQ(m, s) for m, s in zip(self.difficulty_mu, np.exp(self.difficulty_log_sigma))]

    @property
    def discrimination_q(self) -> list[NormalQ]:
        return [NormalQ(m, s) for m, s in zip(self.discrimination_mu, np.exp(self.discrimination_log_sigma))]

    @classmethod
    def initial(cls, M: int, N: int, rng: np.random.Generator) -> "PosteriorSet":
        return cls(
            ability_mu=rng.normal(0.0, 0.1, size=M),
            ability_log_sigma=np.zeros(M),
            difficulty_mu=rng.normal(0.0, 0.1, size=N),
            difficulty_log_sigma=np.zeros(N),
            discrimination_mu=np.ones(N),
            discrimination_log_sigma=np.zeros(N),
        )


def posterior_point_estimates(q: PosteriorSet) -> ModelParams:
    """Logit-normal medians for ability/difficulty, normal means for discrimination."""
    theta = np.clip(expit(q.ability_mu), 1e-300, 1 - 1e-16)
    delta = np.clip(expit(q.difficulty_mu), 1e-300, 1 - 1e-16)
    return ModelParams(Family.BETA3, theta, delta, q.discrimination_mu)


class Adam:
    """Adam ascent on a dict of arrays."""

    def __init__(self, settings: AdamSettings):
        self.s = settings
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.s.decay1, self.s.decay2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            params[k] = params[k] + self.s.step_size * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.s.epsilon)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


class _Observations:
    """Clipped responses and their logs, precomputed once per fit."""

    def __init__(self, data: ResponseMatrix, clip_epsilon: float | None):
        p = data.response
        if clip_epsilon is not None:
            p = np.clip(p, clip_epsilon, 1.0 - clip_epsilon)
        elif np.any((p <= 0) | (p >= 1)):
            raise DegenerateResponse("responses on {0, 1} need clipping before VI")
        self.r = data.respondent
        self.j = data.item
        self.M = data.num_respondents
        self.N = data.num_items
        self.w = data.observation_weights
        self.log_p = np.log(p)
        self.log_1mp = np.log1p(-p)


def _likelihood(obs: _Observations, u, v, a, want):
    """Per-sample log-likelihood and its derivatives.

    u, v: (S, M), (S, N) logit-space draws of ability and difficulty;
    a: (S, N) discrimination draws. ``want`` selects the derivatives:
    "local" gives d/du (S, M) and d/dv (S, N); "global" gives d/da (S, N).
    """
    lt, l1t = _log_sigmoid(u), _log_sigmoid(-u)
    ld, l1d = _log_sigmoid(v), _log_sigmoid(-v)
    r, j = obs.r, obs.j
    aj = a[:, j]
    ra = lt[:, r] - ld[:, j]
    rb = l1t[:, r] - l1d[:, j]
    log_alpha = np.clip(aj * ra, -_LOG_SHAPE_LIMIT, _LOG_SHAPE_LIMIT)
    log_beta = np.clip(aj * rb, -_LOG_SHAPE_LIMIT, _LOG_SHAPE_LIMIT)
    alpha = np.exp(log_alpha)
    beta = np.exp(log_beta)
    ll = (alpha - 1.0) * obs.log_p + (beta - 1.0) * obs.log_1mp - betaln(alpha, beta)
    value = (ll * obs.w).sum(axis=1)
    if want is None:
        return value, None
    psi_ab = digamma(alpha + beta)
    # alpha * dll/dalpha and beta * dll/dbeta
    ga = alpha * (obs.log_p - digamma(alpha) + psi_ab) * obs.w
    gb = beta * (obs.log_1mp - digamma(beta) + psi_ab) * obs.w
    S = u.shape[0]
    if want == "local":
        theta = np.exp(lt)[:, r]
        delta = np.exp(ld)[:, j]
        du_obs = aj * (ga * (1.0 - theta) - gb * theta)
        dv_obs = aj * (-ga * (1.0 - delta) + gb * delta)
        du = np.stack([np.bincount(r, weights=du_obs[s], minlength=obs.M) for s in range(S)])
        dv = np.stack([np.bincount(j, weights=dv_obs[s], minlength=obs.N) for s in range(S)])
        return value, (du, dv)
    da_obs = ga * ra + gb * rb
    da = np.stack([np.bincount(j, weights=da_obs[s], minlength=obs.N) for s in range(S)])
    return value, da


def _logit_normal_entropy(log_sigma, x):
    """MC entropy of logit-normal q given logit-space draws x (S, K).

    H = H[normal] + E[log theta + log(1 - theta)] per variable.
    """
    jac = _log_sigmoid(x) + _log_sigmoid(-x)
    return np.sum(_HALF_LOG_2PI_E + log_sigma) + jac.mean(axis=0).sum()


def local_bound(obs: _Observations, q: PosteriorSet, z_theta, z_delta, z_a, grad: bool = True):
    """MC estimate of L1 and its gradient for common random numbers.

    The Beta(1, 1) priors contribute zero log-density, so L1 is the expected
    log-likelihood plus the logit-normal entropies.
    Returns (value, {"ability_mu", "ability_log_sigma", "difficulty_mu",
    "difficulty_log_sigma"} -> gradient) or (value, None).
    """
    st = np.exp(q.ability_log_sigma)
    sd = np.exp(q.difficulty_log_sigma)
    sa = np.exp(q.discrimination_log_sigma)
    u = q.ability_mu + st * z_theta
    v = q.difficulty_mu + sd * z_delta
    a = q.discrimination_mu + sa * z_a
    ll, derivs = _likelihood(obs, u, v, a, "local" if grad else None)
    value = ll.mean() + _logit_normal_entropy(q.ability_log_sigma, u) + _logit_normal_entropy(q.difficulty_log_sigma, v)
    if not grad:
        return value, None
    du, dv = derivs
    # entropy Jacobian term: d/dx [log s(x) + log s(-x)] = 1 - 2 s(x)
    du = du + (1.0 - 2.0 * expit(u))
    dv = dv + (1.0 - 2.0 * expit(v))
    grads = {
        "ability_mu": du.mean(axis=0),
        "ability_log_sigma": (du * st * z_theta).mean(axis=0) + 1.0,
        "difficulty_mu": dv.mean(axis=0),
        "difficulty_log_sigma": (dv * sd * z_delta).mean(axis=0) + 1.0,
    }
    return value, grads


def discrimination_kl(mu, log_sigma, sigma0: float):
    """KL(N(mu, sigma^2) || N(1, sigma0^2)) per item."""
    s2 = np.exp(2.0 * log_sigma)
    return np.log(sigma0) - log_sigma + (s2 + (mu - 1.0) ** 2) / (2.0 * sigma0 ** 2) - 0.5


def global_bound(obs: _Observations, q: PosteriorSet, z_theta, z_delta, z_a, sigma0: float, grad: bool = True):
    """MC estimate of L2 and its gradient in the discrimination posterior.

    Expected log-likelihood over every observation, minus the analytic
    KL of q(a) from the N(1, sigma0^2) prior.
    """
    st = np.exp(q.ability_log_sigma)
    sd = np.exp(q.difficulty_log_sigma)
    sa = np.exp(q.discrimination_log_sigma)
    u = q.ability_mu + st * z_theta
    v = q.difficulty_mu + sd * z_delta
    a = q.discrimination_mu + sa * z_a
    ll, da = _likelihood(obs, u, v, a, "global" if grad else None)
    kl = discrimination_kl(q.discrimination_mu, q.discrimination_log_sigma, sigma0)
    value = ll.mean() - kl.sum()
    if not grad:
        return value, None
    grads = {
        "discrimination_mu": da.mean(axis=0) - (q.discrimination_mu - 1.0) / sigma0 ** 2,
        "discrimination_log_sigma": (da * sa * z_a).mean(axis=0) + 1.0 - sa ** 2 / sigma0 ** 2,
    }
    return value, grads


def _draws(rng, S, M, N):
    return rng.standard_normal((S, M)), rng.standard_normal((S, N)), rng.standard_normal((S, N))


def elbo_local(data: ResponseMatrix, q: PosteriorSet, rng: np.random.Generator,
               mc_samples: int = 5, clip_epsilon: float | None = 1e-3) -> float:
    obs = _Observations(data, clip_epsilon)
    zt, zd, za = _draws(rng, mc_samples, data.num_respondents, data.num_items)
    return float(local_bound(obs, q, zt, zd, za, grad=False)[0])


def elbo_global(data: ResponseMatrix, q: PosteriorSet, rng: np.random.Generator, sigma0: float = 1.0,
                mc_samples: int = 5, clip_epsilon: float | None = 1e-3) -> float:
    obs = _Observations(data, clip_epsilon)
    zt, zd, za = _draws(rng, mc_samples, data.num_respondents, data.num_items)
    return float(global_bound(obs, q, zt, zd, za, sigma0, grad=False)[0])


def _converged(history, window, tol) -> bool:
    if len(history) < 2 * window:
        return False
    now = np.mean(history[-window:])
    prev = np.mean(history[-2 * window:-window])
    return abs(now - prev) <= tol * abs(prev)


_LOCAL_KEYS = ("ability_mu", "ability_log_sigma", "difficulty_mu", "difficulty_log_sigma")
_GLOBAL_KEYS = ("discrimination_mu", "discrimination_log_sigma")


def _run_phase(obs, q, cfg: ViConfig, rng, phase: str, max_steps: int):
    keys = _LOCAL_KEYS if phase == "local" else _GLOBAL_KEYS
    params = {k: np.array(getattr(q, k)) for k in keys}
    opt = Adam(cfg.adam)
    history = []
    for _ in range(max_steps):
        cur = replace(q, **params)
        zt, zd, za = _draws(rng, cfg.mc_samples, obs.M, obs.N)
        if phase == "local":
            value, grads = local_bound(obs, cur, zt, zd, za)
        else:
            value, grads = global_bound(obs, cur, zt, zd, za, cfg.sigma0)
        history.append(float(value))
        opt.step(params, grads)
        if _converged(history, cfg.window, cfg.inner_tolerance):
            break
    return replace(q, **params), history


def local_phase(data: ResponseMatrix, q: PosteriorSet, cfg: ViConfig, rng: np.random.Generator):
    """Optimize the ability/difficulty posteriors with discriminations frozen."""
    obs = _Observations(data, cfg.clip_epsilon)
    return _run_phase(obs, q, cfg, rng, "local", cfg.inner_max_steps)


def global_phase(data: ResponseMatrix, q: PosteriorSet, cfg: ViConfig, rng: np.random.Generator):
    """Optimize the discrimination posteriors with abilities/difficulties frozen."""
    obs = _Observations(data, cfg.clip_epsilon)
    steps = 1 if cfg.single_global_step else cfg.inner_max_steps
    return _run_phase(obs, q, cfg, rng, "global", steps)


def _smoothed(history, window):
    return float(np.mean(history[-window:]))


def fit_vi(data: ResponseMatrix, cfg: ViConfig = ViConfig(), init: PosteriorSet | None = None) -> PosteriorSet:
    """Alternate local and global phases for ``cfg.outer_iterations`` rounds."""
    rng = np.random.default_rng(cfg.seed)
    q = init if init is not None else PosteriorSet.initial(data.num_respondents, data.num_items, rng)
    obs = _Observations(data, cfg.clip_epsilon)
    global_steps = 1 if cfg.single_global_step else cfg.inner_max_steps
    elbo_trace = []
    step_trace = []
    for t in range(cfg.outer_iterations):
        q, h1 = _run_phase(obs, q, cfg, rng, "local", cfg.inner_max_steps)
        q, h2 = _run_phase(obs, q, cfg, rng, "global", global_steps)
        step_trace.extend((t, "local", k, v) for k, v in enumerate(h1))
        step_trace.extend((t, "global", k, v) for k, v in enumerate(h2))
        elbo_trace.append((_smoothed(h1, cfg.window), _smoothed(h2, cfg.window)))
    return replace(q, elbo_trace=tuple(elbo_trace), step_trace=tuple(step_trace))
