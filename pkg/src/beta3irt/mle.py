"""Maximum-likelihood fitting by mini-batch SGD on the log-loss.

Both families share one predictor, logistic(a * (x - y)): for Beta^3 the
coordinates x, y are the log-odds of ability and difficulty, which keeps
the fitted values inside (0, 1) without projection; for 2PL-ND they are the
raw ability and difficulty.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .core import Family, ModelParams, ResponseMatrix, expected_responses
from .errors import DomainError, IndexOutOfRange, LengthMismatch, NumericalFailure

# Log-odds are held inside this box so expit never rounds to exactly 0 or 1.
LOG_ODDS_LIMIT = 30.0


@dataclass(frozen=True)
class MleConfig:
    iterations: int = 2500
    batch_size: int = 2000
    lr_schedule: str = "inv_sqrt"  # "inv_sqrt": lr / sqrt(t); "constant": lr
    learning_rate: float = 0.5
    clip_epsilon: float = 1e-3
    seed: int = 0
    family: Family = Family.BETA3
    learn_discrimination: bool = True

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if not (0.0 < self.clip_epsilon < 0.1):
            raise DomainError("clip_epsilon must lie in (0, 0.1)")
        if self.lr_schedule not in ("inv_sqrt", "constant"):
            raise DomainError(f"unknown lr_schedule {self.lr_schedule!r}")
        if not (0 < self.learning_rate < np.inf):
            raise DomainError("learning_rate must be positive and finite")

    def step_size(self, t: int) -> float:
        if self.lr_schedule == "inv_sqrt":
            return self.learning_rate / np.sqrt(t)
        return self.learning_rate


@dataclass(frozen=True)
class CountInit:
    """Correct/incorrect answer counts per respondent and per item."""

    correct_per_respondent: np.ndarray
    incorrect_per_respondent: np.ndarray
    correct_per_item: np.ndarray
    incorrect_per_item: np.ndarray


def count_statistics(data: ResponseMatrix, threshold: float = 0.5) -> CountInit:
    """Count responses at or above ``threshold`` as correct.

    Zero counts are lifted to 1 so every induced Beta prior is proper.
    Observation weights act as multiplicities.
    """
    w = data.observation_weights
    correct = data.response >= threshold
    m = data.num_respondents
    n = data.num_items

    def lifted(idx, mask, size):
        c = np.bincount(idx, weights=w * mask, minlength=size)
        return np.maximum(c, 1.0)

    return CountInit(
        correct_per_respondent=lifted(data.respondent, correct, m),
        incorrect_per_respondent=lifted(data.respondent, ~correct, m),
        correct_per_item=lifted(data.item, correct, n),
        incorrect_per_item=lifted(data.item, ~correct, n),
    )


def initialize_params(counts: CountInit, cfg: MleConfig, rng: np.random.Generator) -> ModelParams:
    """Random starting point for SGD.

    Beta^3 abilities start at Beta(correct, incorrect) draws per respondent.
    Difficulties start at Beta(incorrect, correct) draws per item, so items
    that are answered correctly more often start easier. 2PL-ND abilities and
    difficulties start at N(0, 1). Discriminations start at N(1, 1).
    """
    m = counts.correct_per_respondent.size
    n = counts.correct_per_item.size
    if cfg.family is Family.BETA3:
        theta = rng.beta(counts.correct_per_respondent, counts.incorrect_per_respondent)
        delta = rng.beta(counts.incorrect_per_item, counts.correct_per_item)
        lo, hi = expit(-LOG_ODDS_LIMIT), expit(LOG_ODDS_LIMIT)
        theta = np.clip(theta, lo, hi)
        delta = np.clip(delta, lo, hi)
    else:
        theta = rng.normal(0.0, 1.0, size=m)
        delta = rng.normal(0.0, 1.0, size=n)
    a = rng.normal(1.0, 1.0, size=n)
    return ModelParams(cfg.family, theta, delta, a)


def log_loss(predicted, observed, weights=None) -> float:
    """Mean soft-label cross-entropy of predictions against responses in [0, 1]."""
    q = np.asarray(predicted, dtype=float)
    p = np.asarray(observed, dtype=float)
    if q.shape != p.shape:
        raise LengthMismatch(f"{q.size} predictions vs {p.size} observations")
    # 0 * log 0 is taken as 0.
    terms = -(np.where(p > 0, p * np.log(np.where(p > 0, q, 1.0)), 0.0)
              + np.where(p < 1, (1 - p) * np.log(np.where(p < 1, 1 - q, 1.0)), 0.0))
    if weights is None:
        return float(np.mean(terms))
    w = np.asarray(weights, dtype=float)
    return float(np.sum(w * terms) / np.sum(w))


def to_unconstrained(params: ModelParams):
    """(x, y, a) coordinates the optimizer works in."""
    if params.family is Family.BETA3:
        return logit(params.abilities), logit(params.difficulties), params.discriminations.copy()
    return params.abilities.copy(), params.difficulties.copy(), params.discriminations.copy()


def from_unconstrained(family: Family, x, y, a) -> ModelParams:
    if Family(family) is Family.BETA3:
        return ModelParams(family, expit(x), expit(y), a)
    return ModelParams(family, x, y, a)


def batch_loss_and_grad(x, y, a, respondent, item, response, weights, clip_epsilon):
    """Clipped log-loss of a batch and its gradient in (x, y, a).

    Predictions are logistic(a_j * (x_i - y_j)) clipped to
    [eps, 1 - eps]; clipped predictions contribute zero gradient.
    """
    aj = a[item]
    diff = x[respondent] - y[item]
    z = aj * diff
    q = expit(z)
    qc = np.clip(q, clip_epsilon, 1.0 - clip_epsilon)
    wsum = np.sum(weights)
    loss = log_loss(qc, response, weights)
    # d loss / d z for the unclipped region; q(1-q) cancels the 1/q, 1/(1-q).
    dz = weights * (q - response) / wsum
    dz = np.where((q > clip_epsilon) & (q < 1.0 - clip_epsilon), dz, 0.0)
    gx = np.bincount(respondent, weights=dz * aj, minlength=x.size)
    gy = -np.bincount(item, weights=dz * aj, minlength=y.size)
    ga = np.bincount(item, weights=dz * diff, minlength=a.size)
    return loss, gx, gy, ga


def fit_mle(data: ResponseMatrix, cfg: MleConfig = MleConfig(), init: ModelParams | None = None):
    """Fit point estimates by SGD; returns (params, per-iteration batch loss).

    Mini-batches are drawn without replacement from a permutation that is
    reshuffled at each epoch. ``init`` overrides the random start.
    """
    rng = np.random.default_rng(cfg.seed)
    if init is None:
        init = initialize_params(count_statistics(data), cfg, rng)
    elif init.family is not cfg.family:
        raise DomainError("init family does not match config family")
    x, y, a = to_unconstrained(init)
    bounded = cfg.family is Family.BETA3

    n = len(data)
    bsz = min(cfg.batch_size, n)
    w_all = data.observation_weights
    order = rng.permutation(n)
    pos = 0
    trace = np.empty(cfg.iterations)
    for t in range(1, cfg.iterations + 1):
        if pos + bsz > n:
            order = rng.permutation(n)
            pos = 0
        rows = order[pos:pos + bsz]
        pos += bsz
        loss, gx, gy, ga = batch_loss_and_grad(
            x, y, a, data.respondent[rows], data.item[rows], data.response[rows],
            w_all[rows], cfg.clip_epsilon,
        )
        trace[t - 1] = loss
        lr = cfg.step_size(t)
        x -= lr * gx
        y -= lr * gy
        if cfg.learn_discrimination:
            a -= lr * ga
        if bounded:
            np.clip(x, -LOG_ODDS_LIMIT, LOG_ODDS_LIMIT, out=x)
            np.clip(y, -LOG_ODDS_LIMIT, LOG_ODDS_LIMIT, out=y)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(a))):
        raise NumericalFailure("parameters diverged; try a smaller learning rate")
    return from_unconstrained(cfg.family, x, y, a), trace.tolist()


def predict(params: ModelParams, pairs) -> list[float]:
    """Expected response for each (respondent_index, item_index) pair."""
    pairs = list(pairs)
    if not pairs:
        return []
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    r, j = arr[:, 0], arr[:, 1]
    if r.min() < 0 or r.max() >= params.num_respondents:
        raise IndexOutOfRange("respondent index out of range")
    if j.min() < 0 or j.max() >= params.num_items:
        raise IndexOutOfRange("item index out of range")
    return expected_responses(params, r, j).tolist()


def holdout_log_loss(params: ModelParams, test: ResponseMatrix, clip_epsilon: float = 1e-3) -> float:
    """Clipped log-loss of a fitted model on held-out observations."""
    q = np.clip(expected_responses(params, test.respondent, test.item), clip_epsilon, 1 - clip_epsilon)
    return log_loss(q, test.response, test.weights)
