"""Experiment harness: holdout comparison, classifier metrics, noise analysis."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Family, ResponseMatrix
from .errors import DegenerateAUC, DomainError, InsufficientData, ZeroVariance
from .mle import MleConfig, fit_mle, holdout_log_loss
from .stats import auc, spearman, wilcoxon_signed_rank
from .synth import ClassifierResponseSet, inject_label_noise, joint_response_matrix
from .vi import PosteriorSet, ViConfig, fit_vi, posterior_point_estimates


@dataclass(frozen=True)
class HoldoutPlan:
    repetitions: int = 30
    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise DomainError("repetitions must be >= 1")
        if not (0.0 < self.train_fraction < 1.0):
            raise DomainError("train_fraction must lie in (0, 1)")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _split_once(data: ResponseMatrix, train_fraction: float, rng: np.random.Generator):
    n = len(data)
    in_train = np.zeros(n, dtype=bool)
    by_respondent = np.argsort(data.respondent, kind="stable")
    bounds = np.searchsorted(data.respondent[by_respondent], np.arange(data.num_respondents + 1))
    for i in range(data.num_respondents):
        rows = by_respondent[bounds[i]:bounds[i + 1]]
        rows = rows[rng.permutation(rows.size)]
        n_test = min(_round_half_up(rows.size * (1.0 - train_fraction)), rows.size - 1)
        in_train[rows[n_test:]] = True
    # Items left without a training observation get a fresh 90/10 split.
    covered = np.bincount(data.item[in_train], minlength=data.num_items) > 0
    for j in np.flatnonzero(~covered):
        rows = np.flatnonzero(data.item == j)
        rows = rows[rng.permutation(rows.size)]
        n_train = max(1, _round_half_up(rows.size * train_fraction))
        in_train[rows] = False
        in_train[rows[:n_train]] = True
    train_rows = np.flatnonzero(in_train)
    test_rows = np.flatnonzero(~in_train)
    if test_rows.size == 0:
        raise InsufficientData("too few observations for a non-empty test split")
    train = data.subset(train_rows)
    # Re-validates the coverage invariant on the training split.
    train = ResponseMatrix(data.num_respondents, data.num_items, train.respondent, train.item,
                           train.response, train.weights, data.respondent_ids, data.item_ids)
    return train, data.subset(test_rows)


def stratified_holdout(data: ResponseMatrix, plan: HoldoutPlan = HoldoutPlan()):
    """Repeated train/test splits stratified by respondent.

    Each respondent's observations are split by ``train_fraction``; any item
    that ends up absent from training has its own observations re-split so
    that training covers every respondent and item. A respondent with a
    single observation keeps it in training.
    """
    rng = np.random.default_rng(plan.seed)
    return [_split_once(data, plan.train_fraction, rng) for _ in range(plan.repetitions)]


def holdout_seeds(plan: HoldoutPlan) -> list[int]:
    """One fitting seed per repetition, shared by every model on that split."""
    ss = np.random.SeedSequence(plan.seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(plan.repetitions)]


@dataclass(frozen=True)
class ComparisonRow:
    dataset: str
    mean_a: float
    std_a: float
    mean_b: float
    std_b: float
    statistic: float
    p_value: float
    significant: bool
    losses_a: tuple = field(repr=False, default=())
    losses_b: tuple = field(repr=False, default=())

    @property
    def a_wins(self) -> bool:
        return self.significant and self.mean_a < self.mean_b


def compare_models(data: ResponseMatrix, plan: HoldoutPlan = HoldoutPlan(),
                   cfg_a: MleConfig = MleConfig(family=Family.BETA3),
                   cfg_b: MleConfig = MleConfig(family=Family.TWOPL_ND),
                   alpha: float = 0.05, name: str = "dataset") -> ComparisonRow:
    """Test log-loss of two fitted models over shared holdout splits.

    Parameters are re-drawn for every split from that split's seed; both
    models see the same seed. Significance uses the paired Wilcoxon test.
    """
    splits = stratified_holdout(data, plan)
    seeds = holdout_seeds(plan)
    la, lb = [], []
    for (train, test), seed in zip(splits, seeds):
        pa, _ = fit_mle(train, replace(cfg_a, seed=seed))
        pb, _ = fit_mle(train, replace(cfg_b, seed=seed))
        la.append(holdout_log_loss(pa, test, cfg_a.clip_epsilon))
        lb.append(holdout_log_loss(pb, test, cfg_b.clip_epsilon))
    if len(la) >= 5:
        w = wilcoxon_signed_rank(la, lb)
        stat, p = w.statistic, w.p_value
    else:
        stat, p = float("nan"), float("nan")
    return ComparisonRow(
        dataset=name,
        mean_a=float(np.mean(la)), std_a=float(np.std(la)),
        mean_b=float(np.mean(lb)), std_b=float(np.std(lb)),
        statistic=stat, p_value=p, significant=bool(p < alpha),
        losses_a=tuple(la), losses_b=tuple(lb),
    )


METRIC_NAMES = ("avg_response", "ability", "accuracy", "f1", "brier", "log_loss", "auc")


@dataclass(frozen=True)
class ClassifierMetrics:
    classifier: str
    avg_response: float
    ability: float
    accuracy: float
    f1: float
    brier: float
    log_loss: float
    auc: float  # NaN when undefined


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[ClassifierMetrics, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def spearman_matrix(self, names=METRIC_NAMES) -> np.ndarray:
        """Pairwise rank correlations over classifiers where both metrics are defined."""
        k = len(names)
        out = np.full((k, k), np.nan)
        cols = [self.column(n) for n in names]
        for i in range(k):
            for j in range(k):
                ok = np.isfinite(cols[i]) & np.isfinite(cols[j])
                try:
                    out[i, j] = spearman(cols[i][ok], cols[j][ok])
                except (ZeroVariance, ValueError):
                    pass
        return out


def classifier_metrics(c: ClassifierResponseSet, abilities, log_loss_epsilon: float = 1e-15) -> MetricsReport:
    """Per-classifier metrics for a binary panel alongside fitted abilities.

    Accuracy predicts the positive class when its probability is >= 0.5.
    """
    if c.num_classes != 2:
        raise DomainError("classifier metrics need a binary panel")
    abilities = np.asarray(abilities, dtype=float)
    y = c.labels == 1
    correct_p = c.correct_class_probs()
    rows = []
    for i, name in enumerate(c.classifier_ids):
        p1 = c.probs[i, :, 1]
        pred = p1 >= 0.5
        tp = np.sum(pred & y)
        fp = np.sum(pred & ~y)
        fn = np.sum(~pred & y)
        f1 = 2 * tp / (2 * tp + fp + fn) if tp > 0 else 0.0
        try:
            a = auc(p1, y)
        except DegenerateAUC:
            a = float("nan")
        pc = np.clip(correct_p[i], log_loss_epsilon, 1 - log_loss_epsilon)
        rows.append(ClassifierMetrics(
            classifier=name,
            avg_response=float(correct_p[i].mean()),
            ability=float(abilities[i]),
            accuracy=float(np.mean(pred == y)),
            f1=float(f1),
            brier=float(np.mean((p1 - y) ** 2)),
            log_loss=float(-np.mean(np.log(pc))),
            auc=a,
        ))
    return MetricsReport(tuple(rows))


def flag_noisy_items(posteriors: PosteriorSet, threshold: float = 0.0) -> list[tuple[int, float]]:
    """Items whose posterior-mean discrimination is below ``threshold``, most negative first."""
    mu = posteriors.discrimination_mu
    idx = np.flatnonzero(mu < threshold)
    idx = idx[np.argsort(mu[idx], kind="stable")]
    return [(int(j), float(mu[j])) for j in idx]


def odds_ratio(flagged, truth) -> float:
    """Odds ratio of the 2x2 flagged-vs-truth table.

    A 0.5 correction is added to every cell when any cell is empty.
    """
    flagged = np.asarray(flagged, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    tp = np.sum(flagged & truth)
    fp = np.sum(flagged & ~truth)
    fn = np.sum(~flagged & truth)
    tn = np.sum(~flagged & ~truth)
    cells = np.array([tp, fp, fn, tn], dtype=float)
    if np.any(cells == 0):
        cells += 0.5
    tp, fp, fn, tn = cells
    return float(tp * tn / (fp * fn))


@dataclass(frozen=True)
class NoiseFlagReport:
    """Flagging outcome on the test instances of a panel."""

    flagged: np.ndarray  # bool per test instance
    flipped: np.ndarray  # bool per test instance
    discrimination_mu: np.ndarray
    odds_ratio: float
    posteriors: PosteriorSet = field(repr=False)

    @property
    def flagged_noisy(self) -> int:
        return int(np.sum(self.flagged & self.flipped))

    @property
    def flagged_clean(self) -> int:
        return int(np.sum(self.flagged & ~self.flipped))

    @property
    def clean_flag_rate(self) -> float:
        clean = ~self.flipped
        return float(self.flagged[clean].mean()) if clean.any() else float("nan")


def noise_flagging(panel: ClassifierResponseSet, fraction: float, cfg: ViConfig = ViConfig(),
                   noise_seed: int = 0, train: ClassifierResponseSet | None = None,
                   threshold: float = 0.0) -> NoiseFlagReport:
    """Flip a fraction of the test labels, fit, and flag by negative discrimination.

    ``train`` adds the panel's responses on clean training instances to the
    fit; only test instances are flagged and scored.
    """
    labels, flipped = inject_label_noise(panel.labels, fraction, panel.num_classes, noise_seed)
    q = fit_vi(joint_response_matrix(panel.with_labels(labels), train), cfg)
    offset = 0 if train is None else train.num_instances
    mu = q.discrimination_mu[offset:]
    flagged = mu < threshold
    return NoiseFlagReport(flagged, flipped, mu, odds_ratio(flagged, flipped), q)


@dataclass(frozen=True)
class ScanRow:
    fraction: float
    classifier: str
    ability: float
    accuracy: float


def ability_noise_scan(panel: ClassifierResponseSet, fractions, cfg: ViConfig = ViConfig(),
                       noise_seed: int = 0, train: ClassifierResponseSet | None = None) -> list[ScanRow]:
    """Refit abilities after flipping each fraction of the panel's labels.

    Every fraction uses the same noise seed and VI seed, so the zero row
    reproduces the clean fit. ``train`` adds clean training responses to
    every fit; accuracy is measured on the (noisy) test labels.
    """
    rows = []
    for frac in fractions:
        if not (0.0 <= frac < 1.0):
            raise DomainError("noise fractions must lie in [0, 1)")
        labels, _ = inject_label_noise(panel.labels, frac, panel.num_classes, noise_seed)
        noisy = panel.with_labels(labels)
        q = fit_vi(joint_response_matrix(noisy, train), cfg)
        theta = posterior_point_estimates(q).abilities
        acc = (noisy.probs.argmax(axis=2) == labels).mean(axis=1)
        if noisy.num_classes == 2:
            acc = ((noisy.probs[:, :, 1] >= 0.5) == (labels == 1)).mean(axis=1)
        for i, name in enumerate(panel.classifier_ids):
            rows.append(ScanRow(float(frac), name, float(theta[i]), float(acc[i])))
    return rows
