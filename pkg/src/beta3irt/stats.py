"""Rank statistics: Wilcoxon signed-rank test, Spearman correlation, AUC."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.stats import norm, rankdata

from .errors import DegenerateAUC, LengthMismatch, TooFewPairs, ZeroVariance

EXACT_MAX_N = 25


class WilcoxonResult(NamedTuple):
    statistic: float  # min(W+, W-)
    p_value: float
    w_plus: float
    w_minus: float
    n: int  # pairs left after discarding zero differences

    @property
    def signed_statistic(self) -> float:
        return self.w_plus - self.w_minus

    @property
    def no_effect(self) -> bool:
        return self.n == 0


def _exact_two_sided(ranks: np.ndarray, w_plus: float) -> float:
    """Exact two-sided p-value of W+ under random signs.

    Midranks are multiples of 1/2, so doubled ranks are integers and the
    null distribution is a subset-sum count.
    """
    r2 = np.rint(2 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in r2:
        counts[r:] = counts[r:] + counts[:total + 1 - r].copy()
    counts /= counts.sum()
    w2 = int(round(2 * w_plus))
    lower = counts[: w2 + 1].sum()
    upper = counts[w2:].sum()
    return float(min(1.0, 2.0 * min(lower, upper)))


def wilcoxon_signed_rank(paired_a, paired_b) -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test.

    Zero differences are discarded; tied magnitudes get midranks. The
    p-value is exact for up to 25 non-zero pairs and otherwise uses the
    tie-corrected normal approximation with continuity correction.
    """
    a = np.asarray(paired_a, dtype=float)
    b = np.asarray(paired_b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch("paired samples must have equal length")
    if a.size < 5:
        raise TooFewPairs(f"need at least 5 pairs, got {a.size}")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0.0, 0.0, 0)
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)
    if n <= EXACT_MAX_N:
        p = _exact_two_sided(ranks, w_plus)
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
        z = max(abs(w_plus - mean) - 0.5, 0.0) / np.sqrt(var)
        p = float(min(1.0, 2.0 * norm.sf(z)))
    return WilcoxonResult(stat, p, w_plus, w_minus, n)


def spearman(x, y) -> float:
    """Pearson correlation of midranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch("spearman needs equal-length inputs")
    if x.size < 2:
        raise ValueError("spearman needs at least 2 points")
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sxx = np.dot(rx, rx)
    syy = np.dot(ry, ry)
    if sxx == 0 or syy == 0:
        raise ZeroVariance("constant input has no rank correlation")
    # sqrt(s * s) == s exactly in IEEE arithmetic, so identical rankings give 1.0.
    return float(np.clip(np.dot(rx, ry) / np.sqrt(sxx * syy), -1.0, 1.0))


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Ties between a positive and a negative score count one half.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateAUC("AUC needs both classes present")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
