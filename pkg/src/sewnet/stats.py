"""Evaluation statistics: calibration, tails, bootstrap, paired tests.

The Wilcoxon test is exact (conditional on the observed tie pattern) for
any n via a subset-sum count over doubled ranks; the protocol here never
exceeds n = 25, where the exact distribution is cheap and the normal
approximation would be the wrong tool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    method: str

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError("p-value outside [0, 1]")


def ks_distance(cdf: Callable[[np.ndarray], np.ndarray], targets: np.ndarray) -> float:
    """Sup deviation of the PIT empirical CDF from uniform.

    ``cdf`` evaluates the predictive CDF at the targets (vectorised); a
    calibrated forecaster gives uniform PIT values and a small statistic.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size < 20:
        raise ValueError(f"need at least 20 targets, got {targets.size}")
    u = np.sort(np.clip(np.asarray(cdf(targets), dtype=np.float64), 0.0, 1.0))
    n = len(u)
    grid = np.arange(1, n + 1) / n
    return float(max((grid - u).max(), (u - (grid - 1.0 / n)).max()))


def energy_distance(x: np.ndarray, y: np.ndarray) -> float:
    """2 E|X-Y| - E|X-X'| - E|Y-Y'| with V-statistic estimators."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cross = np.abs(x[:, None] - y[None, :]).mean()
    within_x = np.abs(x[:, None] - x[None, :]).mean()
    within_y = np.abs(y[:, None] - y[None, :]).mean()
    return float(2.0 * cross - within_x - within_y)


def tail_energy_distance(
    model_samples: np.ndarray, test_targets: np.ndarray, sigma: float
) -> Optional[float]:
    """Energy distance restricted to |r| > 2*sigma on both sides.

    Returns None (undefined, not zero) when either tail subset is empty.
    """
    cut = 2.0 * sigma
    xs = np.asarray(model_samples, dtype=np.float64)
    ys = np.asarray(test_targets, dtype=np.float64)
    xt = xs[np.abs(xs) > cut]
    yt = ys[np.abs(ys) > cut]
    if xt.size == 0 or yt.size == 0:
        return None
    return energy_distance(xt, yt)


def block_bootstrap_ci(
    losses: np.ndarray,
    block_len: int = 21,
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> Tuple[float, float]:
    """Percentile CI of the mean from a circular block bootstrap.

    Contiguous blocks survive the resampling, so serial dependence in the
    per-observation losses is respected.
    """
    losses = np.asarray(losses, dtype=np.float64)
    n = len(losses)
    if n < 2 * block_len:
        raise ValueError(f"need at least {2 * block_len} losses, got {n}")
    rng = np.random.default_rng(seed)
    n_blocks = -(-n // block_len)  # ceil
    starts = rng.integers(0, n, size=(resamples, n_blocks))
    idx = (starts[:, :, None] + np.arange(block_len)[None, None, :]) % n
    means = losses[idx.reshape(resamples, -1)[:, :n]].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def _wilcoxon_counts(double_ranks: np.ndarray) -> np.ndarray:
    """counts[s] = number of sign assignments with doubled rank sum s."""
    total = int(double_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in double_ranks:
        r = int(r)
        counts[r:] += counts[: total + 1 - r]
    return counts


def wilcoxon_signed_rank(deltas: Sequence[float]) -> TestResult:
    """Two-sided exact signed-rank test on paired differences.

    Zeros are dropped; ties get average ranks (doubled to keep the exact
    subset-sum lattice on integers). The p-value is 2 * min(P(W <= w),
    P(W >= w)) under the exact null, capped at 1.
    """
    d = np.asarray(deltas, dtype=np.float64)
    d = d[d != 0.0]
    n = len(d)
    if n < 5:
        raise ValueError(f"need at least 5 nonzero deltas, got {n}")
    ranks = rankdata(np.abs(d))
    double_ranks = np.round(2.0 * ranks).astype(np.int64)
    w_double = int(np.round(double_ranks[d > 0].sum()))
    counts = _wilcoxon_counts(double_ranks)
    total = counts.sum()  # 2^n
    p_le = counts[: w_double + 1].sum() / total
    p_ge = counts[w_double:].sum() / total
    p = min(1.0, 2.0 * min(p_le, p_ge))
    return TestResult(statistic=w_double / 2.0, p_value=float(p), n=n,
                      method="wilcoxon-signed-rank-exact")


def holm_bonferroni(
    p_values: Sequence[float], alpha: float = 0.05
) -> Tuple[List[float], List[bool]]:
    """Step-down adjusted p-values and rejection flags at level alpha."""
    p = np.asarray(p_values, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adjusted[idx] = min(1.0, running)
    reject = adjusted <= alpha
    return adjusted.tolist(), reject.tolist()
