"""Hurst-type statistics and the block-mean-ratio screening score.

Three related but deliberately different statistics:

* ``rs_hurst`` — rescaled-range slope over nested dyadic windows; the
  daily-increment Hurst exponent.
* ``allan_variance`` / ``avar_hurst`` — half the mean squared difference of
  consecutive non-overlapping block means, and the estimator
  H_av = (1 + s)/2 from the log-log slope s of that statistic against block
  length. Under the IID null the slope is -1 and H_av sits at 0; for
  exactly self-similar noise with exponent H the block-mean variance scales
  as tau^(2H-2), so H_av converges to H - 1/2. H_av is reported raw here
  (possibly negative); clamping at zero happens only inside the score.
* ``fscore`` — ranks series by how strongly block-mean variance decays
  faster than 1/tau (mean reversion), with a tail-heaviness penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .data import Panel, TimeSeries

RS_CLIP = 1e-6
KURTOSIS_CUTOFF = 25.0


@dataclass(frozen=True)
class HurstEstimate:
    method: str  # RS | AVAR | COLLAPSE
    value: float
    points: Tuple[Tuple[float, float], ...]  # (log size, log statistic) pairs
    slope: float


@dataclass(frozen=True)
class FScoreRow:
    ticker: str
    rho: float
    h_av: float
    excess_kurtosis: float
    f: float
    eligible: bool = True

    def recompute_f(self) -> float:
        return -math.log10(self.rho) - max(0.0, self.h_av) - 0.05 * self.excess_kurtosis


def _dyadic_sizes(n: int) -> List[int]:
    """Dyadic window sizes from 16 up to n//4, extended to n//2 if fewer
    than 3 fit (short series such as rolling 252-day windows)."""
    for cap in (n // 4, n // 2):
        sizes = []
        size = 16
        while size <= cap:
            sizes.append(size)
            size *= 2
        if len(sizes) >= 3:
            return sizes
    return sizes


def rs_hurst(x: TimeSeries) -> HurstEstimate:
    """Rescaled-range Hurst estimate over nested dyadic windows.

    For each window size, the series is cut into non-overlapping blocks;
    each block contributes (range of mean-adjusted cumulative sums) / (block
    std), averaged across blocks. The estimate is the least-squares slope of
    log(R/S) against log(size), clipped into (0, 1).
    """
    if len(x) < 64:
        raise ValueError(f"series {x.id!r}: R/S needs length >= 64, got {len(x)}")
    sizes = _dyadic_sizes(len(x))
    v = x.values
    points = []
    for n in sizes:
        nblocks = len(v) // n
        blocks = v[: nblocks * n].reshape(nblocks, n)
        stds = blocks.std(axis=1)
        keep = stds > 0
        if not keep.any():
            continue  # all blocks constant at this size: drop the size
        dev = np.cumsum(blocks[keep] - blocks[keep].mean(axis=1, keepdims=True), axis=1)
        ranges = dev.max(axis=1) - dev.min(axis=1)
        rs = float(np.mean(ranges / stds[keep]))
        points.append((math.log(n), math.log(rs)))
    if len(points) < 3:
        raise ValueError(
            f"series {x.id!r}: fewer than 3 usable window sizes for the R/S fit"
        )
    logs = np.array(points)
    slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])
    value = float(np.clip(slope, RS_CLIP, 1.0 - RS_CLIP))
    return HurstEstimate(method="RS", value=value, points=tuple(map(tuple, points)), slope=slope)


def allan_variance(x: TimeSeries, tau: int) -> float:
    """0.5 * mean squared difference of consecutive non-overlapping
    tau-block means, using every consecutive block pair."""
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    nblocks = len(x) // tau
    if nblocks < 2:
        raise ValueError(
            f"series {x.id!r}: need at least 2 blocks of length {tau}, have {len(x)} samples"
        )
    means = x.values[: nblocks * tau].reshape(nblocks, tau).mean(axis=1)
    return float(0.5 * np.mean(np.diff(means) ** 2))


def avar_hurst(x: TimeSeries, taus: Sequence[int] = (21, 63, 252)) -> HurstEstimate:
    """H_av = (1 + s)/2 from the log-log slope s of AVAR(tau) vs tau.

    The value is returned unclamped and may be <= 0 (anti-persistent
    block-mean decay); see the module docstring for the convention.
    """
    taus = sorted(taus)
    minimum = 2 * taus[-1]
    if len(x) < minimum:
        raise ValueError(
            f"series {x.id!r}: length {len(x)} < required minimum {minimum} (2*max tau)"
        )
    points = [(math.log(t), math.log(allan_variance(x, t))) for t in taus]
    logs = np.array(points)
    slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])
    return HurstEstimate(
        method="AVAR", value=0.5 * (1.0 + slope), points=tuple(map(tuple, points)), slope=slope
    )


def excess_kurtosis(x: TimeSeries) -> float:
    """m4/m2^2 - 3 with population moments."""
    if len(x) < 4:
        raise ValueError(f"series {x.id!r}: kurtosis needs length >= 4")
    v = x.values - x.values.mean()
    m2 = np.mean(v**2)
    if m2 <= 0:
        raise ValueError(f"series {x.id!r}: zero variance")
    return float(np.mean(v**4) / m2**2 - 3.0)


def fscore(x: TimeSeries, tau_rho: int = 63) -> FScoreRow:
    """Screening score F = -log10(rho) - max(0, H_av) - 0.05 * kurtosis.

    rho = tau * AVAR(x, tau) / Var(x) equals 1 exactly in expectation under
    the IID null (population variance convention), so positive F rewards
    block-mean variance decaying faster than 1/tau. Rows with excess
    kurtosis above 25 are flagged ineligible rather than scored out.
    """
    if len(x) < 504:
        raise ValueError(f"series {x.id!r}: F-score needs length >= 504, got {len(x)}")
    var = float(x.values.var())
    if var <= 0:
        raise ValueError(f"series {x.id!r}: zero variance")
    rho = tau_rho * allan_variance(x, tau_rho) / var
    h_av = avar_hurst(x).value
    kurt = excess_kurtosis(x)
    f = -math.log10(rho) - max(0.0, h_av) - 0.05 * kurt
    return FScoreRow(
        ticker=x.id, rho=rho, h_av=h_av, excess_kurtosis=kurt, f=f,
        eligible=kurt <= KURTOSIS_CUTOFF,
    )


def rank_universe(panel: Panel, top_k: int) -> List[FScoreRow]:
    """Top-k tickers by descending F among kurtosis-eligible rows.

    Ties break on ticker name so the ordering is deterministic.
    """
    rows = [fscore(panel.series[t]) for t in panel.tickers()]
    eligible = [r for r in rows if r.eligible]
    if len(eligible) < top_k:
        excluded = [r.ticker for r in rows if not r.eligible]
        raise ValueError(
            f"only {len(eligible)} eligible tickers for top_k={top_k}; "
            f"kurtosis-filtered: {excluded}"
        )
    eligible.sort(key=lambda r: (-r.f, r.ticker))
    return eligible[:top_k]
