"""Fractional Gaussian noise synthesis and horizon aggregation.

fGn is the oracle process for everything downstream: it is exactly
self-similar, so estimator and collapse code can be checked against known
exponents. The sampler uses circulant embedding (exact, O(N log N)) with a
Durbin-Levinson fallback for the rare non-nonnegative embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels
from .data import TimeSeries


@dataclass(frozen=True)
class HurstExponent:
    value: float

    def __post_init__(self):
        if not (0.0 < self.value < 1.0):
            raise ValueError(f"Hurst exponent must lie in (0, 1), got {self.value}")


@dataclass(frozen=True)
class AggregateSeries:
    """Rolling horizon-T sums of an increment series."""

    T: int
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


HurstLike = Union[float, HurstExponent]


def _hurst_value(H: HurstLike) -> float:
    h = H.value if isinstance(H, HurstExponent) else float(H)
    if not (0.0 < h < 1.0):
        raise ValueError(f"Hurst exponent must lie in (0, 1), got {h}")
    return h


def fgn_autocov(H: HurstLike, k) -> np.ndarray:
    """Autocovariance of unit-variance fGn at integer lag(s) k >= 0.

    gamma(k) = 0.5 * (|k+1|^(2H) - 2|k|^(2H) + |k-1|^(2H)); gamma(0) = 1.
    """
    h = _hurst_value(H)
    karr = np.asarray(k, dtype=np.float64)
    if np.any(karr < 0):
        raise ValueError("lags must be nonnegative")
    two_h = 2.0 * h
    out = 0.5 * (
        np.abs(karr + 1.0) ** two_h
        - 2.0 * np.abs(karr) ** two_h
        + np.abs(karr - 1.0) ** two_h
    )
    return out if out.ndim else float(out)


def synth_fgn(H: HurstLike, N: int, seed: int = 0) -> TimeSeries:
    """Sample N points of exact unit-variance fGn, deterministic per seed.

    Circulant (Davies-Harte) embedding of the lag-0..N autocovariance; if the
    embedding eigenvalues dip negative, falls back to the O(N^2)
    Durbin-Levinson recursion, which always succeeds.
    """
    h = _hurst_value(H)
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    rng = np.random.default_rng(seed)
    gamma = fgn_autocov(h, np.arange(N + 1))
    M = 2 * N
    c = np.concatenate([gamma, gamma[-2:0:-1]])  # circulant first row, length 2N
    lam = np.fft.fft(c).real
    name = f"fgn_H{h:g}_N{N}_seed{seed}"
    if lam.min() < -1e-8 * lam.max():
        z = rng.standard_normal(N)
        values = kernels.hosking_fgn(gamma[:N], z)
        return TimeSeries(id=name, values=values)
    lam = np.clip(lam, 0.0, None)
    eta = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2.0)
    x = np.sqrt(2.0 / M) * np.fft.fft(np.sqrt(lam) * eta).real
    return TimeSeries(id=name, values=x[:N])


def aggregate(x: TimeSeries, T: int) -> AggregateSeries:
    """Causal rolling T-sum: s[t] = sum of x[t-T+1 .. t], length len(x)-T+1."""
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    if T > len(x):
        raise ValueError(f"horizon {T} exceeds series length {len(x)}")
    csum = np.concatenate([[0.0], np.cumsum(x.values)])
    return AggregateSeries(T=T, values=csum[T:] - csum[:-T])


def disjoint_aggregates(x: TimeSeries, T: int) -> np.ndarray:
    """Non-overlapping horizon-T sums, for use as independent-ish samples."""
    if T < 1 or T > len(x):
        raise ValueError(f"horizon {T} out of range for length {len(x)}")
    n = len(x) // T
    return x.values[: n * T].reshape(n, T).sum(axis=1)
