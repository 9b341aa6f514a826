"""One-level 4-tap Daubechies DWT with periodic boundary, plus its inverse.

Periodic wrap keeps the analysis operator exactly orthonormal, so energy
preservation and perfect reconstruction are testable at float precision.
The inverse exists for test scaffolding; the forward feeds the network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .data import TimeSeries

_SQRT3 = np.sqrt(3.0)
# Analysis low-pass: unique (up to reflection) 4-tap filter with orthonormal
# even shifts and two vanishing moments.
DB4_LOWPASS = np.array([1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3]) / (4.0 * np.sqrt(2.0))
# Quadrature mirror high-pass: g[k] = (-1)^k h[K-1-k]
DB4_HIGHPASS = np.array([DB4_LOWPASS[3], -DB4_LOWPASS[2], DB4_LOWPASS[1], -DB4_LOWPASS[0]])


@dataclass(frozen=True)
class DWTPair:
    """Half-length approximation and detail channels of one series."""

    approx: np.ndarray
    detail: np.ndarray
    boundary: str = "periodic"
    padded: bool = False
    id: str = ""

    def __post_init__(self):
        if self.approx.shape != self.detail.shape:
            raise ValueError("approx/detail length mismatch")


def _series_values(x: Union[TimeSeries, np.ndarray]) -> tuple[np.ndarray, str]:
    if isinstance(x, TimeSeries):
        return x.values, x.id
    return np.asarray(x, dtype=np.float64), ""


def _analysis_indices(n: int) -> np.ndarray:
    m = n // 2
    return (2 * np.arange(m)[:, None] + np.arange(4)[None, :]) % n


def dwt_db4(x: Union[TimeSeries, np.ndarray]) -> DWTPair:
    """Single-level periodic DWT. Odd inputs get one periodic pad sample."""
    values, name = _series_values(x)
    if len(values) < 4:
        raise ValueError(f"need at least 4 samples, got {len(values)}")
    padded = len(values) % 2 == 1
    if padded:
        values = np.concatenate([values, values[:1]])
    idx = _analysis_indices(len(values))
    windows = values[idx]
    return DWTPair(
        approx=windows @ DB4_LOWPASS,
        detail=windows @ DB4_HIGHPASS,
        padded=padded,
        id=name,
    )


def idwt_db4(pair: DWTPair) -> TimeSeries:
    """Synthesis transpose of the analysis transform (exact inverse)."""
    m = len(pair.approx)
    n = 2 * m
    x = np.zeros(n)
    idx = _analysis_indices(n)
    for k in range(4):
        np.add.at(x, idx[:, k], DB4_LOWPASS[k] * pair.approx + DB4_HIGHPASS[k] * pair.detail)
    if pair.padded:
        x = x[:-1]
    return TimeSeries(id=pair.id or "idwt", values=x)


def dwt_batch(x: np.ndarray) -> np.ndarray:
    """DWT each row of a (B, N) batch into a (B, 2, N//2) channel stack.

    Used as the network front end; N must be even (window lengths are).
    """
    if x.ndim != 2 or x.shape[1] % 2 or x.shape[1] < 4:
        raise ValueError(f"need a (B, even N>=4) batch, got {x.shape}")
    windows = x[:, _analysis_indices(x.shape[1])]
    return np.stack([windows @ DB4_LOWPASS, windows @ DB4_HIGHPASS], axis=1)
