"""Welch spectra, power-law slope fits, and the spectral-consistency loss.

Loss modes:

* ``welch`` — squared slope mismatch between the sample batch's spectrum
  and the target power law f^-(2H-1), plus a level-matched log-shape term.
  Differentiable: the analytic gradient w.r.t. the sample batch is returned,
  so a pathwise sampler can propagate it into model parameters.
* ``variance_surrogate`` — (Var(target batch) - 1)^2. Computed on data the
  model never produced, so by construction it carries no gradient through
  the model; it regularises nothing and documents the null ablation row.
* ``off`` — exactly 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .network import ModelConfig

DEFAULT_SEGMENT = 256
DEFAULT_OVERLAP = 0.5


@dataclass(frozen=True)
class SpectralFit:
    f: np.ndarray
    psd: np.ndarray
    band: Tuple[float, float]
    beta: float
    intercept: float
    beta_target: Optional[float] = None
    slope_term: Optional[float] = None
    shape_term: Optional[float] = None

    def __post_init__(self):
        if np.any(np.diff(self.f) <= 0) or self.f[0] <= 0 or self.f[-1] > 0.5 + 1e-12:
            raise ValueError("frequencies must be strictly increasing in (0, 0.5]")
        if np.any(self.psd < 0):
            raise ValueError("PSD must be nonnegative")
        if not np.isfinite(self.beta):
            raise ValueError("slope must be finite")


def _hann(m: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(m) / m)


def _segments(n: int, segment: int, overlap: float):
    step = max(1, int(round(segment * (1.0 - overlap))))
    return range(0, n - segment + 1, step)


def welch_psd(
    x: np.ndarray, segment: int = DEFAULT_SEGMENT, overlap: float = DEFAULT_OVERLAP
) -> Tuple[np.ndarray, np.ndarray]:
    """One-sided Welch PSD with Hann window and per-segment mean removal.

    Density normalisation at unit sampling rate: summing psd * df over the
    returned bins recovers the variance of zero-mean input (up to windowing
    leakage). Returns (f, psd) on bins f = 1/segment .. 1/2.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("welch_psd expects a 1-D sequence")
    if segment < 16:
        raise ValueError("segment must be >= 16")
    if len(x) < segment:
        raise ValueError(f"segment {segment} longer than sequence {len(x)}")
    win = _hann(segment)
    u = float(win @ win)
    acc = np.zeros(segment // 2 + 1)
    count = 0
    for start in _segments(len(x), segment, overlap):
        seg = x[start : start + segment]
        v = win * (seg - seg.mean())
        acc += np.abs(np.fft.rfft(v)) ** 2
        count += 1
    psd = acc / (count * u)
    psd[1:-1] *= 2.0  # one-sided doubling (not DC, not Nyquist)
    f = np.fft.rfftfreq(segment)
    return f[1:], psd[1:]


def spectral_slope(
    f: np.ndarray, psd: np.ndarray, band: Tuple[float, float]
) -> Tuple[float, float]:
    """Least-squares exponent of psd ~ f^-beta on the band.

    Returns (beta, intercept) from log psd = intercept - beta * log f, so
    red spectra give positive beta.
    """
    mask = (f >= band[0]) & (f <= band[1]) & (psd > 0)
    if mask.sum() < 5:
        raise ValueError(f"need >= 5 bins in band {band}, have {int(mask.sum())}")
    slope, intercept = np.polyfit(np.log(f[mask]), np.log(psd[mask]), 1)
    return float(-slope), float(intercept)


def default_band(segment: int) -> Tuple[float, float]:
    """Inertial band excluding DC-adjacent bins and the Nyquist shoulder."""
    return (4.0 / segment, 0.25)


def fit_spectrum(
    x: np.ndarray,
    segment: int = DEFAULT_SEGMENT,
    overlap: float = DEFAULT_OVERLAP,
    band: Optional[Tuple[float, float]] = None,
) -> SpectralFit:
    """Welch PSD plus its power-law fit, bundled for reporting."""
    f, psd = welch_psd(x, segment, overlap)
    band = band or default_band(segment)
    beta, intercept = spectral_slope(f, psd, band)
    return SpectralFit(f=f, psd=psd, band=band, beta=beta, intercept=intercept)


def _batch_psd(samples: np.ndarray, segment: int, overlap: float):
    """Average periodogram over all segments of all rows; keeps per-segment
    spectra for the backward pass."""
    win = _hann(segment)
    u = float(win @ win)
    starts = list(_segments(samples.shape[1], segment, overlap))
    rows = []
    offsets = []
    for b in range(samples.shape[0]):
        for s in starts:
            seg = samples[b, s : s + segment]
            rows.append(win * (seg - seg.mean()))
            offsets.append((b, s))
    V = np.stack(rows)
    F = np.fft.rfft(V, axis=1)
    scale = np.full(segment // 2 + 1, 2.0 / u)
    scale[0] = 1.0 / u
    scale[-1] = 1.0 / u
    psd = (np.abs(F) ** 2 * scale).mean(axis=0)
    f = np.fft.rfftfreq(segment)
    return f, psd, F, scale, win, offsets


def spectral_loss(
    values: np.ndarray,
    h_hat: float,
    config: ModelConfig,
    segment: int = DEFAULT_SEGMENT,
    overlap: float = DEFAULT_OVERLAP,
    with_grad: bool = False,
):
    """Spectral-consistency penalty for a batch; mode from ``config.spec_loss``.

    ``values`` is the generated-trajectory batch (B, N) in welch mode, and
    the target batch in variance_surrogate mode (where the term is a pure
    data statistic). Returns the loss, or (loss, grad-w.r.t.-values) when
    ``with_grad``; the surrogate and off modes have no gradient (None).
    """
    mode = config.spec_loss
    if mode == "off":
        return (0.0, None) if with_grad else 0.0
    values = np.asarray(values, dtype=np.float64)
    if mode == "variance_surrogate":
        loss = float((values.var() - 1.0) ** 2)
        return (loss, None) if with_grad else loss

    if values.ndim != 2 or values.shape[0] < 8 or values.shape[1] < 64:
        raise ValueError("welch mode needs a batch of >= 8 trajectories of length >= 64")
    segment = min(segment, values.shape[1])
    f_all, psd_all, F, scale, win, offsets = _batch_psd(values, segment, overlap)
    f_all, psd_all = f_all[1:], psd_all[1:]
    band = default_band(segment)
    mask = (f_all >= band[0]) & (f_all <= band[1])
    if mask.sum() < 5:
        raise ValueError(f"need >= 5 bins in band {band}")
    logf = np.log(f_all[mask])
    logS = np.log(psd_all[mask])
    beta_target = 2.0 * h_hat - 1.0

    xbar = logf.mean()
    sxx = float(((logf - xbar) ** 2).sum())
    a = (logf - xbar) / sxx  # d slope / d logS
    beta_hat = -float(a @ logS)
    # level-matched target: least-squares intercept with the slope pinned
    # at the target exponent, so the shape term measures shape, not level
    c_star = float((logS + beta_target * logf).mean())
    resid = logS - (c_star - beta_target * logf)
    slope_term = (beta_hat - beta_target) ** 2
    shape_term = float(config.lambda_shape * (resid @ resid))
    loss = float(slope_term + shape_term)
    if not with_grad:
        return loss

    # chain rule back to the sample batch
    g_logS = 2.0 * (beta_hat - beta_target) * (-a) + 2.0 * config.lambda_shape * resid
    g_psd = np.zeros_like(psd_all)
    g_psd[mask] = g_logS / psd_all[mask]
    g_full = np.concatenate([[0.0], g_psd])  # restore the dropped DC bin
    nseg = F.shape[0]
    coeff = g_full * scale / nseg
    m = segment
    # dP_j/dv_t = scale_j * 2 Re(conj(F_j) e^{-2 pi i j t / m}); assemble the
    # hermitian-extended coefficient spectrum and evaluate with one FFT
    A = np.zeros((nseg, m), dtype=np.complex128)
    half = np.arange(m // 2 + 1)
    A[:, half] += coeff * np.conj(F)
    A[:, (-half) % m] += coeff * F
    g_v = np.fft.fft(A, axis=1).real
    grad = np.zeros_like(values)
    for row, (b, s) in enumerate(offsets):
        gv = g_v[row]
        # windowing and per-segment mean removal: d v_t / d seg_u
        grad[b, s : s + segment] += win * gv - (win @ gv) / m
    return loss, grad
