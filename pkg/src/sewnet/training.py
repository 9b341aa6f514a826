"""Training-step and trainer for the convolutional density forecasters.

One optimizer step runs: scaling-exponent estimate (precomputed per ticker,
or rolling), wavelet front end, backbone, FiLM, head NLL, plus the
configured spectral term. In ``variance_surrogate`` mode the spectral term
is a statistic of the target batch: it is added to the reported loss but by
construction contributes no gradient, so the parameter trajectory is
bitwise identical to training with the term switched off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import Panel, TimeSeries, WindowSet, make_windows, standardize
from .estimators import rs_hurst
from .fgn import synth_fgn
from .flow import flow_push, logpdf, nll
from .network import ModelConfig, ParamStore, backbone_forward, init_params
from .spectral import spectral_loss

VARIANTS = (
    "iid_gaussian",
    "garch",
    "wavenet_gaussian",
    "wavenet_flow_film",
    "se_wavenet_full",
)
ABLATIONS = ("full", "no_tying", "no_wavelet", "no_film", "no_spectral")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 1e-3
    seeds: Tuple[int, ...] = (0,)
    horizons: Tuple[int, ...] = (1, 5, 21, 63)
    test_split: int = 252
    window: int = 128
    hurst_mode: str = "per_series"  # per_series | rolling
    hurst_window: int = 252

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.horizons:
            raise ValueError("horizons must be non-empty")
        if self.hurst_mode not in ("per_series", "rolling"):
            raise ValueError("hurst_mode must be per_series or rolling")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["seeds"] = list(self.seeds)
        d["horizons"] = list(self.horizons)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["seeds"] = tuple(d.get("seeds", (0,)))
        d["horizons"] = tuple(d.get("horizons", (1, 5, 21, 63)))
        return cls(**d)


def variant_config(variant: str, base: ModelConfig) -> ModelConfig:
    """Model configuration for a named comparison or ablation variant."""
    if variant in ("se_wavenet_full", "full"):
        return replace(base, weight_tied=True, use_dwt=True, use_film=True, head="flow")
    if variant == "wavenet_gaussian":
        return replace(base, weight_tied=False, use_dwt=False, use_film=False,
                       head="gaussian", spec_loss="off")
    if variant == "wavenet_flow_film":
        return replace(base, weight_tied=False, use_dwt=False, use_film=True,
                       head="flow", spec_loss="off")
    if variant == "no_tying":
        return replace(variant_config("full", base), weight_tied=False)
    if variant == "no_wavelet":
        return replace(variant_config("full", base), use_dwt=False)
    if variant == "no_film":
        return replace(variant_config("full", base), use_film=False)
    if variant == "no_spectral":
        return replace(variant_config("full", base), spec_loss="off")
    raise ValueError(f"unknown variant {variant!r}")


class Adam:
    """Standard Adam (beta1=0.9, beta2=0.999) over a ParamStore."""

    def __init__(self, params: ParamStore, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {n: np.zeros_like(params[n].data) for n in params.names()}
        self.v = {n: np.zeros_like(params[n].data) for n in params.names()}

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for name in self.params.names():
            p = self.params[name]
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            mhat = self.m[name] / b1c
            vhat = self.v[name] / b2c
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def rolling_hurst(x: TimeSeries, window: int = 252) -> np.ndarray:
    """Causal rolling R/S estimate: entry t uses values [t-window, t).

    Entries before the first full window repeat the first available value.
    """
    n = len(x)
    if n < window:
        raise ValueError(f"series shorter than rolling window {window}")
    out = np.empty(n)
    first = None
    for t in range(window, n + 1):
        h = rs_hurst(TimeSeries(x.id, x.values[t - window : t])).value
        if first is None:
            first = h
        out[t - 1] = h
    out[: window - 1] = first
    return out


def train_step(
    windows: np.ndarray,
    targets: np.ndarray,
    h_hat: np.ndarray,
    T: int,
    config: ModelConfig,
    params: ParamStore,
    optimizer: Adam,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """One gradient update on a (window, target) batch; returns total loss.

    Non-finite losses abort with a diagnostic dump of parameter norms.
    """
    params.zero_grad()
    ctx = backbone_forward(windows, config, params, h_hat)
    nll_term = nll(targets, ctx, h_hat, params, config, T)

    spec_value = 0.0
    if config.spec_loss == "variance_surrogate":
        # statistic of the target batch: reported, but gradient-free
        spec_value = spectral_loss(targets, float(np.mean(h_hat)), config)
        nll_term.backward()
    elif config.spec_loss == "welch":
        rng = rng or np.random.default_rng(0)
        n_traj = max(8, len(targets) // 64 or 8)
        length = len(targets) // n_traj
        if length >= 64:
            z = rng.standard_normal(len(targets))
            samples = flow_push(z, ctx, h_hat, params, config, T)
            traj = samples.data[: n_traj * length].reshape(n_traj, length)
            spec_value, g_samples = spectral_loss(
                traj, float(np.mean(h_hat)), config, with_grad=True
            )
            nll_term.backward()
            g_flat = np.zeros_like(samples.data)
            g_flat[: n_traj * length] = g_samples.reshape(-1)
            samples.backward(config.lambda_spec * g_flat)
        else:
            nll_term.backward()
    else:
        nll_term.backward()

    total = float(nll_term.data) + config.lambda_spec * spec_value
    if not math.isfinite(total):
        norms = {n: float(np.linalg.norm(params[n].data)) for n in params.names()}
        raise RuntimeError(f"non-finite loss {total}; parameter norms: {norms}")
    optimizer.step()
    return total


@dataclass(frozen=True)
class PreparedTicker:
    ticker: str
    std_series: TimeSeries
    mean: float
    std: float
    h_hat: float
    train: WindowSet
    test: WindowSet
    train_h: np.ndarray  # per train pair
    test_h: np.ndarray  # per test pair


@dataclass(frozen=True)
class PreparedData:
    T: int
    tickers: Tuple[str, ...]
    per_ticker: Dict[str, PreparedTicker]
    train_inputs: np.ndarray
    train_targets: np.ndarray
    train_h: np.ndarray


def prepare(panel: Panel, T: int, cfg: TrainConfig) -> PreparedData:
    """Standardise on train statistics, window every ticker, estimate the
    per-ticker (or rolling) scaling exponent, and concatenate train pairs."""
    per: Dict[str, PreparedTicker] = {}
    inputs, targets, hs = [], [], []
    for ticker in panel.tickers():
        raw = panel.series[ticker]
        boundary = len(raw) - cfg.test_split
        if boundary <= cfg.window + T:
            raise ValueError(f"ticker {ticker!r}: too short for W+T+split")
        std_series, mean, std = standardize(raw, (0, boundary))
        train_ws, test_ws = make_windows(std_series, cfg.window, T, cfg.test_split)
        train_part = TimeSeries(ticker, std_series.values[:boundary])
        h_const = rs_hurst(train_part).value
        if cfg.hurst_mode == "rolling":
            roll = rolling_hurst(std_series, cfg.hurst_window)
            train_h = roll[train_ws.target_start - 1]
            test_h = roll[test_ws.target_start - 1]
        else:
            train_h = np.full(len(train_ws), h_const)
            test_h = np.full(len(test_ws), h_const)
        per[ticker] = PreparedTicker(
            ticker=ticker, std_series=std_series, mean=mean, std=std,
            h_hat=h_const, train=train_ws, test=test_ws,
            train_h=train_h, test_h=test_h,
        )
        inputs.append(train_ws.inputs)
        targets.append(train_ws.targets)
        hs.append(train_h)
    return PreparedData(
        T=T,
        tickers=tuple(panel.tickers()),
        per_ticker=per,
        train_inputs=np.concatenate(inputs),
        train_targets=np.concatenate(targets),
        train_h=np.concatenate(hs),
    )


def nn_nll_losses(
    inputs: np.ndarray,
    targets: np.ndarray,
    h_hat: np.ndarray,
    T: int,
    config: ModelConfig,
    params: ParamStore,
    chunk: int = 1024,
) -> np.ndarray:
    """Per-observation negative log-likelihoods (no gradients kept)."""
    out = []
    for lo in range(0, len(targets), chunk):
        hi = lo + chunk
        ctx = backbone_forward(inputs[lo:hi], config, params, h_hat[lo:hi])
        lp = logpdf(targets[lo:hi], ctx, h_hat[lo:hi], params, config, T)
        out.append(-lp.data)
    return np.concatenate(out)


def heldout_nll(prepared: PreparedData, config: ModelConfig, params: ParamStore) -> float:
    vals = []
    for pt in prepared.per_ticker.values():
        losses = nn_nll_losses(pt.test.inputs, pt.test.targets, pt.test_h,
                               prepared.T, config, params)
        vals.append(losses.mean())
    return float(np.mean(vals))


def train(
    prepared: PreparedData,
    config: ModelConfig,
    cfg: TrainConfig,
    seed: int = 0,
) -> Tuple[ParamStore, List[dict]]:
    """Epochs of shuffled minibatch updates over the concatenated pairs.

    Deterministic per (seed, config, data): initialisation, batch order and
    every update are driven by the seed. History records per-epoch mean
    train loss and held-out NLL.
    """
    params = init_params(config, seed=seed)
    optimizer = Adam(params, lr=cfg.learning_rate)
    shuffle_rng = np.random.default_rng(seed + 10_000)
    sample_rng = np.random.default_rng(seed + 20_000)
    n = len(prepared.train_targets)
    history: List[dict] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss = train_step(
                prepared.train_inputs[idx], prepared.train_targets[idx],
                prepared.train_h[idx], prepared.T, config, params, optimizer,
                rng=sample_rng,
            )
            batch_losses.append(loss)
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(batch_losses)),
            "heldout_nll": heldout_nll(prepared, config, params),
        })
    return params, history


def make_synthetic_universe(
    n_tickers: int = 25,
    hurst: float | Sequence[float] = 0.8,
    length: int = 1260,
    seed: int = 0,
) -> Panel:
    """Synthetic stand-in universe: one exact self-similar series per ticker.

    ``hurst`` is either a single exponent for all tickers or a per-ticker
    sequence. Keeps every pipeline path runnable with no data files.
    """
    if np.isscalar(hurst):
        hs = [float(hurst)] * n_tickers
    else:
        hs = [float(h) for h in hurst]
        if len(hs) != n_tickers:
            raise ValueError("need one Hurst exponent per ticker")
    series = {}
    for i, h in enumerate(hs):
        name = f"SYN{i:02d}"
        ts = synth_fgn(h, length, seed=seed * 1000 + i)
        series[name] = TimeSeries(id=name, values=ts.values)
    return Panel(series=series)
