"""Model comparison grid: NLL cells, calibration, significance, collapse.

`evaluate` scores a set of trained models plus the closed-form baselines on
identical per-ticker test pairs, attaches block-bootstrap intervals, PIT
calibration and tail distances, runs paired signed-rank tests against the
reference model with step-down correction, and (optionally) the sample-side
scaling-collapse diagnostic. `ablate` retrains the ablation variants with
everything else pinned and reports deltas against the full model.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr

from .baselines import garch_filtered_variance, garch_fit, garch_variance_forecast
from .collapse import _build_curves, model_collapse, optimal_collapse
from .data import Panel, TimeSeries
from .fgn import disjoint_aggregates
from .flow import flow_cdf, flow_sample_batch, gaussian_head_cdf, gaussian_head_moments
from .network import ModelConfig, ParamStore, backbone_forward, conv_param_count
from .stats import block_bootstrap_ci, holm_bonferroni, tail_energy_distance, wilcoxon_signed_rank
from .training import (
    ABLATIONS,
    PreparedData,
    TrainConfig,
    nn_nll_losses,
    prepare,
    train,
    variant_config,
)

LOG_2PI = math.log(2.0 * math.pi)
REFERENCE_CANDIDATES = ("se_wavenet_full", "full")


@dataclass(frozen=True)
class TrainedModel:
    """A named model: closed-form baseline or trained network per horizon."""

    name: str
    kind: str  # iid | garch | nn
    config: Optional[ModelConfig] = None
    # nn: params_by_T[T][seed_index] -> ParamStore
    params_by_T: Dict[int, List[ParamStore]] = field(default_factory=dict)
    history_by_T: Dict[int, List[List[dict]]] = field(default_factory=dict)

    def conv_params(self) -> int:
        return conv_param_count(self.config) if self.kind == "nn" else 0


@dataclass(frozen=True)
class EvalCell:
    model: str
    ticker: str
    horizon: int
    seed_index: int
    nll: float
    n: int
    ci_lo: float
    ci_hi: float
    ks: float
    tail_energy: Optional[float]


@dataclass(frozen=True)
class PairedTest:
    reference: str
    other: str
    horizon: int
    delta_nll: float
    statistic: float
    p_value: float
    p_adjusted: float
    reject: bool


@dataclass(frozen=True)
class CollapseSummary:
    source: str  # "empirical" or a model name
    h_star: float
    c_star: float


@dataclass(frozen=True)
class EvalReport:
    cells: List[EvalCell]
    conv_params: Dict[str, int]
    dispersion: Dict[str, float]  # "model|T" -> larger of ticker/seed std
    tests: List[PairedTest]
    collapse: List[CollapseSummary]
    meta: Dict[str, object]

    def cell_nll(self, model: str, horizon: int, ticker: Optional[str] = None) -> float:
        """Seed-averaged NLL, cross-ticker mean unless a ticker is given."""
        vals = [
            c.nll
            for c in self.cells
            if c.model == model and c.horizon == horizon
            and (ticker is None or c.ticker == ticker)
        ]
        if not vals:
            raise KeyError(f"no cells for ({model}, T={horizon}, {ticker})")
        return float(np.mean(vals))

    def to_json(self) -> str:
        return json.dumps(
            {
                "cells": [asdict(c) for c in self.cells],
                "conv_params": self.conv_params,
                "dispersion": self.dispersion,
                "tests": [asdict(t) for t in self.tests],
                "collapse": [asdict(c) for c in self.collapse],
                "meta": self.meta,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, payload: str) -> "EvalReport":
        raw = json.loads(payload)
        return cls(
            cells=[EvalCell(**c) for c in raw["cells"]],
            conv_params=dict(raw["conv_params"]),
            dispersion=dict(raw["dispersion"]),
            tests=[PairedTest(**t) for t in raw["tests"]],
            collapse=[CollapseSummary(**c) for c in raw["collapse"]],
            meta=dict(raw["meta"]),
        )


def train_variants(
    panel: Panel,
    variants: Sequence[str],
    base: ModelConfig,
    cfg: TrainConfig,
    horizons: Optional[Sequence[int]] = None,
) -> Tuple[Dict[str, TrainedModel], Dict[int, PreparedData]]:
    """Train each named variant at each horizon for each seed."""
    horizons = tuple(horizons or cfg.horizons)
    prepared = {T: prepare(panel, T, cfg) for T in horizons}
    models: Dict[str, TrainedModel] = {}
    for name in variants:
        if name == "iid_gaussian":
            models[name] = TrainedModel(name=name, kind="iid")
            continue
        if name == "garch":
            models[name] = TrainedModel(name=name, kind="garch")
            continue
        config = variant_config(name, base)
        params_by_T: Dict[int, List[ParamStore]] = {}
        history_by_T: Dict[int, List[List[dict]]] = {}
        for T in horizons:
            stores, hists = [], []
            for seed in cfg.seeds:
                params, history = train(prepared[T], config, cfg, seed=seed)
                stores.append(params)
                hists.append(history)
            params_by_T[T] = stores
            history_by_T[T] = hists
        models[name] = TrainedModel(
            name=name, kind="nn", config=config,
            params_by_T=params_by_T, history_by_T=history_by_T,
        )
    return models, prepared


def _baseline_losses_and_cdf(model, pt, T):
    """Per-observation losses and PIT values for the closed-form baselines.

    Fits use the training region only (everything before the first test
    target index)."""
    first_test = int(pt.test.target_start.min())
    train_ts = TimeSeries(pt.ticker, pt.std_series.values[:first_test])
    targets = pt.test.targets
    if model.kind == "iid":
        mu = float(train_ts.values.mean())
        var = float(train_ts.values.var())
        v = T * var
        losses = 0.5 * (LOG_2PI + np.log(v)) + (targets - T * mu) ** 2 / (2 * v)
        pit = ndtr((targets - T * mu) / math.sqrt(v))
        sampler_sd = np.full(len(targets), math.sqrt(v))
        mean = np.full(len(targets), T * mu)
        return losses, pit, mean, sampler_sd
    if model.kind == "garch":
        params = garch_fit(train_ts)
        s2 = garch_filtered_variance(params, pt.std_series)
        starts = pt.test.target_start
        var_T = np.array([garch_variance_forecast(params, float(s2[s]), T) for s in starts])
        mean = np.full(len(targets), T * params.mu)
        losses = 0.5 * (LOG_2PI + np.log(var_T)) + (targets - mean) ** 2 / (2 * var_T)
        pit = ndtr((targets - mean) / np.sqrt(var_T))
        return losses, pit, mean, np.sqrt(var_T)
    raise ValueError(model.kind)


def _nn_losses_and_cdf(model: TrainedModel, pt, T: int, params: ParamStore):
    losses = nn_nll_losses(pt.test.inputs, pt.test.targets, pt.test_h, T,
                           model.config, params)
    ctx = backbone_forward(pt.test.inputs, model.config, params, pt.test_h).data
    if model.config.head == "flow":
        pit = flow_cdf(pt.test.targets, ctx, pt.test_h, params, model.config, T)
    else:
        pit = gaussian_head_cdf(pt.test.targets, ctx, params, T)
    return losses, pit, ctx


def _nn_tail_samples(model, pt, T, params, ctx, n_per, seed):
    if model.config.head == "flow":
        draws = flow_sample_batch(ctx, pt.test_h, n_per, seed, params, model.config, T)
    else:
        mu, sig = gaussian_head_moments(ctx, params)
        z = np.random.default_rng(seed).standard_normal((len(mu), n_per))
        draws = math.sqrt(T) * (mu[:, None] + sig[:, None] * z)
    return draws.ravel()


def evaluate(
    models: Dict[str, TrainedModel],
    prepared: Dict[int, PreparedData],
    cfg: TrainConfig,
    bootstrap_seed: int = 1234,
    tail_samples_per_context: int = 20,
    collapse_samples: int = 2000,
    reference: Optional[str] = None,
) -> EvalReport:
    """Score every (model, ticker, horizon, seed) cell on shared test pairs."""
    horizons = sorted(prepared)
    tick_sets = {tuple(p.tickers) for p in prepared.values()}
    if len(tick_sets) != 1:
        raise ValueError("mismatched tickers across horizons")
    tickers = list(tick_sets.pop())
    for T, p in prepared.items():
        sizes = {len(p.per_ticker[t].test) for t in tickers}
        if len(sizes) != 1:
            raise ValueError(f"mismatched test sizes at T={T}")

    cells: List[EvalCell] = []
    per_ticker_nll: Dict[Tuple[str, int, str], List[float]] = {}
    seed_means: Dict[Tuple[str, int], List[float]] = {}
    for name, model in models.items():
        n_seeds = len(cfg.seeds) if model.kind == "nn" else 1
        for T in horizons:
            for si in range(n_seeds):
                ticker_nlls = []
                for ticker in tickers:
                    pt = prepared[T].per_ticker[ticker]
                    sigma = float(pt.test.targets.std())
                    if model.kind == "nn":
                        params = model.params_by_T[T][si]
                        losses, pit, ctx = _nn_losses_and_cdf(model, pt, T, params)
                        model_draws = _nn_tail_samples(
                            model, pt, T, params, ctx, tail_samples_per_context,
                            seed=bootstrap_seed + 7 * si,
                        )
                    else:
                        losses, pit, mean, sd = _baseline_losses_and_cdf(model, pt, T)
                        rng = np.random.default_rng(bootstrap_seed + 7 * si)
                        z = rng.standard_normal((len(mean), tail_samples_per_context))
                        model_draws = (mean[:, None] + sd[:, None] * z).ravel()
                    u = np.sort(np.clip(pit, 0.0, 1.0))
                    grid = np.arange(1, len(u) + 1) / len(u)
                    ks = float(max((grid - u).max(), (u - (grid - 1 / len(u))).max()))
                    ted = tail_energy_distance(model_draws, pt.test.targets, sigma)
                    lo, hi = block_bootstrap_ci(losses, block_len=21, resamples=1000,
                                                seed=bootstrap_seed)
                    nll_val = float(losses.mean())
                    ticker_nlls.append(nll_val)
                    per_ticker_nll.setdefault((name, T, ticker), []).append(nll_val)
                    cells.append(EvalCell(
                        model=name, ticker=ticker, horizon=T, seed_index=si,
                        nll=nll_val, n=len(losses), ci_lo=lo, ci_hi=hi, ks=ks,
                        tail_energy=ted,
                    ))
                seed_means.setdefault((name, T), []).append(float(np.mean(ticker_nlls)))

    dispersion = {}
    for (name, T), means in seed_means.items():
        ticker_vals = [float(np.mean(per_ticker_nll[(name, T, t)])) for t in tickers]
        cross_ticker = float(np.std(ticker_vals))
        cross_seed = float(np.std(means))
        dispersion[f"{name}|{T}"] = max(cross_ticker, cross_seed)

    reference = reference or next(
        (r for r in REFERENCE_CANDIDATES if r in models), sorted(models)[0]
    )
    tests: List[PairedTest] = []
    raw: List[Tuple[str, int, float, float, float]] = []
    for T in horizons:
        for name in sorted(models):
            if name == reference:
                continue
            ref_vals = np.array([np.mean(per_ticker_nll[(reference, T, t)]) for t in tickers])
            oth_vals = np.array([np.mean(per_ticker_nll[(name, T, t)]) for t in tickers])
            deltas = oth_vals - ref_vals
            delta_mean = float(deltas.mean())
            if np.allclose(deltas, 0.0):
                stat, p = 0.0, 1.0  # identical models: nothing to rank
            elif np.count_nonzero(deltas) < 5:
                continue  # exact signed-rank test undefined below 5 pairs
            else:
                res = wilcoxon_signed_rank(deltas)
                stat, p = res.statistic, res.p_value
            raw.append((name, T, delta_mean, stat, p))
    if raw:
        adjusted, reject = holm_bonferroni([r[4] for r in raw], alpha=0.05)
        for (name, T, delta_mean, stat, p), p_adj, rej in zip(raw, adjusted, reject):
            tests.append(PairedTest(
                reference=reference, other=name, horizon=T, delta_nll=delta_mean,
                statistic=stat, p_value=p, p_adjusted=p_adj, reject=bool(rej),
            ))

    collapse: List[CollapseSummary] = []
    if collapse_samples and len(horizons) >= 2:
        first = prepared[horizons[0]]
        pooled = {
            T: np.concatenate([
                disjoint_aggregates(prepared[T].per_ticker[t].std_series, T)
                for t in tickers
            ])
            for T in horizons
        }
        increments = np.concatenate(
            [first.per_ticker[t].std_series.values for t in tickers]
        )
        emp = optimal_collapse(_build_curves(pooled, float(np.std(increments))))
        collapse.append(CollapseSummary("empirical", emp.h_star, emp.c_star))
        for name, model in models.items():
            sampler = _make_sampler(model, prepared, cfg)
            if sampler is None:
                continue
            mc = model_collapse(sampler, horizons, n_samples=max(1000, collapse_samples),
                                seed=bootstrap_seed, c_star_empirical=emp.c_star)
            collapse.append(CollapseSummary(name, mc.result.h_star, mc.result.c_star))

    return EvalReport(
        cells=cells,
        conv_params={n: m.conv_params() for n, m in models.items()},
        dispersion=dispersion,
        tests=tests,
        collapse=collapse,
        meta={
            "reference": reference,
            "horizons": horizons,
            "tickers": tickers,
            "seeds": list(cfg.seeds),
        },
    )


def _make_sampler(model: TrainedModel, prepared: Dict[int, PreparedData], cfg: TrainConfig):
    """Per-horizon aggregate sampler for the collapse diagnostic."""
    if model.kind == "garch":
        return None  # simulation-based pathwise sampling not wired for GARCH
    if model.kind == "iid":
        def sampler(T, n, seed):
            return math.sqrt(T) * np.random.default_rng(seed).standard_normal(n)

        return sampler

    def sampler(T, n, seed):
        p = prepared[T]
        params = model.params_by_T[T][0]
        ctx_all, h_all = [], []
        for t in p.tickers:
            pt = p.per_ticker[t]
            ctx_all.append(backbone_forward(pt.test.inputs, model.config, params, pt.test_h).data)
            h_all.append(pt.test_h)
        ctx = np.concatenate(ctx_all)
        h = np.concatenate(h_all)
        n_per = -(-n // len(ctx))
        if model.config.head == "flow":
            draws = flow_sample_batch(ctx, h, n_per, seed, params, model.config, T)
        else:
            mu, sig = gaussian_head_moments(ctx, params)
            z = np.random.default_rng(seed).standard_normal((len(mu), n_per))
            draws = math.sqrt(T) * (mu[:, None] + sig[:, None] * z)
        return draws.ravel()[:n]

    return sampler


def ablate(
    panel: Panel,
    base: ModelConfig,
    cfg: TrainConfig,
    horizons: Optional[Sequence[int]] = None,
) -> EvalReport:
    """Retrain every ablation variant with identical seeds and compare.

    The report's reference model is ``full``; the delta columns in the
    rendered tables are NLL(variant) - NLL(full).
    """
    models, prepared = train_variants(panel, ABLATIONS, base, cfg, horizons)
    report = evaluate(models, prepared, cfg, reference="full")
    return report


def render_markdown(report: EvalReport) -> str:
    """Comparison tables in the layout of the headline results grids."""
    lines = []
    horizons = report.meta["horizons"]
    names = sorted(report.conv_params)
    ref = report.meta["reference"]
    lines.append("| Model | Conv params | " + " | ".join(f"T={T} NLL" for T in horizons) + " |")
    lines.append("|---" * (2 + len(horizons)) + "|")
    for name in names:
        row = [name, f"{report.conv_params[name]:,}" if report.conv_params[name] else "0"]
        for T in horizons:
            row.append(f"{report.cell_nll(name, T):+.3f}")
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    if any(t for t in report.tests):
        lines.append(f"| Variant | T | dNLL vs {ref} | p (Holm) | reject |")
        lines.append("|---|---|---|---|---|")
        for t in report.tests:
            lines.append(
                f"| {t.other} | {t.horizon} | {t.delta_nll:+.3f} | "
                f"{t.p_adjusted:.4f} | {'yes' if t.reject else 'no'} |"
            )
        lines.append("")
    if report.collapse:
        lines.append("| Collapse source | H* | C* |")
        lines.append("|---|---|---|")
        for c in report.collapse:
            lines.append(f"| {c.source} | {c.h_star:.3f} | {c.c_star:.4f} |")
        lines.append("")
    return "\n".join(lines)


CSV_COLUMNS = [
    "model", "ticker", "horizon", "seed_index", "nll", "n",
    "ci_lo", "ci_hi", "ks", "tail_energy",
]


def write_report(report: EvalReport, path: str, format: str = "json") -> None:
    """Serialise deterministically; csv column order is CSV_COLUMNS."""
    if not report.cells:
        raise ValueError("empty report")
    if format == "json":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for cell in sorted(report.cells, key=lambda c: (c.model, c.horizon, c.ticker, c.seed_index)):
                writer.writerow({k: getattr(cell, k) for k in CSV_COLUMNS})
    elif format == "markdown":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render_markdown(report))
    else:
        raise ValueError(f"unknown format {format!r}")
