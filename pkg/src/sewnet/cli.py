"""Command-line surface.

Subcommands: synth, estimate, collapse, spectrum, verify, train, evaluate,
ablate, report. A JSON config file (--config) can override ModelConfig and
TrainConfig fields; relative --out paths resolve against $SEWNET_OUTDIR.
Exit codes: 0 ok, 1 user error (bad input/arguments), 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import traceback
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .collapse import curves_from_series, optimal_collapse
from .data import Panel, TimeSeries, load_csv
from .equivariance import verify_corollary1, verify_prop1
from .estimators import fscore, rs_hurst
from .evaluation import (
    EvalReport,
    TrainedModel,
    ablate,
    evaluate,
    train_variants,
    write_report,
)
from .network import ModelConfig, ParamStore, conv_param_count
from .spectral import fit_spectrum
from .training import TrainConfig, make_synthetic_universe, prepare
from .fgn import synth_fgn


def _outpath(path: str) -> str:
    base = os.environ.get("SEWNET_OUTDIR", ".")
    p = Path(path)
    return str(p if p.is_absolute() else Path(base) / p)


def load_series_csv(path: str) -> TimeSeries:
    """Read one series: single 'value' column, (date,value) pairs, or a
    one-ticker panel file."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [c.strip().lower() for c in rows[0]]
    if len(header) == 1:
        body = rows[1:] if not _is_number(rows[0][0]) else rows
        values = [float(r[0]) for r in body]
        return TimeSeries(id=Path(path).stem, values=np.asarray(values))
    panel = load_csv(path, format="return")
    if len(panel) != 1:
        raise ValueError(f"{path}: expected a single series, found {len(panel)} tickers")
    (ticker,) = panel.tickers()
    return panel.series[ticker]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _load_configs(args) -> tuple[ModelConfig, TrainConfig]:
    model_kw: dict = {}
    train_kw: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        model_kw.update(payload.get("model", {}))
        train_kw.update(payload.get("train", {}))
    if getattr(args, "horizons", None):
        train_kw["horizons"] = _parse_horizons(args.horizons)
    if getattr(args, "epochs", None):
        train_kw["epochs"] = args.epochs
    if getattr(args, "seeds", None):
        train_kw["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    model = ModelConfig(**model_kw)
    train_cfg = TrainConfig.from_dict({**TrainConfig().to_dict(), **train_kw})
    return model, train_cfg


def _parse_horizons(text: str) -> tuple:
    return tuple(int(t) for t in text.split(","))


def _load_panel(args) -> Panel:
    if getattr(args, "infile", None):
        return load_csv(args.infile, format=args.format)
    n = args.synthetic or 25
    return make_synthetic_universe(
        n_tickers=n, hurst=args.hurst, length=args.length, seed=args.data_seed
    )


def _add_data_args(sub, synthetic_default=None):
    sub.add_argument("--in", dest="infile", help="panel CSV (wide or long form)")
    sub.add_argument("--format", choices=("price", "return"), default="return")
    sub.add_argument("--synthetic", type=int, default=synthetic_default,
                     help="number of synthetic tickers when no CSV is given")
    sub.add_argument("--hurst", type=float, default=0.8,
                     help="scaling exponent of the synthetic universe")
    sub.add_argument("--length", type=int, default=1260,
                     help="length of each synthetic series")
    sub.add_argument("--data-seed", type=int, default=0)


def cmd_synth(args) -> int:
    ts = synth_fgn(args.hurst, args.length, seed=args.seed)
    out = _outpath(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("value\n")
        fh.writelines(f"{float(v)!r}\n" for v in ts.values)
    print(f"wrote {args.length} samples (H={args.hurst}) to {out}")
    return 0


def cmd_estimate(args) -> int:
    panel = load_csv(args.infile, format=args.format)
    out = _outpath(args.out)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticker", "h_rs", "h_av", "rho", "excess_kurtosis", "f", "eligible"])
        for ticker in panel.tickers():
            series = panel.series[ticker]
            row = fscore(series)
            h_rs = rs_hurst(series).value
            writer.writerow([
                ticker, f"{h_rs:.6f}", f"{row.h_av:.6f}", f"{row.rho:.6f}",
                f"{row.excess_kurtosis:.6f}", f"{row.f:.6f}", row.eligible,
            ])
    print(f"wrote per-ticker statistics to {out}")
    return 0


def cmd_collapse(args) -> int:
    series = load_series_csv(args.infile)
    horizons = _parse_horizons(args.horizons)
    curves = curves_from_series(series, horizons)
    result = optimal_collapse(curves)
    payload = {
        "h_star": result.h_star,
        "c_star": result.c_star,
        "eta_band": list(result.eta_band),
        "horizons": list(horizons),
        "curves": [
            {"T": c.T, "k": c.k_grid.tolist(), "cf": c.values.tolist()}
            for c in result.curves
        ],
        "template_eta": result.template_eta.tolist(),
        "template": result.template.tolist(),
    }
    out = _outpath(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    print(f"H* = {result.h_star:.4f}, C* = {result.c_star:.5f} -> {out}")
    return 0


def cmd_spectrum(args) -> int:
    series = load_series_csv(args.infile)
    band = tuple(float(b) for b in args.band.split(",")) if args.band else None
    fit = fit_spectrum(series.values, segment=args.segment, band=band)
    payload = {
        "beta": fit.beta,
        "intercept": fit.intercept,
        "band": list(fit.band),
        "f": fit.f.tolist(),
        "psd": fit.psd.tolist(),
    }
    out = _outpath(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    print(f"spectral slope beta = {fit.beta:.4f} on band {fit.band} -> {out}")
    return 0


def cmd_verify(args) -> int:
    if not (args.prop1 or args.corollary1):
        raise ValueError("select at least one of --prop1 / --corollary1")
    payload: Dict[str, object] = {}
    ok = True
    if args.prop1:
        rep = verify_prop1(trials=args.trials, seed=args.seed)
        payload["prop1"] = json.loads(rep.to_json())
        ok &= rep.max_abs_residual == 0.0
        print(f"conv-level identity: max residual {rep.max_abs_residual} over {rep.trials} trials")
    if args.corollary1:
        config = ModelConfig(L=args.depth, n_filters=8, weight_tied=True)
        rep = verify_corollary1(config, N=256, trials=args.trials_stack, seed=args.seed)
        payload["corollary1"] = json.loads(rep.to_json())
        ok &= rep.max_abs_residual <= 1e-12
        print(f"stack-level identity: max interior residual {rep.max_abs_residual}")
        untied = ModelConfig(L=args.depth, n_filters=8, weight_tied=False)
        neg = verify_corollary1(untied, N=256, trials=args.trials_stack, seed=args.seed)
        payload["corollary1_untied_control"] = json.loads(neg.to_json())
        ok &= float(np.median(neg.residuals)) >= 1e-3
        print(f"untied negative control: median residual {float(np.median(neg.residuals)):.3e}")
    out = _outpath(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    print(("PASS" if ok else "FAIL") + f" -> {out}")
    return 0 if ok else 1


def _checkpoint_paths(outdir: Path, variant: str, T: int, seed_index: int) -> Path:
    return outdir / f"params_{variant}_T{T}_seed{seed_index}.json"


def cmd_train(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    panel = _load_panel(args)
    outdir = Path(_outpath(args.out))
    outdir.mkdir(parents=True, exist_ok=True)
    models, prepared = train_variants(panel, [args.variant], model_cfg, train_cfg)
    model = models[args.variant]
    manifest = {
        "variant": args.variant,
        "model_config": model.config.to_dict(),
        "train_config": train_cfg.to_dict(),
        "horizons": list(train_cfg.horizons),
        "conv_params": conv_param_count(model.config),
        "history": {
            str(T): model.history_by_T[T] for T in train_cfg.horizons
        },
    }
    for T in train_cfg.horizons:
        for si in range(len(train_cfg.seeds)):
            model.params_by_T[T][si].save_json(
                str(_checkpoint_paths(outdir, args.variant, T, si))
            )
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    final = {T: model.history_by_T[T][0][-1]["heldout_nll"] for T in train_cfg.horizons}
    print(f"trained {args.variant}; held-out NLL per horizon: {final}")
    print(f"checkpoints -> {outdir}")
    return 0


def _load_trained(outdir: str) -> TrainedModel:
    outdir_p = Path(outdir)
    with open(outdir_p / "manifest.json", "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    config = ModelConfig.from_dict(manifest["model_config"])
    train_cfg = TrainConfig.from_dict(manifest["train_config"])
    variant = manifest["variant"]
    params_by_T: Dict[int, List[ParamStore]] = {}
    for T in manifest["horizons"]:
        params_by_T[int(T)] = [
            ParamStore.load_json(str(_checkpoint_paths(outdir_p, variant, int(T), si)))
            for si in range(len(train_cfg.seeds))
        ]
    return TrainedModel(name=variant, kind="nn", config=config,
                        params_by_T=params_by_T)


def cmd_evaluate(args) -> int:
    _, train_cfg = _load_configs(args)
    panel = _load_panel(args)
    models: Dict[str, TrainedModel] = {}
    for name in (args.baselines.split(",") if args.baselines else []):
        name = name.strip()
        if name == "iid_gaussian":
            models[name] = TrainedModel(name=name, kind="iid")
        elif name == "garch":
            models[name] = TrainedModel(name=name, kind="garch")
        elif name:
            raise ValueError(f"unknown baseline {name!r}")
    for outdir in (args.models.split(",") if args.models else []):
        if outdir.strip():
            tm = _load_trained(outdir.strip())
            models[tm.name] = tm
    if not models:
        raise ValueError("nothing to evaluate: give --models and/or --baselines")
    horizons = sorted({T for m in models.values() if m.kind == "nn" for T in m.params_by_T})
    if not horizons:
        horizons = list(train_cfg.horizons)
    prepared = {T: prepare(panel, T, train_cfg) for T in horizons}
    report = evaluate(models, prepared, train_cfg,
                      collapse_samples=args.collapse_samples)
    out = _outpath(args.out)
    write_report(report, out, "json")
    print(f"evaluated {sorted(models)} at horizons {horizons} -> {out}")
    return 0


def cmd_ablate(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    panel = _load_panel(args)
    report = ablate(panel, model_cfg, train_cfg)
    out = _outpath(args.out)
    write_report(report, out, "json")
    md = out.rsplit(".", 1)[0] + ".md"
    write_report(report, md, "markdown")
    full = report.cell_nll("full", report.meta["horizons"][0])
    print(f"ablation grid written -> {out} (tables: {md}); full-model NLL {full:.3f}")
    return 0


def cmd_report(args) -> int:
    with open(args.infile, "r", encoding="utf-8") as fh:
        report = EvalReport.from_json(fh.read())
    out = _outpath(args.out)
    write_report(report, out, args.format)
    print(f"rendered {args.format} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sewnet",
        description="Scale-equivariant generative forecasting for self-similar series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample an exact self-similar series to CSV")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="per-ticker scaling statistics and screen score")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=("price", "return"), default="return")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("collapse", help="multi-horizon scaling-collapse diagnostic")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--horizons", default="1,5,21,63")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("spectrum", help="Welch PSD and power-law slope fit")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--segment", type=int, default=256)
    p.add_argument("--band", default=None, help="f_min,f_max (default 4/segment,0.25)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", help="numerical equivariance checks")
    p.add_argument("--prop1", action="store_true")
    p.add_argument("--corollary1", action="store_true")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--trials-stack", type=int, default=20)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train", help="train one model variant")
    _add_data_args(p)
    p.add_argument("--variant", default="se_wavenet_full")
    p.add_argument("--config", help="JSON file with model/train field overrides")
    p.add_argument("--horizons", help="comma list, e.g. 1,21")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seeds", help="comma list of training seeds")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score trained models and baselines")
    _add_data_args(p)
    p.add_argument("--models", help="comma list of checkpoint directories")
    p.add_argument("--baselines", default="iid_gaussian",
                   help="comma list from {iid_gaussian, garch}")
    p.add_argument("--config", help="JSON config overrides")
    p.add_argument("--horizons", help="comma list (baselines-only runs)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seeds", help="comma list of training seeds")
    p.add_argument("--collapse-samples", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="retrain and compare all ablation variants")
    _add_data_args(p)
    p.add_argument("--config", help="JSON config overrides")
    p.add_argument("--horizons", help="comma list, e.g. 1,21")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seeds", help="comma list of training seeds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="render a saved evaluation report")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=("json", "csv", "markdown"), default="markdown")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
