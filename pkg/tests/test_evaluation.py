import numpy as np
import pytest

from sewnet.evaluation import (
    EvalReport,
    TrainedModel,
    ablate,
    evaluate,
    render_markdown,
    train_variants,
    write_report,
)
from sewnet.network import ModelConfig, conv_param_count
from sewnet.training import TrainConfig, make_synthetic_universe

CFG = TrainConfig(epochs=1, batch_size=64, horizons=(1, 5), test_split=70,
                  window=32, seeds=(0,))
MODEL = ModelConfig(L=2, n_filters=4, flow_layers=2)


@pytest.fixture(scope="module")
def small_eval():
    panel = make_synthetic_universe(n_tickers=5, hurst=0.6, length=600, seed=4)
    models, prepared = train_variants(
        panel, ["iid_gaussian", "se_wavenet_full"], MODEL, CFG
    )
    report = evaluate(models, prepared, CFG, collapse_samples=1200)
    return models, prepared, report


class TestEvaluate:
    def test_cells_cover_grid(self, small_eval):
        _, _, report = small_eval
        assert len(report.cells) == 2 * 5 * 2  # models x tickers x horizons
        for cell in report.cells:
            assert cell.n == 70 - (cell.horizon - 1)
            assert cell.ci_lo <= cell.nll <= cell.ci_hi
            assert 0.0 <= cell.ks <= 1.0

    def test_conv_params_column(self, small_eval):
        models, _, report = small_eval
        assert report.conv_params["iid_gaussian"] == 0
        assert report.conv_params["se_wavenet_full"] == conv_param_count(
            models["se_wavenet_full"].config
        )

    def test_dispersion_larger_of_rule(self, small_eval):
        # one seed: the seed std is 0, so the entry equals the cross-ticker
        # std of per-ticker NLLs
        _, _, report = small_eval
        for model in ("iid_gaussian", "se_wavenet_full"):
            for T in (1, 5):
                ticker_vals = [c.nll for c in report.cells
                               if c.model == model and c.horizon == T]
                assert report.dispersion[f"{model}|{T}"] == pytest.approx(
                    float(np.std(ticker_vals)), abs=1e-12
                )

    def test_paired_tests_reference(self, small_eval):
        _, _, report = small_eval
        assert report.meta["reference"] == "se_wavenet_full"
        assert {t.other for t in report.tests} == {"iid_gaussian"}
        for t in report.tests:
            assert 0.0 <= t.p_value <= t.p_adjusted <= 1.0

    def test_collapse_summaries_present(self, small_eval):
        _, _, report = small_eval
        sources = {c.source for c in report.collapse}
        assert "empirical" in sources
        assert "se_wavenet_full" in sources
        for c in report.collapse:
            assert 0.0 < c.h_star < 1.0
            assert c.c_star >= 0.0

    def test_too_few_tickers_omits_pair_rows(self):
        panel = make_synthetic_universe(n_tickers=2, hurst=0.5, length=400, seed=9)
        cfg = TrainConfig(epochs=1, horizons=(1,), test_split=50, window=32)
        models, prepared = train_variants(panel, ["iid_gaussian", "se_wavenet_full"],
                                          MODEL, cfg)
        report = evaluate(models, prepared, cfg, collapse_samples=0)
        assert report.tests == []  # exact test undefined below 5 pairs

    def test_identical_model_compared_twice(self):
        panel = make_synthetic_universe(n_tickers=3, hurst=0.5, length=500, seed=5)
        cfg = TrainConfig(epochs=1, horizons=(1,), test_split=60, window=32)
        models, prepared = train_variants(panel, ["se_wavenet_full"], MODEL, cfg)
        twin = TrainedModel(
            name="twin", kind="nn", config=models["se_wavenet_full"].config,
            params_by_T=models["se_wavenet_full"].params_by_T,
            history_by_T=models["se_wavenet_full"].history_by_T,
        )
        models["twin"] = twin
        report = evaluate(models, prepared, cfg, collapse_samples=0)
        (test,) = report.tests
        assert test.delta_nll == 0.0
        assert test.p_value == 1.0

    def test_iid_gaussian_anchors(self):
        # standardised Gaussian universe: IID baseline sits at the analytic
        # values 1.42 (T=1) and 2.94 (T=21). Overlapping 21-day targets
        # leave ~12 effective samples per ticker, so the T=21 tolerance is
        # Monte Carlo limited here; the tight anchor is asserted at the op
        # level on independent targets.
        panel = make_synthetic_universe(n_tickers=8, hurst=0.5, length=1100, seed=6)
        cfg = TrainConfig(epochs=1, horizons=(1, 21), test_split=252, window=32)
        models, prepared = train_variants(panel, ["iid_gaussian"], MODEL, cfg)
        report = evaluate(models, prepared, cfg, collapse_samples=0)
        assert abs(report.cell_nll("iid_gaussian", 1) - 1.419) <= 0.1
        assert abs(report.cell_nll("iid_gaussian", 21) - 2.941) <= 0.3


class TestEndToEndCollapse:
    def test_trained_model_collapse_tracks_empirical(self):
        # loose-by-design pipeline check: samples from the trained model
        # collapse about as well as the data themselves
        panel = make_synthetic_universe(n_tickers=5, hurst=0.7, length=800, seed=12)
        cfg = TrainConfig(epochs=2, batch_size=64, horizons=(1, 5, 21),
                          test_split=100, window=32)
        models, prepared = train_variants(
            panel, ["se_wavenet_full"], ModelConfig(L=2, n_filters=8, flow_layers=2), cfg
        )
        report = evaluate(models, prepared, cfg, collapse_samples=4000)
        emp = next(c for c in report.collapse if c.source == "empirical")
        mod = next(c for c in report.collapse if c.source == "se_wavenet_full")
        assert abs(emp.h_star - 0.7) <= 0.1
        assert mod.c_star <= 2 * emp.c_star


class TestAblate:
    def test_spectral_ablation_is_bitwise_null(self):
        panel = make_synthetic_universe(n_tickers=2, hurst=0.7, length=400, seed=7)
        cfg = TrainConfig(epochs=1, horizons=(1,), test_split=50, window=32)
        base = ModelConfig(L=1, n_filters=4, flow_layers=2,
                           spec_loss="variance_surrogate")
        report = ablate(panel, base, cfg)
        variants = {c.model for c in report.cells}
        assert variants == {"full", "no_tying", "no_wavelet", "no_film", "no_spectral"}
        for T in (1,):
            delta = report.cell_nll("no_spectral", T) - report.cell_nll("full", T)
            assert delta == 0.0  # bitwise: the surrogate has no gradient


class TestReportIO:
    def test_json_round_trip(self, small_eval, tmp_path):
        _, _, report = small_eval
        path = tmp_path / "report.json"
        write_report(report, str(path), "json")
        back = EvalReport.from_json(path.read_text())
        assert back == report

    def test_csv_column_order(self, small_eval, tmp_path):
        _, _, report = small_eval
        path = tmp_path / "report.csv"
        write_report(report, str(path), "csv")
        header = path.read_text().splitlines()[0]
        assert header == "model,ticker,horizon,seed_index,nll,n,ci_lo,ci_hi,ks,tail_energy"

    def test_markdown_contains_tables(self, small_eval, tmp_path):
        _, _, report = small_eval
        text = render_markdown(report)
        assert "| Model | Conv params |" in text
        assert "se_wavenet_full" in text
        assert "| Collapse source | H* | C* |" in text

    def test_empty_report_rejected(self, tmp_path):
        empty = EvalReport(cells=[], conv_params={}, dispersion={}, tests=[],
                           collapse=[], meta={})
        with pytest.raises(ValueError, match="empty"):
            write_report(empty, str(tmp_path / "x.json"))
