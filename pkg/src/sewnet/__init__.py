"""Scale-equivariant generative forecasting for self-similar time series."""

from .baselines import GarchParams, garch_fit, garch_nll, iid_gaussian_nll
from .collapse import (
    CFCurve,
    CollapseResult,
    collapse_score,
    curves_from_series,
    empirical_cf,
    model_collapse,
    optimal_collapse,
)
from .data import Panel, TimeSeries, WindowSet, load_csv, make_windows, standardize
from .equivariance import downsample2, upsample2, verify_corollary1, verify_prop1
from .estimators import (
    FScoreRow,
    HurstEstimate,
    allan_variance,
    avar_hurst,
    excess_kurtosis,
    fscore,
    rank_universe,
    rs_hurst,
)
from .evaluation import EvalReport, TrainedModel, ablate, evaluate, train_variants, write_report
from .fgn import AggregateSeries, HurstExponent, aggregate, fgn_autocov, synth_fgn
from .flow import flow_logpdf, flow_sample, nll
from .kernels import BACKEND
from .network import (
    ModelConfig,
    ParamStore,
    backbone_forward,
    causal_dilated_conv,
    conv_param_count,
    init_params,
    sewn_block,
    wavenet_block,
)
from .spectral import spectral_loss, spectral_slope, welch_psd
from .stats import (
    TestResult,
    block_bootstrap_ci,
    holm_bonferroni,
    ks_distance,
    tail_energy_distance,
    wilcoxon_signed_rank,
)
from .training import TrainConfig, make_synthetic_universe, prepare, train, train_step
from .wavelet import DWTPair, dwt_db4, idwt_db4

__version__ = "0.1.0"
