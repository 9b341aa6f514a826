"""Non-neural reference forecasters: IID Gaussian and GARCH(1,1).

Both produce horizon-T Gaussian predictive densities on aggregate targets.
The IID model scales variance linearly in T (the square-root-of-time rule);
GARCH aggregates its per-step conditional-variance forecasts, which is exact
for the variance of the sum because GARCH increments are uncorrelated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .data import TimeSeries

LOG_2PI = math.log(2.0 * math.pi)
_STATIONARITY_MARGIN = 1e-6


@dataclass(frozen=True)
class GarchParams:
    mu: float
    omega: float
    alpha: float
    beta: float
    loglik: float = float("nan")

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.alpha + self.beta > 1.0 - _STATIONARITY_MARGIN:
            raise ValueError("stationarity requires alpha + beta < 1")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.persistence)


def iid_gaussian_nll(train: TimeSeries, test_targets: np.ndarray, T: int = 1) -> float:
    """Mean NLL of N(T*mu, T*sigma^2) fitted on the training increments."""
    mu = float(train.values.mean())
    var = float(train.values.var())
    if var <= 0:
        raise ValueError(f"series {train.id!r}: zero training variance")
    targets = np.asarray(test_targets, dtype=np.float64)
    v = T * var
    return float(np.mean(0.5 * (LOG_2PI + np.log(v)) + (targets - T * mu) ** 2 / (2 * v)))


def _garch_loglik(r: np.ndarray, mu: float, omega: float, alpha: float, beta: float) -> float:
    eps2 = (r - mu) ** 2
    s2 = kernels.garch_filter(eps2, omega, alpha, beta, float(eps2.mean()))
    if not np.all(np.isfinite(s2)) or s2.min() <= 0:
        return -np.inf
    return float(-0.5 * np.sum(LOG_2PI + np.log(s2) + eps2 / s2))


def _unpack(theta: np.ndarray) -> Tuple[float, float, float]:
    """Map unconstrained coordinates to (omega, alpha, beta) inside the
    stationarity region: persistence and arch share through sigmoids."""
    persistence = (1.0 - _STATIONARITY_MARGIN) / (1.0 + math.exp(-theta[0]))
    share = 1.0 / (1.0 + math.exp(-theta[1]))
    omega = math.exp(theta[2])
    return omega, persistence * share, persistence * (1.0 - share)


def garch_fit(train: TimeSeries) -> GarchParams:
    """Gaussian MLE via derivative-free simplex from a fixed 9-start grid.

    The recursion seeds sigma^2_0 at the sample variance; the stationarity
    constraint is enforced by reparameterisation, so every iterate is a
    valid model. Deterministic: fixed starts, deterministic optimiser.
    """
    if len(train) < 250:
        raise ValueError(f"series {train.id!r}: GARCH fit needs length >= 250")
    r = train.values
    mu = float(r.mean())
    var = float(r.var())
    if var <= 0:
        raise ValueError(f"series {train.id!r}: zero variance")

    def objective(theta):
        omega, alpha, beta = _unpack(theta)
        ll = _garch_loglik(r, mu, omega, alpha, beta)
        return -ll / len(r) if np.isfinite(ll) else 1e12

    def logit(p):
        return math.log(p / (1.0 - p))

    best = None
    for persistence in (0.5, 0.9, 0.97):
        for share in (0.05, 0.2, 0.5):
            omega0 = max(var * (1.0 - persistence), 1e-12)
            theta0 = np.array([logit(persistence), logit(share), math.log(omega0)])
            res = minimize(objective, theta0, method="Nelder-Mead",
                           options={"maxiter": 2000, "xatol": 1e-6, "fatol": 1e-10})
            if best is None or res.fun < best.fun:
                best = res
    if best is None or not np.isfinite(best.fun) or best.fun >= 1e12:
        raise ValueError(f"series {train.id!r}: no start produced a finite likelihood")
    omega, alpha, beta = _unpack(best.x)
    return GarchParams(mu=mu, omega=omega, alpha=alpha, beta=beta,
                       loglik=_garch_loglik(r, mu, omega, alpha, beta))


def garch_filtered_variance(params: GarchParams, x: TimeSeries) -> np.ndarray:
    """One-step-ahead conditional variances sigma^2_t = Var(x_t | past)."""
    eps2 = (x.values - params.mu) ** 2
    return kernels.garch_filter(eps2, params.omega, params.alpha, params.beta,
                                float(x.values.var()))


def garch_nll(
    params: GarchParams, x: TimeSeries, target_starts: Sequence[int], T: int = 1
) -> float:
    """Mean NLL of the horizon-T Gaussian forecast at each target start.

    The variance filter runs causally over the full series; at origin s the
    T-step target variance aggregates the conditional-variance forecasts
    sum_h E[sigma^2_(s+h) | past], with mean T*mu.
    """
    s2 = garch_filtered_variance(params, x)
    starts = np.asarray(target_starts, dtype=np.int64)
    if starts.min() < 0 or starts.max() + T > len(x):
        raise ValueError("target range outside the series")
    csum = np.concatenate([[0.0], np.cumsum(x.values)])
    targets = csum[starts + T] - csum[starts]
    p = params.persistence
    sbar = params.unconditional_variance
    if T == 1:
        var_T = s2[starts]
    else:
        # sum of a geometric approach to the unconditional level
        geo = (1.0 - p**T) / (1.0 - p) if p > 0 else 1.0
        var_T = T * sbar + (s2[starts] - sbar) * geo
    nll = 0.5 * (LOG_2PI + np.log(var_T)) + (targets - T * params.mu) ** 2 / (2 * var_T)
    return float(nll.mean())


def garch_variance_forecast(params: GarchParams, s2_now: float, T: int) -> float:
    """Aggregate variance of the next T increments given the current state."""
    p = params.persistence
    sbar = params.unconditional_variance
    geo = (1.0 - p**T) / (1.0 - p) if p > 0 else 1.0
    return T * sbar + (s2_now - sbar) * geo
