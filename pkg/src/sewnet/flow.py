"""Conditional scalar density heads: normalising flow and Gaussian.

The flow composes ``flow_layers`` conditional monotone transforms. In the
sampling direction each layer applies an affine scale-shift followed by a
sinh-arcsinh warp,

    u -> sinh(delta * (arcsinh(s * u + m) + eps)),

with (m, log s, eps, log delta) produced per layer by a context-conditioned
perceptron whose final layer starts at zero. That makes every layer exactly
the identity at initialisation, while trained eps/delta bend skew and tail
weight away from Gaussian. Scales enter through exp, so monotonicity and
invertibility hold by construction, with closed forms both ways.

Both heads model the target in units of sqrt(horizon): a horizon-T density
is the learned unit-scale density pushed through r = sqrt(T) * g(z). At
initialisation the predictive is therefore N(0, T) -- the square-root
aggregation prior -- which gives the analytic anchors 0.5*log(2*pi*e*T)
for the NLL of standardised Gaussian data at any horizon.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy.special import ndtr

from . import autodiff as ad
from .autodiff import Tensor
from .network import ModelConfig, ParamStore

LOG_2PI = float(np.log(2.0 * np.pi))


def _conditioner(
    context: Tensor, h_hat: np.ndarray, params: ParamStore, layer: int
) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
    """(m, log_s, eps, log_delta) tensors of shape (B,) for one flow layer."""
    hh = Tensor(np.asarray(h_hat, dtype=np.float64).reshape(-1, 1))
    inp = ad.concat([context, hh], axis=1)
    h1 = ad.tanh(ad.add(ad.matmul(inp, params[f"flow{layer}.w1"]), params[f"flow{layer}.b1"]))
    raw = ad.add(ad.matmul(h1, params[f"flow{layer}.w2"]), params[f"flow{layer}.b2"])
    return raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3]


def _conditioner_np(
    context: np.ndarray, h_hat: np.ndarray, params: ParamStore, layer: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Numpy twin of `_conditioner` for sampling/CDF paths (no gradients)."""
    inp = np.concatenate([context, np.reshape(h_hat, (-1, 1))], axis=1)
    h1 = np.tanh(inp @ params[f"flow{layer}.w1"].data + params[f"flow{layer}.b1"].data)
    raw = h1 @ params[f"flow{layer}.w2"].data + params[f"flow{layer}.b2"].data
    return raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3]


def flow_logpdf(
    r, context: Tensor, h_hat, params: ParamStore, config: ModelConfig, T: int = 1
) -> Tensor:
    """log p(r | context, h_hat) via change of variables, shape (B,).

    Inverts the layers in reverse order and accumulates the log-derivative;
    the base density is standard normal and the head carries the sqrt(T)
    horizon scale (see module docstring).
    """
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if not np.all(np.isfinite(r)):
        raise ValueError("targets must be finite")
    scale = np.sqrt(float(T))
    u = Tensor(r / scale)
    logdet = Tensor(np.full_like(r, -np.log(scale)))
    for layer in reversed(range(config.flow_layers)):
        m, log_s, eps, log_delta = _conditioner(context, h_hat, params, layer)
        delta = ad.exp(log_delta)
        # invert the sinh-arcsinh warp: a = sinh(arcsinh(u)/delta - eps)
        q = ad.add(ad.div(ad.arcsinh(u), delta), ad.mul(eps, -1.0))
        a = ad.sinh(q)
        # d a / d u = cosh(q) / (delta * sqrt(1 + u^2))
        logdet = ad.add(
            logdet,
            ad.add(
                ad.add(ad.log(ad.cosh(q)), ad.mul(log_delta, -1.0)),
                ad.mul(ad.log(ad.add(ad.square(u), 1.0)), -0.5),
            ),
        )
        # invert the affine: u = (a - m) / s, with d/da = exp(-log s)
        u = ad.mul(ad.add(a, ad.mul(m, -1.0)), ad.exp(ad.mul(log_s, -1.0)))
        logdet = ad.add(logdet, ad.mul(log_s, -1.0))
    base = ad.add(ad.mul(ad.square(u), -0.5), -0.5 * LOG_2PI)
    return ad.add(base, logdet)


def flow_inverse_np(r, context, h_hat, params, config, T: int = 1) -> np.ndarray:
    """Map targets to base-normal coordinates (numpy, no gradients)."""
    context = np.atleast_2d(np.asarray(context, dtype=np.float64))
    u = np.asarray(r, dtype=np.float64) / np.sqrt(float(T))
    for layer in reversed(range(config.flow_layers)):
        m, log_s, eps, log_delta = _conditioner_np(context, h_hat, params, layer)
        a = np.sinh(np.arcsinh(u) / np.exp(log_delta) - eps)
        u = (a - m) * np.exp(-log_s)
    return u


def flow_push(
    z, context: Tensor, h_hat, params: ParamStore, config: ModelConfig, T: int = 1
) -> Tensor:
    """Sampling direction z -> r through the autodiff graph (pathwise)."""
    u = Tensor(np.asarray(z, dtype=np.float64))
    for layer in range(config.flow_layers):
        m, log_s, eps, log_delta = _conditioner(context, h_hat, params, layer)
        a = ad.add(ad.mul(u, ad.exp(log_s)), m)
        u = ad.sinh(ad.mul(ad.exp(log_delta), ad.add(ad.arcsinh(a), eps)))
    return ad.mul(u, np.sqrt(float(T)))


def _push_np(z, context, h_hat, params, config, T: int = 1) -> np.ndarray:
    """Numpy twin of `flow_push`; z may be (B,) or (B, n)."""
    u = np.asarray(z, dtype=np.float64)
    for layer in range(config.flow_layers):
        m, log_s, eps, log_delta = _conditioner_np(context, h_hat, params, layer)
        if u.ndim == 2:
            m, log_s = m[:, None], log_s[:, None]
            eps, log_delta = eps[:, None], log_delta[:, None]
        a = u * np.exp(log_s) + m
        u = np.sinh(np.exp(log_delta) * (np.arcsinh(a) + eps))
    return u * np.sqrt(float(T))


def flow_sample(
    context, h_hat: float, n: int, seed: int, params: ParamStore,
    config: ModelConfig, T: int = 1,
) -> np.ndarray:
    """n draws from the flow for a single context vector, seed-deterministic."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    ctx = np.broadcast_to(np.asarray(context, dtype=np.float64), (1, len(context)))
    return _push_np(z[None, :], ctx, np.asarray([h_hat]), params, config, T)[0]


def flow_sample_batch(
    contexts: np.ndarray, h_hat: np.ndarray, n_per: int, seed: int,
    params: ParamStore, config: ModelConfig, T: int = 1,
) -> np.ndarray:
    """(B, n_per) draws, one row of samples per context."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((contexts.shape[0], n_per))
    return _push_np(z, contexts, h_hat, params, config, T)


def flow_cdf(
    r, context, h_hat, params: ParamStore, config: ModelConfig, T: int = 1
) -> np.ndarray:
    """Predictive CDF: standard-normal CDF of the inverse-mapped target."""
    return ndtr(flow_inverse_np(r, context, h_hat, params, config, T))


def gaussian_head_logpdf(r, context: Tensor, params: ParamStore, T: int = 1) -> Tensor:
    """log N(r; mu, sigma^2) on the sqrt(T)-normalised target, with
    (mu, log sigma) read linearly off the context."""
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    scale = np.sqrt(float(T))
    raw = ad.add(ad.matmul(context, params["head.w"]), params["head.b"])
    mu, log_sig = raw[:, 0], raw[:, 1]
    resid = ad.add(Tensor(r / scale), ad.mul(mu, -1.0))
    quad = ad.mul(ad.mul(ad.square(resid), ad.exp(ad.mul(log_sig, -2.0))), -0.5)
    return ad.add(ad.add(quad, ad.mul(log_sig, -1.0)), -0.5 * LOG_2PI - np.log(scale))


def gaussian_head_moments(context: np.ndarray, params: ParamStore) -> Tuple[np.ndarray, np.ndarray]:
    raw = np.atleast_2d(context) @ params["head.w"].data + params["head.b"].data
    return raw[:, 0], np.exp(raw[:, 1])


def gaussian_head_sample(
    context, n: int, seed: int, params: ParamStore, T: int = 1
) -> np.ndarray:
    mu, sig = gaussian_head_moments(np.atleast_2d(context), params)
    z = np.random.default_rng(seed).standard_normal(n)
    return np.sqrt(float(T)) * (mu[0] + sig[0] * z)


def gaussian_head_cdf(r, context, params: ParamStore, T: int = 1) -> np.ndarray:
    mu, sig = gaussian_head_moments(context, params)
    rn = np.asarray(r) / np.sqrt(float(T))
    return ndtr((rn - mu) / sig)


def logpdf(
    r, context: Tensor, h_hat, params: ParamStore, config: ModelConfig, T: int = 1
) -> Tensor:
    if config.head == "flow":
        return flow_logpdf(r, context, h_hat, params, config, T)
    return gaussian_head_logpdf(r, context, params, T)


def nll(
    targets, context: Tensor, h_hat, params: ParamStore, config: ModelConfig, T: int = 1
) -> Tensor:
    """Mean negative log-likelihood over a non-empty batch."""
    targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    if targets.size == 0:
        raise ValueError("empty batch")
    return ad.tmean(ad.mul(logpdf(targets, context, h_hat, params, config, T), -1.0))
