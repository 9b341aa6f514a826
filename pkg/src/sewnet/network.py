"""Gated dilated-convolution backbone with optional kernel tying and FiLM.

The backbone is a stack of residual gated blocks at dilations 1, 2, 4, ...;
with ``weight_tied`` every dilation level reads the same kernel triple
(the mechanism that buys dyadic scale equivariance and the L-fold parameter
saving), otherwise each level owns a private triple. A two-channel one-level
DWT front end and a scaling-exponent FiLM modulator are both optional and
both identity-safe at initialisation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .wavelet import dwt_batch

HEADS = ("flow", "gaussian")
SPEC_LOSS_MODES = ("welch", "variance_surrogate", "off")


@dataclass(frozen=True)
class ModelConfig:
    L: int = 4
    n_filters: int = 16
    kernel_size: int = 3
    flow_layers: int = 3
    weight_tied: bool = True
    use_dwt: bool = True
    use_film: bool = True
    head: str = "flow"
    spec_loss: str = "variance_surrogate"
    lambda_spec: float = 0.05
    lambda_shape: float = 0.1

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("L must be >= 0")
        if self.kernel_size < 2:
            raise ValueError("kernel_size must be >= 2")
        if self.flow_layers < 1:
            raise ValueError("flow_layers must be >= 1")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")
        if self.spec_loss not in SPEC_LOSS_MODES:
            raise ValueError(f"spec_loss must be one of {SPEC_LOSS_MODES}")

    @property
    def in_channels(self) -> int:
        return 2 if self.use_dwt else 1

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def conv_param_count(config: ModelConfig) -> int:
    """Learnable parameters in the dilated residual blocks only.

    Per block: two gated convolutions (n_f * n_f * k weights + n_f biases
    each) plus the 1x1 output projection (n_f * n_f + n_f). Tying collapses
    the L blocks onto one; the input projection, FiLM perceptron, and flow
    head are excluded from this count.
    """
    nf, k = config.n_filters, config.kernel_size
    per_block = 2 * (nf * nf * k + nf) + (nf * nf + nf)
    return per_block if config.weight_tied else config.L * per_block


class ParamStore:
    """Named parameter tensors with gradient slots, deterministic order."""

    def __init__(self, params: Dict[str, Tensor]):
        self._params = dict(params)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> List[str]:
        return sorted(self._params)

    def tensors(self) -> List[Tensor]:
        return [self._params[n] for n in self.names()]

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def n_params(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Immutable value copy, safe to hand to other threads."""
        return {n: self._params[n].data.copy() for n in self.names()}

    def load_snapshot(self, snap: Dict[str, np.ndarray]):
        for n, v in snap.items():
            self._params[n].data = np.array(v, dtype=np.float64)

    def save_json(self, path: str):
        payload = {
            n: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
            for n, t in sorted(self._params.items())
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    @classmethod
    def load_json(cls, path: str) -> "ParamStore":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        params = {
            n: Tensor(np.array(rec["data"]).reshape(rec["shape"]), requires_grad=True)
            for n, rec in payload.items()
        }
        return cls(params)

    def block_keys(self) -> List[str]:
        prefixes = {n.split(".")[0] for n in self._params if n.startswith("block")}
        return sorted(prefixes)


_BLOCK_FIELDS = ("w_tanh", "b_tanh", "w_sig", "b_sig", "w_out", "b_out")


def init_params(config: ModelConfig, seed: int = 0) -> ParamStore:
    """Random backbone, identity flow/FiLM/head (zeroed final layers)."""
    rng = np.random.default_rng(seed)
    nf, k = config.n_filters, config.kernel_size
    p: Dict[str, Tensor] = {}

    def t(arr):
        return Tensor(arr, requires_grad=True)

    p["input_proj.w"] = t(rng.normal(0.0, 0.5, (nf, config.in_channels, 1)))
    p["input_proj.b"] = t(np.zeros(nf))

    def block(prefix: str):
        scale = 1.0 / np.sqrt(nf * k)
        p[f"{prefix}.w_tanh"] = t(rng.normal(0.0, scale, (nf, nf, k)))
        p[f"{prefix}.b_tanh"] = t(np.zeros(nf))
        p[f"{prefix}.w_sig"] = t(rng.normal(0.0, scale, (nf, nf, k)))
        p[f"{prefix}.b_sig"] = t(np.zeros(nf))
        p[f"{prefix}.w_out"] = t(rng.normal(0.0, 1.0 / np.sqrt(nf), (nf, nf, 1)))
        p[f"{prefix}.b_out"] = t(np.zeros(nf))

    if config.weight_tied:
        block("block")
    else:
        for lvl in range(config.L):
            block(f"block{lvl}")

    if config.use_film:
        p["film.w1"] = t(rng.normal(0.0, 1.0, (1, nf)))
        p["film.b1"] = t(np.zeros(nf))
        p["film.w2"] = t(np.zeros((nf, 2 * nf)))  # zero: gamma=1, beta=0 at init
        p["film.b2"] = t(np.zeros(2 * nf))

    if config.head == "flow":
        for j in range(config.flow_layers):
            p[f"flow{j}.w1"] = t(rng.normal(0.0, 1.0 / np.sqrt(nf + 1), (nf + 1, nf)))
            p[f"flow{j}.b1"] = t(np.zeros(nf))
            p[f"flow{j}.w2"] = t(np.zeros((nf, 4)))  # zero: identity transform at init
            p[f"flow{j}.b2"] = t(np.zeros(4))
    else:
        p["head.w"] = t(np.zeros((nf, 2)))  # zero: N(0,1) predictive at init
        p["head.b"] = t(np.zeros(2))

    return ParamStore(p)


def block_params(params: ParamStore, config: ModelConfig, level: int) -> Dict[str, Tensor]:
    prefix = "block" if config.weight_tied else f"block{level}"
    return {f: params[f"{prefix}.{f}"] for f in _BLOCK_FIELDS}


def causal_dilated_conv(x: Tensor, w: Tensor, b: Tensor, d: int) -> Tensor:
    """Causal dilated convolution as a custom autodiff op.

    Output length equals input length (implicit zero left padding); no index
    beyond the current time step is read.
    """
    if d < 1:
        raise ValueError("dilation must be >= 1")
    if x.data.ndim != 3 or x.data.shape[1] != w.data.shape[1]:
        raise ValueError(
            f"channel mismatch: input {x.data.shape} vs kernel {w.data.shape}"
        )
    out = kernels.conv_forward(
        np.ascontiguousarray(x.data), np.ascontiguousarray(w.data),
        np.ascontiguousarray(b.data), d,
    )

    def backward(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            x._accumulate(kernels.conv_backward_input(g, w.data, d))
        if w.requires_grad:
            w._accumulate(kernels.conv_backward_kernel(g, np.ascontiguousarray(x.data), w.data.shape[2], d))
        if b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2)))

    return ad._make(out, (x, w, b), backward)


FilmPair = Tuple[Tensor, Tensor]


def film_params(params: ParamStore, h_hat: np.ndarray, config: ModelConfig) -> FilmPair:
    """Per-channel (gamma, beta) from the scaling-exponent conditioner.

    One shared modulation pair, applied at every block. The final perceptron
    layer is zero-initialised so gamma = 1, beta = 0 until trained.
    """
    nf = config.n_filters
    hh = Tensor(np.asarray(h_hat, dtype=np.float64).reshape(-1, 1))
    h1 = ad.tanh(ad.add(ad.matmul(hh, params["film.w1"]), params["film.b1"]))
    raw = ad.add(ad.matmul(h1, params["film.w2"]), params["film.b2"])
    gamma = ad.reshape(ad.add(raw[:, :nf], 1.0), (-1, nf, 1))
    beta = ad.reshape(raw[:, nf:], (-1, nf, 1))
    return gamma, beta


def _gated_block(x: Tensor, p: Dict[str, Tensor], d: int, film: Optional[FilmPair]) -> Tensor:
    gate_t = ad.tanh(causal_dilated_conv(x, p["w_tanh"], p["b_tanh"], d))
    gate_s = ad.sigmoid(causal_dilated_conv(x, p["w_sig"], p["b_sig"], d))
    y = ad.add(x, causal_dilated_conv(ad.mul(gate_t, gate_s), p["w_out"], p["b_out"], 1))
    if film is not None:
        gamma, beta = film
        y = ad.add(ad.mul(gamma, y), beta)
    return y


def sewn_block(x: Tensor, shared: Dict[str, Tensor], d: int, film: Optional[FilmPair] = None) -> Tensor:
    """Residual gated block whose kernel triple is shared across dilations."""
    return _gated_block(x, shared, d, film)


def wavenet_block(x: Tensor, own: Dict[str, Tensor], d: int, film: Optional[FilmPair] = None) -> Tensor:
    """Same computation with level-private parameters (no tying invariant)."""
    return _gated_block(x, own, d, film)


def backbone_forward(
    windows: np.ndarray,
    config: ModelConfig,
    params: ParamStore,
    h_hat,
) -> Tensor:
    """Window batch -> final-time-step context vectors, (B, n_filters).

    Optional one-level DWT to a 2-channel half-length stack, 1x1 input
    projection, then L gated blocks at dilations 2^0 .. 2^(L-1) with the
    shared FiLM modulation after each.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim == 1:
        windows = windows[None, :]
    h_hat = np.broadcast_to(np.asarray(h_hat, dtype=np.float64), (windows.shape[0],))
    if config.use_dwt:
        if windows.shape[1] < 4:
            raise ValueError("window too short for the DWT front end")
        x0 = dwt_batch(windows)
    else:
        x0 = windows[:, None, :]
    c = causal_dilated_conv(Tensor(x0), params["input_proj.w"], params["input_proj.b"], 1)
    film = film_params(params, h_hat, config) if config.use_film else None
    for lvl in range(config.L):
        c = _gated_block(c, block_params(params, config, lvl), 2**lvl, film)
    return c[:, :, -1]
