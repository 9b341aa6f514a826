"""Shared test utilities: model gradient checking against central differences."""

import numpy as np

from sewnet import autodiff as ad
from sewnet.flow import nll
from sewnet.network import ModelConfig, ParamStore, backbone_forward, init_params


def random_config(rng) -> ModelConfig:
    use_dwt = bool(rng.integers(0, 2))
    return ModelConfig(
        L=int(rng.integers(0, 4)),
        n_filters=int(rng.choice([4, 8])),
        kernel_size=int(rng.choice([2, 3])),
        flow_layers=int(rng.integers(1, 4)),
        weight_tied=bool(rng.integers(0, 2)),
        use_dwt=use_dwt,
        use_film=bool(rng.integers(0, 2)),
        head=str(rng.choice(["flow", "gaussian"])),
    )


def perturb_conditioners(params: ParamStore, rng, scale=0.3):
    """Move the zero-initialised final layers off identity so their
    gradients are generic."""
    for name in params.names():
        t = params[name]
        if name.endswith(".w2") or name.endswith(".b2") or name.startswith("head."):
            t.data = t.data + scale * rng.standard_normal(t.data.shape)


def model_loss(windows, targets, h_hat, config, params):
    ctx = backbone_forward(windows, config, params, h_hat)
    return nll(targets, ctx, h_hat, params, config)


def gradcheck_model(config: ModelConfig, seed: int, step=1e-4, max_entries=5):
    """Analytic vs central-difference gradients for every parameter tensor.

    Returns the worst relative error err = |ag - fd| / max(1, |ag| + |fd|)
    over sampled entries of every tensor.
    """
    rng = np.random.default_rng(seed)
    params = init_params(config, seed=seed)
    perturb_conditioners(params, rng)
    B, W = 3, 8
    windows = rng.standard_normal((B, W))
    targets = rng.standard_normal(B)
    h_hat = rng.uniform(0.2, 0.8, B)

    params.zero_grad()
    loss = model_loss(windows, targets, h_hat, config, params)
    loss.backward()
    analytic = {n: (params[n].grad.copy() if params[n].grad is not None else np.zeros_like(params[n].data))
                for n in params.names()}

    worst = 0.0
    for name in params.names():
        t = params[name]
        flat = t.data.reshape(-1)
        k = min(max_entries, flat.size)
        idxs = rng.choice(flat.size, size=k, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + step
            up = float(model_loss(windows, targets, h_hat, config, params).data)
            flat[i] = orig - step
            dn = float(model_loss(windows, targets, h_hat, config, params).data)
            flat[i] = orig
            fd = (up - dn) / (2 * step)
            agrad = analytic[name].reshape(-1)[i]
            err = abs(agrad - fd) / max(1.0, abs(agrad) + abs(fd))
            worst = max(worst, err)
    return worst
