"""Pure-numpy implementations of the hot kernels.

These are the reference implementations; `kernels._numba` compiles the same
loops with numba. Accumulation order over kernel taps is fixed (tap-major)
so that dyadic-downsampling identities hold bit-exactly: the even-indexed
outputs of a dilation-2d convolution and the outputs of a dilation-d
convolution on the downsampled input see identical operand sequences.
"""

from __future__ import annotations

import math

import numpy as np


def conv_forward(x, w, b, d):
    """Causal dilated convolution, zero left padding.

    x: (B, C_in, N), w: (C_out, C_in, K), b: (C_out,), dilation d >= 1.
    Returns (B, C_out, N) with y[.., t] = b + sum_i w[.., i] @ x[.., t - d*i].
    """
    B, Ci, N = x.shape
    Co, _, K = w.shape
    y = np.broadcast_to(b[:, None], (B, Co, N)).copy()
    for i in range(K):
        s = d * i
        if s >= N:
            continue
        if s == 0:
            y += np.matmul(w[:, :, i], x)
        else:
            y[:, :, s:] += np.matmul(w[:, :, i], x[:, :, : N - s])
    return y


def conv_backward_input(gy, w, d):
    """Gradient of conv_forward w.r.t. x: gx[.., t] = sum_i w[., ., i]^T gy[.., t + d*i]."""
    B, Co, N = gy.shape
    _, Ci, K = w.shape
    gx = np.zeros((B, Ci, N))
    for i in range(K):
        s = d * i
        if s >= N:
            continue
        if s == 0:
            gx += np.matmul(w[:, :, i].T, gy)
        else:
            gx[:, :, : N - s] += np.matmul(w[:, :, i].T, gy[:, :, s:])
    return gx


def conv_backward_kernel(gy, x, K, d):
    """Gradient of conv_forward w.r.t. w: gw[o, c, i] = sum_{b,t} gy[b,o,t] x[b,c,t-d*i]."""
    B, Co, N = gy.shape
    _, Ci, _ = x.shape
    gw = np.zeros((Co, Ci, K))
    for i in range(K):
        s = d * i
        if s >= N:
            continue
        gw[:, :, i] = np.einsum("bon,bcn->oc", gy[:, :, s:], x[:, :, : N - s])
    return gw


def cf_magnitude(samples, k_grid):
    """|mean_j exp(i k s_j)| for each wavenumber in k_grid, chunked over k."""
    n = samples.shape[0]
    out = np.empty(k_grid.shape[0])
    chunk = max(1, int(4_000_000 // max(n, 1)))
    for lo in range(0, k_grid.shape[0], chunk):
        ks = k_grid[lo : lo + chunk, None] * samples[None, :]
        re = np.cos(ks).mean(axis=1)
        im = np.sin(ks).mean(axis=1)
        out[lo : lo + chunk] = np.hypot(re, im)
    return out


def garch_filter(r2, omega, alpha, beta, s0):
    """Conditional-variance recursion s2[t] = omega + alpha*r2[t-1] + beta*s2[t-1]."""
    N = r2.shape[0]
    s2 = np.empty(N)
    s2[0] = s0
    for t in range(1, N):
        s2[t] = omega + alpha * r2[t - 1] + beta * s2[t - 1]
    return s2


def hosking_fgn(acov, z):
    """Durbin-Levinson sampling of a stationary Gaussian sequence.

    acov: autocovariance at lags 0..N-1, z: iid standard normals.
    O(N^2); used when the circulant embedding is not nonnegative.
    """
    N = acov.shape[0]
    x = np.empty(N)
    phi = np.zeros(N)
    phi_prev = np.zeros(N)
    v = acov[0]
    x[0] = math.sqrt(v) * z[0]
    for n in range(1, N):
        acc = acov[n]
        for j in range(1, n):
            acc -= phi_prev[j] * acov[n - j]
        phi_n = acc / v
        phi[n] = phi_n
        for j in range(1, n):
            phi[j] = phi_prev[j] - phi_n * phi_prev[n - j]
        v *= 1.0 - phi_n * phi_n
        mean = 0.0
        for j in range(1, n + 1):
            mean += phi[j] * x[n - j]
        x[n] = mean + math.sqrt(v) * z[n]
        phi_prev[: n + 1] = phi[: n + 1]
    return x
