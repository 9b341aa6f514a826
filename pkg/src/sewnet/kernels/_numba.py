"""Numba-compiled hot kernels. Same contracts and summation order as `_numpy`."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def conv_forward(x, w, b, d):
    B, Ci, N = x.shape
    Co = w.shape[0]
    K = w.shape[2]
    y = np.empty((B, Co, N))
    for bb in range(B):
        for o in range(Co):
            for t in range(N):
                acc = b[o]
                for i in range(K):
                    src = t - d * i
                    if src >= 0:
                        for c in range(Ci):
                            acc += w[o, c, i] * x[bb, c, src]
                y[bb, o, t] = acc
    return y


@njit(cache=True)
def conv_backward_input(gy, w, d):
    B, Co, N = gy.shape
    Ci = w.shape[1]
    K = w.shape[2]
    gx = np.zeros((B, Ci, N))
    for bb in range(B):
        for o in range(Co):
            for t in range(N):
                g = gy[bb, o, t]
                for i in range(K):
                    src = t - d * i
                    if src >= 0:
                        for c in range(Ci):
                            gx[bb, c, src] += w[o, c, i] * g
    return gx


@njit(cache=True)
def conv_backward_kernel(gy, x, K, d):
    B, Co, N = gy.shape
    Ci = x.shape[1]
    gw = np.zeros((Co, Ci, K))
    for bb in range(B):
        for o in range(Co):
            for t in range(N):
                g = gy[bb, o, t]
                for i in range(K):
                    src = t - d * i
                    if src >= 0:
                        for c in range(Ci):
                            gw[o, c, i] += g * x[bb, c, src]
    return gw


@njit(cache=True)
def cf_magnitude(samples, k_grid):
    n = samples.shape[0]
    m = k_grid.shape[0]
    out = np.empty(m)
    for j in range(m):
        k = k_grid[j]
        re = 0.0
        im = 0.0
        for t in range(n):
            re += math.cos(k * samples[t])
            im += math.sin(k * samples[t])
        out[j] = math.hypot(re / n, im / n)
    return out


@njit(cache=True)
def garch_filter(r2, omega, alpha, beta, s0):
    N = r2.shape[0]
    s2 = np.empty(N)
    s2[0] = s0
    for t in range(1, N):
        s2[t] = omega + alpha * r2[t - 1] + beta * s2[t - 1]
    return s2


@njit(cache=True)
def hosking_fgn(acov, z):
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
        for j in range(n + 1):
            phi_prev[j] = phi[j]
    return x
