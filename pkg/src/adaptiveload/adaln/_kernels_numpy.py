"""Pure-numpy fallback kernels for the fused LayerNorm-Modulate operator.

Selected when numba is unavailable or ADAPTIVELOAD_NUMBA=0. Semantics match
the numba kernels; floating-point accumulation order may differ at the
rounding level because numpy uses pairwise summation.
"""

from __future__ import annotations

import numpy as np


def forward(x, scale, shift, eps):
    mu = x.mean(axis=1)
    var = ((x - mu[:, None]) ** 2).mean(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu[:, None]) * rstd[:, None]
    y = xhat * (1.0 + scale)[None, :] + shift[None, :]
    return y, mu, rstd


def backward_dx(dy, x, scale, mu, rstd):
    d = x.shape[1]
    xhat = (x - mu[:, None]) * rstd[:, None]
    g = dy * (1.0 + scale)[None, :]
    g_mean = g.sum(axis=1) / d
    gx_mean = (g * xhat).sum(axis=1) / d
    return rstd[:, None] * (g - g_mean[:, None] - xhat * gx_mean[:, None])


def backward_naive(dy, x, scale, mu, rstd):
    xhat = (x - mu[:, None]) * rstd[:, None]
    dshift = dy.sum(axis=0)
    dscale = (dy * xhat).sum(axis=0)
    dx = backward_dx(dy, x, scale, mu, rstd)
    return dx, dscale, dshift


def dtile_reduce(dy, x, mu, rstd, d_tile, n_tile, fp32_accum):
    """Feature-tiled reduction of dscale/dshift: d-tiles outer, sequence
    tiles accumulated per feature index."""
    n, d = x.shape
    acc_dtype = np.float32 if fp32_accum else np.float64
    dscale = np.zeros(d, dtype=acc_dtype)
    dshift = np.zeros(d, dtype=acc_dtype)
    for d0 in range(0, d, d_tile):
        d1 = min(d0 + d_tile, d)
        for n0 in range(0, n, n_tile):
            n1 = min(n0 + n_tile, n)
            dy_t = dy[n0:n1, d0:d1]
            xhat_t = (x[n0:n1, d0:d1] - mu[n0:n1, None]) * rstd[n0:n1, None]
            if fp32_accum:
                dshift[d0:d1] += dy_t.astype(np.float32).sum(axis=0, dtype=np.float32)
                dscale[d0:d1] += (
                    (dy_t * xhat_t).astype(np.float32).sum(axis=0, dtype=np.float32)
                )
            else:
                dshift[d0:d1] += dy_t.sum(axis=0)
                dscale[d0:d1] += (dy_t * xhat_t).sum(axis=0)
    return dscale.astype(np.float64), dshift.astype(np.float64)
