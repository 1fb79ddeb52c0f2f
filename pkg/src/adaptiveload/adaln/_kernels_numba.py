"""Numba kernels for the fused LayerNorm-Modulate operator.

Explicit loop nests mirror the intended grid layout: the naive reduction
walks the sequence dimension in ascending order per feature, and the d-tile
reduction fixes a feature index and accumulates sequence tiles vertically.
Per-feature accumulation order is ascending n in both, so the two agree
bitwise in double precision.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _forward_kernel(x, scale, shift, eps, y, mu, rstd):
    n_rows, d = x.shape
    for n in range(n_rows):
        s = 0.0
        for j in range(d):
            s += x[n, j]
        m = s / d
        v = 0.0
        for j in range(d):
            t = x[n, j] - m
            v += t * t
        r = 1.0 / math.sqrt(v / d + eps)
        mu[n] = m
        rstd[n] = r
        for j in range(d):
            y[n, j] = (x[n, j] - m) * r * (1.0 + scale[j]) + shift[j]


def forward(x, scale, shift, eps):
    y = np.empty_like(x)
    mu = np.empty(x.shape[0], dtype=np.float64)
    rstd = np.empty(x.shape[0], dtype=np.float64)
    _forward_kernel(x, scale, shift, eps, y, mu, rstd)
    return y, mu, rstd


@njit(cache=True)
def _backward_dx_kernel(dy, x, scale, mu, rstd, dx):
    n_rows, d = x.shape
    for n in range(n_rows):
        m = mu[n]
        r = rstd[n]
        gs = 0.0
        gxs = 0.0
        for j in range(d):
            g = dy[n, j] * (1.0 + scale[j])
            gs += g
            gxs += g * (x[n, j] - m) * r
        g_mean = gs / d
        gx_mean = gxs / d
        for j in range(d):
            g = dy[n, j] * (1.0 + scale[j])
            xh = (x[n, j] - m) * r
            dx[n, j] = r * (g - g_mean - xh * gx_mean)


def backward_dx(dy, x, scale, mu, rstd):
    dx = np.empty_like(x)
    _backward_dx_kernel(dy, x, scale, mu, rstd, dx)
    return dx


@njit(cache=True)
def _reduce_naive_kernel(dy, x, mu, rstd, dscale, dshift):
    n_rows, d = x.shape
    for j in range(d):
        dscale[j] = 0.0
        dshift[j] = 0.0
    for n in range(n_rows):
        m = mu[n]
        r = rstd[n]
        for j in range(d):
            xh = (x[n, j] - m) * r
            dshift[j] += dy[n, j]
            dscale[j] += dy[n, j] * xh


def backward_naive(dy, x, scale, mu, rstd):
    dscale = np.empty(x.shape[1], dtype=np.float64)
    dshift = np.empty(x.shape[1], dtype=np.float64)
    _reduce_naive_kernel(dy, x, mu, rstd, dscale, dshift)
    dx = backward_dx(dy, x, scale, mu, rstd)
    return dx, dscale, dshift


@njit(cache=True)
def _dtile_kernel_f64(dy, x, mu, rstd, d_tile, n_tile, dscale, dshift):
    n_rows, d = x.shape
    for d0 in range(0, d, d_tile):
        d1 = min(d0 + d_tile, d)
        for j in range(d0, d1):
            acc_sh = 0.0
            acc_sc = 0.0
            for n0 in range(0, n_rows, n_tile):
                n1 = min(n0 + n_tile, n_rows)
                for n in range(n0, n1):
                    xh = (x[n, j] - mu[n]) * rstd[n]
                    acc_sh += dy[n, j]
                    acc_sc += dy[n, j] * xh
            dshift[j] = acc_sh
            dscale[j] = acc_sc


@njit(cache=True)
def _dtile_kernel_f32(dy, x, mu, rstd, d_tile, n_tile, dscale, dshift):
    n_rows, d = x.shape
    for d0 in range(0, d, d_tile):
        d1 = min(d0 + d_tile, d)
        for j in range(d0, d1):
            acc_sh = np.float32(0.0)
            acc_sc = np.float32(0.0)
            for n0 in range(0, n_rows, n_tile):
                n1 = min(n0 + n_tile, n_rows)
                for n in range(n0, n1):
                    xh = (x[n, j] - mu[n]) * rstd[n]
                    acc_sh = np.float32(acc_sh + np.float32(dy[n, j]))
                    acc_sc = np.float32(acc_sc + np.float32(dy[n, j] * xh))
            dshift[j] = acc_sh
            dscale[j] = acc_sc


def dtile_reduce(dy, x, mu, rstd, d_tile, n_tile, fp32_accum):
    dscale = np.empty(x.shape[1], dtype=np.float64)
    dshift = np.empty(x.shape[1], dtype=np.float64)
    if fp32_accum:
        _dtile_kernel_f32(dy, x, mu, rstd, d_tile, n_tile, dscale, dshift)
    else:
        _dtile_kernel_f64(dy, x, mu, rstd, d_tile, n_tile, dscale, dshift)
    return dscale, dshift
