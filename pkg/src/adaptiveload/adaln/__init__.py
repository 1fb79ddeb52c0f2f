"""Reference fused LayerNorm-Modulate operator.

Forward standardizes each token row (population variance, epsilon inside the
square root) and applies y = xhat * (1 + scale) + shift, caching per-token
(mu, rstd) for the backward pass. Two backward reductions are provided for
the modulation-parameter gradients: a naive sequence-order reduction and a
feature-tiled ("d-tile") reduction with optional float32 accumulators.

Hot loops run through numba when available; set ADAPTIVELOAD_NUMBA=0 to force
the pure-numpy fallback.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidTile, NonFiniteInput, ShapeMismatch, StaleStats

__all__ = [
    "AdalnOutput",
    "AdalnGrads",
    "TileConfig",
    "MemoryMode",
    "BACKEND",
    "adaln_forward",
    "adaln_backward_naive",
    "adaln_backward_dtile",
    "activation_bytes",
    "gradcheck",
    "GradcheckReport",
]


def _select_backend():
    if os.environ.get("ADAPTIVELOAD_NUMBA", "1") == "0":
        from . import _kernels_numpy as impl

        return impl, "numpy"
    try:
        from . import _kernels_numba as impl

        return impl, "numba"
    except ImportError:
        from . import _kernels_numpy as impl

        return impl, "numpy"


_impl, BACKEND = _select_backend()


@dataclass(frozen=True)
class AdalnOutput:
    y: np.ndarray
    mu: np.ndarray
    rstd: np.ndarray


@dataclass(frozen=True)
class AdalnGrads:
    dx: np.ndarray
    dscale: np.ndarray
    dshift: np.ndarray


@dataclass(frozen=True)
class TileConfig:
    d_tile: int
    n_tile: int


class MemoryMode(enum.Enum):
    NAIVE = "naive"
    FUSED = "fused"


def _as_f64(a, name: str) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    if not np.isfinite(out).all():
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return out


def _check_inputs(x, scale, shift):
    if x.ndim != 2:
        raise ShapeMismatch(f"x must be 2-D [N, D], got {x.shape}")
    n, d = x.shape
    if scale.shape != (d,) or shift.shape != (d,):
        raise ShapeMismatch(
            f"scale/shift must have shape ({d},), got {scale.shape}/{shift.shape}"
        )
    return n, d


def adaln_forward(x, scale, shift, eps: float = 1e-6) -> AdalnOutput:
    """Normalize each token row and modulate: y = xhat * (1 + scale) + shift."""
    x = _as_f64(x, "x")
    scale = _as_f64(scale, "scale")
    shift = _as_f64(shift, "shift")
    _check_inputs(x, scale, shift)
    if eps <= 0:
        raise ValueError("eps must be positive")
    y, mu, rstd = _impl.forward(x, scale, shift, eps)
    return AdalnOutput(y=y, mu=mu, rstd=rstd)


def _check_cached(x, mu, rstd):
    n = x.shape[0]
    if mu.shape != (n,) or rstd.shape != (n,):
        raise StaleStats(
            f"cached stats shapes {mu.shape}/{rstd.shape} do not match N={n}"
        )


def adaln_backward_naive(dy, x, scale, mu, rstd) -> AdalnGrads:
    """Backward with the conventional sequence-order gradient reduction."""
    dy = _as_f64(dy, "dy")
    x = _as_f64(x, "x")
    scale = _as_f64(scale, "scale")
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    rstd = np.ascontiguousarray(rstd, dtype=np.float64)
    if dy.shape != x.shape:
        raise ShapeMismatch(f"dy shape {dy.shape} != x shape {x.shape}")
    _check_cached(x, mu, rstd)
    dx, dscale, dshift = _impl.backward_naive(dy, x, scale, mu, rstd)
    return AdalnGrads(dx=dx, dscale=dscale, dshift=dshift)


def adaln_backward_dtile(
    dy, x, scale, mu, rstd, tiles: TileConfig, fp32_accum: bool = False
) -> AdalnGrads:
    """Backward with the feature-tiled reduction for dscale/dshift.

    dx is mathematically identical to the naive variant; only the reduction
    structure of the modulation-parameter gradients changes. With
    fp32_accum=True the per-feature accumulators run in single precision and
    are promoted to double at the end.
    """
    dy = _as_f64(dy, "dy")
    x = _as_f64(x, "x")
    scale = _as_f64(scale, "scale")
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    rstd = np.ascontiguousarray(rstd, dtype=np.float64)
    if dy.shape != x.shape:
        raise ShapeMismatch(f"dy shape {dy.shape} != x shape {x.shape}")
    _check_cached(x, mu, rstd)
    n, d = x.shape
    if not (1 <= tiles.d_tile <= d and 1 <= tiles.n_tile <= n):
        raise InvalidTile(f"tile config {tiles} out of bounds for N={n}, D={d}")
    dscale, dshift = _impl.dtile_reduce(
        dy, x, mu, rstd, tiles.d_tile, tiles.n_tile, fp32_accum
    )
    dx = _impl.backward_dx(dy, x, scale, mu, rstd)
    return AdalnGrads(dx=dx, dscale=dscale, dshift=dshift)


def activation_bytes(
    n: int, d: int, element_bytes: int, stat_bytes: int, mode: MemoryMode
) -> int:
    """Activation footprint of the discrete chain vs. the fused node.

    Naive keeps three full N x D activations (input, normalized tensor, and
    the modulated intermediate) plus per-token mean/variance; fused keeps
    only the input plus the cached (mu, rstd) statistics.
    """
    if min(n, d, element_bytes, stat_bytes) < 1:
        raise ValueError("all counts must be >= 1")
    stats = 2 * n * stat_bytes
    if mode is MemoryMode.NAIVE:
        return 3 * n * d * element_bytes + stats
    return n * d * element_bytes + stats


# --- gradient verification --------------------------------------------------

DEFAULT_SIZES = ((8, 16), (64, 128), (512, 256), (4096, 64))

# Above this element count, dx is checked with random directional probes
# instead of per-coordinate differences.
_COORD_LIMIT = 8192
_NUM_PROBES = 16


@dataclass(frozen=True)
class GradcheckReport:
    entries: tuple[dict, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e["pass"] for e in self.entries)


def _loss(x, scale, shift, dy, eps):
    return float(np.sum(dy * adaln_forward(x, scale, shift, eps).y))


def _fd_coordinate(f, arr, h):
    grad = np.empty_like(arr)
    flat = arr.ravel()
    g = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        lp = f()
        flat[i] = orig - h
        lm = f()
        flat[i] = orig
        g[i] = (lp - lm) / (2.0 * h)
    return grad


def _max_rel_err(analytic, reference):
    denom = max(float(np.abs(reference).max()), 1e-12)
    return float(np.abs(analytic - reference).max()) / denom


def _check_size(n, d, tolerance, tiles, fp32_accum, rng, eps, h):
    x = rng.standard_normal((n, d))
    scale = 0.1 * rng.standard_normal(d)
    shift = 0.1 * rng.standard_normal(d)
    dy = rng.standard_normal((n, d))
    out = adaln_forward(x, scale, shift, eps)
    variants = {
        "naive": adaln_backward_naive(dy, x, scale, out.mu, out.rstd),
        "dtile": adaln_backward_dtile(
            dy, x, scale, out.mu, out.rstd, tiles, fp32_accum
        ),
    }

    loss_x = lambda: _loss(x, scale, shift, dy, eps)
    if n * d <= _COORD_LIMIT:
        fd_dx = _fd_coordinate(loss_x, x, h)
        dx_err = {name: _max_rel_err(g.dx, fd_dx) for name, g in variants.items()}
    else:
        dx_err = {name: 0.0 for name in variants}
        for _ in range(_NUM_PROBES):
            v = rng.standard_normal((n, d))
            v /= np.linalg.norm(v)
            x += h * v
            lp = loss_x()
            x -= 2.0 * h * v
            lm = loss_x()
            x += h * v
            fd = (lp - lm) / (2.0 * h)
            denom = max(abs(fd), 1e-12)
            for name, g in variants.items():
                err = abs(float(np.sum(g.dx * v)) - fd) / denom
                dx_err[name] = max(dx_err[name], err)

    fd_dscale = _fd_coordinate(lambda: _loss(x, scale, shift, dy, eps), scale, h)
    fd_dshift = _fd_coordinate(lambda: _loss(x, scale, shift, dy, eps), shift, h)

    entries = []
    for name, g in variants.items():
        for tensor, err in (
            ("dx", dx_err[name]),
            ("dscale", _max_rel_err(g.dscale, fd_dscale)),
            ("dshift", _max_rel_err(g.dshift, fd_dshift)),
        ):
            entries.append(
                {
                    "n": n,
                    "d": d,
                    "variant": name,
                    "tensor": tensor,
                    "max_rel_err": err,
                    "pass": err <= tolerance,
                }
            )
    return entries


def gradcheck(
    sizes=DEFAULT_SIZES,
    tolerance: float = 1e-4,
    tiles: TileConfig | None = None,
    fp32_accum: bool = False,
    eps: float = 1e-6,
    step: float = 1e-3,
    seed: int = 0,
) -> GradcheckReport:
    """Central finite-difference verification of both backward variants."""
    if not sizes:
        raise ValueError("sizes must be non-empty")
    rng = np.random.default_rng(seed)
    entries = []
    for n, d in sizes:
        cfg = tiles or TileConfig(d_tile=min(32, d), n_tile=min(128, n))
        cfg = TileConfig(min(cfg.d_tile, d), min(cfg.n_tile, n))
        entries.extend(_check_size(n, d, tolerance, cfg, fp32_accum, rng, eps, step))
    return GradcheckReport(entries=tuple(entries), tolerance=tolerance)
