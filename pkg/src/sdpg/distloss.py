"""One-dimensional distribution comparison: quantile Huber loss and sorted OT.

Sample vectors are plain 1-D numpy arrays. The batched helpers accept
(M, n) arrays and treat each row as one distribution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .netcore import NumericError, ShapeError


@dataclass(frozen=True)
class QuantileGrid:
    n: int
    tau_hat: np.ndarray
    zeta: float = 1.0


def midpoint_quantiles(n: int, zeta: float = 1.0) -> QuantileGrid:
    """Levels (2i - 1) / (2n), i = 1..n: midpoints of [(i-1)/n, i/n]."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not zeta > 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    n = int(n)
    tau = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    tau.setflags(write=False)
    return QuantileGrid(n, tau, float(zeta))


def huber(v, zeta: float = 1.0):
    """0.5 v^2 inside |v| < zeta, zeta (|v| - zeta / 2) outside."""
    if not zeta > 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    out = np.where(a < zeta, 0.5 * v * v, zeta * (a - 0.5 * zeta))
    return out if out.ndim else float(out)


def _check_pair(z, z_target, grid):
    z = np.asarray(z)
    z = z if z.dtype.kind == "f" else z.astype(float)
    z_target = np.asarray(z_target, dtype=z.dtype)
    if z.shape != z_target.shape:
        raise ShapeError(f"sample shapes differ: {z.shape} vs {z_target.shape}")
    if z.shape[-1] != grid.n:
        raise ShapeError(f"expected {grid.n} samples per distribution, got {z.shape[-1]}")
    return z, z_target


def _pairwise(z, z_target, grid):
    # v[..., i, j] = target_j - z_i; level tau_i rides on the generated sample
    v = z_target[..., None, :] - z[..., :, None]
    tau = grid.tau_hat.astype(v.dtype)[:, None]
    weight = np.where(v < 0.0, 1.0 - tau, tau)
    return v, weight


@numba.njit(cache=True, fastmath=True)
def _qh_kernel(z, t, tau, zeta):
    # fused loss + gradient; rows of z are sorted samples, rows of t targets
    M, n = z.shape
    loss = np.zeros(M)
    grad = np.zeros((M, n))
    for k in range(M):
        acc = 0.0
        for i in range(n):
            ti = tau[i]
            zi = z[k, i]
            g = 0.0
            for j in range(n):
                v = t[k, j] - zi
                w = 1.0 - ti if v < 0.0 else ti
                a = abs(v)
                c = min(a, zeta)
                acc += w * c * (a - 0.5 * c)  # == huber(v)
                g += w * min(max(v, -zeta), zeta)
            grad[k, i] = -g
        loss[k] = acc
    scale = 1.0 / (n * n)
    return loss * scale, grad * scale


def quantile_huber_loss_and_grad(z, z_target, grid: QuantileGrid):
    """Loss per distribution and its gradient in ``z`` (targets held fixed).

    ``z`` must be sorted ascending along the last axis so that the i-th
    smallest sample is paired with the i-th quantile level. Accepts a single
    vector or an (M, n) batch.
    """
    z, z_target = _check_pair(z, z_target, grid)
    shape = z.shape
    zz = np.ascontiguousarray(z, dtype=np.float64).reshape(-1, grid.n)
    tt = np.ascontiguousarray(z_target, dtype=np.float64).reshape(-1, grid.n)
    loss, grad = _qh_kernel(zz, tt, grid.tau_hat, float(grid.zeta))
    loss = loss.reshape(shape[:-1])
    return (float(loss) if loss.ndim == 0 else loss), grad.reshape(shape)


def quantile_huber_loss(z, z_target, grid: QuantileGrid):
    """(1/n^2) sum_ij |tau_i - 1[v_ij < 0]| huber(v_ij), with v_ij = z_target_j - z_i."""
    return quantile_huber_loss_and_grad(z, z_target, grid)[0]


def quantile_huber_loss_grad(z, z_target, grid: QuantileGrid) -> np.ndarray:
    """Derivative of :func:`quantile_huber_loss` in each ``z_i``."""
    return quantile_huber_loss_and_grad(z, z_target, grid)[1]


def pinball_loss(z, z_target, grid: QuantileGrid):
    """Quantile-regression loss with |v| in place of the Huber kernel."""
    z, z_target = _check_pair(z, z_target, grid)
    v, weight = _pairwise(z, z_target, grid)
    out = (weight * np.abs(v)).sum(axis=(-2, -1)) / grid.n ** 2
    return out if np.ndim(out) else float(out)


def sort_ascending(values, axis=-1):
    """Stable ascending sort. Returns (sorted, perm) with sorted = values[perm]."""
    values = np.asarray(values)
    values = values if values.dtype.kind == "f" else values.astype(float)
    if np.isnan(values).any():
        raise NumericError("cannot sort samples containing NaN")
    perm = np.argsort(values, axis=axis, kind="stable")
    return np.take_along_axis(values, perm, axis=axis), perm


def sorted_wasserstein(xs, ys, p: float = 1.0) -> float:
    """p-Wasserstein distance between two equal-size empirical distributions."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ShapeError("empty sample set")
    if xs.size != ys.size:
        raise ShapeError(f"sample counts differ: {xs.size} vs {ys.size}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    d = np.abs(np.sort(xs) - np.sort(ys))
    return float(np.mean(d ** p) ** (1.0 / p))
