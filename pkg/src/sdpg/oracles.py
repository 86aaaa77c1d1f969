"""Independent reference computations used to check the fast paths.

Everything here is written the slow, obvious way on purpose: explicit loops,
enumeration and root finding. Nothing imports the code it is meant to check.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import optimize, stats


def brute_force_ot(xs, ys, p=1.0) -> float:
    """Optimal matching cost by enumerating all n! assignments."""
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    n = len(xs)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(abs(xs[i] - ys[perm[i]]) ** p for i in range(n)) / n
        best = min(best, cost)
    return best ** (1.0 / p)


def brute_force_quantile_huber(z, z_target, zeta) -> float:
    """Double loop over the asymmetric Huber terms, levels (2i-1)/(2n)."""
    n = len(z)
    total = 0.0
    for i in range(n):
        tau = (i + 0.5) / n
        for j in range(n):
            v = float(z_target[j]) - float(z[i])
            if abs(v) < zeta:
                kernel = 0.5 * v * v
            else:
                kernel = zeta * (abs(v) - 0.5 * zeta)
            indicator = 1.0 if v < 0 else 0.0
            total += abs(tau - indicator) * kernel
    return total / (n * n)


def mixture_cdf(x, weights, means, stds):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for w, m, s in zip(weights, means, stds):
        if s == 0:
            out = out + w * (x >= m)
        else:
            out = out + w * stats.norm.cdf(x, loc=m, scale=s)
    return out


def mixture_quantiles(levels, weights, means, stds) -> np.ndarray:
    """Invert the Gaussian-mixture CDF by bracketed root finding."""
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    weights, means, stds = (np.asarray(a, dtype=float) for a in (weights, means, stds))
    if np.all(stds == 0):
        # discrete mixture: generalized inverse
        order = np.argsort(means)
        cum = np.cumsum(weights[order])
        idx = np.searchsorted(cum, levels - 1e-15)
        return means[order][np.minimum(idx, len(order) - 1)]
    lo = float(np.min(means - 12 * stds)) - 1.0
    hi = float(np.max(means + 12 * stds)) + 1.0
    out = np.empty_like(levels)
    for k, u in enumerate(levels):
        out[k] = optimize.brentq(lambda x: float(mixture_cdf(x, weights, means, stds)) - u,
                                 lo, hi, xtol=1e-13, rtol=1e-13)
    return out


def chain_return_law(means, stds, gamma, start=0):
    """Closed-form Normal law of the discounted chain return: (mean, variance)."""
    mean = 0.0
    var = 0.0
    for k, (m, s) in enumerate(zip(means[start:], stds[start:])):
        mean += gamma ** k * m
        var += gamma ** (2 * k) * s * s
    return mean, var


def chain_return_monte_carlo(means, stds, gamma, draws, seed=0):
    rng = np.random.default_rng(seed)
    total = np.zeros(draws)
    for k, (m, s) in enumerate(zip(means, stds)):
        total += gamma ** k * (m + s * rng.standard_normal(draws))
    return total


def naive_dense_forward(layer_dims, weights, biases, x, output_activation="identity"):
    """Matrix-vector products written as explicit Python loops."""
    h = [float(v) for v in x]
    L = len(weights)
    for k in range(L):
        rows, cols = layer_dims[k + 1], layer_dims[k]
        z = []
        for r in range(rows):
            acc = float(biases[k][r])
            for c in range(cols):
                acc += float(weights[k][r][c]) * h[c]
            z.append(acc)
        if k < L - 1:
            h = [max(v, 0.0) for v in z]
        elif output_activation == "tanh":
            h = [math.tanh(v) for v in z]
        else:
            h = z
    return np.array(h)


def central_difference(f, x, h=1e-5) -> np.ndarray:
    """Gradient of scalar ``f`` at array ``x`` by central differences."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        g[i] = (fp - fm) / (2 * h)
    return grad
