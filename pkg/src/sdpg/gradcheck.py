"""Finite-difference checks of every analytic gradient path.

Each check draws random probes (one parameter or input coordinate per
probe), compares the analytic derivative with a central difference and
reports the worst relative error. Probes whose central difference straddles
a ReLU or Huber kink are redrawn.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import netcore as nc
from .agent import SDPGAgent, _critic_rows
from .d4pg import D4PGAgent
from .distloss import midpoint_quantiles, quantile_huber_loss_and_grad


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    probes: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_error) and self.max_rel_error < self.tolerance)


def rel_error(analytic, numeric, floor=1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _probe(f, grad_at, flat, rng, probes, h, smooth=None):
    """Max relative error over ``probes`` random coordinates of ``flat``."""
    worst, done, tries = 0.0, 0, 0
    while done < probes and tries < 50 * probes:
        tries += 1
        i = int(rng.integers(flat.size))
        old = flat[i]
        flat[i] = old + h
        fp = f()
        ok = smooth is None or smooth()
        flat[i] = old - h
        fm = f()
        ok = ok and (smooth is None or smooth())
        flat[i] = old
        ok = ok and (smooth is None or smooth())
        if not ok:
            continue
        worst = max(worst, rel_error(grad_at(i), (fp - fm) / (2 * h)))
        done += 1
    return worst, done


def _probe_params(f, params, grads, rng, probes, h, smooth, corrupt):
    """Spread ``probes`` over the parameter arrays, remainder to the first ones."""
    worst, done = 0.0, 0
    base, extra = divmod(probes, len(params))
    for k, (p, g) in enumerate(zip(params, grads)):
        g = g.reshape(-1) * (1.0 + corrupt)
        w, d = _probe(f, lambda i, g=g: g[i], p.reshape(-1), rng, base + (k < extra), h, smooth)
        worst, done = max(worst, w), done + d
    return worst, done


def _relu_signature(net, X):
    """Sign pattern of every hidden pre-activation; changes mean a kink was crossed."""
    tape = nc.forward_tape(net, X, fast=False)
    return np.concatenate([(p > 0).ravel() for p in tape.pre[:-1]])


def _tiny_net(rng, dims, out="identity"):
    return nc.init_net(dims, rng, output_activation=out)


def check_net_params(rng, probes=100, h=1e-6, tol=1e-3, corrupt=0.0) -> CheckResult:
    net = _tiny_net(rng, [4, 8, 6, 3], out="tanh")
    X = rng.standard_normal((5, 4))
    U = rng.standard_normal((5, 3))

    def f():
        return float(np.sum(nc.forward_batch(net, X) * U))

    tape = nc.forward_tape(net, X, fast=False)
    grads = nc.backward_tape(net, tape, U, inputs=False).param_grads()
    params = net.params()
    sig = _relu_signature(net, X)
    smooth = lambda: np.array_equal(_relu_signature(net, X), sig)  # noqa: E731
    worst, done = _probe_params(f, params, grads, rng, probes, h, smooth, corrupt)
    return CheckResult("netcore parameter gradient", worst, done, tol)


def check_net_inputs(rng, probes=100, h=1e-6, tol=1e-3, corrupt=0.0) -> CheckResult:
    net = _tiny_net(rng, [4, 8, 6, 2])
    X = rng.standard_normal((3, 4))
    U = rng.standard_normal((3, 2))

    def f():
        return float(np.sum(nc.forward_batch(net, X) * U))

    tape = nc.forward_tape(net, X, fast=False)
    g = nc.backward_tape(net, tape, U, params=False).input_grad.reshape(-1) * (1.0 + corrupt)
    sig = _relu_signature(net, X)
    smooth = lambda: np.array_equal(_relu_signature(net, X), sig)  # noqa: E731
    worst, done = _probe(f, lambda i: g[i], X.reshape(-1), rng, probes, h, smooth)
    return CheckResult("netcore input gradient", worst, done, tol)


def check_quantile_huber(rng, probes=100, h=1e-7, tol=1e-3, corrupt=0.0) -> CheckResult:
    worst, done = 0.0, 0
    while done < probes:
        n = int(rng.integers(1, 9))
        zeta = float(rng.choice([0.5, 1.0, 2.0]))
        grid = midpoint_quantiles(n, zeta)
        z = np.sort(rng.normal(0, 2, n))
        t = rng.normal(0, 2, n)
        v = t[None, :] - z[:, None]
        # stay away from |v| = zeta, v = 0, and from reordering z
        gaps = np.concatenate([np.abs(np.abs(v) - zeta).ravel(), np.abs(v).ravel(), np.diff(z)])
        if gaps.size and gaps.min() < 1e-4:
            continue
        _, g = quantile_huber_loss_and_grad(z, t, grid)
        g = g * (1.0 + corrupt)
        i = int(rng.integers(n))
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        lp, _ = quantile_huber_loss_and_grad(zp, t, grid)
        lm, _ = quantile_huber_loss_and_grad(zm, t, grid)
        worst = max(worst, rel_error(g[i], (lp - lm) / (2 * h)))
        done += 1
    return CheckResult("quantile Huber loss gradient", worst, done, tol)


def _small_sdpg(rng):
    return SDPGAgent.build(3, 2, [-2.0, -1.0], [2.0, 1.0], hidden=(8, 8), n_samples=5,
                           seed=int(rng.integers(2 ** 31)), dtype="float64")


def _small_d4pg(rng):
    return D4PGAgent.build(3, 2, [-2.0, -1.0], [2.0, 1.0], hidden=(8, 8), n_atoms=7,
                           v_min=-3.0, v_max=3.0, seed=int(rng.integers(2 ** 31)), dtype="float64")


def _batch(rng, M=4, obs=3, act=2):
    from .replay import Batch
    return Batch(rng.standard_normal((M, obs)), rng.uniform(-1, 1, (M, act)),
                 rng.standard_normal(M), rng.standard_normal((M, obs)), rng.random(M) < 0.3)


def check_sdpg_critic(rng, probes=100, h=1e-6, tol=1e-3, corrupt=0.0) -> CheckResult:
    """Critic parameters through sorting and the quantile Huber loss."""
    ag = _small_sdpg(rng)
    b = _batch(rng)
    M, n = len(b), ag.n_samples
    Q = rng.standard_normal((M, n, 1))
    Qt = rng.standard_normal((M, n, 1))
    f = lambda: ag.critic_gradient(b, Q, Qt)[0]  # noqa: E731
    rows = _critic_rows(b.states, b.actions, Q)

    def smooth():
        # relu pattern, sort order and Huber branches must not change
        z = np.sort(nc.forward_batch(ag.critic.net, rows).reshape(M, n), axis=1)
        from .agent import bellman_targets_batch
        t = bellman_targets_batch(ag.critic, ag.actor, b, ag.gamma, Qt)
        v = t[:, None, :] - z[:, :, None]
        far = np.min(np.abs(np.abs(v) - ag.grid.zeta)) > 1e-5 and np.min(np.abs(v)) > 1e-5
        return far and np.array_equal(_relu_signature(ag.critic.net, rows), sig)

    sig = _relu_signature(ag.critic.net, rows)
    grads = ag.critic_gradient(b, Q, Qt)[1].param_grads()
    params = ag.critic.net.params()
    worst, done = _probe_params(f, params, grads, rng, probes, h, smooth, corrupt)
    return CheckResult("sample critic gradient", worst, done, tol)


def _actor_check(name, ag, rng, probes, h, tol, corrupt, objective):
    X = rng.standard_normal((4, 3))
    grads = ag.actor_gradient(X)[1].param_grads() if objective is None else objective(X, grad=True)
    f = (lambda: ag.actor_gradient(X)[0]) if objective is None else (lambda: objective(X))

    def sig_now():
        A = ag.act_batch(X)
        return np.concatenate([_relu_signature(ag.actor.net, X),
                               _relu_signature(ag.critic.net, _critic_input(ag, X, A))])

    sig = sig_now()
    smooth = lambda: np.array_equal(sig_now(), sig)  # noqa: E731
    params = ag.actor.net.params()
    worst, done = _probe_params(f, params, grads, rng, probes, h, smooth, corrupt)
    return CheckResult(name, worst, done, tol)


def _critic_input(ag, X, A):
    if isinstance(ag, SDPGAgent):
        return _critic_rows(X, A, ag._probe_Q)
    return np.concatenate([X, A], axis=1)


def check_sdpg_actor(rng, probes=100, h=1e-6, tol=1e-3, corrupt=0.0) -> CheckResult:
    """Actor parameters through tanh, the action rescale and the sample critic."""
    ag = _small_sdpg(rng)
    ag._probe_Q = rng.standard_normal((4, ag.n_samples, 1))

    def objective(X, grad=False):
        out = ag.actor_gradient(X, ag._probe_Q)
        return out[1].param_grads() if grad else out[0]

    return _actor_check("sample actor gradient", ag, rng, probes, h, tol, corrupt, objective)


def check_categorical_critic(rng, probes=100, h=1e-6, tol=1e-3, corrupt=0.0) -> CheckResult:
    ag = _small_d4pg(rng)
    b = _batch(rng)
    targets = ag.projected_targets(b)
    f = lambda: ag.critic_gradient(b, targets)[0]  # noqa: E731
    XA = np.concatenate([b.states, b.actions], axis=1)
    sig = _relu_signature(ag.critic.net, XA)
    smooth = lambda: np.array_equal(_relu_signature(ag.critic.net, XA), sig)  # noqa: E731
    grads = ag.critic_gradient(b, targets)[1].param_grads()
    params = ag.critic.net.params()
    worst, done = _probe_params(f, params, grads, rng, probes, h, smooth, corrupt)
    return CheckResult("categorical cross-entropy gradient", worst, done, tol)


def check_categorical_actor(rng, probes=100, h=1e-6, tol=1e-3, corrupt=0.0) -> CheckResult:
    ag = _small_d4pg(rng)
    return _actor_check("categorical actor gradient", ag, rng, probes, h, tol, corrupt, None)


CHECKS = {
    "net_params": check_net_params,
    "net_inputs": check_net_inputs,
    "quantile_huber": check_quantile_huber,
    "sdpg_critic": check_sdpg_critic,
    "sdpg_actor": check_sdpg_actor,
    "categorical_critic": check_categorical_critic,
    "categorical_actor": check_categorical_actor,
}


def run_checks(seed=0, probes=100, tol=1e-3, only=None, corrupt=None) -> list[CheckResult]:
    """Run the named checks (all by default). ``corrupt`` maps a check name to a
    relative perturbation of its analytic gradient, for negative testing."""
    corrupt = corrupt or {}
    names = list(CHECKS) if not only else list(only)
    out = []
    for k, name in enumerate(names):
        rng = np.random.default_rng([seed, k])
        out.append(CHECKS[name](rng, probes=probes, tol=tol, corrupt=corrupt.get(name, 0.0)))
    return out


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'probes':>6}  {'max rel err':>11}  {'tol':>8}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.probes:>6}  {r.max_rel_error:>11.3e}  {r.tolerance:>8.1e}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
