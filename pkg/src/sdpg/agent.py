"""Sample-based distributional actor-critic.

The critic maps (state, action, noise) to one scalar return sample, so n
noise draws give n samples of the return distribution at (state, action).
It is trained against Bellman-shifted samples from target copies with the
quantile Huber loss; the actor ascends the mean of the critic samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import netcore as nc
from .distloss import QuantileGrid, midpoint_quantiles, quantile_huber_loss_and_grad, sort_ascending
from .netcore import DenseNet, Optimizer, ShapeError
from .replay import Batch


class NoiseSource:
    """Seeded standard-normal stream."""

    def __init__(self, seed=None):
        self.rng = np.random.default_rng(seed)

    def normal(self, *shape) -> np.ndarray:
        return self.rng.standard_normal(shape)


def stratified_normal(n: int, dim: int = 1) -> np.ndarray:
    """Standard-normal quantiles at the midpoint levels, one column per noise dim."""
    from scipy.stats import norm
    levels = (np.arange(n) + 0.5) / n
    return np.repeat(norm.ppf(levels)[:, None], dim, axis=1)


@dataclass
class Actor:
    net: DenseNet
    target_net: DenseNet
    action_low: np.ndarray
    action_high: np.ndarray

    @property
    def obs_dim(self):
        return self.net.in_dim

    @property
    def action_dim(self):
        return self.net.out_dim


@dataclass
class Critic:
    net: DenseNet
    target_net: DenseNet
    obs_dim: int
    action_dim: int
    noise_dim: int = 1


@dataclass
class ReturnSamples:
    values: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


def make_actor(obs_dim, action_dim, low, high, hidden, rng, dtype=np.float64) -> Actor:
    net = nc.init_net([obs_dim, *hidden, action_dim], rng, output_activation="tanh", dtype=dtype)
    return Actor(net, net.copy(), np.asarray(low, dtype=float), np.asarray(high, dtype=float))


def make_critic(obs_dim, action_dim, hidden, rng, noise_dim=1, dtype=np.float64) -> Critic:
    net = nc.init_net([obs_dim + action_dim + noise_dim, *hidden, 1], rng, dtype=dtype)
    return Critic(net, net.copy(), obs_dim, action_dim, noise_dim)


def _rescale(actor: Actor, t):
    half = 0.5 * (actor.action_high - actor.action_low)
    return actor.action_low + half * (t + 1.0)


def act_batch(actor: Actor, X, target=False, fast=False) -> np.ndarray:
    net = actor.target_net if target else actor.net
    return _rescale(actor, nc.forward_batch(net, X, fast=fast))


def act(actor: Actor, x) -> np.ndarray:
    """Deterministic action: tanh output mapped affinely onto the bounds."""
    return _rescale(actor, nc.forward(actor.net, x))


def explore_act(actor: Actor, x, delta: float, noise: NoiseSource) -> np.ndarray:
    """act(x) + delta * N(0, I), clipped to the bounds."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    a = act(actor, x)
    if delta == 0:
        return a
    a = a + delta * noise.normal(actor.action_dim)
    return np.clip(a, actor.action_low, actor.action_high)


def _critic_rows(X, A, Q):
    """Stack (state, action, noise) rows for all n noises per pair.

    X: (M, obs), A: (M, act), Q: (M, n, noise_dim) -> (M * n, obs + act + noise_dim)
    """
    M, n, _ = Q.shape
    XA = np.concatenate([X, A], axis=1)
    return np.concatenate([np.repeat(XA, n, axis=0), Q.reshape(M * n, -1)], axis=1)


def critic_samples_batch(critic: Critic, X, A, Q, target=False, fast=True) -> np.ndarray:
    """Return samples of shape (M, n), column j driven by noise Q[:, j]."""
    X = np.asarray(X, dtype=float)
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q)
    if Q.ndim != 3 or Q.shape[2] != critic.noise_dim or Q.shape[0] != X.shape[0]:
        raise ShapeError(f"noise must have shape (M, n, {critic.noise_dim})")
    net = critic.target_net if target else critic.net
    out = nc.forward_batch(net, _critic_rows(X, A, Q), fast=fast)
    return out.reshape(Q.shape[0], Q.shape[1])


def critic_samples(critic: Critic, x, a, noises, target=False) -> ReturnSamples:
    """z_j = critic(x, a, q_j) for each noise vector q_j, in noise order."""
    x = np.asarray(x, dtype=float).reshape(-1)
    a = np.asarray(a, dtype=float).reshape(-1)
    if x.size != critic.obs_dim or a.size != critic.action_dim:
        raise ShapeError("state/action dimensions do not match the critic")
    Q = np.asarray(noises, dtype=float).reshape(1, -1, critic.noise_dim)
    if Q.shape[1] < 1:
        raise ValueError("need at least one noise vector")
    return ReturnSamples(critic_samples_batch(critic, x[None], a[None], Q, target, fast=False)[0])


def bellman_targets(critic: Critic, actor: Actor, r, gamma, x_next, noises, done=False) -> ReturnSamples:
    """r + gamma * target_critic(x', target_actor(x'), q~_j); just r when done."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    Q = np.asarray(noises, dtype=float).reshape(-1, critic.noise_dim)
    if done or gamma == 0.0:
        return ReturnSamples(np.full(Q.shape[0], float(r)))
    x_next = np.asarray(x_next, dtype=float).reshape(-1)
    a_next = _rescale(actor, nc.forward(actor.target_net, x_next))
    z = critic_samples(critic, x_next, a_next, Q, target=True).values
    return ReturnSamples(r + gamma * z)


def bellman_targets_batch(critic: Critic, actor: Actor, batch: Batch, gamma, Q_target) -> np.ndarray:
    A_next = act_batch(actor, batch.next_states, target=True, fast=True)
    z = critic_samples_batch(critic, batch.next_states, A_next, Q_target, target=True)
    live = (~batch.dones).astype(float)[:, None]
    return batch.rewards[:, None] + gamma * live * z


class SDPGAgent:
    """Actor, critic, their targets and optimizers, plus the update rules."""

    algorithm = "sdpg"

    def __init__(self, actor: Actor, critic: Critic, actor_opt: Optimizer, critic_opt: Optimizer,
                 n_samples=51, gamma=0.99, zeta=1.0, noise: NoiseSource | None = None):
        self.actor = actor
        self.critic = critic
        self.actor_opt = actor_opt
        self.critic_opt = critic_opt
        self.grid: QuantileGrid = midpoint_quantiles(n_samples, zeta)
        self.gamma = float(gamma)
        self.noise = noise or NoiseSource()

    @classmethod
    def build(cls, obs_dim, action_dim, low, high, *, hidden=(64, 64), critic_hidden=None,
              n_samples=51, gamma=0.99, zeta=1.0, alpha=1e-4, beta=1e-4, optimizer="sgd",
              noise_dim=1, seed=0, dtype="float64"):
        rng = np.random.default_rng(seed)
        actor = make_actor(obs_dim, action_dim, low, high, hidden, rng, dtype)
        critic = make_critic(obs_dim, action_dim, critic_hidden or hidden, rng, noise_dim, dtype)
        return cls(actor, critic, Optimizer(optimizer, alpha), Optimizer(optimizer, beta),
                   n_samples, gamma, zeta, NoiseSource(rng.integers(2 ** 63)))

    @property
    def n_samples(self):
        return self.grid.n

    def act(self, x):
        return act(self.actor, x)

    def act_batch(self, X):
        return act_batch(self.actor, X)

    def explore_act(self, x, delta):
        return explore_act(self.actor, x, delta, self.noise)

    def return_samples(self, X, A, Q, target=False):
        return critic_samples_batch(self.critic, X, A, Q, target=target, fast=False)

    def critic_gradient(self, batch: Batch, Q=None, Q_target=None):
        """Batch-mean quantile Huber loss and its parameter gradient."""
        M = len(batch)
        if M < 1:
            raise ValueError("empty batch")
        n, nd = self.grid.n, self.critic.noise_dim
        if Q is None:
            Q = self.noise.normal(M, n, nd)
        if Q_target is None:
            Q_target = self.noise.normal(M, n, nd)
        targets = bellman_targets_batch(self.critic, self.actor, batch, self.gamma, Q_target)
        tape = nc.forward_tape(self.critic.net, _critic_rows(batch.states, batch.actions, Q))
        z = tape.output.reshape(M, n)
        z_sorted, perm = sort_ascending(z)
        loss, g_sorted = quantile_huber_loss_and_grad(z_sorted, targets, self.grid)
        g = np.empty_like(g_sorted)
        np.put_along_axis(g, perm, g_sorted, axis=1)
        grads = nc.backward_tape(self.critic.net, tape, g.reshape(M * n, 1) / M, inputs=False)
        return float(np.mean(loss)), grads

    def critic_update(self, batch: Batch, Q=None, Q_target=None) -> float:
        loss, grads = self.critic_gradient(batch, Q, Q_target)
        self.critic_opt.apply_step(self.critic.net, grads, "minimize")
        return loss

    def actor_gradient(self, states, Q=None):
        """Mean critic sample at a = pi(x) and its gradient in the actor parameters."""
        X = np.asarray(states, dtype=float)
        M = X.shape[0]
        if M < 1:
            raise ValueError("empty batch")
        n, nd = self.grid.n, self.critic.noise_dim
        if Q is None:
            Q = self.noise.normal(M, n, nd)
        a_tape = nc.forward_tape(self.actor.net, X)
        A = _rescale(self.actor, a_tape.output)
        c_tape = nc.forward_tape(self.critic.net, _critic_rows(X, A, Q))
        up = np.full((M * n, 1), 1.0 / (M * n))
        cg = nc.backward_tape(self.critic.net, c_tape, up, params=False)
        obs = self.critic.obs_dim
        dJ_da = cg.input_grad[:, obs:obs + self.critic.action_dim].reshape(M, n, -1).sum(axis=1)
        half = 0.5 * (self.actor.action_high - self.actor.action_low)
        grads = nc.backward_tape(self.actor.net, a_tape, dJ_da * half, inputs=False)
        return float(np.mean(c_tape.output)), grads

    def actor_update(self, states, Q=None) -> float:
        objective, grads = self.actor_gradient(states, Q)
        self.actor_opt.apply_step(self.actor.net, grads, "maximize")
        return objective

    def target_sync(self, mode="soft", tau=0.005):
        target_sync(self, mode, tau)

    def networks(self) -> dict:
        return {"actor": self.actor.net, "actor_target": self.actor.target_net,
                "critic": self.critic.net, "critic_target": self.critic.target_net}


def target_sync(agent, mode="soft", tau=0.005):
    """Hard copy or Polyak-average the online nets into the targets."""
    pairs = [(agent.actor.net, agent.actor.target_net), (agent.critic.net, agent.critic.target_net)]
    if mode == "hard":
        for src, dst in pairs:
            nc.copy_params(src, dst)
    elif mode == "soft":
        for src, dst in pairs:
            nc.soft_update(src, dst, tau)
    else:
        raise ValueError(f"unknown target sync mode {mode!r}")
