"""Categorical-critic baseline: fixed atoms, projected Bellman targets, cross-entropy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import netcore as nc
from .agent import Actor, NoiseSource, _rescale, act, act_batch, explore_act, make_actor, target_sync
from .netcore import DenseNet, NumericError, Optimizer
from .replay import Batch


@dataclass
class CategoricalCritic:
    net: DenseNet
    target_net: DenseNet
    atoms: np.ndarray
    obs_dim: int
    action_dim: int

    @property
    def v_min(self):
        return float(self.atoms[0])

    @property
    def v_max(self):
        return float(self.atoms[-1])


def make_atoms(v_min, v_max, n_atoms=51) -> np.ndarray:
    if not v_min < v_max:
        raise ValueError("v_min must be below v_max")
    if n_atoms < 2:
        raise ValueError("need at least two atoms")
    return np.linspace(v_min, v_max, int(n_atoms))


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def categorical_project(target_probs, target_atoms, atoms) -> np.ndarray:
    """Split each shifted atom's mass linearly between its two nearest support atoms.

    Works on a single distribution (N,) or a batch (M, N). Mass outside the
    support lands on the boundary atom.
    """
    p = np.asarray(target_probs, dtype=float)
    tz = np.asarray(target_atoms, dtype=float)
    atoms = np.asarray(atoms, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(tz))):
        raise NumericError("non-finite input to projection")
    single = p.ndim == 1
    p = np.atleast_2d(p)
    tz = np.broadcast_to(np.atleast_2d(tz), p.shape)
    M, K = p.shape
    N = atoms.size
    v_min, v_max = atoms[0], atoms[-1]
    dz = (v_max - v_min) / (N - 1)
    b = (np.clip(tz, v_min, v_max) - v_min) / dz
    b = np.clip(b, 0.0, N - 1)
    lo = np.floor(b).astype(np.int64)
    hi = np.minimum(lo + 1, N - 1)
    w_hi = b - lo
    w_lo = 1.0 - w_hi
    rows = np.repeat(np.arange(M) * N, K).reshape(M, K)
    out = np.bincount((rows + lo).ravel(), (p * w_lo).ravel(), minlength=M * N)
    out += np.bincount((rows + hi).ravel(), (p * w_hi).ravel(), minlength=M * N)
    out = out.reshape(M, N)
    return out[0] if single else out


class D4PGAgent:
    """Deterministic actor with a categorical return distribution critic."""

    algorithm = "d4pg"

    def __init__(self, actor: Actor, critic: CategoricalCritic, actor_opt: Optimizer,
                 critic_opt: Optimizer, gamma=0.99, noise: NoiseSource | None = None):
        self.actor = actor
        self.critic = critic
        self.actor_opt = actor_opt
        self.critic_opt = critic_opt
        self.gamma = float(gamma)
        self.noise = noise or NoiseSource()

    @classmethod
    def build(cls, obs_dim, action_dim, low, high, *, hidden=(64, 64), critic_hidden=None,
              n_atoms=51, v_min=-1700.0, v_max=0.0, gamma=0.99, alpha=1e-4, beta=1e-4,
              optimizer="sgd", seed=0, dtype="float64"):
        rng = np.random.default_rng(seed)
        actor = make_actor(obs_dim, action_dim, low, high, hidden, rng, dtype)
        net = nc.init_net([obs_dim + action_dim, *(critic_hidden or hidden), n_atoms], rng,
                          dtype=dtype)
        critic = CategoricalCritic(net, net.copy(), make_atoms(v_min, v_max, n_atoms),
                                   obs_dim, action_dim)
        return cls(actor, critic, Optimizer(optimizer, alpha), Optimizer(optimizer, beta),
                   gamma, NoiseSource(rng.integers(2 ** 63)))

    def act(self, x):
        return act(self.actor, x)

    def act_batch(self, X):
        return act_batch(self.actor, X)

    def explore_act(self, x, delta):
        return explore_act(self.actor, x, delta, self.noise)

    def probs(self, X, A, target=False, fast=False):
        net = self.critic.target_net if target else self.critic.net
        return softmax(nc.forward_batch(net, np.concatenate([X, A], axis=1), fast=fast))

    def projected_targets(self, batch: Batch) -> np.ndarray:
        A_next = act_batch(self.actor, batch.next_states, target=True, fast=True)
        p_next = self.probs(batch.next_states, A_next, target=True, fast=True)
        live = (~batch.dones).astype(float)[:, None]
        shifted = batch.rewards[:, None] + self.gamma * live * self.critic.atoms[None, :]
        return categorical_project(p_next, shifted, self.critic.atoms)

    def critic_gradient(self, batch: Batch, targets=None):
        M = len(batch)
        if M < 1:
            raise ValueError("empty batch")
        if targets is None:
            targets = self.projected_targets(batch)
        tape = nc.forward_tape(self.critic.net, np.concatenate([batch.states, batch.actions], axis=1))
        logits = tape.output
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = float(-(targets * log_p).sum(axis=1).mean())
        # d(cross-entropy)/d(logits) = softmax - target, since targets sum to 1
        g = (np.exp(log_p) - targets) / M
        return loss, nc.backward_tape(self.critic.net, tape, g, inputs=False)

    def critic_update(self, batch: Batch, targets=None) -> float:
        loss, grads = self.critic_gradient(batch, targets)
        self.critic_opt.apply_step(self.critic.net, grads, "minimize")
        return loss

    def actor_gradient(self, states):
        X = np.asarray(states, dtype=float)
        M = X.shape[0]
        if M < 1:
            raise ValueError("empty batch")
        a_tape = nc.forward_tape(self.actor.net, X)
        A = _rescale(self.actor, a_tape.output)
        c_tape = nc.forward_tape(self.critic.net, np.concatenate([X, A], axis=1))
        p = softmax(c_tape.output)
        q = p @ self.critic.atoms
        # d/dlogit_i of sum_k p_k z_k = p_i (z_i - E[z])
        up = p * (self.critic.atoms[None, :] - q[:, None]) / M
        cg = nc.backward_tape(self.critic.net, c_tape, up, params=False)
        obs = self.critic.obs_dim
        dJ_da = cg.input_grad[:, obs:obs + self.critic.action_dim]
        half = 0.5 * (self.actor.action_high - self.actor.action_low)
        grads = nc.backward_tape(self.actor.net, a_tape, dJ_da * half, inputs=False)
        return float(q.mean()), grads

    def actor_update(self, states) -> float:
        objective, grads = self.actor_gradient(states)
        self.actor_opt.apply_step(self.actor.net, grads, "maximize")
        return objective

    def target_sync(self, mode="soft", tau=0.005):
        target_sync(self, mode, tau)

    def return_samples(self, X, A, Q, target=False):
        """Inverse-CDF samples from the categorical law; Q holds standard normals."""
        from scipy.stats import norm
        P = self.probs(X, A, target=target)
        U = norm.cdf(np.asarray(Q)[..., 0])
        cdf = np.cumsum(P, axis=1)
        idx = np.array([np.searchsorted(c, u) for c, u in zip(cdf, U)])
        return self.critic.atoms[np.minimum(idx, self.critic.atoms.size - 1)]

    def networks(self) -> dict:
        return {"actor": self.actor.net, "actor_target": self.actor.target_net,
                "critic": self.critic.net, "critic_target": self.critic.target_net}


def categorical_critic_update(agent: D4PGAgent, batch: Batch) -> float:
    return agent.critic_update(batch)


def categorical_actor_update(agent: D4PGAgent, batch: Batch) -> float:
    return agent.actor_update(batch.states)
