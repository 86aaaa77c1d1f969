"""Small environments: pendulum swing-up plus two MDPs with known return laws.

Every environment exposes ``spec``, ``reset(seed)`` and ``step(action)``.
``StepResult.done`` ends the episode; ``StepResult.terminal`` additionally
says whether the value of the next state is zero (false for time limits).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netcore import NumericError


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_episode_steps: int

    def __post_init__(self):
        if not np.all(np.asarray(self.action_low) < np.asarray(self.action_high)):
            raise ValueError("action_low must be below action_high componentwise")


@dataclass
class StepResult:
    next_obs: np.ndarray
    reward: float
    done: bool
    terminal: bool = False


def _check_action(a, dim):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape != (dim,):
        raise ValueError(f"expected action of length {dim}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite action")
    return a


# -- pendulum -----------------------------------------------------------------

PENDULUM_G = 10.0
PENDULUM_M = 1.0
PENDULUM_L = 1.0
PENDULUM_DT = 0.05
PENDULUM_MAX_SPEED = 8.0
PENDULUM_MAX_TORQUE = 2.0


def wrap_angle(theta):
    """Map to (-pi, pi]."""
    out = np.pi - np.mod(np.pi - theta, 2.0 * np.pi)
    return out


def pendulum_obs(state):
    theta, theta_dot = state
    return np.array([np.cos(theta), np.sin(theta), theta_dot])


def pendulum_reward(state, u):
    theta, theta_dot = state
    return -(wrap_angle(theta) ** 2 + 0.1 * theta_dot ** 2 + 0.001 * u ** 2)


def pendulum_dynamics(state, u):
    """One Euler step; returns (new_state, reward). ``u`` is clipped to [-2, 2]."""
    theta, theta_dot = state
    u = float(np.clip(u, -PENDULUM_MAX_TORQUE, PENDULUM_MAX_TORQUE))
    reward = float(pendulum_reward(state, u))
    g, m, l, dt = PENDULUM_G, PENDULUM_M, PENDULUM_L, PENDULUM_DT
    theta_dot = theta_dot + (3.0 * g / (2.0 * l) * np.sin(theta) + 3.0 * u / (m * l * l)) * dt
    theta_dot = float(np.clip(theta_dot, -PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED))
    theta = float(theta + theta_dot * dt)
    return (theta, theta_dot), reward


class Pendulum:
    name = "pendulum"

    def __init__(self, max_episode_steps: int = 200):
        hi = np.array([PENDULUM_MAX_TORQUE])
        self.spec = EnvSpec(3, 1, -hi, hi, int(max_episode_steps))
        self.state = (0.0, 0.0)
        self.t = 0

    def reset(self, seed=None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        theta, theta_dot = rng.uniform([-np.pi, -1.0], [np.pi, 1.0])
        self.state = (float(theta), float(theta_dot))
        self.t = 0
        return pendulum_obs(self.state)

    def set_state(self, theta, theta_dot):
        self.state = (float(theta), float(theta_dot))

    def snapshot(self):
        return (self.state, self.t)

    def restore(self, snap):
        self.state, self.t = snap

    def step(self, action) -> StepResult:
        u = _check_action(action, 1)[0]
        self.state, reward = pendulum_dynamics(self.state, u)
        self.t += 1
        done = self.t >= self.spec.max_episode_steps
        return StepResult(pendulum_obs(self.state), reward, done, terminal=False)


def pendulum_reset(seed=None):
    """Initial (theta, theta_dot) state and its observation."""
    env = Pendulum()
    obs = env.reset(seed)
    return env.state, obs


def pendulum_step(state, u, t=0, max_episode_steps=200) -> tuple:
    """Pure step from an explicit state: returns (new_state, StepResult)."""
    if not np.isfinite(u):
        raise NumericError("non-finite action")
    new_state, reward = pendulum_dynamics(state, u)
    done = t + 1 >= max_episode_steps
    return new_state, StepResult(pendulum_obs(new_state), reward, done, terminal=False)


# -- chain --------------------------------------------------------------------

class Chain:
    """Deterministic chain s0 -> ... -> s_{K-1} -> end; the action is ignored.

    Leaving state k pays a reward drawn from N(means[k], stds[k]^2).
    Observations are one-hot state indicators.
    """
    name = "chain"

    def __init__(self, means=(1.0, 1.0, 1.0), stds=(1.0, 1.0, 1.0)):
        self.means = np.asarray(means, dtype=float)
        self.stds = np.asarray(stds, dtype=float)
        if self.means.shape != self.stds.shape or self.means.ndim != 1 or self.means.size < 1:
            raise ValueError("means and stds must be equal-length non-empty sequences")
        if np.any(self.stds < 0):
            raise ValueError("stds must be nonnegative")
        self.K = self.means.size
        self.spec = EnvSpec(self.K, 1, np.array([-1.0]), np.array([1.0]), self.K)
        self.k = 0
        self._rng = np.random.default_rng()

    def obs(self, k):
        o = np.zeros(self.K)
        if k < self.K:
            o[k] = 1.0
        return o

    def reset(self, seed=None) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self.k = 0
        return self.obs(0)

    def snapshot(self):
        return self.k

    def restore(self, snap):
        self.k = snap

    def step(self, action) -> StepResult:
        _check_action(action, 1)
        k = self.k
        reward = float(self.means[k] + self.stds[k] * self._rng.standard_normal())
        self.k = k + 1
        done = self.k >= self.K
        return StepResult(self.obs(self.k), reward, done, terminal=done)

    def return_law(self, gamma: float, start: int = 0):
        """Mean and variance of the discounted return from state ``start``."""
        k = np.arange(self.K - start)
        mean = float(np.sum(gamma ** k * self.means[start:]))
        var = float(np.sum(gamma ** (2 * k) * self.stds[start:] ** 2))
        return mean, var


# -- bandit -------------------------------------------------------------------

class Bandit:
    """One-step task: reward ~ Gaussian mixture minus action_cost * |a|^2."""
    name = "bandit"

    def __init__(self, weights=(0.5, 0.5), means=(-1.0, 1.0), stds=(0.1, 0.1),
                 action_cost: float = 0.0, action_dim: int = 1):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.stds = np.asarray(stds, dtype=float)
        if not (self.weights.shape == self.means.shape == self.stds.shape):
            raise ValueError("mixture weights, means and stds must have equal length")
        if np.any(self.weights < 0) or not np.isclose(self.weights.sum(), 1.0):
            raise ValueError("mixture weights must be a probability vector")
        self.action_cost = float(action_cost)
        self.spec = EnvSpec(1, int(action_dim), -np.ones(action_dim), np.ones(action_dim), 1)
        self._rng = np.random.default_rng()

    def reset(self, seed=None) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        return np.ones(1)

    def snapshot(self):
        return None

    def restore(self, snap):
        pass

    def sample_mixture(self, size=None):
        comp = self._rng.choice(self.weights.size, size=size, p=self.weights)
        return self.means[comp] + self.stds[comp] * self._rng.standard_normal(size)

    def step(self, action) -> StepResult:
        a = _check_action(action, self.spec.action_dim)
        reward = float(self.sample_mixture()) - self.action_cost * float(a @ a)
        return StepResult(np.ones(1), reward, True, terminal=True)

    def quantile(self, levels, action=None):
        """Analytic quantiles of the reward law at the given levels."""
        from .oracles import mixture_quantiles
        shift = 0.0 if action is None else -self.action_cost * float(np.dot(action, action))
        return mixture_quantiles(levels, self.weights, self.means, self.stds) + shift


ENVIRONMENTS = {"pendulum": Pendulum, "chain": Chain, "bandit": Bandit}


def make_env(name: str, **params):
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return cls(**params)
