"""Fixed-capacity ring buffer of transitions with uniform sampling."""
from __future__ import annotations

import threading
import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .netcore import ShapeError


class PoolEmpty(RuntimeError):
    """Sampling was requested before anything was stored."""


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool  # zero bootstrap from next_state


@dataclass(frozen=True)
class Batch:
    """M transitions stacked row-wise."""
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self):
        return self.rewards.shape[0]

    def replace(self, **changes) -> "Batch":
        return dataclasses.replace(self, **changes)


def batch_from_transitions(transitions) -> Batch:
    return Batch(
        np.array([t.state for t in transitions], dtype=float),
        np.array([t.action for t in transitions], dtype=float).reshape(len(transitions), -1),
        np.array([t.reward for t in transitions], dtype=float),
        np.array([t.next_state for t in transitions], dtype=float),
        np.array([t.done for t in transitions], dtype=bool),
    )


class ReplayPool:
    """Preallocated storage; once full, each push overwrites the oldest entry.

    Safe for one writer and one reader thread: a sample only sees entries
    whose push has completed.
    """

    def __init__(self, capacity: int, obs_dim: int, action_dim: int, seed=None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.action_dim = int(action_dim)
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.cursor = 0
        self.pushes = 0
        self.rng = np.random.default_rng(seed)
        self._lock = threading.Lock()

    def __len__(self):
        return self.size

    def push(self, t: Transition) -> None:
        s = np.asarray(t.state, dtype=float).reshape(-1)
        a = np.asarray(t.action, dtype=float).reshape(-1)
        s2 = np.asarray(t.next_state, dtype=float).reshape(-1)
        if s.size != self.obs_dim or s2.size != self.obs_dim or a.size != self.action_dim:
            raise ShapeError(
                f"transition dims (state {s.size}, action {a.size}, next {s2.size}) do not "
                f"match pool (obs {self.obs_dim}, action {self.action_dim})"
            )
        with self._lock:
            i = self.cursor
            self.states[i] = s
            self.actions[i] = a
            self.rewards[i] = t.reward
            self.next_states[i] = s2
            self.dones[i] = bool(t.done)
            self.cursor = (i + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)
            self.pushes += 1

    def sample(self, M: int) -> Batch:
        """Draw ``M`` transitions uniformly with replacement."""
        if M < 1:
            raise ValueError("batch size must be positive")
        with self._lock:
            if self.size == 0:
                raise PoolEmpty("replay pool is empty")
            idx = self.rng.integers(0, self.size, size=M)
            return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                         self.next_states[idx], self.dones[idx])

    def contents(self) -> Batch:
        """All stored transitions, oldest first."""
        with self._lock:
            if self.size < self.capacity:
                order = np.arange(self.size)
            else:
                order = (np.arange(self.capacity) + self.cursor) % self.capacity
            return Batch(self.states[order], self.actions[order], self.rewards[order],
                         self.next_states[order], self.dones[order])

    def to_arrays(self) -> dict:
        """Storage in physical slot order, so a restored pool samples identically."""
        with self._lock:
            n = self.size
            meta = np.array([self.capacity, self.obs_dim, self.action_dim, self.pushes, self.cursor],
                            dtype=np.int64)
            state = json.dumps(self.rng.bit_generator.state, sort_keys=True)
            return {"meta": meta, "states": self.states[:n].copy(), "actions": self.actions[:n].copy(),
                    "rewards": self.rewards[:n].copy(), "next_states": self.next_states[:n].copy(),
                    "dones": self.dones[:n].astype(np.uint8),
                    "rng_state": np.frombuffer(state.encode(), dtype=np.uint8)}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "ReplayPool":
        capacity, obs_dim, action_dim, pushes, cursor = (int(v) for v in arrays["meta"])
        pool = cls(capacity, obs_dim, action_dim)
        n = arrays["rewards"].shape[0]
        pool.states[:n] = arrays["states"]
        pool.actions[:n] = arrays["actions"]
        pool.rewards[:n] = arrays["rewards"]
        pool.next_states[:n] = arrays["next_states"]
        pool.dones[:n] = arrays["dones"].astype(bool)
        pool.size = n
        pool.cursor = cursor
        pool.pushes = pushes
        pool.rng.bit_generator.state = json.loads(bytes(arrays["rng_state"]).decode())
        return pool
