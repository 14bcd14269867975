"""Uniform-replay transition storage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


@dataclass
class Batch:
    s: np.ndarray       # [B x state_dim]
    a: np.ndarray       # [B x action_dim]
    r: np.ndarray       # [B x 1]
    s_next: np.ndarray  # [B x state_dim]
    done: np.ndarray    # [B x 1], 1.0 where terminal

    def __len__(self):
        return self.s.shape[0]


class ReplayBuffer:
    """Ring buffer over transitions with uniform with-replacement sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 rng: np.random.Generator):
        if capacity <= 0:
            raise ContractViolation(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.rng = rng
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros((capacity, 1))
        self._s_next = np.zeros((capacity, state_dim))
        self._done = np.zeros((capacity, 1))
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, t: Transition) -> None:
        """Append a transition, overwriting the oldest once at capacity."""
        if not (np.isfinite(t.s).all() and np.isfinite(t.a).all()
                and np.isfinite(t.r) and np.isfinite(t.s_next).all()):
            raise ContractViolation("transition contains non-finite values")
        if np.abs(t.a).max(initial=0.0) > 1.0:
            raise ContractViolation("action outside [-1, 1]")
        i = self._next
        self._s[i] = t.s
        self._a[i] = t.a
        self._r[i] = t.r
        self._s_next[i] = t.s_next
        self._done[i] = 1.0 if t.done else 0.0
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        if self._size == 0:
            raise ContractViolation("cannot sample from an empty buffer")
        idx = self.rng.integers(0, self._size, size=batch_size)
        return self.sample_at(idx)

    def sample_at(self, idx: np.ndarray) -> Batch:
        return Batch(
            s=self._s[idx].copy(),
            a=self._a[idx].copy(),
            r=self._r[idx].copy(),
            s_next=self._s_next[idx].copy(),
            done=self._done[idx].copy(),
        )
