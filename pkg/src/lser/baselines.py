"""Reference replay buffers: uniform FIFO replay and proportional PER.

Both expose ``push(t)`` and ``sample(b, state=None)`` like
:class:`lser.replay.LserBuffer`; the query state is accepted and ignored.
"""

from __future__ import annotations

import numpy as np

from lser.errors import EmptyBufferError, InvalidConfigError
from lser.replay import Transition


class UniformBuffer:
    def __init__(self, capacity: int, seed: int = 0) -> None:
        if capacity < 1:
            raise InvalidConfigError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.entries: list[Transition | None] = [None] * capacity
        self.write_head = 0
        self.size = 0
        self.rng = np.random.default_rng(seed)
        self.sample_calls = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> bool:
        self.entries[self.write_head] = t
        self.write_head = (self.write_head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return True

    def sample(self, b: int, state=None) -> list[Transition]:
        if self.size == 0:
            raise EmptyBufferError("cannot sample from an empty buffer")
        self.sample_calls += 1
        idx = self.rng.choice(self.size, size=min(b, self.size), replace=False)
        return [self.entries[i] for i in idx]

    def transitions(self) -> list[Transition]:
        return [t for t in self.entries[: self.size]]


class SumTree:
    """Binary tree over ``capacity`` leaves where each node holds its subtree's sum.

    The leaf count is rounded up to a power of two so leaves sit in
    left-to-right order at a single depth; prefix search therefore returns
    exactly the leaf a linear cumulative scan would.
    """

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise InvalidConfigError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.n_leaves = 1 << max(0, (capacity - 1).bit_length())
        self.nodes = np.zeros(2 * self.n_leaves - 1)

    @property
    def total(self) -> float:
        return float(self.nodes[0])

    def __getitem__(self, i: int) -> float:
        return float(self.nodes[i + self.n_leaves - 1])

    def leaves(self) -> np.ndarray:
        return self.nodes[self.n_leaves - 1 : self.n_leaves - 1 + self.capacity].copy()

    def update(self, i: int, value: float) -> None:
        if not 0 <= i < self.capacity:
            raise IndexError(f"leaf {i} out of range for capacity {self.capacity}")
        node = i + self.n_leaves - 1
        self.nodes[node] = value
        # recompute from children rather than adding deltas: no drift
        while node > 0:
            node = (node - 1) // 2
            self.nodes[node] = self.nodes[2 * node + 1] + self.nodes[2 * node + 2]

    def find(self, mass) -> np.ndarray:
        """Leaf indices whose cumulative interval ``[c_{i-1}, c_i)`` contains ``mass``."""
        mass = np.array(mass, dtype=np.float64, ndmin=1)
        node = np.zeros(mass.shape, dtype=np.int64)
        nodes = self.nodes
        while True:
            left = 2 * node + 1
            if left[0] >= nodes.shape[0]:
                break
            lv = nodes[left]
            right_empty = nodes[left + 1] == 0.0
            go_left = (mass < lv) | right_empty
            mass = np.where(go_left, mass, mass - lv)
            node = np.where(go_left, left, left + 1)
        return node - (self.n_leaves - 1)


class PerBuffer:
    """Proportional prioritized replay.

    Stored priorities are already exponentiated, ``p_i = (|delta_i| + eps_p) ** alpha``,
    so the sampling probability is ``p_i / sum(p)``.
    """

    def __init__(
        self,
        capacity: int,
        alpha: float = 0.6,
        beta: float = 0.4,
        eps_p: float = 0.01,
        seed: int = 0,
    ) -> None:
        if capacity < 1:
            raise InvalidConfigError(f"capacity must be >= 1, got {capacity}")
        if alpha < 0 or beta < 0 or eps_p <= 0:
            raise InvalidConfigError("alpha and beta must be >= 0 and eps_p > 0")
        self.capacity = capacity
        self.alpha = alpha
        self.beta = beta
        self.eps_p = eps_p
        self.tree = SumTree(capacity)
        self.entries: list[Transition | None] = [None] * capacity
        self.write_head = 0
        self.size = 0
        self.rng = np.random.default_rng(seed)
        self.sample_calls = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition, initial_priority: float | None = None) -> bool:
        if initial_priority is not None:
            p = float(initial_priority)
        elif self.size:
            p = float(self.tree.leaves()[: self.size].max())
        else:
            p = 1.0
        self.entries[self.write_head] = t
        self.tree.update(self.write_head, p)
        self.write_head = (self.write_head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return True

    def priority(self, i: int) -> float:
        return self.tree[i]

    def sample_with_info(self, b: int) -> tuple[list[Transition], np.ndarray, np.ndarray]:
        """Stratified draw of ``b`` indices; returns transitions, indices and IS weights."""
        if self.size == 0:
            raise EmptyBufferError("cannot sample from an empty buffer")
        self.sample_calls += 1
        total = self.tree.total
        seg = total / b
        mass = (np.arange(b) + self.rng.random(b)) * seg
        idx = self.tree.find(np.minimum(mass, np.nextafter(total, 0.0)))
        probs = self.tree.nodes[idx + self.tree.n_leaves - 1] / total
        w = (self.size * probs) ** (-self.beta)
        w /= w.max()
        return [self.entries[i] for i in idx], idx, w

    def sample(self, b: int, state=None) -> list[Transition]:
        return self.sample_with_info(b)[0]

    def update_priorities(self, indices, td_errors) -> None:
        for i, d in zip(np.asarray(indices), np.asarray(td_errors, dtype=np.float64)):
            if not 0 <= i < self.size:
                raise IndexError(f"index {i} does not refer to a stored transition")
            p = (abs(float(d)) + self.eps_p) ** self.alpha
            self.tree.update(int(i), p)

    def transitions(self) -> list[Transition]:
        return [t for t in self.entries[: self.size]]
