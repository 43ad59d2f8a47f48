"""Hash-bucketed replay memory with reward-ordered buckets.

Transitions are filed under the sign-projection code of their state. Each
bucket is kept sorted by reward, ascending, so the cheapest eviction
candidate is always at the front and the best experiences at the back.

Sampling is conditioned on a query state: with probability ``eps_max`` the
highest-reward entries of the query's bucket are replayed, otherwise a
uniform draw from that bucket. Queries whose bucket does not exist fall back
to the two most Jaccard-similar occupied buckets.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import IO

import numpy as np

from lser.errors import EmptyBufferError, InvalidConfigError, ShapeError
from lser.lsh import CodeIndex, HashCode, HyperplaneSet, encode, new_hyperplanes

STORE_STRATEGIES = ("reward", "fifo")
SAMPLE_STRATEGIES = ("lsh", "uniform")


@dataclass(slots=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    done: bool
    next_state: np.ndarray
    reward: float
    episode: int = -1


class Bucket:
    """Transitions sharing one hash code, in ascending reward order.

    Equal rewards keep insertion order, so ``entries[0]`` is the oldest of
    the minimum-reward transitions.
    """

    __slots__ = ("rewards", "items", "slots")

    def __init__(self) -> None:
        self.rewards: list[float] = []
        self.items: list[Transition] = []
        self.slots: list[int] = []

    def __len__(self) -> int:
        return len(self.items)

    def insert(self, t: Transition, slot: int) -> None:
        i = bisect_right(self.rewards, t.reward)
        self.rewards.insert(i, t.reward)
        self.items.insert(i, t)
        self.slots.insert(i, slot)

    def pop(self, i: int) -> tuple[Transition, int]:
        self.rewards.pop(i)
        return self.items.pop(i), self.slots.pop(i)


class LserBuffer:
    """Locality-sensitive replay buffer.

    Args:
        capacity: maximum number of stored transitions.
        hyperplanes: the hash family; alternatively pass ``n_h`` and ``d_s``
            and one is drawn from ``seed``.
        eps_max: probability of taking the greedy (top-reward) branch.
        store: ``"reward"`` replaces the minimum-reward entry of the incoming
            transition's bucket when full; ``"fifo"`` evicts the globally
            oldest transition instead.
        sampling: ``"lsh"`` for state-conditioned bucket sampling,
            ``"uniform"`` to ignore the query and draw from the whole buffer.
        seed: seed of the sampling random stream.
    """

    def __init__(
        self,
        capacity: int,
        hyperplanes: HyperplaneSet | None = None,
        *,
        n_h: int | None = None,
        d_s: int | None = None,
        eps_max: float = 0.99,
        store: str = "reward",
        sampling: str = "lsh",
        seed: int = 0,
    ) -> None:
        if capacity < 1:
            raise InvalidConfigError(f"capacity must be >= 1, got {capacity}")
        if not 0.0 <= eps_max <= 1.0:
            raise InvalidConfigError(f"eps_max must lie in [0, 1], got {eps_max}")
        if store not in STORE_STRATEGIES:
            raise InvalidConfigError(f"unknown store strategy {store!r}")
        if sampling not in SAMPLE_STRATEGIES:
            raise InvalidConfigError(f"unknown sampling strategy {sampling!r}")
        if hyperplanes is None:
            if n_h is None or d_s is None:
                raise InvalidConfigError("pass either hyperplanes or both n_h and d_s")
            hyperplanes = new_hyperplanes(n_h, d_s, seed)
        self.capacity = capacity
        self.hyperplanes = hyperplanes
        self.eps_max = eps_max
        self.store = store
        self.sampling = sampling
        self.rng = np.random.default_rng(seed)
        self.table: dict[HashCode, Bucket] = {}
        self._index = CodeIndex(hyperplanes.n_h)
        self._slots: list[tuple[HashCode, Transition] | None] = [None] * capacity
        self._head = 0
        self.size = 0
        self.sample_calls = 0
        self.greedy_calls = 0
        self.nearest_calls = 0

    def __len__(self) -> int:
        return self.size

    @property
    def bucket_count(self) -> int:
        return len(self.table)

    def code_of(self, state) -> HashCode:
        return encode(self.hyperplanes, state)

    def push(self, t: Transition) -> bool:
        """Store ``t``; returns False when a full buffer discards it."""
        d = self.hyperplanes.d_s
        if np.shape(t.state) != (d,) or np.shape(t.next_state) != (d,):
            raise ShapeError(
                f"transition states must have shape ({d},), got {np.shape(t.state)} and {np.shape(t.next_state)}"
            )
        if not math.isfinite(t.reward):
            raise ValueError(f"reward must be finite, got {t.reward}")
        code = encode(self.hyperplanes, t.state)
        bucket = self.table.get(code)

        if self.size < self.capacity:
            slot = self.size if self.store == "reward" else self._head
            self._head = (self._head + 1) % self.capacity
            self.size += 1
        elif self.store == "reward":
            # a full buffer only accepts improvements within an existing bucket
            if bucket is None or not t.reward > bucket.rewards[0]:
                return False
            _, slot = bucket.pop(0)
        else:
            slot = self._head
            self._head = (self._head + 1) % self.capacity
            old_code, _ = self._slots[slot]
            old_bucket = self.table[old_code]
            old_bucket.pop(old_bucket.slots.index(slot))
            if not old_bucket:
                del self.table[old_code]
                self._index.remove(old_code)
                if old_code == code:
                    bucket = None

        if bucket is None:
            bucket = self.table[code] = Bucket()
            self._index.add(code)
        bucket.insert(t, slot)
        self._slots[slot] = (code, t)
        return True

    def sample(self, b: int, state=None) -> list[Transition]:
        """Draw up to ``b`` transitions relevant to ``state``."""
        if self.size == 0:
            raise EmptyBufferError("cannot sample from an empty buffer")
        if b < 1:
            raise InvalidConfigError(f"batch size must be >= 1, got {b}")
        self.sample_calls += 1
        if self.sampling == "uniform":
            idx = self._choice(self.size, b)
            return [self._slots[i][1] for i in idx]
        if state is None:
            raise ValueError("state-conditioned sampling needs a query state")

        code = encode(self.hyperplanes, state)
        greedy = self.rng.random() < self.eps_max
        if greedy:
            self.greedy_calls += 1
        bucket = self.table.get(code)
        if bucket is not None:
            if greedy:
                return bucket.items[-b:]
            return [bucket.items[i] for i in self._choice(len(bucket), b)]

        self.nearest_calls += 1
        near = [self.table[c] for c in self._index.nearest(code, 2)]
        if greedy:
            merged = [(r, t) for bk in near for r, t in zip(bk.rewards[-b:], bk.items[-b:])]
            merged.sort(key=lambda e: e[0])
            return [t for _, t in merged[-b:]]
        pool = [t for bk in near for t in bk.items]
        return [pool[i] for i in self._choice(len(pool), b)]

    def _choice(self, n: int, b: int) -> np.ndarray:
        return self.rng.choice(n, size=min(b, n), replace=False)

    def transitions(self) -> list[Transition]:
        return [t for bk in self.table.values() for t in bk.items]

    def stats(self) -> tuple[int, int, float | None, float | None]:
        """``(size, bucket_count, min_reward, max_reward)``; rewards are None when empty."""
        if not self.table:
            return 0, 0, None, None
        lo = min(bk.rewards[0] for bk in self.table.values())
        hi = max(bk.rewards[-1] for bk in self.table.values())
        return self.size, len(self.table), lo, hi

    def dump_csv(self, f: IO[str]) -> None:
        """Write one ``bucket_key,reward,m_t,episode_id`` row per stored transition."""
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bucket_key", "reward", "m_t", "episode_id"])
        for code in sorted(self.table):
            for t in self.table[code].items:
                w.writerow([code, repr(float(t.reward)), int(bool(t.done)), t.episode])
