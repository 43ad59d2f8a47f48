"""Sign random projection hashing of state vectors.

Each hyperplane contributes one bit: 1 if the state lies strictly on the
positive side of the plane, 0 otherwise. Codes are plain ``str`` objects of
``'0'``/``'1'`` characters, first hyperplane first, so they can be used
directly as dictionary keys and written to CSV unchanged.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from lser.errors import EmptyBufferError, InvalidConfigError, ShapeError

HashCode = str


@dataclass(frozen=True, eq=False)
class HyperplaneSet:
    normals: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        normals = np.array(self.normals, dtype=np.float64)
        if normals.ndim != 2 or normals.shape[0] < 1 or normals.shape[1] < 1:
            raise InvalidConfigError(f"normals must be a non-empty 2D array, got shape {normals.shape}")
        if not np.all(np.any(normals != 0.0, axis=1)):
            raise InvalidConfigError("every hyperplane normal needs a nonzero entry")
        normals.setflags(write=False)
        object.__setattr__(self, "normals", normals)

    @property
    def n_h(self) -> int:
        return self.normals.shape[0]

    @property
    def d_s(self) -> int:
        return self.normals.shape[1]


def new_hyperplanes(n_h: int, d_s: int, seed: int) -> HyperplaneSet:
    """Draw ``n_h`` standard-normal hyperplane normals in ``d_s`` dimensions."""
    if n_h < 1 or d_s < 1:
        raise InvalidConfigError(f"n_h and d_s must be >= 1, got n_h={n_h}, d_s={d_s}")
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((n_h, d_s))
    # a zero row has probability zero but would make the bit constant
    while not np.all(np.any(normals != 0.0, axis=1)):
        normals = rng.standard_normal((n_h, d_s))
    return HyperplaneSet(normals, seed)


def _as_state(hp: HyperplaneSet, s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] != hp.d_s:
        raise ShapeError(f"expected a state of length {hp.d_s}, got shape {s.shape}")
    return s


def encode_bits(hp: HyperplaneSet, s) -> np.ndarray:
    """Boolean bit vector of ``s``; bit i is set iff ``normals[i] @ s > 0``."""
    return hp.normals @ _as_state(hp, s) > 0.0


def encode(hp: HyperplaneSet, s) -> HashCode:
    bits = encode_bits(hp, s)
    return bits.astype(np.uint8).tobytes().translate(_BIT_CHARS).decode("ascii")


_BIT_CHARS = bytes.maketrans(b"\x00\x01", b"01")


def code_to_bits(code: HashCode) -> np.ndarray:
    return np.frombuffer(code.encode("ascii"), dtype=np.uint8) == ord("1")


def angular_collision_prob(u, v) -> float:
    """Probability that one random hyperplane puts ``u`` and ``v`` on the same side.

    Equals ``1 - theta / pi`` with ``theta`` the angle between the vectors.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ShapeError(f"vectors must be 1D with equal length, got {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("angle is undefined for a zero vector")
    cos = float(np.clip(u @ v / (nu * nv), -1.0, 1.0))
    return 1.0 - math.acos(cos) / math.pi


def jaccard(a: HashCode, b: HashCode) -> float:
    """Jaccard similarity of the sets of 1-bit positions; two all-zero codes give 1.0."""
    if len(a) != len(b):
        raise ShapeError(f"hash codes differ in length: {len(a)} vs {len(b)}")
    inter = union = 0
    for x, y in zip(a, b):
        if x == "1" or y == "1":
            union += 1
            if x == y:
                inter += 1
    return 1.0 if union == 0 else inter / union


def jaccard_many(query: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Vectorised :func:`jaccard` of one bit vector against the rows of ``codes``."""
    inter = np.count_nonzero(codes & query, axis=1)
    union = np.count_nonzero(codes | query, axis=1)
    out = np.ones(codes.shape[0], dtype=np.float64)
    nz = union > 0
    out[nz] = inter[nz] / union[nz]
    return out


def nearest_codes(query: HashCode, occupied: Iterable[HashCode], k: int) -> list[HashCode]:
    """The ``k`` codes in ``occupied`` most Jaccard-similar to ``query``.

    Ties go to the lexicographically smaller code, so the result is fully
    determined by its inputs.
    """
    if k < 1:
        raise InvalidConfigError(f"k must be >= 1, got {k}")
    scored = [(-jaccard(query, c), c) for c in set(occupied)]
    if not scored:
        raise EmptyBufferError("no occupied codes to search")
    return [c for _, c in heapq.nsmallest(k, scored)]


class CodeIndex:
    """Occupied-code registry with a packed bit matrix for fast nearest lookups.

    Supports removal (swap with the last row) so buffers whose buckets can
    empty out stay consistent.
    """

    def __init__(self, n_h: int, initial: int = 64) -> None:
        self.n_h = n_h
        self._bits = np.zeros((initial, n_h), dtype=bool)
        self._codes: list[HashCode] = []
        self._pos: dict[HashCode, int] = {}

    def __len__(self) -> int:
        return len(self._codes)

    def __contains__(self, code: HashCode) -> bool:
        return code in self._pos

    def codes(self) -> list[HashCode]:
        return list(self._codes)

    def add(self, code: HashCode) -> None:
        if code in self._pos:
            return
        n = len(self._codes)
        if n == self._bits.shape[0]:
            grown = np.zeros((2 * n, self.n_h), dtype=bool)
            grown[:n] = self._bits
            self._bits = grown
        self._bits[n] = code_to_bits(code)
        self._codes.append(code)
        self._pos[code] = n

    def remove(self, code: HashCode) -> None:
        i = self._pos.pop(code)
        last = len(self._codes) - 1
        if i != last:
            moved = self._codes[last]
            self._codes[i] = moved
            self._bits[i] = self._bits[last]
            self._pos[moved] = i
        self._codes.pop()

    def nearest(self, query: HashCode, k: int) -> list[HashCode]:
        """Same contract as :func:`nearest_codes`, vectorised over the registry."""
        n = len(self._codes)
        if n == 0:
            raise EmptyBufferError("no occupied codes to search")
        if k < 1:
            raise InvalidConfigError(f"k must be >= 1, got {k}")
        sims = jaccard_many(code_to_bits(query), self._bits[:n])
        if n > k:
            cutoff = np.partition(sims, n - k)[n - k]
            cand = np.flatnonzero(sims >= cutoff)
        else:
            cand = np.arange(n)
        ranked = sorted((-sims[i], self._codes[i]) for i in cand)
        return [c for _, c in ranked[:k]]

