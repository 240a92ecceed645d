"""Open-addressing table substrate shared by the RVH and TSS engines.

Keys are non-negative integers holding a packed bit string; every key in one
table has the same bit length. Each occupied slot holds one key and the
overlap group of rules stored under it, so ``occupied`` counts distinct keys.
"""

from __future__ import annotations

from dataclasses import dataclass

MASK64 = (1 << 64) - 1
DEFAULT_SEED = 0x5EED_C1A5_51F1_E000
INITIAL_CAPACITY = 8
MAX_LOAD = 0.75


def _fmix64(k: int) -> int:
    k ^= k >> 33
    k = (k * 0xFF51AFD7ED558CCD) & MASK64
    k ^= k >> 33
    k = (k * 0xC4CEB9FE1A85EC53) & MASK64
    k ^= k >> 33
    return k


def length_seed(length: int, seed: int = DEFAULT_SEED) -> int:
    """Per-key-length starting state; tables with a fixed key length cache it."""
    return _fmix64(((seed ^ length) * 0xD6E8FEB86659FD93) & MASK64)


def hash_word(word: int, start: int) -> int:
    """Hash one 64-bit word from a :func:`length_seed` state (inlined fmix64)."""
    k = ((start ^ word) * 0x9E3779B97F4A7C15) & MASK64
    k ^= k >> 33
    k = (k * 0xFF51AFD7ED558CCD) & MASK64
    k ^= k >> 33
    k = (k * 0xC4CEB9FE1A85EC53) & MASK64
    return k ^ (k >> 33)


def hash_bits(bits: int, length: int, seed: int = DEFAULT_SEED) -> int:
    """Seeded 64-bit hash of a packed bit string.

    The bit length seeds the state so that e.g. "0" and "00" differ; longer
    keys are consumed 64 bits at a time.
    """
    h = length_seed(length, seed)
    while True:
        h = hash_word(bits & MASK64, h)
        bits >>= 64
        if not bits:
            return h


@dataclass(frozen=True)
class HashKey:
    bits: int
    length: int
    hash: int

    @classmethod
    def make(cls, bits: int, length: int, seed: int = DEFAULT_SEED) -> "HashKey":
        return cls(bits, length, hash_bits(bits, length, seed))

    def __str__(self):
        return format(self.bits, f"0{self.length}b") if self.length else ""


class ProbeTable:
    """Linear-probing map from integer keys to values.

    Grows by doubling once ``occupied / capacity`` exceeds 0.75; removal uses
    backward-shift deletion, so there are no tombstones and ``occupied`` is
    exact at all times.
    """

    __slots__ = ("_keys", "_hashes", "_values", "_mask", "occupied")

    def __init__(self, capacity: int = INITIAL_CAPACITY):
        if capacity < 1 or capacity & (capacity - 1):
            raise ValueError("capacity must be a power of two")
        self._keys = [None] * capacity
        self._hashes = [0] * capacity
        self._values = [None] * capacity
        self._mask = capacity - 1
        self.occupied = 0

    @property
    def capacity(self) -> int:
        return self._mask + 1

    def __len__(self):
        return self.occupied

    def get(self, key: int, h: int):
        keys = self._keys
        mask = self._mask
        i = h & mask
        while True:
            k = keys[i]
            if k is None:
                return None
            if k == key and self._hashes[i] == h:
                return self._values[i]
            i = (i + 1) & mask

    def put(self, key: int, h: int, value) -> None:
        """Insert or replace the value stored under ``key``."""
        i = self._find_slot(key, h)
        if self._keys[i] is None:
            self._keys[i] = key
            self._hashes[i] = h
            self.occupied += 1
            self._values[i] = value
            if self.occupied > MAX_LOAD * self.capacity:
                self._grow()
        else:
            self._values[i] = value

    def remove(self, key: int, h: int):
        i = self._find_slot(key, h)
        if self._keys[i] is None:
            raise KeyError(key)
        value = self._values[i]
        keys, hashes, values, mask = self._keys, self._hashes, self._values, self._mask
        # Backward-shift: pull later cluster members into the hole when their
        # home slot does not lie cyclically in (hole, j].
        j = i
        while True:
            j = (j + 1) & mask
            if keys[j] is None:
                break
            home = hashes[j] & mask
            if (j > i and (home <= i or home > j)) or (j < i and home <= i and home > j):
                keys[i], hashes[i], values[i] = keys[j], hashes[j], values[j]
                i = j
        keys[i] = None
        values[i] = None
        self.occupied -= 1
        return value

    def items(self):
        for k, v in zip(self._keys, self._values):
            if k is not None:
                yield k, v

    def values(self):
        for k, v in zip(self._keys, self._values):
            if k is not None:
                yield v

    def _find_slot(self, key, h):
        keys = self._keys
        mask = self._mask
        i = h & mask
        while keys[i] is not None and not (keys[i] == key and self._hashes[i] == h):
            i = (i + 1) & mask
        return i

    def _grow(self):
        old = list(zip(self._keys, self._hashes, self._values))
        cap = self.capacity * 2
        self._keys = [None] * cap
        self._hashes = [0] * cap
        self._values = [None] * cap
        self._mask = cap - 1
        for k, h, v in old:
            if k is None:
                continue
            i = h & self._mask
            while self._keys[i] is not None:
                i = (i + 1) & self._mask
            self._keys[i] = k
            self._hashes[i] = h
            self._values[i] = v
