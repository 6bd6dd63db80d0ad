"""Occupation masks: m-bit integers, one bit per mode, no collisions.

Sectors (all masks of fixed popcount) are stored as ascending int64 arrays;
ascending numeric order coincides with colex order, so ``np.searchsorted``
gives the rank of a mask inside its sector.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import CapacityError, ConfigError

MAX_SECTOR_SIZE = 20_000_000
MAX_MODES = 62


@dataclass(frozen=True, order=True)
class OccupationMask:
    bits: int
    m: int

    def __post_init__(self):
        if not 0 <= self.m <= MAX_MODES:
            raise ConfigError(f"mode count {self.m} outside [0, {MAX_MODES}]")
        if self.bits < 0 or self.bits >> self.m:
            raise ConfigError(f"bits {self.bits:#x} do not fit in {self.m} modes")

    @property
    def photons(self) -> int:
        return self.bits.bit_count()

    @classmethod
    def from_modes(cls, modes, m: int) -> "OccupationMask":
        bits = 0
        for i in modes:
            if not 0 <= i < m:
                raise ConfigError(f"mode {i} outside [0, {m})")
            if bits >> i & 1:
                raise ConfigError(f"mode {i} repeated")
            bits |= 1 << i
        return cls(bits, m)

    def modes(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.m) if self.bits >> i & 1)

    def __str__(self) -> str:
        # mode 0 printed first, matching the usual Fock-string convention
        return "".join("1" if self.bits >> i & 1 else "0" for i in range(self.m))

    @classmethod
    def from_string(cls, s: str) -> "OccupationMask":
        return cls(sum(1 << i for i, c in enumerate(s) if c == "1"), len(s))


def loss_descendants(s: OccupationMask, k: int) -> set[OccupationMask]:
    """All masks reachable from ``s`` by losing exactly ``k`` photons."""
    n = s.photons
    if not 0 <= k <= n:
        raise ConfigError(f"cannot lose k={k} photons from a {n}-photon mask")
    modes = s.modes()
    out = set()
    for lost in combinations(modes, k):
        out.add(OccupationMask(s.bits & ~sum(1 << i for i in lost), s.m))
    return out


def fill_ancestors(s: OccupationMask, k: int, m: int | None = None) -> set[OccupationMask]:
    """All masks that lose exactly ``k`` photons to become ``s``."""
    m = s.m if m is None else m
    if m != s.m:
        raise ConfigError(f"mask has {s.m} modes but m={m}")
    if k < 1:
        raise ConfigError("fill_ancestors needs k >= 1")
    free = [i for i in range(m) if not s.bits >> i & 1]
    if k > len(free):
        raise ConfigError(f"only {len(free)} empty modes, cannot add {k} photons")
    return {OccupationMask(s.bits | sum(1 << i for i in add), m) for add in combinations(free, k)}


# ---------------------------------------------------------------- vectorised


def _check_size(m: int, w: int) -> int:
    if not 0 <= w <= m or m > MAX_MODES:
        raise ConfigError(f"invalid sector m={m}, photons={w}")
    size = comb(m, w)
    if size > MAX_SECTOR_SIZE:
        raise CapacityError(f"sector C({m},{w})={size} exceeds {MAX_SECTOR_SIZE}")
    return size


@lru_cache(maxsize=64)
def sector_masks(m: int, w: int) -> np.ndarray:
    """Ascending array of every ``w``-photon mask on ``m`` modes."""
    size = _check_size(m, w)
    if w == 0:
        out = np.zeros(1, dtype=np.int64)
    else:
        pos = np.fromiter(
            (i for c in combinations(range(m), w) for i in c), dtype=np.int64, count=size * w
        ).reshape(size, w)
        out = np.sort((np.int64(1) << pos).sum(axis=1))
    out.setflags(write=False)
    return out


def rank(masks, m: int, w: int) -> np.ndarray:
    """Index of each mask within ``sector_masks(m, w)``."""
    table = sector_masks(m, w)
    masks = np.asarray(masks, dtype=np.int64)
    idx = np.searchsorted(table, masks)
    bad = (idx >= len(table)) | (table[np.minimum(idx, len(table) - 1)] != masks)
    if np.any(bad):
        raise ConfigError(f"mask not in sector (m={m}, photons={w})")
    return idx


@lru_cache(maxsize=64)
def set_positions(m: int, w: int) -> np.ndarray:
    """(C(m,w), w) array of occupied mode indices, ascending per row."""
    masks = sector_masks(m, w)
    bits = (masks[:, None] >> np.arange(m)) & 1
    pos = np.nonzero(bits)[1].reshape(len(masks), w) if w else np.zeros((len(masks), 0), np.int64)
    pos.setflags(write=False)
    return pos


@lru_cache(maxsize=64)
def descendant_index(m: int, n: int, k: int) -> np.ndarray:
    """(C(m,n), C(n,k)) ranks in sector n-k of each mask's loss descendants."""
    masks = sector_masks(m, n)
    pos = set_positions(m, n)
    cols = []
    for lost in combinations(range(n), k):
        cleared = masks.copy()
        for j in lost:
            cleared -= np.int64(1) << pos[:, j]
        cols.append(rank(cleared, m, n - k))
    out = np.stack(cols, axis=1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def ancestor_index(m: int, n: int, k: int) -> np.ndarray:
    """(C(m,n-k), C(m-n+k,k)) ranks in sector n of each lossy mask's fill ancestors."""
    w = n - k
    masks = sector_masks(m, w)
    free = set_positions(m, m - w)  # positions of complements
    comp = (np.int64((1 << m) - 1) ^ masks)
    # complement masks are a sector too but in a different order; realign
    free = free[rank(comp, m, m - w)]
    cols = []
    for add in combinations(range(m - w), k):
        filled = masks.copy()
        for j in add:
            filled += np.int64(1) << free[:, j]
        cols.append(rank(filled, m, n))
    out = np.stack(cols, axis=1)
    out.setflags(write=False)
    return out
