"""Uniform photon loss: sector weights, exact lossy distributions, finite sampling."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .core import ProbabilityTable
from .errors import ConfigError, EstimateUndefinedError
from .masks import OccupationMask, ancestor_index, rank, sector_masks, set_positions

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class LossModel:
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"loss probability {self.eta} outside [0, 1]")


def sector_weights(n: int, eta: float) -> list[float]:
    """Binomial probability of losing k of n photons, k = 0..n."""
    LossModel(eta)
    return [comb(n, k) * eta**k * (1 - eta) ** (n - k) for k in range(n + 1)]


def lossy_conditional_distribution(ideal: ProbabilityTable, k: int) -> ProbabilityTable:
    """Distribution of the surviving (n-k)-photon mask given exactly k losses."""
    n, m = ideal.sector, ideal.m
    if not 0 <= k <= n:
        raise ConfigError(f"k={k} outside [0, {n}]")
    if k == 0:
        return ideal
    anc = ancestor_index(m, n, k)
    vals = ideal.values[anc].sum(axis=1) / comb(n, k)
    meta = {"source": "lossy_conditional", "k": k, "n": n}
    return ProbabilityTable(m, n - k, vals, ideal.kind, meta)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def shard_seed(seed: int, shard: int) -> int:
    return splitmix64((seed ^ shard) & _MASK64)


@dataclass(eq=False)
class SampleLedger:
    """Realised outcome counts, one dense count array per loss sector k."""

    m: int
    n: int
    counts: dict[int, np.ndarray]
    eta: float = float("nan")
    seed: int | None = None
    shards: int = 1
    shots: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        for k in range(self.n + 1):
            c = self.counts.setdefault(k, np.zeros(comb(self.m, self.n - k), dtype=np.int64))
            if c.shape != (comb(self.m, self.n - k),):
                raise ConfigError(f"count array for k={k} has wrong length")
            if np.any(c < 0):
                raise ConfigError("negative count")

    @property
    def totals_per_k(self) -> list[int]:
        return [int(self.counts[k].sum()) for k in range(self.n + 1)]

    @property
    def total(self) -> int:
        return sum(self.totals_per_k)

    def count(self, k: int, mask) -> int:
        bits = mask.bits if isinstance(mask, OccupationMask) else int(mask)
        return int(self.counts[k][rank([bits], self.m, self.n - k)[0]])

    # ---- persistence
    def save(self, csv_path) -> Path:
        csv_path = Path(csv_path)
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "mask_hex", "count"])
            for k in range(self.n + 1):
                masks = sector_masks(self.m, self.n - k)
                for i in np.flatnonzero(self.counts[k]):
                    w.writerow([k, f"{int(masks[i]):x}", int(self.counts[k][i])])
        sidecar = csv_path.with_suffix(".json")
        sidecar.write_text(
            json.dumps(
                {"m": self.m, "n": self.n, "eta": self.eta, "N_tot": self.total,
                 "seed": self.seed, "shards": self.shards},
                indent=2,
            )
        )
        return sidecar

    @classmethod
    def load(cls, csv_path) -> "SampleLedger":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        m, n = int(meta["m"]), int(meta["n"])
        counts = {k: np.zeros(comb(m, n - k), dtype=np.int64) for k in range(n + 1)}
        with csv_path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                k = int(row["k"])
                mask = int(row["mask_hex"], 16)
                if mask.bit_count() != n - k:
                    raise ConfigError(f"mask {row['mask_hex']} has wrong popcount for k={k}")
                counts[k][rank([mask], m, n - k)[0]] += int(row["count"])
        led = cls(m, n, counts, float(meta["eta"]), meta.get("seed"), int(meta.get("shards", 1)))
        if led.total != int(meta["N_tot"]):
            raise ConfigError("ledger CSV total does not match sidecar N_tot")
        return led


def _draw_shard(ideal, eta, shots, rng, keep):
    n, m = ideal.sector, ideal.m
    pos = set_positions(m, n)
    masks = sector_masks(m, n)
    cdf = np.cumsum(ideal.values)
    cdf /= cdf[-1]
    counts = {k: np.zeros(comb(m, n - k), dtype=np.int64) for k in range(n + 1)}
    ks_all, idx_all = [], []
    chunk = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, shots, chunk):
        b = min(chunk, shots - lo)
        draw = np.searchsorted(cdf, rng.random(b), side="right")
        np.minimum(draw, len(cdf) - 1, out=draw)
        lost = rng.random((b, n)) < eta
        surv = masks[draw] - ((np.int64(1) << pos[draw]) * lost).sum(axis=1)
        ks = lost.sum(axis=1)
        for k in range(n + 1):
            sel = ks == k
            if not sel.any():
                continue
            r = rank(surv[sel], m, n - k)
            counts[k] += np.bincount(r, minlength=len(counts[k]))
        if keep:
            ks_all.append(ks)
            idx_all.append(surv)
    shot_rec = (np.concatenate(ks_all), np.concatenate(idx_all)) if keep and ks_all else None
    return counts, shot_rec


def draw_samples(
    ideal: ProbabilityTable,
    loss: LossModel,
    N_tot: int,
    seed: int,
    shards: int = 1,
    keep_shots: bool = False,
) -> SampleLedger:
    """Two-stage sampling: ideal outcome, then each photon independently lost with prob. eta."""
    if ideal.kind != "exact" or abs(ideal.mass - 1) > 1e-9:
        raise ConfigError("draw_samples needs an exact, normalised ideal table")
    if N_tot < 0 or shards < 1:
        raise ConfigError("N_tot must be >= 0 and shards >= 1")
    m, n = ideal.m, ideal.sector
    counts = {k: np.zeros(comb(m, n - k), dtype=np.int64) for k in range(n + 1)}
    ks, ms = [], []
    base, extra = divmod(N_tot, shards)
    for s in range(shards):
        rng = np.random.default_rng(shard_seed(seed, s))
        c, rec = _draw_shard(ideal, loss.eta, base + (s < extra), rng, keep_shots)
        for k in counts:
            counts[k] += c[k]
        if rec is not None:
            ks.append(rec[0])
            ms.append(rec[1])
    shots = None
    if keep_shots:
        shots = (
            np.concatenate(ks) if ks else np.zeros(0, np.int64),
            np.concatenate(ms) if ms else np.zeros(0, np.int64),
        )
    return SampleLedger(m, n, counts, loss.eta, seed, shards, shots)


def _group_counts(ledger: SampleLedger, k: int, group: int) -> tuple[np.ndarray, int]:
    if ledger.shots is None:
        raise ConfigError("divide_sample_groups needs a ledger drawn with keep_shots=True")
    G = comb(ledger.m, ledger.n)
    ks, masks = ledger.shots
    sel = (np.arange(len(ks)) % G == group) & (ks == k)
    r = rank(masks[sel], ledger.m, ledger.n - k)
    return np.bincount(r, minlength=comb(ledger.m, ledger.n - k)), int(sel.sum())


def estimate_probability(
    ledger: SampleLedger, mask, k: int, divide_sample_groups: bool = False, group: int | None = None
) -> float:
    """Empirical frequency of ``mask`` within loss sector ``k``.

    With ``divide_sample_groups`` only shots whose index is congruent to
    ``group`` modulo C(m, n) are used (default group: the mask's sector rank).
    """
    bits = mask.bits if isinstance(mask, OccupationMask) else int(mask)
    if bits.bit_count() != ledger.n - k:
        raise ConfigError(f"mask popcount {bits.bit_count()} != n-k = {ledger.n - k}")
    r = int(rank([bits], ledger.m, ledger.n - k)[0])
    if divide_sample_groups:
        g = r % comb(ledger.m, ledger.n) if group is None else group
        counts, total = _group_counts(ledger, k, g)
    else:
        counts, total = ledger.counts[k], ledger.totals_per_k[k]
    if total == 0:
        raise EstimateUndefinedError(k)
    return counts[r] / total


def estimate_sector(ledger: SampleLedger, k: int) -> ProbabilityTable:
    """Every frequency of sector k at once (flag-off estimator)."""
    total = ledger.totals_per_k[k]
    if total == 0:
        raise EstimateUndefinedError(k)
    meta = {"source": "ledger", "k": k, "n": ledger.n, "N_used": total}
    return ProbabilityTable(ledger.m, ledger.n - k, ledger.counts[k] / total, "estimated", meta)
