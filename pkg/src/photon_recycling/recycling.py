"""Recycled probabilities built from lossy sectors, and their interference decomposition.

For a target n-photon mask t and k lost photons

    p_R^k(t) = (1 / C(m-n+k, k)) * sum_{s in L_k(t)} p(s)

where L_k(t) are the masks obtained by clearing k bits of t.  Substituting the
exact lossy distribution gives

    p_R^k(t) = p(t) / C(m-n+k, k) + (N'_k / N_k) * I_k(t)

with N_k = C(m-n+k,k) C(n,k), N'_k = (C(m-n+k,k) - 1) C(n,k) and I_k(t) the
average ideal probability of the *other* masks sharing a k-loss descendant.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .core import ProbabilityTable
from .errors import ConfigError, UndefinedDependencyError
from .loss import SampleLedger, estimate_probability, estimate_sector, lossy_conditional_distribution
from .masks import OccupationMask, ancestor_index, descendant_index, loss_descendants, rank, sector_masks


def fill_count(m: int, n: int, k: int) -> int:
    """C(m-n+k, k): number of ways to put k lost photons back."""
    return comb(m - n + k, k)


def mix_coefficients(m: int, n: int, k: int) -> tuple[float, float]:
    """(signal, mix) = (1/C(m-n+k,k), N'_k/N_k)."""
    c = fill_count(m, n, k)
    return 1.0 / c, (c - 1) / c


def _check_k(n: int, k: int) -> None:
    if not 1 <= k <= n - 1:
        raise ConfigError(f"recycling needs 1 <= k <= n-1, got k={k}, n={n}")


@dataclass(frozen=True, eq=False)
class RecycledTable:
    """Normalised recycled values p_R^k over every n-photon mask."""

    m: int
    n: int
    k: int
    values: np.ndarray
    kind: str = "exact"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (comb(self.m, self.n),):
            raise ConfigError("recycled table must cover all C(m,n) masks")
        if np.any(v < 0):
            raise ConfigError("recycled values must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def sector(self) -> int:
        return self.n

    @property
    def norm_factor(self) -> float:
        return 1.0 / fill_count(self.m, self.n, self.k)

    @property
    def raw(self) -> np.ndarray:
        """Pre-normalisation sums over loss descendants."""
        return self.values / self.norm_factor

    @property
    def masks(self) -> np.ndarray:
        return sector_masks(self.m, self.n)

    def __getitem__(self, mask) -> float:
        bits = mask.bits if isinstance(mask, OccupationMask) else int(mask)
        return float(self.values[rank([bits], self.m, self.n)[0]])

    def save(self, csv_path) -> None:
        csv_path = Path(csv_path)
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mask_hex", "value"])
            for mk, v in zip(self.masks.tolist(), self.values.tolist()):
                w.writerow([f"{mk:x}", repr(v)])
        csv_path.with_suffix(".json").write_text(json.dumps(
            {"m": self.m, "n": self.n, "k": self.k, "kind": self.kind,
             "norm_factor": self.norm_factor}, indent=2))

    @classmethod
    def load(cls, csv_path) -> "RecycledTable":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        m, n, k = int(meta["m"]), int(meta["n"]), int(meta["k"])
        vals = np.zeros(comb(m, n))
        with csv_path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                vals[rank([int(row["mask_hex"], 16)], m, n)[0]] = float(row["value"])
        return cls(m, n, k, vals, meta["kind"])


def recycle_sector(lossy: ProbabilityTable, n: int, k: int) -> RecycledTable:
    """Recycled table from any (exact or estimated) distribution over sector n-k."""
    m = lossy.m
    _check_k(n, k)
    if lossy.sector != n - k:
        raise ConfigError(f"lossy table is sector {lossy.sector}, expected {n - k}")
    desc = descendant_index(m, n, k)
    vals = lossy.values[desc].sum(axis=1) / fill_count(m, n, k)
    return RecycledTable(m, n, k, vals, lossy.kind, {"source": lossy.meta.get("source")})


def recycled_table(ledger: SampleLedger, k: int) -> RecycledTable:
    return recycle_sector(estimate_sector(ledger, k), ledger.n, k)


def recycled_table_exact(ideal: ProbabilityTable, k: int) -> RecycledTable:
    return recycle_sector(lossy_conditional_distribution(ideal, k), ideal.sector, k)


def recycled_estimate(ledger: SampleLedger, target, k: int, divide_sample_groups: bool = False) -> float:
    """Single-mask recycled estimate, summing per-descendant frequencies."""
    _check_k(ledger.n, k)
    t = target if isinstance(target, OccupationMask) else OccupationMask(int(target), ledger.m)
    if t.photons != ledger.n:
        raise ConfigError("target must carry n photons")
    total = sum(
        estimate_probability(ledger, s, k, divide_sample_groups) for s in loss_descendants(t, k)
    )
    return total / fill_count(ledger.m, ledger.n, k)


# ------------------------------------------------------------- interference


@dataclass(frozen=True)
class InterferenceRecord:
    mask: OccupationMask
    value: float
    signal_coeff: float
    mix_coeff: float


def _neighbour_sums(ideal: ProbabilityTable, k: int, targets: np.ndarray) -> np.ndarray:
    """sum_{s in L(t)} sum_{u in G(s), u != t} p(u) for the given target ranks."""
    m, n = ideal.m, ideal.sector
    desc = descendant_index(m, n, k)[targets]  # (T, C(n,k))
    anc = ancestor_index(m, n, k)  # (C(m,n-k), C(m-n+k,k))
    out = np.empty(len(targets))
    step = max(1, 4_000_000 // (desc.shape[1] * anc.shape[1]))
    for lo in range(0, len(targets), step):
        u = anc[desc[lo : lo + step]]  # (B, C(n,k), C(m-n+k,k))
        keep = u != targets[lo : lo + step, None, None]
        out[lo : lo + step] = np.where(keep, ideal.values[u], 0.0).sum(axis=(1, 2))
    return out


def interference_terms_exact(ideal: ProbabilityTable, k: int) -> np.ndarray:
    """I_k(t) for every n-photon mask, from the literal double sum."""
    if ideal.kind != "exact":
        raise ConfigError("interference terms need an exact ideal table")
    m, n = ideal.m, ideal.sector
    _check_k(n, k)
    n_prime = (fill_count(m, n, k) - 1) * comb(n, k)
    return _neighbour_sums(ideal, k, np.arange(len(ideal))) / n_prime


def interference_term_exact(ideal: ProbabilityTable, target, k: int) -> InterferenceRecord:
    m, n = ideal.m, ideal.sector
    _check_k(n, k)
    t = target if isinstance(target, OccupationMask) else OccupationMask(int(target), m)
    r = rank([t.bits], m, n)
    n_prime = (fill_count(m, n, k) - 1) * comb(n, k)
    value = float(_neighbour_sums(ideal, k, r)[0] / n_prime)
    sig, mix = mix_coefficients(m, n, k)
    return InterferenceRecord(t, value, sig, mix)


# ---------------------------------------------------------------- deviations


def abs_avg_deviation(table) -> float:
    """Mean over all n-photon masks of |value - 1/C(m,n)|."""
    vals = np.asarray(table.values, dtype=float)
    return float(np.mean(np.abs(vals - 1.0 / len(vals))))


@dataclass(frozen=True)
class DependencyFactor:
    value: float
    out_of_range: bool

    def __float__(self) -> float:
        return self.value


def dependency_factor(D_k: float, D_0: float, m: int, n: int, k: int, literal: bool = True) -> DependencyFactor:
    """Dependency d_k between interference terms and ideal probabilities.

    ``literal=True`` uses (C D_k/D_0 - 1/C)/(C-1).  ``literal=False`` uses
    (C D_k/D_0 - 1)/(C-1), the value that makes the affine model
    D_k = D_0 (1 + d (C-1)) / C hold exactly.
    """
    if D_0 == 0:
        raise UndefinedDependencyError("D_0 = 0: dependency factor undefined")
    c = fill_count(m, n, k)
    if c < 2:
        raise UndefinedDependencyError("C(m-n+k,k) = 1: no interference terms")
    offset = 1.0 / c if literal else 1.0
    d = (c * D_k / D_0 - offset) / (c - 1)
    return DependencyFactor(float(d), not 0.0 <= d <= 1.0)
