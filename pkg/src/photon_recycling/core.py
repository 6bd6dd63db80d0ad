"""Interferometers, input configurations and ideal output distributions."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from math import comb
from pathlib import Path

import numpy as np

from .errors import ConfigError, RegimeError
from .masks import OccupationMask, rank, sector_masks, set_positions
from .permanent import permanent_batch

UNITARITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Interferometer:
    entries: np.ndarray
    provenance: dict = field(default_factory=lambda: {"kind": "external"})

    def __post_init__(self):
        u = np.array(self.entries, dtype=np.complex128)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ConfigError(f"interferometer must be square, got {u.shape}")
        err = np.max(np.abs(u @ u.conj().T - np.eye(len(u)))) if len(u) else 0.0
        if err >= UNITARITY_TOL:
            raise ConfigError(f"matrix is not unitary (max deviation {err:.3g})")
        u.setflags(write=False)
        object.__setattr__(self, "entries", u)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def to_json(self) -> dict:
        return {
            "m": self.dim,
            "provenance": self.provenance,
            "entries": [[[z.real, z.imag] for z in row] for row in self.entries.tolist()],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Interferometer":
        try:
            arr = np.array(obj["entries"], dtype=float)
            m = int(obj["m"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad interferometer JSON: {e}") from e
        if arr.shape != (m, m, 2):
            raise ConfigError(f"entries shape {arr.shape} does not match m={m}")
        return cls(arr[..., 0] + 1j * arr[..., 1], obj.get("provenance", {"kind": "external"}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "Interferometer":
        return cls.from_json(json.loads(Path(path).read_text()))


def haar_unitary(m: int, seed: int) -> Interferometer:
    """Haar-random U(m): QR of a complex Ginibre matrix with R's diagonal phases folded into Q."""
    if m < 1:
        raise ConfigError("m must be >= 1")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return Interferometer(q, {"kind": "haar", "seed": int(seed)})


@dataclass(frozen=True)
class InputConfig:
    m: int
    n: int
    occupied_modes: tuple[int, ...] | None = None

    def __post_init__(self):
        modes = tuple(range(self.n)) if self.occupied_modes is None else tuple(self.occupied_modes)
        if len(modes) != self.n or len(set(modes)) != self.n:
            raise ConfigError("occupied_modes must list n distinct modes")
        if any(not 0 <= i < self.m for i in modes):
            raise ConfigError("occupied mode outside [0, m)")
        object.__setattr__(self, "occupied_modes", modes)

    @property
    def rows(self) -> list[int]:
        return sorted(self.occupied_modes)


class CollisionPolicy(str, Enum):
    DISCARD_RENORMALIZE = "discard-renormalize"
    REJECT_IF_MASS_LOW = "reject-if-mass-low"


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """Dense table over every mask of one photon-number sector (indexed by sector rank)."""

    m: int
    sector: int
    values: np.ndarray
    kind: str = "exact"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (comb(self.m, self.sector),):
            raise ConfigError(f"table length {v.shape} != C({self.m},{self.sector})")
        if np.any(v < 0):
            raise ConfigError("probability table entries must be non-negative")
        if self.kind not in ("exact", "estimated"):
            raise ConfigError(f"unknown table kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def masks(self) -> np.ndarray:
        return sector_masks(self.m, self.sector)

    @property
    def mass(self) -> float:
        return float(self.values.sum())

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, mask) -> float:
        bits = mask.bits if isinstance(mask, OccupationMask) else int(mask)
        return float(self.values[rank([bits], self.m, self.sector)[0]])

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.masks.tolist(), self.values.tolist()))

    def save(self, csv_path) -> None:
        csv_path = Path(csv_path)
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mask_hex", "value"])
            for mk, v in zip(self.masks.tolist(), self.values.tolist()):
                w.writerow([f"{mk:x}", repr(v)])
        csv_path.with_suffix(".json").write_text(json.dumps(
            {"m": self.m, "sector": self.sector, "kind": self.kind, "mass": self.mass,
             "meta": self.meta}, indent=2, default=str))

    @classmethod
    def load(cls, csv_path) -> "ProbabilityTable":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        m, w = int(meta["m"]), int(meta["sector"])
        vals = np.zeros(comb(m, w))
        with csv_path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                vals[rank([int(row["mask_hex"], 16)], m, w)[0]] = float(row["value"])
        return cls(m, w, vals, meta["kind"], meta.get("meta", {}))


def ideal_distribution(
    U: Interferometer,
    cfg: InputConfig,
    collision_policy: CollisionPolicy | str = CollisionPolicy.DISCARD_RENORMALIZE,
    mass_floor: float = 0.5,
    chunk: int = 200_000,
) -> ProbabilityTable:
    """Exact no-collision output distribution p(S) = |Per(U[T, S])|^2, renormalised."""
    policy = CollisionPolicy(collision_policy)
    if U.dim != cfg.m:
        raise ConfigError(f"interferometer has {U.dim} modes, config says {cfg.m}")
    n, m = cfg.n, cfg.m
    cols = set_positions(m, n)
    sub = U.entries[cfg.rows]  # (n, m)
    probs = np.empty(len(cols))
    for lo in range(0, len(cols), chunk):
        c = cols[lo : lo + chunk]
        minors = np.transpose(sub[:, c], (1, 0, 2))  # (B, n, n): rows inputs, cols outputs
        probs[lo : lo + chunk] = np.abs(permanent_batch(minors)) ** 2
    raw = float(probs.sum())
    if policy is CollisionPolicy.REJECT_IF_MASS_LOW and raw < mass_floor:
        raise RegimeError(
            f"no-collision assumption violated: sector mass {raw:.4g} below floor {mass_floor}"
        )
    if raw <= 0:
        raise RegimeError("no-collision sector carries zero probability")
    meta = {"raw_mass": raw, "collision_policy": policy.value, "input_modes": list(cfg.rows)}
    meta.update({f"unitary_{k}": v for k, v in U.provenance.items()})
    return ProbabilityTable(m, n, probs / raw, "exact", meta)


def uniform_probability(m: int, n: int) -> float:
    return 1.0 / comb(m, n)
