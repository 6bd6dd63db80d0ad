"""Postselection and zero-noise (loss) extrapolation baselines.

Under uniform loss a c-photon marginal observed at loss rate eta is

    p_eta = sum_{j=0}^{n-c} alpha_j eta^j (1-eta)^{n-j}        (loss basis)
          = sum_{j=0}^{n}   beta_j  eta^j                      (eta-power basis)

and the lossless marginal is alpha_0 = beta_0.  Sampling at a grid of eta
values and solving for the first coefficient is the ZNE baseline.  The loss
basis matrix factors as L = D W with D = diag((1-eta_i)^n) and W the
Vandermonde matrix in x_i = eta_i / (1 - eta_i), so every solve below is a
Vandermonde solve.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import ceil
from pathlib import Path
from typing import Callable

import numpy as np

from .core import ProbabilityTable
from .errors import ConfigError, SingularSystemError
from .loss import SampleLedger, estimate_sector

ZNE_METHODS = ("loss_basis", "eta_power_basis", "richardson")


def postselect_estimates(ledger: SampleLedger) -> ProbabilityTable:
    """Relative frequencies of the lossless (k = 0) sector."""
    t = estimate_sector(ledger, 0)
    return ProbabilityTable(t.m, t.sector, t.values, "estimated", dict(t.meta, source="postselect"))


@dataclass(frozen=True)
class ZneConfig:
    n: int
    c: int
    etas: tuple[float, ...]
    eps_max: float = 0.01
    method: str = "loss_basis"

    def __post_init__(self):
        etas = tuple(float(e) for e in self.etas)
        object.__setattr__(self, "etas", etas)
        if self.method not in ZNE_METHODS:
            raise ConfigError(f"unknown ZNE method {self.method!r}")
        if not 0 <= self.c <= self.n:
            raise ConfigError("need 0 <= c <= n")
        if not 0 < self.eps_max <= 1:
            raise ConfigError("eps_max must lie in (0, 1]")
        if any(not 0 <= e < 1 for e in etas):
            raise ConfigError("every eta must lie in [0, 1)")
        if len(set(etas)) != len(etas):
            raise SingularSystemError("duplicate eta values make the system singular")
        if any(b <= a for a, b in zip(etas, etas[1:])):
            raise ConfigError("etas must be strictly increasing")
        if len(etas) != self.grid_length:
            raise ConfigError(f"{self.method} needs {self.grid_length} grid points, got {len(etas)}")
        if self.method == "richardson" and etas[0] <= 0:
            raise ConfigError("richardson scale factors need eta_0 > 0")

    @property
    def grid_length(self) -> int:
        return self.n - self.c + 1 if self.method == "loss_basis" else self.n + 1

    @classmethod
    def equally_spaced(cls, n, c, eta_0=0.01, eta_top=0.95, eps_max=0.01, method="loss_basis"):
        length = n - c + 1 if method == "loss_basis" else n + 1
        return cls(n, c, tuple(np.linspace(eta_0, eta_top, length)), eps_max, method)

    def nodes(self) -> np.ndarray:
        """Interpolation abscissae: x_i for loss_basis, eta_i otherwise."""
        e = np.asarray(self.etas)
        return e / (1 - e) if self.method == "loss_basis" else e


# ------------------------------------------------------------------ algebra


def loss_matrix(cfg: ZneConfig) -> np.ndarray:
    e = np.asarray(cfg.etas)[:, None]
    if cfg.method == "loss_basis":
        j = np.arange(cfg.n - cfg.c + 1)
        return e**j * (1 - e) ** (cfg.n - j)
    return e ** np.arange(cfg.n + 1)


def loss_factors(cfg: ZneConfig) -> tuple[np.ndarray, np.ndarray]:
    """(D, W) with L = D W; D is returned as its diagonal."""
    x = cfg.nodes()
    W = x[:, None] ** np.arange(len(x))
    if cfg.method == "loss_basis":
        return (1 - np.asarray(cfg.etas)) ** cfg.n, W
    return np.ones(len(x)), W


def vandermonde_solve(x, f) -> np.ndarray:
    """Coefficients a with sum_j a_j x_i^j = f_i (Bjorck-Pereyra, O(n^2))."""
    x = np.asarray(x, dtype=float)
    a = np.array(f, dtype=float)
    n = len(x)
    if len(np.unique(x)) != n:
        raise SingularSystemError("repeated interpolation nodes")
    for k in range(n - 1):
        a[k + 1 :] = (a[k + 1 :] - a[k:-1]) / (x[k + 1 :] - x[: n - k - 1])
    for k in range(n - 2, -1, -1):
        a[k:-1] -= x[k] * a[k + 1 :]
    return a


def lagrange_at_zero(x) -> np.ndarray:
    """l_i(0) = prod_{j != i} x_j / (x_j - x_i): first row of W^{-1}."""
    x = np.asarray(x, dtype=float)
    diff = x[None, :] - x[:, None]
    np.fill_diagonal(diff, 1.0)
    num = np.broadcast_to(x[None, :], diff.shape).copy()
    np.fill_diagonal(num, 1.0)
    return np.prod(num / diff, axis=1)


def extrapolation_weights(cfg: ZneConfig) -> np.ndarray:
    """First row of L^{-1}: the lossless estimate is weights @ marginals."""
    if cfg.method == "richardson":
        return richardson_weights(np.asarray(cfg.etas) / cfg.etas[0])
    D, _ = loss_factors(cfg)
    return lagrange_at_zero(cfg.nodes()) / D


def richardson_weights(scales) -> np.ndarray:
    """gamma_i = (-1)^n prod_{j != i} c_j / (c_i - c_j), n = len(scales) - 1."""
    c = np.asarray(scales, dtype=float)
    n = len(c) - 1
    diff = c[:, None] - c[None, :]
    np.fill_diagonal(diff, 1.0)
    num = np.broadcast_to(c[None, :], diff.shape).copy()
    np.fill_diagonal(num, 1.0)
    return (-1) ** n * np.prod(num / diff, axis=1)


def richardson_mitigate(noisy_marginals, cfg: ZneConfig) -> float:
    p = np.asarray(noisy_marginals, dtype=float)
    if p.shape != (cfg.grid_length,):
        raise ConfigError(f"expected {cfg.grid_length} marginals, got {p.shape}")
    if cfg.method == "richardson":
        return float(richardson_weights(np.asarray(cfg.etas) / cfg.etas[0]) @ p)
    D, _ = loss_factors(cfg)
    return float(vandermonde_solve(cfg.nodes(), p / D)[0])


# ------------------------------------------------------------------- bounds


def _max_node_product(nodes: np.ndarray) -> float:
    diff = np.abs(nodes[:, None] - nodes[None, :])
    np.fill_diagonal(diff, np.nan)
    ratio = (1 + nodes)[:, None] / diff
    np.fill_diagonal(ratio, 1.0)
    return float(np.max(np.prod(ratio, axis=1)))


def zne_error_upper_bound(cfg: ZneConfig) -> float:
    if cfg.method == "loss_basis":
        top = cfg.etas[-1]
        return cfg.eps_max / (1 - top) ** cfg.n * _max_node_product(cfg.nodes())
    return cfg.eps_max * _max_node_product(np.asarray(cfg.etas))


def nogo_floor(cfg: ZneConfig, form: str = "power") -> float:
    """Lower comparator: eps_max/(1-eta_0)^n ("power") or its square root ("sqrt")."""
    n = cfg.n if cfg.method == "loss_basis" else cfg.grid_length - 1
    base = (1 - cfg.etas[0]) ** n
    if form == "power":
        return cfg.eps_max / base
    if form == "sqrt":
        return cfg.eps_max / np.sqrt(base)
    raise ConfigError(f"unknown comparator form {form!r}")


def violation_experiment(
    cfg: ZneConfig,
    trials: int,
    seed: int,
    comparator: str = "power",
    error_draw: Callable[[np.random.Generator, int], np.ndarray] | None = None,
) -> int:
    """Trials in which the propagated error falls below the no-go comparator."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    w = extrapolation_weights(cfg)
    if error_draw is None:
        eps = rng.uniform(-cfg.eps_max, cfg.eps_max, size=(trials, len(w)))
    else:
        eps = np.asarray(error_draw(rng, trials), dtype=float).reshape(trials, len(w))
    E = np.abs(eps @ w)
    return int(np.sum(E < nogo_floor(cfg, comparator)))


def n_for_gap(gap: int) -> int:
    """Smallest n with n - ceil(n/3) == gap."""
    n = gap
    while n - ceil(n / 3) < gap:
        n += 1
    if n - ceil(n / 3) != gap:
        raise ConfigError(f"no n gives n - ceil(n/3) = {gap}")
    return n


def violation_sweep(
    method: str = "loss_basis",
    values=range(3, 15),
    trials: int = 3000,
    seed: int = 0,
    eps_max: float = 0.01,
    eta_0: float = 0.01,
    eta_top: float = 0.95,
    out: str | Path | None = None,
) -> list[tuple[int, int, int]]:
    """Loss basis: ``values`` are n - c with c = ceil(n/3).  Eta-power basis: ``values`` are n."""
    rows = []
    for v in values:
        if method == "loss_basis":
            n = n_for_gap(v)
            c = ceil(n / 3)
        else:
            n, c = v, 0
        cfg = ZneConfig.equally_spaced(n, c, eta_0, eta_top, eps_max, method)
        rows.append((v, violation_experiment(cfg, trials, seed + v), trials))
    if out is not None:
        with Path(out).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n_minus_c" if method == "loss_basis" else "n", "violations", "trials"])
            w.writerows(rows)
    return rows
