"""Post-processing of recycled tables into mitigated n-photon distributions.

Four estimators share one report type:

* ``linear_solve``            invert the signal/interference decomposition, I -> p_unif
* ``linear_solve_dependency`` same, with interference modelled as d_k p + (1-d_k) p_unif
* ``extrapolate_linear``      per-mask straight line through |p_R^k - p_unif|, k = 1..n_d
* ``extrapolate_exponential`` per-mask exponential with a shared decay rate
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace
from math import comb
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CannotNormalizeError, ConfigError, FallbackRequiredError, FitDegenerateError
from .masks import sector_masks
from .recycling import RecycledTable, fill_count, mix_coefficients

METHODS = ("linear_solve", "linear_solve_dep", "extrap_linear", "extrap_exp")


def digest(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class MitigationReport:
    method: str
    m: int
    n: int
    values: np.ndarray
    params: dict = field(default_factory=dict)
    inputs_digest: str = ""
    normalized: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (comb(self.m, self.n),):
            raise ConfigError("report must cover all C(m,n) masks")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigError("mitigated values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def norm_mass(self) -> float:
        return float(self.values.sum())

    @property
    def masks(self) -> np.ndarray:
        return sector_masks(self.m, self.n)

    def save(self, stem) -> None:
        stem = Path(stem)
        norm = self.normalized if self.normalized is not None else np.full(len(self.values), np.nan)
        with stem.with_suffix(".csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mask_hex", "value", "normalized"])
            for mk, v, q in zip(self.masks.tolist(), self.values.tolist(), norm.tolist()):
                w.writerow([f"{mk:x}", repr(v), repr(q)])
        stem.with_suffix(".json").write_text(json.dumps(
            {"method": self.method, "m": self.m, "n": self.n, "params": _jsonable(self.params),
             "norm_mass": self.norm_mass, "inputs_digest": self.inputs_digest}, indent=2))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _check_table(table: RecycledTable, m: int, n: int, k: int) -> None:
    if (table.m, table.n, table.k) != (m, n, k):
        raise ConfigError(f"table is (m={table.m}, n={table.n}, k={table.k}), expected ({m}, {n}, {k})")


def linear_solve(table: RecycledTable, m: int, n: int, k: int) -> MitigationReport:
    _check_table(table, m, n, k)
    _, mix = mix_coefficients(m, n, k)
    p_unif = 1.0 / comb(m, n)
    vals = fill_count(m, n, k) * np.abs(table.values - mix * p_unif)
    return MitigationReport("linear_solve", m, n, vals, {"k": k}, digest(table.values))


def linear_solve_dependency(table: RecycledTable, d_k: float, m: int, n: int, k: int) -> MitigationReport:
    _check_table(table, m, n, k)
    d_k = float(d_k)
    if not 0.0 <= d_k <= 1.0:
        raise FallbackRequiredError(d_k)
    sig, mix = mix_coefficients(m, n, k)
    p_unif = 1.0 / comb(m, n)
    vals = np.abs((table.values + mix * (d_k - 1.0) * p_unif) / (sig + mix * d_k))
    return MitigationReport("linear_solve_dep", m, n, vals, {"k": k, "d_k": d_k}, digest(table.values))


def fit_global_gradient(D_series: Sequence[float] | dict, D_0: float, form: str = "least_squares") -> float:
    """Slope g for D_k ~ D_0 - g k with the intercept pinned at D_0.

    ``D_series`` holds D_1..D_{n_d} (sequence) or a {k: D_k} mapping with keys 1..n_d.
    ``form="least_squares"`` is the true minimiser.  ``form="shifted"`` swaps in
    (2 n_d + 2) denominators; that variant does not minimise the residual and
    is kept only for comparison.
    """
    y = _series(D_series)
    nd = len(y)
    x = np.arange(1, nd + 1, dtype=float)
    if form == "least_squares":
        den = 2 * nd + 1  # from sum x^2 = nd(nd+1)(2nd+1)/6
    elif form == "shifted":
        den = 2 * nd + 2
    else:
        raise ConfigError(f"unknown gradient form {form!r}")
    return 3.0 * D_0 / den - 6.0 * float(y @ x) / (nd * (nd + 1) * den)


def _series(D_series) -> np.ndarray:
    if isinstance(D_series, dict):
        keys = sorted(D_series)
        if keys != list(range(1, len(keys) + 1)):
            raise ConfigError("D_series keys must be 1..n_d")
        D_series = [D_series[k] for k in keys]
    y = np.asarray(D_series, dtype=float)
    if y.ndim != 1 or len(y) < 1:
        raise ConfigError("need at least one D_k")
    return y


def _stack(tables: Sequence[RecycledTable]) -> tuple[int, int, int, np.ndarray]:
    if not tables:
        raise ConfigError("need at least one recycled table")
    m, n = tables[0].m, tables[0].n
    for i, t in enumerate(tables, start=1):
        if (t.m, t.n) != (m, n) or t.k != i:
            raise ConfigError("tables must be ordered k = 1..n_d over the same (m, n)")
    nd = len(tables)
    if nd >= n:
        raise ConfigError(f"n_d={nd} must be < n={n}")
    return m, n, nd, np.stack([t.values for t in tables])  # (nd, C(m,n))


def extrapolate_linear(tables: Sequence[RecycledTable], D_0: float, p_unif: float) -> MitigationReport:
    m, n, nd, R = _stack(tables)
    y = np.abs(R - p_unif)
    D = y.mean(axis=1)
    g = fit_global_gradient(D, D_0)
    sgn = np.where(p_unif - y[0] >= 0, 1.0, -1.0)
    alpha = y.mean(axis=0) - sgn * g * (nd + 1) / 2.0
    vals = np.abs(p_unif + alpha)
    params = {"n_d": nd, "g_avg": g, "D_0": D_0, "D": D.tolist(), "alpha_s": alpha, "sign": sgn}
    return MitigationReport("extrap_linear", m, n, vals, params, digest(*R))


def fit_decay_rate(D_series, D_0: float, lo: float = 0.0, hi: float = 20.0, tol: float = 1e-10) -> float:
    """alpha minimising sum_k (D_k - D_0 e^{-alpha k})^2 on [lo, hi]."""
    y = _series(D_series)
    if D_0 <= 0 or np.any(y <= 0):
        raise FitDegenerateError("non-positive deviation in fit window; use linear extrapolation")
    x = np.arange(1, len(y) + 1, dtype=float)

    def sse(a: float) -> float:
        r = y - D_0 * np.exp(-a * x)
        return float(r @ r)

    # log-linear start, then a coarse scan to bracket the global minimum
    a0 = float(np.clip(-(x @ np.log(y / D_0)) / (x @ x), lo, hi))
    grid = np.union1d(np.linspace(lo, hi, 2001), [a0])
    vals = [sse(a) for a in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    invphi = (np.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = sse(c), sse(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = sse(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = sse(d)
    return (a + b) / 2


def exp_amplitudes(y: np.ndarray, alpha: float) -> np.ndarray:
    """Least-squares Lambda for y_k ~ Lambda e^{-alpha k}, column-wise on (n_d, M) data."""
    x = np.arange(1, y.shape[0] + 1, dtype=float)
    w = np.exp(-alpha * x)
    return (w @ y) / (w @ w)


def extrapolate_exponential(tables: Sequence[RecycledTable], D_0: float, p_unif: float) -> MitigationReport:
    m, n, nd, R = _stack(tables)
    y = np.abs(R - p_unif)
    D = y.mean(axis=1)
    alpha = fit_decay_rate(D, D_0)
    lam = exp_amplitudes(y, alpha)
    vals = np.abs(p_unif + lam)
    params = {"n_d": nd, "alpha_avg": alpha, "D_0": D_0, "D": D.tolist(), "Lambda_s": lam}
    return MitigationReport("extrap_exp", m, n, vals, params, digest(*R))


def normalize_report(report: MitigationReport) -> MitigationReport:
    N = report.norm_mass
    if N <= 0:
        raise CannotNormalizeError("mitigated values sum to zero")
    params = dict(report.params, l1_to_values=abs(1 - N))
    return replace(report, normalized=report.values / N, params=params)
