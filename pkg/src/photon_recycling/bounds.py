"""Concentration bounds and sampling-regime calculators.

Every big-O envelope is made concrete with a Hoeffding prefactor
sqrt((log 2 + n log m) / 2), which corresponds to confidence 1 - delta with
delta = m^{-n}.  The default bias scale is m^{-2k}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from math import comb, exp, log, sqrt
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class RegimeQuery:
    m: int
    n: int
    k: int
    eta: float
    N_tot: float
    delta: float | None = None
    eps_bias: float | None = None
    p_upper: float | None = None
    n_d: int | None = None
    divide_sample_groups: bool = False

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ConfigError("eta must lie in (0, 1)")
        if not 1 <= self.k <= self.n - 1:
            raise ConfigError("need 1 <= k <= n-1")
        if self.n > self.m:
            raise ConfigError("need n <= m")
        if self.N_tot <= 0:
            raise ConfigError("N_tot must be positive")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")

    @property
    def bias(self) -> float:
        return float(self.m) ** (-2 * self.k) if self.eps_bias is None else self.eps_bias

    @property
    def confidence_delta(self) -> float:
        return float(self.m) ** (-self.n) if self.delta is None else self.delta

    @property
    def prefactor(self) -> float:
        # Hoeffding: 2 exp(-2 N eps^2) = delta  ->  eps = sqrt(log(2/delta) / (2N))
        return sqrt(log(2 / self.confidence_delta) / 2)

    @property
    def fill(self) -> int:
        return comb(self.m - self.n + self.k, self.k)

    def sector_fraction(self, k: int) -> float:
        return comb(self.n, k) * (1 - self.eta) ** (self.n - k) * self.eta**k


@dataclass(frozen=True)
class BoundValue:
    value: float
    raw: float
    vacuous: bool


def _clamp(raw: float) -> BoundValue:
    # a bound within rounding of 1 says nothing either
    vacuous = raw >= 1.0 - 1e-12
    return BoundValue(1.0 if vacuous else raw, raw, vacuous)


def chebyshev_confidence(
    eps_bias: float, m: int, n: int, variant: str = "haar", p_upper: float = 1.0, delta: float = 0.0
) -> BoundValue:
    """Failure probability that an interference term strays more than eps_bias from uniform."""
    if eps_bias <= 0:
        raise ConfigError("eps_bias must be positive")
    p_unif = 1.0 / comb(m, n)
    if variant == "haar":
        raw = n * p_unif**2 / eps_bias**2
    elif variant == "arbitrary":
        raw = p_unif / eps_bias**2
    elif variant == "bhatia_davis":
        t = p_unif * p_upper / eps_bias**2
        raw = t + delta * (1 - t)
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    return _clamp(raw)


def exp_barrier_bound(n: int) -> float:
    """4 exp(-2e-6 n). Surrogate that depends on an unproven class condition on the unitary."""
    if n < 0:
        raise ConfigError("n must be non-negative")
    return 4.0 * exp(-0.000002 * n)


def statistical_error_envelope(q: RegimeQuery, which: str, k: int | None = None) -> float:
    """Concrete statistical-error envelopes.

    ``postselect``: pref * sqrt(G / ((1-eta)^n N))
    ``recycled``:   pref / C(m-n+k,k) * sqrt(G / (C(n,k) (1-eta)^{n-k} eta^k N))
    ``D_k``:        sqrt(2 pref) * (1 / (C(m-n+k,k)^2 C(n,k) (1-eta)^{n-k} eta^k N))^{1/4}
    with G = C(m,n) when samples are split per probability, else 1.
    """
    k = q.k if k is None else k
    G = comb(q.m, q.n) if q.divide_sample_groups else 1
    P = q.prefactor
    frac = q.sector_fraction(k)
    fill = comb(q.m - q.n + k, k)
    if which == "postselect":
        return P * sqrt(G / (q.sector_fraction(0) * q.N_tot))
    if which == "recycled":
        return P / fill * sqrt(G / (frac * q.N_tot))
    if which == "D_k":
        return sqrt(2 * P) * (1.0 / (fill**2 * frac * q.N_tot)) ** 0.25
    raise ConfigError(f"unknown envelope {which!r}")


@dataclass(frozen=True)
class RegimeBound:
    n_max: float
    empty: bool


def linsolve_regime_max_samples(m: int, n: int, k: int, eta: float, eps_bias: float | None = None) -> RegimeBound:
    """Largest N_tot for which linear solving beats postselection (with bias m^{-2k} by default)."""
    q = RegimeQuery(m, n, k, eta, 1.0, eps_bias=eps_bias)
    bracket = 1 / (9 * q.sector_fraction(0)) - 1 / q.sector_fraction(k)
    if bracket <= 0:
        return RegimeBound(0.0, True)
    val = (log(2) + n * log(m)) / (2 * (q.fill - 1) ** 2 * q.bias**2) * bracket
    return RegimeBound(val, False)


@dataclass(frozen=True)
class RegimeCheck:
    lhs: float
    rhs: float
    holds: bool


def regime_inequality_check(q: RegimeQuery, method: str, form: str = "quadrature") -> RegimeCheck:
    """Compare a mitigation error budget (lhs) against the postselection envelope (rhs).

    ``form="quadrature"`` adds statistical and bias terms in quadrature, which
    is the combination under which the closed-form N_max is exact.
    ``form="sum"`` adds them linearly.
    """
    rhs = statistical_error_envelope(q, "postselect")
    if method in ("linsolve", "linsolve_dep"):
        stat = 3 * q.fill * statistical_error_envelope(q, "recycled")
        bias = 3 * (q.fill - 1) * q.bias * (2 if method == "linsolve_dep" else 1)
    elif method == "extrap_linear":
        nd = min(3, q.n - 1) if q.n_d is None else q.n_d
        grad = statistical_error_envelope(q, "D_k", k=0)
        rec1 = q.n * statistical_error_envelope(q, "recycled", k=1)
        stat = (nd + 1) / 2 * grad + rec1
        bias = (nd + 1) / 2 * q.bias
    else:
        raise ConfigError(f"unknown method {method!r}")
    if form == "quadrature":
        lhs = sqrt(stat**2 + bias**2)
    elif form == "sum":
        lhs = stat + bias
    else:
        raise ConfigError(f"unknown form {form!r}")
    return RegimeCheck(lhs, rhs, lhs <= rhs)


def regime_sweep(q: RegimeQuery, method: str, param: str, values, out=None, form="quadrature"):
    rows = []
    for v in values:
        chk = regime_inequality_check(replace(q, **{param: v}), method, form)
        rows.append((param, v, chk.lhs, chk.rhs, chk.holds))
    if out is not None:
        with Path(out).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["param", "value", "lhs", "rhs", "holds"])
            w.writerows(rows)
    return rows
