"""Permanents of i.i.d. complex Gaussian matrices and a CLT probe on their sums.

With entries ~ CN(0, 1): E|Per|^2 = n!, E|Per|^4 = (n+1)! n!, so the centred
variable Y = |Per|^2 - n! has variance n (n!)^2.  The probe standardises
S_N = sum of N independent Y's by the analytic sigma_N = sqrt(N n) n!.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import factorial, log, sqrt
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .errors import CapacityError, ConfigError
from .permanent import permanent_batch

MAX_N = 12
_CHUNK = 200_000


def sample_gaussian_permanent(n: int, count: int, seed: int) -> np.ndarray:
    """|Per(G)|^2 for ``count`` independent n x n matrices with CN(0,1) entries."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if n > MAX_N:
        raise CapacityError(f"n={n} above Gaussian-lab cap {MAX_N}")
    rng = np.random.default_rng(seed)
    out = np.empty(count)
    for lo in range(0, count, _CHUNK):
        b = min(_CHUNK, count - lo)
        g = (rng.standard_normal((b, n, n)) + 1j * rng.standard_normal((b, n, n))) / sqrt(2)
        out[lo : lo + b] = np.abs(permanent_batch(g)) ** 2
    return out


def moment_reference(n: int, t: int) -> float | None:
    """Known E|Per|^{2t}: t=1 -> n!, t=2 -> (n+1)! n!; None otherwise."""
    if t == 1:
        return float(factorial(n))
    if t == 2:
        return float(factorial(n + 1) * factorial(n))
    return None


@dataclass
class PermanentMomentRun:
    n: int
    trials: int
    seed: int
    moments: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)


def moment_run(n: int, trials: int, seed: int, orders=(1, 2)) -> PermanentMomentRun:
    x = sample_gaussian_permanent(n, trials, seed)
    run = PermanentMomentRun(n, trials, seed)
    for t in orders:
        run.moments[t] = float(np.mean(x**t))
        ref = moment_reference(n, t)
        if ref is not None:
            run.reference[t] = ref
    return run


def beta(r: int) -> float:
    return factorial(r) ** 2 / r**r


def lyapunov_ratio_lower_bound(n: int, N: float, r: int) -> float:
    """beta(r)^n / N^{r/2 - 1}. Rests on an unproven moment conjecture for r > 2."""
    if r <= 2 or int(r) != r:
        raise ConfigError("r must be an integer > 2")
    if N < 1:
        raise ConfigError("N must be >= 1")
    return float(np.exp(n * log(beta(r)) - (r / 2 - 1) * log(N)))


def ks_distance_normal(z) -> float:
    """sup |F_emp - Phi| over the sample."""
    z = np.sort(np.asarray(z, dtype=float))
    m = len(z)
    cdf = ndtr(z)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def ks_critical(trials: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value sqrt(-ln(alpha/2)/2)/sqrt(trials)."""
    return sqrt(-log(alpha / 2) / 2) / sqrt(trials)


def skewness(z) -> float:
    z = np.asarray(z, dtype=float)
    d = z - z.mean()
    return float(np.mean(d**3) / np.mean(d**2) ** 1.5)


@dataclass
class CltProbe:
    n: int
    N: int
    trials: int
    seed: int
    standardized: np.ndarray
    ks: float
    ks_threshold: float
    skewness: float
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def rejects_normality(self) -> bool:
        return self.ks > self.ks_threshold

    def save(self, stem) -> None:
        stem = Path(stem)
        with stem.with_suffix(".csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "count"])
            for a, b, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
                w.writerow([repr(float(a)), repr(float(b)), int(c)])
        stem.with_suffix(".json").write_text(json.dumps(
            {"n": self.n, "N": self.N, "trials": self.trials, "seed": self.seed, "ks": self.ks,
             "ks_threshold_99": self.ks_threshold, "skewness": self.skewness,
             "rejects_normality": self.rejects_normality}, indent=2))


def clt_probe(n: int, N: int, trials: int, seed: int, bins: int = 60) -> CltProbe:
    """Standardised sums S_N / sigma_N of centred Gaussian-permanent intensities."""
    if N < 1 or trials < 1:
        raise ConfigError("N and trials must be >= 1")
    x = sample_gaussian_permanent(n, N * trials, seed).reshape(trials, N)
    nf = factorial(n)
    s = (x - nf).sum(axis=1)
    z = s / (sqrt(N * n) * nf)
    counts, edges = np.histogram(z, bins=bins)
    return CltProbe(n, N, trials, seed, z, ks_distance_normal(z), ks_critical(trials),
                    skewness(z), edges, counts)
