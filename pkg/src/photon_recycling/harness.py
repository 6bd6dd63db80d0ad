"""End-to-end experiments: unitary -> ideal table -> samples -> estimators -> metrics."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .baselines import postselect_estimates, richardson_weights
from .core import Interferometer, InputConfig, ProbabilityTable, haar_unitary, ideal_distribution
from .errors import ConfigError, FallbackRequiredError, FitDegenerateError, PhotonRecyclingError
from .loss import LossModel, draw_samples
from .mitigation import (
    MitigationReport,
    extrapolate_exponential,
    extrapolate_linear,
    linear_solve,
    linear_solve_dependency,
    normalize_report,
)
from .recycling import abs_avg_deviation, dependency_factor, interference_terms_exact, fill_count, recycled_table

SCHEMA_VERSION = 1
ALL_METHODS = ("postselect", "linsolve", "linsolve_dep", "extrap_linear", "extrap_exp", "richardson")
KL_FLOOR = 1e-12


# ------------------------------------------------------------------ metrics


def _vals(t) -> np.ndarray:
    if isinstance(t, MitigationReport):
        if t.normalized is None:
            raise ConfigError("compare a normalised report")
        return t.normalized
    return np.asarray(getattr(t, "values", t), dtype=float)


def kl_divergence(p, q, floor: float = KL_FLOOR, reverse: bool = False) -> float:
    """KL(p || q) with q floored; ``reverse=True`` gives KL(q || p) with p floored."""
    a, b = _vals(p), _vals(q)
    if a.shape != b.shape:
        raise ConfigError("tables cover different mask sets")
    if reverse:
        a, b = b, a
    nz = a > 0
    return float(np.sum(a[nz] * np.log(a[nz] / np.maximum(b[nz], floor))))


def total_variation(p, q) -> float:
    a, b = _vals(p), _vals(q)
    if a.shape != b.shape:
        raise ConfigError("tables cover different mask sets")
    return 0.5 * float(np.abs(a - b).sum())


def expectation_value(table, weights: dict) -> float:
    """sum_s w(s) * table(s) over the supplied masks."""
    return float(sum(w * table[mask] for mask, w in weights.items()))


def minor_flatness(U: Interferometer, cfg: InputConfig, outputs) -> dict:
    """Largest |entry| and spectral norm of one minor, plus their ratio."""
    cols = sorted(outputs)
    A = U.entries[np.ix_(cfg.rows, cols)]
    h = float(np.max(np.abs(A)))
    s = float(np.linalg.norm(A, 2))
    return {"h_inf": h, "spectral_norm": s, "ratio": h / s}


# ------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    m: int = 20
    n: int = 4
    eta: float = 0.8
    N_tot: int = 100_000
    k_list: list = field(default_factory=lambda: [1])
    n_d: int | None = None
    seeds: list = field(default_factory=lambda: list(range(10)))
    methods: list = field(default_factory=lambda: ["postselect", "linsolve", "linsolve_dep", "extrap_linear", "extrap_exp"])
    unitary: dict = field(default_factory=lambda: {"haar_seed": None})
    sweep: dict | None = None
    output_dir: str | None = None
    kl_reverse: bool = False
    kl_floor: float = KL_FLOOR
    dependency_literal: bool = True
    richardson_eta_top: float = 0.95
    shards: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not 1 <= self.n <= self.m:
            raise ConfigError("need m >= n >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        bad = set(self.methods) - set(ALL_METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        LossModel(self.eta)
        if self.n_d is None:
            self.n_d = min(3, self.n - 1)
        if self.sweep is not None:
            if self.sweep.get("axis") not in ("eta", "N_tot") or not self.sweep.get("grid"):
                raise ConfigError("sweep needs axis in {eta, N_tot} and a non-empty grid")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}") from e

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


# ----------------------------------------------------------------- pipeline


def _unitary_for(cfg: ExperimentConfig, seed: int) -> Interferometer:
    spec = cfg.unitary or {}
    if spec.get("path"):
        return Interferometer.load(spec["path"])
    base = spec.get("haar_seed")
    return haar_unitary(cfg.m, seed if base is None else base + seed)


def _richardson_estimate(ideal: ProbabilityTable, eta: float, N_tot: int, seed: int, top: float) -> np.ndarray:
    """Per-mask extrapolation of k=0 frequencies taken at n+1 amplified loss rates.

    p_eta(s) = (1-eta)^n p(s) is a degree-n polynomial in eta, so n+1 scale
    factors determine p(s) exactly in the noiseless limit.
    """
    n = ideal.sector
    top = max(top, eta + 1e-3) if eta > 0 else top
    etas = np.linspace(eta, min(top, 0.999), n + 1) if eta > 0 else None
    if etas is None:
        led = draw_samples(ideal, LossModel(0.0), N_tot, seed)
        return led.counts[0] / max(led.total, 1)
    gamma = richardson_weights(etas / etas[0])
    per = N_tot // (n + 1)
    est = np.zeros(len(ideal))
    for i, e in enumerate(etas):
        led = draw_samples(ideal, LossModel(float(e)), per, seed * 1000 + i)
        est += gamma[i] * led.counts[0] / max(per, 1)
    return est


def _one_run(cfg: ExperimentConfig, seed: int, eta: float, N_tot: int, outdir: Path | None) -> dict:
    m, n = cfg.m, cfg.n
    stage = "unitary"
    try:
        U = _unitary_for(cfg, seed)
        stage = "ideal"
        ideal = ideal_distribution(U, InputConfig(m, n))
        stage = "sampling"
        ledger = draw_samples(ideal, LossModel(eta), N_tot, seed, shards=cfg.shards)
        p_unif = 1.0 / comb(m, n)
        results: dict = {}
        reports: dict[str, MitigationReport | ProbabilityTable] = {}
        diagnostics: dict = {"totals_per_k": ledger.totals_per_k, "raw_mass": ideal.meta["raw_mass"]}

        stage = "postselect"
        post = None
        try:
            post = postselect_estimates(ledger)
        except PhotonRecyclingError as e:
            diagnostics["postselect_error"] = str(e)
        D0 = abs_avg_deviation(post) if post is not None else float("nan")
        diagnostics["D_0"] = D0
        if "postselect" in cfg.methods and post is not None:
            reports["postselect"] = post

        stage = "recycling"
        need = set(cfg.k_list)
        if {"extrap_linear", "extrap_exp"} & set(cfg.methods):
            need |= set(range(1, cfg.n_d + 1))
        tables = {}
        for k in sorted(need):
            try:
                tables[k] = recycled_table(ledger, k)
            except PhotonRecyclingError as e:
                diagnostics[f"recycle_k{k}_error"] = str(e)
        diagnostics["D"] = {k: abs_avg_deviation(t) for k, t in tables.items()}

        k0 = cfg.k_list[0]
        stage = "mitigation"
        if "linsolve" in cfg.methods and k0 in tables:
            reports["linsolve"] = linear_solve(tables[k0], m, n, k0)
        if "linsolve_dep" in cfg.methods and k0 in tables and post is not None:
            dk = dependency_factor(diagnostics["D"][k0], D0, m, n, k0, literal=cfg.dependency_literal)
            diagnostics["d_k"] = dk.value
            try:
                reports["linsolve_dep"] = linear_solve_dependency(tables[k0], dk.value, m, n, k0)
            except FallbackRequiredError:
                rep = linear_solve(tables[k0], m, n, k0)
                reports["linsolve_dep"] = MitigationReport(
                    "linear_solve_dep", m, n, rep.values, dict(rep.params, fallback="linear_solve", d_k=dk.value),
                    rep.inputs_digest)
        window = [tables.get(k) for k in range(1, cfg.n_d + 1)]
        if all(t is not None for t in window) and post is not None:
            if "extrap_linear" in cfg.methods:
                reports["extrap_linear"] = extrapolate_linear(window, D0, p_unif)
            if "extrap_exp" in cfg.methods:
                try:
                    reports["extrap_exp"] = extrapolate_exponential(window, D0, p_unif)
                except FitDegenerateError:
                    rep = extrapolate_linear(window, D0, p_unif)
                    reports["extrap_exp"] = MitigationReport(
                        "extrap_exp", m, n, rep.values, dict(rep.params, fallback="extrap_linear"),
                        rep.inputs_digest)
        if "richardson" in cfg.methods:
            est = _richardson_estimate(ideal, eta, N_tot, seed, cfg.richardson_eta_top)
            reports["richardson"] = MitigationReport("richardson", m, n, np.abs(est), {"grid_points": n + 1})

        stage = "metrics"
        for name, rep in reports.items():
            if isinstance(rep, MitigationReport):
                rep = normalize_report(rep)
                reports[name] = rep
            results[name] = {
                "kl": kl_divergence(ideal, rep, cfg.kl_floor, cfg.kl_reverse),
                "tvd": total_variation(ideal, rep),
            }
        if outdir is not None:
            stage = "persist"
            outdir.mkdir(parents=True, exist_ok=True)
            U.save(outdir / "unitary.json")
            ledger.save(outdir / "ledger.csv")
            for k, t in tables.items():
                t.save(outdir / f"recycled_k{k}.csv")
            for name, rep in reports.items():
                if isinstance(rep, MitigationReport):
                    rep.save(outdir / f"report_{name}")
            (outdir / "metrics.json").write_text(json.dumps(
                {"seed": seed, "eta": eta, "N_tot": N_tot, "metrics": results,
                 "diagnostics": _plain(diagnostics)}, indent=2, sort_keys=True))
        return {"metrics": results, "diagnostics": diagnostics}
    except PhotonRecyclingError as e:
        e.args = (f"[stage={stage}, seed={seed}] {e.args[0] if e.args else ''}",) + e.args[1:]
        raise


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class ComparisonReport:
    grid_axis: str | None
    grid: list
    per_seed: dict  # method -> list over grid of list over seeds of {"kl","tvd"}
    seeds: list
    diagnostics: list = field(default_factory=list)

    def aggregate(self, metric: str = "kl") -> dict:
        out = {}
        for meth, rows in self.per_seed.items():
            out[meth] = []
            for row in rows:
                v = np.array([r[metric] for r in row], dtype=float)
                out[meth].append({"mean": float(v.mean()), "min": float(v.min()), "max": float(v.max())})
        return out

    def wins(self, method: str, baseline: str = "postselect", point: int = 0, metric: str = "kl") -> int:
        a = self.per_seed[method][point]
        b = self.per_seed[baseline][point]
        return sum(x[metric] < y[metric] for x, y in zip(a, b))

    def crossover(self, method: str, baseline: str = "postselect", metric: str = "kl") -> float | None:
        """Grid value where the method/baseline mean-metric ordering flips.

        Linear interpolation of the metric difference, in log N_tot for N_tot
        sweeps and in eta for loss sweeps.
        """
        if self.grid_axis is None or len(self.grid) < 2:
            return None
        agg = self.aggregate(metric)
        diff = np.array([a["mean"] - b["mean"] for a, b in zip(agg[method], agg[baseline])])
        x = np.log(np.asarray(self.grid, float)) if self.grid_axis == "N_tot" else np.asarray(self.grid, float)
        for i in range(len(diff) - 1):
            if np.sign(diff[i]) != np.sign(diff[i + 1]) and diff[i] != 0:
                t = diff[i] / (diff[i] - diff[i + 1])
                xc = x[i] + t * (x[i + 1] - x[i])
                return float(np.exp(xc)) if self.grid_axis == "N_tot" else float(xc)
        return None

    def to_json(self) -> dict:
        methods = [m for m in self.per_seed if m != "postselect"]
        return _plain({
            "grid_axis": self.grid_axis, "grid": self.grid, "seeds": self.seeds,
            "per_seed": self.per_seed, "aggregate_kl": self.aggregate("kl"),
            "aggregate_tvd": self.aggregate("tvd"),
            "crossover": {m: self.crossover(m) for m in methods} if "postselect" in self.per_seed else {},
        })


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def default_output_root() -> Path:
    return Path(os.environ.get("PHOTON_RECYCLING_OUT", "runs"))


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None, persist: bool = True) -> ComparisonReport:
    outdir = Path(out or cfg.output_dir or default_output_root()) if persist else None
    if cfg.sweep:
        axis, grid = cfg.sweep["axis"], list(cfg.sweep["grid"])
    else:
        axis, grid = None, [cfg.eta]
    per_seed: dict = {}
    diags = []
    for gi, g in enumerate(grid):
        eta = float(g) if axis in (None, "eta") else cfg.eta
        N_tot = int(g) if axis == "N_tot" else cfg.N_tot
        point_diag = []
        for seed in cfg.seeds:
            sub = outdir / f"point{gi:02d}" / f"seed{seed}" if outdir is not None else None
            res = _one_run(cfg, seed, eta, N_tot, sub)
            point_diag.append(res["diagnostics"])
            for meth, met in res["metrics"].items():
                per_seed.setdefault(meth, [[] for _ in grid])[gi].append(met)
        diags.append(point_diag)
    report = ComparisonReport(axis, grid, per_seed, list(cfg.seeds), diags)
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True))
        (outdir / "comparison.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True))
        write_manifest(outdir, cfg.digest())
    return report


def write_manifest(outdir: Path, config_hash: str) -> Path:
    files = sorted(p for p in outdir.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_sha256": config_hash,
        "files": {str(p.relative_to(outdir)): _sha256(p) for p in files},
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


# ------------------------------------------------------------ interference


def interference_deviation_sweep(
    unitary_count: int, m: int, n: int, k_list, seed: int, out: str | Path | None = None,
    uniform: bool = False,
) -> list[dict]:
    """Mean |I_k - p_unif| per Haar unitary and k (exact computation)."""
    import csv

    p_unif = 1.0 / comb(m, n)
    rows = []
    for u in range(unitary_count):
        if uniform:
            ideal = ProbabilityTable(m, n, np.full(comb(m, n), p_unif))
        else:
            ideal = ideal_distribution(haar_unitary(m, seed + u), InputConfig(m, n))
        for k in k_list:
            dev = float(np.mean(np.abs(interference_terms_exact(ideal, k) - p_unif)))
            rows.append({"unitary": u, "k": k, "mean_abs_dev": dev,
                         "scaled": fill_count(m, n, k) * dev})
    if out is not None:
        with Path(out).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["unitary", "k", "mean_abs_dev", "scaled"])
            w.writeheader()
            w.writerows(rows)
    return rows
