"""Command-line entry point: ``photon-recycling <subcommand> --config cfg.json --out dir``.

Exit codes: 0 success, 2 configuration error, 3 regime or capacity error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bounds as B
from .baselines import ZneConfig, postselect_estimates, violation_sweep, zne_error_upper_bound
from .core import CollisionPolicy, InputConfig, Interferometer, haar_unitary, ideal_distribution
from .errors import CapacityError, ConfigError, PhotonRecyclingError, RegimeError
from .gaussian_lab import clt_probe, moment_run
from .harness import ExperimentConfig, default_output_root, interference_deviation_sweep, run_experiment, write_manifest
from .loss import LossModel, SampleLedger, draw_samples, lossy_conditional_distribution
from .mitigation import (
    extrapolate_exponential,
    extrapolate_linear,
    linear_solve,
    linear_solve_dependency,
    normalize_report,
)
from .recycling import abs_avg_deviation, dependency_factor, recycled_table


def _load(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from e


def _need(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    return [cfg[k] for k in keys]


def _unitary(cfg: dict) -> Interferometer:
    if "unitary_path" in cfg:
        return Interferometer.load(cfg["unitary_path"])
    (m,) = _need(cfg, "m")
    return haar_unitary(int(m), int(cfg.get("unitary_seed", cfg.get("seed", 0))))


def cmd_gen_unitary(cfg: dict, out: Path) -> dict:
    m, = _need(cfg, "m")
    seeds = cfg.get("seeds", [cfg.get("seed", 0)])
    files = []
    for s in seeds:
        p = out / f"unitary_m{m}_seed{s}.json"
        haar_unitary(int(m), int(s)).save(p)
        files.append(p.name)
    return {"files": files}


def cmd_simulate(cfg: dict, out: Path) -> dict:
    m, n = _need(cfg, "m", "n")
    U = _unitary(cfg)
    ideal = ideal_distribution(
        U, InputConfig(m, n, cfg.get("occupied_modes")),
        CollisionPolicy(cfg.get("collision_policy", "discard-renormalize")),
        float(cfg.get("mass_floor", 0.5)),
    )
    ideal.save(out / "ideal.csv")
    for k in cfg.get("k_list", []):
        lossy_conditional_distribution(ideal, int(k)).save(out / f"lossy_k{k}.csv")
    return {"raw_mass": ideal.meta["raw_mass"], "entries": len(ideal)}


def cmd_sample(cfg: dict, out: Path) -> dict:
    m, n, eta, N_tot = _need(cfg, "m", "n", "eta", "N_tot")
    ideal = ideal_distribution(_unitary(cfg), InputConfig(m, n, cfg.get("occupied_modes")))
    led = draw_samples(ideal, LossModel(float(eta)), int(N_tot), int(cfg.get("seed", 0)),
                       int(cfg.get("shards", 1)))
    led.save(out / "ledger.csv")
    return {"totals_per_k": led.totals_per_k}


def cmd_mitigate(cfg: dict, out: Path) -> dict:
    (ledger_path,) = _need(cfg, "ledger")
    led = SampleLedger.load(ledger_path)
    m, n = led.m, led.n
    k = int(cfg.get("k", 1))
    n_d = int(cfg.get("n_d", min(3, n - 1)))
    methods = cfg.get("methods", ["linsolve", "linsolve_dep", "extrap_linear", "extrap_exp"])
    post = postselect_estimates(led)
    post.save(out / "postselect.csv")
    D0 = abs_avg_deviation(post)
    p_unif = 1.0 / len(post)
    tables = {kk: recycled_table(led, kk) for kk in sorted({k, *range(1, n_d + 1)})}
    summary = {"D_0": D0}
    for name in methods:
        if name == "linsolve":
            rep = linear_solve(tables[k], m, n, k)
        elif name == "linsolve_dep":
            dk = dependency_factor(abs_avg_deviation(tables[k]), D0, m, n, k)
            summary["d_k"] = dk.value
            rep = linear_solve(tables[k], m, n, k) if dk.out_of_range else linear_solve_dependency(tables[k], dk.value, m, n, k)
        elif name == "extrap_linear":
            rep = extrapolate_linear([tables[i] for i in range(1, n_d + 1)], D0, p_unif)
        elif name == "extrap_exp":
            rep = extrapolate_exponential([tables[i] for i in range(1, n_d + 1)], D0, p_unif)
        else:
            raise ConfigError(f"unknown mitigation method {name!r}")
        rep = normalize_report(rep)
        rep.save(out / f"report_{name}")
        summary[name] = {"norm_mass": rep.norm_mass}
    return summary


def cmd_compare(cfg: dict, out: Path) -> dict:
    ecfg = ExperimentConfig.from_dict(cfg)
    rep = run_experiment(ecfg, out)
    if ecfg.unitary.get("deviation_sweep"):
        sw = ecfg.unitary["deviation_sweep"]
        interference_deviation_sweep(sw.get("count", 20), ecfg.m, ecfg.n, sw.get("k_list", [1, 2]),
                                     sw.get("seed", 0), out / "interference_deviation.csv")
    return rep.to_json()["aggregate_kl"]


def cmd_bound(cfg: dict, out: Path) -> dict:
    calc = cfg.get("calc", "regime_max")
    if calc == "regime_max":
        m, n, k, eta = _need(cfg, "m", "n", "k", "eta")
        r = B.linsolve_regime_max_samples(m, n, k, eta, cfg.get("eps_bias"))
        res = {"N_max": r.n_max, "empty": r.empty}
    elif calc in ("check", "sweep"):
        q = B.RegimeQuery(**{k: v for k, v in cfg.items() if k in B.RegimeQuery.__dataclass_fields__})
        method = cfg.get("method", "linsolve")
        form = cfg.get("form", "quadrature")
        if calc == "check":
            c = B.regime_inequality_check(q, method, form)
            res = {"lhs": c.lhs, "rhs": c.rhs, "holds": c.holds}
        else:
            rows = B.regime_sweep(q, method, cfg["param"], cfg["values"], out / "regime_sweep.csv", form)
            res = {"rows": len(rows)}
    elif calc == "envelope":
        q = B.RegimeQuery(**{k: v for k, v in cfg.items() if k in B.RegimeQuery.__dataclass_fields__})
        res = {"value": B.statistical_error_envelope(q, cfg.get("which", "postselect"))}
    elif calc == "chebyshev":
        eps, m, n = _need(cfg, "eps_bias", "m", "n")
        b = B.chebyshev_confidence(eps, m, n, cfg.get("variant", "haar"), cfg.get("p_upper", 1.0),
                                   cfg.get("delta", 0.0))
        res = asdict(b)
    elif calc == "barrier":
        res = {"value": B.exp_barrier_bound(int(_need(cfg, "n")[0]))}
    else:
        raise ConfigError(f"unknown bound calculator {calc!r}")
    (out / "bound.json").write_text(json.dumps(res, indent=2))
    return res


def cmd_zne_nogo(cfg: dict, out: Path) -> dict:
    method = cfg.get("method", "loss_basis")
    default = range(3, 15) if method == "loss_basis" else range(3, 17)
    rows = violation_sweep(method, cfg.get("values", list(default)), int(cfg.get("trials", 3000)),
                           int(cfg.get("seed", 0)), float(cfg.get("eps_max", 0.01)),
                           float(cfg.get("eta_0", 0.01)), float(cfg.get("eta_top", 0.95)),
                           out / "violations.csv")
    res = {"violations": {str(v): c for v, c, _ in rows}}
    if "bound" in cfg:
        b = cfg["bound"]
        zc = ZneConfig(b["n"], b["c"], tuple(b["etas"]), b.get("eps_max", 0.01), b.get("method", method))
        res["upper_bound"] = zne_error_upper_bound(zc)
    return res


def cmd_gauss_lab(cfg: dict, out: Path) -> dict:
    n, = _need(cfg, "n")
    trials = int(cfg.get("trials", 20000))
    seed = int(cfg.get("seed", 0))
    N = int(cfg.get("N", n**3))
    probe = clt_probe(int(n), N, trials, seed)
    probe.save(out / f"clt_n{n}_N{N}")
    mom = moment_run(int(n), trials, seed + 1)
    res = {"ks": probe.ks, "ks_threshold_99": probe.ks_threshold, "skewness": probe.skewness,
           "rejects_normality": probe.rejects_normality,
           "moments": mom.moments, "reference": mom.reference}
    return res


COMMANDS = {
    "gen-unitary": cmd_gen_unitary,
    "simulate": cmd_simulate,
    "sample": cmd_sample,
    "mitigate": cmd_mitigate,
    "compare": cmd_compare,
    "bound": cmd_bound,
    "zne-nogo": cmd_zne_nogo,
    "gauss-lab": cmd_gauss_lab,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photon-recycling", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default=None, help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config)
        out = Path(args.out) if args.out else default_output_root() / args.command
        out.mkdir(parents=True, exist_ok=True)
        res = COMMANDS[args.command](cfg, out)
        (out / "summary.json").write_text(json.dumps(res, indent=2, default=_default))
        if args.command != "compare":
            write_manifest(out, "")
        print(json.dumps(res, default=_default)[:2000])
        return 0
    except (ConfigError, TypeError, KeyError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (RegimeError, CapacityError) as e:
        print(f"regime error: {e}", file=sys.stderr)
        return 3
    except PhotonRecyclingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


if __name__ == "__main__":
    sys.exit(main())
