"""Largest N_tot for which linear solving beats postselection, as a function of n."""

import csv
from dataclasses import dataclass
from pathlib import Path

from _cli import parse_config

from photon_recycling.bounds import linsolve_regime_max_samples


@dataclass
class Config:
    m: int = 100
    k: int = 1
    eta: float = 0.8
    n_min: int = 5
    n_max: int = 10
    out: str = "runs/regime_bound.csv"


def main(cfg: Config):
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "N_max", "empty"])
        for n in range(cfg.n_min, cfg.n_max + 1):
            r = linsolve_regime_max_samples(cfg.m, n, cfg.k, cfg.eta)
            w.writerow([n, repr(r.n_max), r.empty])
            print(f"n={n:2d}  N_max {r.n_max:.3e}{'  (empty)' if r.empty else ''}")


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
