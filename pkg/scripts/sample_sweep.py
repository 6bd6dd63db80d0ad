"""KL of each method against the ideal distribution across a log-spaced N_tot grid."""

from dataclasses import dataclass, field
from pathlib import Path

from _cli import dump, parse_config

from photon_recycling.harness import ExperimentConfig, run_experiment


@dataclass
class Config:
    m: int = 20
    n: int = 4
    eta: float = 0.8
    grid: list = field(default_factory=lambda: [1e5, 3e5, 1e6, 3e6, 1e7, 3e7])
    seeds: int = 5
    kl_reverse: bool = True
    out: str = "runs/sample_sweep"


def main(cfg: Config):
    exp = ExperimentConfig(m=cfg.m, n=cfg.n, eta=cfg.eta, seeds=list(range(cfg.seeds)), k_list=[1],
                           sweep={"axis": "N_tot", "grid": cfg.grid}, kl_reverse=cfg.kl_reverse)
    rep = run_experiment(exp, cfg.out)
    agg = rep.aggregate("kl")
    print("N_tot      " + "  ".join(f"{m:>13s}" for m in agg))
    for i, N in enumerate(cfg.grid):
        print(f"{N:<10.3g} " + "  ".join(f"{agg[m][i]['mean']:13.4f}" for m in agg))
    cross = {m: rep.crossover(m) for m in agg if m != "postselect"}
    print("crossover N_tot:", cross)
    dump(cfg, {"crossover": cross}, Path(cfg.out) / "summary.json")


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
