"""KL of each method against the ideal distribution across a loss-rate grid."""

from dataclasses import dataclass, field
from pathlib import Path

from _cli import dump, parse_config

from photon_recycling.harness import ExperimentConfig, run_experiment


@dataclass
class Config:
    m: int = 20
    n: int = 4
    N_tot: int = 100_000
    grid: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    seeds: int = 10
    kl_reverse: bool = True
    out: str = "runs/loss_sweep"


def main(cfg: Config):
    exp = ExperimentConfig(m=cfg.m, n=cfg.n, N_tot=cfg.N_tot, seeds=list(range(cfg.seeds)), k_list=[1],
                           sweep={"axis": "eta", "grid": cfg.grid}, kl_reverse=cfg.kl_reverse)
    rep = run_experiment(exp, cfg.out)
    agg = rep.aggregate("kl")
    print("eta    " + "  ".join(f"{m:>13s}" for m in agg))
    for i, eta in enumerate(cfg.grid):
        print(f"{eta:<6} " + "  ".join(f"{agg[m][i]['mean']:13.4f}" for m in agg))
    cross = {m: rep.crossover(m) for m in agg if m != "postselect"}
    print("crossover eta:", cross)
    dump(cfg, {"crossover": cross}, Path(cfg.out) / "summary.json")


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
