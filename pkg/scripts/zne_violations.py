"""Count trials where extrapolated error falls below the no-go comparator."""

from dataclasses import dataclass, field
from pathlib import Path

from _cli import parse_config

from photon_recycling.baselines import violation_sweep


@dataclass
class Config:
    method: str = "loss_basis"
    values: list = field(default_factory=lambda: list(range(3, 15)))
    trials: int = 3000
    seed: int = 0
    eps_max: float = 0.01
    eta_0: float = 0.01
    eta_top: float = 0.95
    out: str = "runs/zne_violations.csv"


def main(cfg: Config):
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    rows = violation_sweep(cfg.method, cfg.values, cfg.trials, cfg.seed, cfg.eps_max, cfg.eta_0, cfg.eta_top, cfg.out)
    label = "n-c" if cfg.method == "loss_basis" else "n"
    for v, count, trials in rows:
        print(f"{label}={v:2d}  violations {count:5d}/{trials}")


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
