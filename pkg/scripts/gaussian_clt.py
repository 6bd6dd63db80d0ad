"""Standardised sums of Gaussian-permanent intensities versus the normal law."""

from dataclasses import dataclass, field
from pathlib import Path

from _cli import parse_config

from photon_recycling.gaussian_lab import clt_probe


@dataclass
class Config:
    sizes: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    N: int = 0  # 0 means n**3
    trials: int = 20_000
    seed: int = 0
    out: str = "runs/gaussian_clt"


def main(cfg: Config):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for n in cfg.sizes:
        N = cfg.N or n**3
        pr = clt_probe(n, N, cfg.trials, cfg.seed)
        pr.save(out / f"clt_n{n}_N{N}")
        print(f"n={n} N={N:5d}  KS {pr.ks:.4f} (99%: {pr.ks_threshold:.4f})  skew {pr.skewness:+.3f}  "
              f"{'rejects' if pr.rejects_normality else 'consistent with'} normal")


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
