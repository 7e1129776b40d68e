"""Planted-clique distinguisher accuracy per clique size, via an experiment spec."""

import argparse
from dataclasses import dataclass, field

from soslab.cli import ExperimentSpec, run_experiment


@dataclass
class Config:
    n: int = 100
    ks: list = field(default_factory=lambda: [10, 20, 30, 40, 50, 60])
    seeds: int = 10
    r: int = 1
    eps: float = 0.1
    seed: int = 0
    out_dir: str = "runs/distinguisher"


def main(cfg: Config) -> None:
    stage = {"name": "sweep", "op": "sweep", "n": cfg.n, "ks": cfg.ks, "seeds": cfg.seeds, "r": cfg.r, "eps": cfg.eps}
    run_experiment(ExperimentSpec(pipeline=[stage], seed=cfg.seed, out_dir=cfg.out_dir))
    print(open(f"{cfg.out_dir}/sweep.csv").read(), end="")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=Config.n)
    ap.add_argument("--ks", type=int, nargs="+", default=Config().ks)
    ap.add_argument("--seeds", type=int, default=Config.seeds)
    ap.add_argument("--out-dir", default=Config.out_dir)
    a = ap.parse_args()
    main(Config(n=a.n, ks=a.ks, seeds=a.seeds, out_dir=a.out_dir))
