"""Level-1 clique value on G(n, 1/2) divided by sqrt(n), per n."""

import argparse
from dataclasses import dataclass, field

import numpy as np

from soslab.instances import gnp_half
from soslab.relaxations import build_relaxation, solve_relaxation


@dataclass
class Config:
    sizes: list = field(default_factory=lambda: [20, 30, 50])
    seeds: int = 10
    tol: float = 1e-6


def main(cfg: Config) -> None:
    print("n  median/sqrt(n)  min/sqrt(n)  max/sqrt(n)")
    for n in cfg.sizes:
        vals = np.array([solve_relaxation(build_relaxation("clique", gnp_half(n, s), {}, 1), tol=cfg.tol)[1]
                         for s in range(cfg.seeds)]) / np.sqrt(n)
        print(f"{n:<3d}{np.median(vals):^16.3f}{vals.min():^13.3f}{vals.max():^13.3f}", flush=True)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=Config().sizes)
    ap.add_argument("--seeds", type=int, default=Config.seeds)
    a = ap.parse_args()
    main(Config(sizes=a.sizes, seeds=a.seeds))
