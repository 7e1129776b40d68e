"""Integrality gaps FRAC/OPT on small G(n, 1/2) graphs, one CSV row per instance."""

import argparse
import csv
import sys
from dataclasses import dataclass, field

from soslab.instances import gnp_half
from soslab.reductions import brute_force_opt
from soslab.relaxations import build_relaxation, solve_relaxation


@dataclass
class Config:
    n: int = 12
    seeds: int = 10
    kinds: list = field(default_factory=lambda: ["clique", "mis", "maxcut_gw"])
    levels: list = field(default_factory=lambda: [1, 2])
    tol: float = 1e-6


def main(cfg: Config) -> None:
    w = csv.writer(sys.stdout)
    w.writerow(["seed", "kind", "level", "frac", "opt", "gap"])
    for seed in range(cfg.seeds):
        g = gnp_half(cfg.n, seed)
        for kind in cfg.kinds:
            opt = brute_force_opt(kind, g)
            for r in cfg.levels if kind != "maxcut_gw" else [1]:
                _, frac = solve_relaxation(build_relaxation(kind, g, {}, r), tol=cfg.tol)
                w.writerow([seed, kind, r, f"{frac:.6f}", opt, f"{frac / opt:.4f}" if opt else ""])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=Config.n)
    ap.add_argument("--seeds", type=int, default=Config.seeds)
    a = ap.parse_args()
    main(Config(n=a.n, seeds=a.seeds))
