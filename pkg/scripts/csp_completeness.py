"""Level-r CSP value against m and the brute-force optimum on random 3-XOR instances."""

import argparse
from dataclasses import dataclass

from soslab.instances import parity_code, random_csp
from soslab.reductions import brute_force_opt
from soslab.relaxations import build_relaxation, solve_relaxation


@dataclass
class Config:
    n: int = 8
    m: int = 6
    level: int = 2
    seeds: int = 10
    tol: float = 1e-5
    max_iter: int = 20000


def main(cfg: Config) -> None:
    print("seed  m  opt  frac  converged")
    for seed in range(cfg.seeds):
        inst = random_csp(cfg.n, cfg.m, 3, 2, parity_code(3), seed)
        sol, frac = solve_relaxation(build_relaxation("csp", inst, {}, cfg.level), tol=cfg.tol, max_iter=cfg.max_iter)
        print(f"{seed:<5d} {cfg.m:<2d} {brute_force_opt('csp', inst):<4d} {frac:.4f} {sol.info['converged']}", flush=True)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    for f in ("n", "m", "level", "seeds", "max_iter"):
        ap.add_argument(f"--{f.replace('_', '-')}", type=int, default=getattr(Config, f))
    a = ap.parse_args()
    main(Config(n=a.n, m=a.m, level=a.level, seeds=a.seeds, max_iter=a.max_iter))
