"""Command-line driver and reproducible experiment pipelines.

Every subcommand reads and writes JSON. ``run`` executes an
:class:`ExperimentSpec` whose stages reference earlier stages by name.

Seeds: stage ``i`` of a spec with global seed ``s`` draws from
``SeedSequence(s, spawn_key=(i,))``; its integer seed is the first word of
``generate_state(1)``. A stage may pin its own ``seed`` instead.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, SoslabError, SolverError, ValidationError
from .instances import (
    BipartiteGraph,
    CspInstance,
    Graph,
    Hypergraph,
    check_plausibility,
    complete_graph,
    cycle_graph,
    empty_graph,
    factor_graph,
    gnp_half,
    parity_code,
    planted_clique,
    random_csp,
    vandermonde_code,
)
from .pseudo import pcal_clique_pe, pcal_csp_pe
from .reductions import brute_force_opt, csp_to_dks, csp_to_ssbve
from .relaxations import (
    RelaxationKind,
    SosSolution,
    build_relaxation,
    lovasz_theta,
    max_violation,
    solve_relaxation,
)
from .rounding import distinguish_planted, gs_round, gw_round, planted_threshold

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_BUDGET = 0, 2, 3, 4

CSV_COLUMNS = ("instance", "kind", "level", "frac", "opt", "gap", "time_s", "residual")

_MIN_KINDS = {RelaxationKind.BISECTION, RelaxationKind.SSBVE}


class NotConverged(SolverError):
    """The solver stopped at its iteration cap."""


# ---------------------------------------------------------------- payloads


def load_payload(data: dict | str | Path):
    """Decode a graph, hypergraph, bipartite graph or CSP from JSON."""
    if isinstance(data, Path) or (isinstance(data, str) and not data.lstrip().startswith("{")):
        data = json.loads(Path(data).read_text())
    elif isinstance(data, str):
        data = json.loads(data)
    if "scopes" in data:
        return CspInstance.from_json(data)
    if "hyperedges" in data:
        return Hypergraph(int(data["n"]), tuple(map(tuple, data["hyperedges"])))
    if "left" in data:
        side = lambda xs: tuple(tuple(x) if isinstance(x, list) else x for x in xs)  # noqa: E731
        return BipartiteGraph(side(data["left"]), side(data["right"]), tuple(map(tuple, data["edges"])))
    if "edges" in data:
        return Graph.from_json(data)
    raise ValidationError("unrecognized instance JSON")


def make_graph(model: str, n: int, seed: int, k: Optional[int] = None) -> Graph:
    if model == "gnp":
        return gnp_half(n, seed)
    if model == "planted":
        if k is None:
            raise ValidationError("planted model needs k")
        return planted_clique(n, k, seed)[0]
    if model == "complete":
        return complete_graph(n)
    if model == "empty":
        return empty_graph(n)
    if model == "cycle":
        return cycle_graph(n)
    raise ValidationError(f"unknown graph model {model!r}")


def make_csp(n: int, m: int, K: int, q: int, seed: int, D: Optional[int] = None) -> CspInstance:
    """Parity predicate for q = 2, the Vandermonde code (length q-1) otherwise."""
    if q == 2:
        code = parity_code(K)
    else:
        code = vandermonde_code(q, D if D is not None else K)
        if code.length != K:
            raise ValidationError(f"the Vandermonde code over F_{q} has length {q - 1}, not K={K}")
    return random_csp(n, m, K, q, code, seed)


def _dump(obj: Any, path: Optional[str | Path]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is None:
        print(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n")


# ---------------------------------------------------------------- reports


@dataclass
class GapReport:
    """FRAC against OPT; ``gap`` is FRAC/OPT for maximization, OPT/FRAC for minimization."""

    instance: str
    kind: str
    level: int
    frac: float
    opt: Optional[float]
    gap: Optional[float]
    time_s: float
    residual: float

    @classmethod
    def make(cls, instance, kind, level, frac, opt, time_s, residual) -> "GapReport":
        kind = RelaxationKind(kind)
        gap = None
        if opt is not None:
            num, den = (opt, frac) if kind in _MIN_KINDS else (frac, opt)
            gap = num / den if den else (1.0 if num == 0 else math.inf)
        return cls(str(instance), kind.value, int(level), float(frac), opt, gap, float(time_s), float(residual))


def emit_report(reports: Sequence[GapReport], format: str, path: str | Path) -> None:
    """Write reports as JSON (list of objects) or CSV with :data:`CSV_COLUMNS`."""
    if not reports:
        raise ValidationError("no reports to emit")
    rows = [asdict(r) for r in reports]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "json":
        path.write_text(json.dumps(rows, indent=2) + "\n")
    elif format == "csv":
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            for row in rows:
                w.writerow({k: ("" if row[k] is None else repr(row[k]) if isinstance(row[k], float) else row[k]) for k in CSV_COLUMNS})
    else:
        raise ValidationError(f"unknown report format {format!r}")


def read_report(path: str | Path) -> list[GapReport]:
    """Inverse of :func:`emit_report` for either format."""
    path = Path(path)
    if path.suffix == ".csv":
        out = []
        with path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                num = lambda s: None if s == "" else float(s)  # noqa: E731
                out.append(GapReport(row["instance"], row["kind"], int(row["level"]), float(row["frac"]),
                                     num(row["opt"]), num(row["gap"]), float(row["time_s"]), float(row["residual"])))
        return out
    return [GapReport(**row) for row in json.loads(path.read_text())]


# ---------------------------------------------------------------- solving


def solve_payload(kind, payload, level: int, params: Optional[dict] = None, tol: float = 1e-6, max_iter: int = 50000,
                  trace=None):
    """Build and solve; raises :class:`NotConverged` if the iteration cap is hit.

    ``trace`` is an optional text stream receiving CSV rows
    ``iteration,primal_residual,psd_violation``.
    """
    rel = build_relaxation(kind, payload, params or {}, level)
    kw = {}
    if trace is not None:
        writer = csv.writer(trace)
        writer.writerow(("iteration", "primal_residual", "psd_violation"))
        kw["trace"] = lambda it, rp, psd: writer.writerow((it, repr(float(rp)), repr(float(psd))))
    t0 = time.perf_counter()
    sol, frac = solve_relaxation(rel, tol=tol, max_iter=max_iter, **kw)
    elapsed = time.perf_counter() - t0
    sdp = sol.info["sdp"]
    if not sol.info["converged"]:
        raise NotConverged(f"solver stopped after {sdp.iterations} iterations (primal {sdp.primal_residual:.2e})")
    return rel, sol, frac, elapsed, max(sdp.primal_residual, sdp.dual_residual)


def _solution_json(rel, sol: SosSolution, frac: float, residual: float) -> dict:
    out = sol.to_json()
    out.update(kind=rel.kind.value, frac=frac, residual=residual, params=dict(rel.params))
    return out


def _load_solution(path) -> tuple[SosSolution, dict]:
    data = json.loads(Path(path).read_text())
    return SosSolution.from_json(data), data


def _opt(kind, payload, params: dict, budget=None):
    kind = RelaxationKind(kind)
    if kind in (RelaxationKind.THETA, RelaxationKind.GENERIC):
        return None
    param = params.get("l") if kind == RelaxationKind.SSBVE else params.get("k")
    return float(brute_force_opt(kind, payload, param, budget=budget))


# ---------------------------------------------------------------- experiments


@dataclass
class ExperimentSpec:
    """Ordered stages plus a global seed and an output directory.

    Each stage is a dict with ``name`` and ``op`` (generate, plausibility,
    build, solve, round, reduce, pcal, report, sweep) and op-specific
    fields; ``input`` and friends name earlier stages.
    """

    pipeline: list = field(default_factory=list)
    seed: int = 0
    out_dir: str = "runs"
    tol: float = 1e-6
    max_iter: int = 50000

    @classmethod
    def from_json(cls, data: dict | str | Path) -> "ExperimentSpec":
        if isinstance(data, Path) or (isinstance(data, str) and not data.lstrip().startswith("{")):
            data = json.loads(Path(data).read_text())
        elif isinstance(data, str):
            data = json.loads(data)
        spec = cls(**data)
        spec.validate()
        return spec

    def to_json(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        seen = set()
        for st in self.pipeline:
            if "name" not in st or "op" not in st:
                raise ValidationError(f"stage {st!r} needs name and op")
            if st["op"] not in _OPS:
                raise ValidationError(f"stage {st['name']}: unknown op {st['op']!r}")
            for ref in ("input", "graph", "solution", "source"):
                if ref in st and st[ref] not in seen:
                    raise ValidationError(f"stage {st['name']}: {ref} {st[ref]!r} is not an earlier stage")
            if st["name"] in seen:
                raise ValidationError(f"duplicate stage name {st['name']!r}")
            seen.add(st["name"])


def stage_seed(global_seed: int, index: int) -> int:
    return int(np.random.SeedSequence(global_seed, spawn_key=(index,)).generate_state(1)[0])


class StageError(SoslabError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage, self.cause = stage, cause


def _op_generate(st, ctx, seed):
    if st.get("type", "graph") == "csp":
        payload = make_csp(st["n"], st["m"], st["K"], st.get("q", 2), seed, st.get("D"))
    else:
        payload = make_graph(st.get("model", "gnp"), st["n"], seed, st.get("k"))
    return {"payload": payload}, payload.to_json()


def _op_plausibility(st, ctx, seed):
    res = check_plausibility(factor_graph(ctx[st["input"]]["payload"]), st["tau"], st["zeta"], st["eta"])
    return {}, {"status": res.status, "witness": res.witness, "checked": res.checked}


def _op_build(st, ctx, seed):
    rel = build_relaxation(st["kind"], ctx[st["input"]]["payload"], st.get("params", {}), st.get("level", 1))
    info = {"kind": rel.kind.value, "level": rel.level, "n_keys": len(rel.keys),
            "n_eq": int(rel.sdp.A_eq.shape[0]), "n_ineq": int(rel.sdp.A_ineq.shape[0])}
    return {"rel": rel, "payload": ctx[st["input"]]["payload"], "input": st["input"]}, info


def _op_solve(st, ctx, seed, spec):
    src = ctx[st["input"]]
    tol, max_iter = st.get("tol", spec.tol), st.get("max_iter", spec.max_iter)
    if "rel" in src:
        rel = src["rel"]
        t0 = time.perf_counter()
        sol, frac = solve_relaxation(rel, tol=tol, max_iter=max_iter)
        elapsed = time.perf_counter() - t0
        if not sol.info["converged"]:
            raise NotConverged("solver hit its iteration cap")
        sdp = sol.info["sdp"]
        residual = max(sdp.primal_residual, sdp.dual_residual)
        payload, inst_name = src["payload"], src["input"]
    else:
        payload, inst_name = src["payload"], st["input"]
        rel, sol, frac, elapsed, residual = solve_payload(
            st["kind"], payload, st.get("level", 1), st.get("params", {}), tol, max_iter)
    state = {"rel": rel, "sol": sol, "frac": frac, "time": elapsed, "residual": residual,
             "payload": payload, "instance": inst_name}
    return state, _solution_json(rel, sol, frac, residual)


def _op_round(st, ctx, seed):
    src = ctx[st["input"]]
    g = ctx[st["graph"]]["payload"] if "graph" in st else src["payload"]
    if st.get("alg", "gw") == "gw":
        sol = src["sol"]
        vecs = np.stack([sol.vec((v,)) for v in range(g.n)])
        out = gw_round(vecs, g, samples=st.get("samples", 1000), seed=seed)
        return {}, {"best_cut": out.best_cut, "mean_cut": out.mean_cut, "stderr": out.stderr,
                    "best_assignment": list(map(int, out.best_assignment))}
    out = gs_round(src["sol"], g, st["k"], st["r"], st["r_prime"], st["eps"], seed=seed,
                   trials=st.get("trials", 50), allow_irregular=st.get("allow_irregular", False))
    return {}, out.to_json()


def _op_reduce(st, ctx, seed):
    inst = ctx[st["input"]]["payload"]
    sol = ctx[st["solution"]]["sol"] if "solution" in st else None
    return {}, reduce_payload(inst, sol, st.get("to", "dks"), st.get("delta"), st.get("level"))


def _op_pcal(st, ctx, seed):
    payload = ctx[st["input"]]["payload"]
    if isinstance(payload, CspInstance):
        pe = pcal_csp_pe(payload, st["r"])
    else:
        pe = pcal_clique_pe(payload, st["k"], st["r"], st["tau"], exact=st.get("exact", True))
    return {"pe": pe}, pe.to_json()


def _op_report(st, ctx, seed):
    src = ctx[st["input"]]
    rel = src["rel"]
    opt = st.get("opt", "bruteforce")
    if opt == "bruteforce":
        opt = _opt(rel.kind, src["payload"], rel.params)
    rep = GapReport.make(src["instance"], rel.kind, rel.level, src["frac"], opt, src["time"], src["residual"])
    return {"report": rep}, None


def _op_sweep(st, ctx, seed):
    """Planted-clique distinguisher accuracy per clique size (null and planted halves)."""
    n, r, eps = st["n"], st.get("r", 1), st.get("eps", 0.1)
    rows = []
    ss = np.random.SeedSequence(seed)
    for k, child in zip(st["ks"], ss.spawn(len(st["ks"]))):
        seeds = child.generate_state(st.get("seeds", 10))
        right = 0
        for s in seeds:
            right += distinguish_planted(gnp_half(n, int(s)), r, eps).label == "random"
            right += distinguish_planted(planted_clique(n, k, int(s))[0], r, eps).label == "planted"
        rows.append({"k": k, "accuracy": right / (2 * len(seeds))})
    return {"rows": rows}, {"n": n, "r": r, "eps": eps, "threshold": planted_threshold(n, r, eps), "rows": rows}


_OPS = {"generate": _op_generate, "plausibility": _op_plausibility, "build": _op_build, "solve": _op_solve,
        "round": _op_round, "reduce": _op_reduce, "pcal": _op_pcal, "report": _op_report, "sweep": _op_sweep}


def run_experiment(spec: ExperimentSpec) -> list[GapReport]:
    """Run every stage in order, writing ``<out_dir>/<name>.json`` artifacts.

    Reports collected by ``report`` stages are also written to
    ``reports.json`` and ``reports.csv``; sweep stages add ``<name>.csv``.
    Artifacts hold no timings, so reruns are byte-identical; only the
    ``time_s`` column of the reports varies.
    """
    spec.validate()
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx: dict = {}
    reports: list[GapReport] = []
    for i, st in enumerate(spec.pipeline):
        seed = int(st["seed"]) if "seed" in st else stage_seed(spec.seed, i)
        op = _OPS[st["op"]]
        try:
            state, artifact = op(st, ctx, seed, spec) if st["op"] == "solve" else op(st, ctx, seed)
        except Exception as exc:  # abort with the stage name; earlier artifacts stay on disk
            raise StageError(st["name"], exc) from exc
        ctx[st["name"]] = state
        if artifact is not None:
            _dump(artifact, out / f"{st['name']}.json")
        if "report" in state:
            reports.append(state["report"])
        if "rows" in state:
            with (out / f"{st['name']}.csv").open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=("k", "accuracy"))
                w.writeheader()
                w.writerows(state["rows"])
    if reports:
        emit_report(reports, "json", out / "reports.json")
        emit_report(reports, "csv", out / "reports.csv")
    return reports


# ---------------------------------------------------------------- reductions


def reduce_payload(inst: CspInstance, sol: Optional[SosSolution], to: str, delta=None, level=None) -> dict:
    """Map a CSP (and optionally its solution) to DkS or SSBVE and score the image."""
    from .relaxations import objective_value

    if to == "dks":
        red, mapped = csp_to_dks(inst, sol, delta=delta, level=level)
        target, kind, params = red.graph, RelaxationKind.DKS, {"k": red.k}
        report = {"k": red.k, "delta": red.delta, "n_vertices": red.graph.n, "n_edges": len(red.graph.edges)}
    elif to == "ssbve":
        if sol is None:
            red, mapped = csp_to_ssbve(inst, delta=delta)
        else:
            dks_red, dks_sol = csp_to_dks(inst, sol, delta=delta)
            red, mapped = csp_to_ssbve(inst, dks_sol, sol, delta=delta, level=level)
        target, kind, params = red.bipartite, RelaxationKind.SSBVE, {"l": red.l}
        report = {"l": red.l, "n_left": len(red.bipartite.left), "n_right": len(red.bipartite.right)}
    else:
        raise ValidationError(f"unknown reduction target {to!r}")
    report["instance"] = target.to_json()
    if mapped is not None:
        rel = build_relaxation(kind, target, params, mapped.level)
        frac = objective_value(rel, mapped)
        report.update(frac=frac, mapped_feasibility_max_violation=max_violation(rel, mapped),
                      solution=mapped.to_json())
        try:
            opt = _opt(kind, target, params)
        except BudgetExceeded:
            opt = None
        report["opt"] = opt
        report["gap"] = None if opt is None else GapReport.make("", kind, mapped.level, frac, opt, 0, 0).gap
    return report


# ---------------------------------------------------------------- argparse


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=50000)
    p.add_argument("--budget", type=int, help="enumeration cap (sets SOSLAB_BUDGET)")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def _params(items: Optional[list[str]]) -> dict:
    out = {}
    for item in items or []:
        key, _, val = item.partition("=")
        if not _:
            raise ValidationError(f"--param expects key=value, got {item!r}")
        out[key] = int(val) if val.lstrip("-").isdigit() else float(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="soslab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen-graph", parents=[common])
    p.add_argument("--model", default="gnp", choices=("gnp", "planted", "complete", "empty", "cycle"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int)

    p = sub.add_parser("gen-csp", parents=[common])
    for flag in ("--n", "--m", "--K"):
        p.add_argument(flag, type=int, required=True)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--D", type=int)

    for name in ("build", "solve"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--kind", required=True, choices=[k.value for k in RelaxationKind if k != RelaxationKind.GENERIC])
        p.add_argument("--in", dest="inp", required=True)
        p.add_argument("--param", action="append", help="relaxation parameter, e.g. k=3")
        if name == "solve":
            p.add_argument("--opt", choices=("none", "bruteforce"), default="none")
            p.add_argument("--trace", help="write solver diagnostics as CSV to this path ('-' for stderr)")

    p = sub.add_parser("round", parents=[common])
    p.add_argument("--alg", choices=("gw", "gs"), required=True)
    p.add_argument("--sol", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--rprime", type=int, default=3)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--allow-irregular", action="store_true")

    p = sub.add_parser("reduce", parents=[common])
    p.add_argument("--from", dest="src", choices=("csp",), default="csp")
    p.add_argument("--to", choices=("dks", "ssbve"), required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--sol")
    p.add_argument("--delta", type=int)
    p.add_argument("--target-level", type=int)

    p = sub.add_parser("theta", parents=[common])
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--formulation", choices=("primal", "dual", "both"), default="both")

    p = sub.add_parser("pcal", parents=[common])
    p.add_argument("--model", choices=("clique", "csp"), required=True)
    p.add_argument("--in", dest="inp", help="instance JSON; otherwise one is sampled")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--tau", type=int)
    p.add_argument("--exact", action=argparse.BooleanOptionalAction, default=True)

    p = sub.add_parser("plausibility", parents=[common])
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)

    p = sub.add_parser("run", parents=[common])
    p.add_argument("spec")

    p = sub.add_parser("report", parents=[common])
    p.add_argument("inputs", nargs="+", help="report JSON/CSV files or solve outputs")
    return ap


def _cmd(args) -> int:
    cmd = args.cmd
    if cmd == "gen-graph":
        _dump(make_graph(args.model, args.n, args.seed, args.k).to_json(), args.out)
    elif cmd == "gen-csp":
        _dump(make_csp(args.n, args.m, args.K, args.q, args.seed, args.D).to_json(), args.out)
    elif cmd == "build":
        rel = build_relaxation(args.kind, load_payload(Path(args.inp)), _params(args.param), args.level)
        _dump(rel.to_json(), args.out)
    elif cmd == "solve":
        payload = load_payload(Path(args.inp))
        with contextlib.ExitStack() as stack:
            trace = None
            if args.trace == "-":
                trace = sys.stderr
            elif args.trace:
                trace = stack.enter_context(open(args.trace, "w", newline=""))
            rel, sol, frac, elapsed, residual = solve_payload(
                args.kind, payload, args.level, _params(args.param), args.tol, args.max_iter, trace)
        out = _solution_json(rel, sol, frac, residual)
        if args.opt == "bruteforce":
            rep = GapReport.make(Path(args.inp).stem, rel.kind, rel.level, frac, _opt(rel.kind, payload, rel.params),
                                 elapsed, residual)
            out["opt"], out["gap"] = rep.opt, rep.gap
        _dump(out, args.out)
    elif cmd == "round":
        sol, _ = _load_solution(args.sol)
        g = load_payload(Path(args.graph))
        if args.alg == "gw":
            vecs = np.stack([sol.vec((v,)) for v in range(g.n)])
            res = gw_round(vecs, g, samples=args.samples, seed=args.seed)
            _dump({"best_cut": res.best_cut, "mean_cut": res.mean_cut, "stderr": res.stderr,
                   "best_assignment": list(map(int, res.best_assignment))}, args.out)
        else:
            if args.k is None:
                raise ValidationError("gs rounding needs --k")
            res = gs_round(sol, g, args.k, args.r, args.rprime, args.eps, seed=args.seed,
                           trials=args.trials, allow_irregular=args.allow_irregular)
            _dump(res.to_json(), args.out)
    elif cmd == "reduce":
        inst = load_payload(Path(args.inp))
        if not isinstance(inst, CspInstance):
            raise ValidationError("reduce expects a CSP instance")
        sol = _load_solution(args.sol)[0] if args.sol else None
        report = reduce_payload(inst, sol, args.to, args.delta, args.target_level)
        out = Path(args.out or "reduce_out")
        _dump(report.pop("instance"), out / f"{args.to}_instance.json")
        if "solution" in report:
            _dump(report.pop("solution"), out / f"{args.to}_solution.json")
        _dump(report, out / "report.json")
    elif cmd == "theta":
        g = load_payload(Path(args.inp))
        forms = ("primal", "dual") if args.formulation == "both" else (args.formulation,)
        vals = {f: lovasz_theta(g, f, tol=min(args.tol, 1e-7), max_iter=args.max_iter) for f in forms}
        _dump(vals, args.out)
    elif cmd == "pcal":
        if args.model == "clique":
            if args.k is None or args.tau is None:
                raise ValidationError("clique pcal needs --k and --tau")
            g = load_payload(Path(args.inp)) if args.inp else gnp_half(args.n, args.seed)
            pe = pcal_clique_pe(g, args.k, args.r, args.tau, exact=args.exact)
        else:
            inst = load_payload(Path(args.inp)) if args.inp else make_csp(args.n, args.m, args.K, 2, args.seed)
            pe = pcal_csp_pe(inst, args.r)
        _dump(pe.to_json(), args.out)
    elif cmd == "plausibility":
        res = check_plausibility(factor_graph(load_payload(Path(args.inp))), args.tau, args.zeta, args.eta)
        _dump({"status": res.status, "witness": res.witness, "checked": res.checked}, args.out)
    elif cmd == "run":
        spec = ExperimentSpec.from_json(Path(args.spec))
        reports = run_experiment(spec)
        if args.out and reports:
            emit_report(reports, args.format, args.out)
    elif cmd == "report":
        reports = []
        for path in args.inputs:
            reports.extend(read_report(path))
        if args.out:
            emit_report(reports, args.format, args.out)
        else:
            w = csv.writer(sys.stdout)
            w.writerow(CSV_COLUMNS)
            for r in reports:
                w.writerow([getattr(r, c) for c in CSV_COLUMNS])
    return EXIT_OK


def exit_code(exc: BaseException) -> int:
    """Map an exception (or the cause of a stage failure) to a process exit code."""
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, (ValidationError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError)):
        return EXIT_VALIDATION
    return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    saved = os.environ.get("SOSLAB_BUDGET")
    if args.budget is not None:
        os.environ["SOSLAB_BUDGET"] = str(args.budget)
    try:
        return _cmd(args)
    except Exception as exc:
        code = exit_code(exc)
        if code == 1:
            raise
        print(f"soslab {args.cmd}: {exc}", file=sys.stderr)
        return code
    finally:
        # in-process callers must not inherit the cap
        if saved is None:
            os.environ.pop("SOSLAB_BUDGET", None)
        else:
            os.environ["SOSLAB_BUDGET"] = saved


if __name__ == "__main__":
    sys.exit(main())
