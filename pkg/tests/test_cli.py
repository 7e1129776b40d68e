import csv
import json
import os

import pytest

from soslab.cli import (
    CSV_COLUMNS,
    ExperimentSpec,
    GapReport,
    emit_report,
    main,
    read_report,
    run_experiment,
    stage_seed,
)
from soslab.errors import ValidationError
from soslab.instances import gnp_half
from soslab.reductions import brute_force_opt


def _report(**kw):
    base = dict(instance="g", kind="clique", level=1, frac=4.25, opt=4.0, time_s=0.5, residual=1e-7)
    base.update(kw)
    return GapReport.make(**base)


def test_gap_direction():
    assert _report().gap == pytest.approx(4.25 / 4.0)
    assert _report(kind="bisection", frac=2.0, opt=3.0).gap == pytest.approx(1.5)
    assert _report(opt=None).gap is None


def test_emit_report_csv_shape(tmp_path):
    path = tmp_path / "r.csv"
    emit_report([_report()], "csv", path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == list(CSV_COLUMNS) and len(rows) == 2


def test_emit_report_rejects_empty(tmp_path):
    with pytest.raises(ValidationError):
        emit_report([], "csv", tmp_path / "r.csv")
    assert not (tmp_path / "r.csv").exists()


def test_json_and_csv_agree(tmp_path):
    reps = [_report(), _report(instance="h", frac=1 / 3, opt=0.1)]
    emit_report(reps, "json", tmp_path / "r.json")
    emit_report(reps, "csv", tmp_path / "r.csv")
    assert read_report(tmp_path / "r.json") == read_report(tmp_path / "r.csv") == reps


def _clique_spec(out_dir):
    return ExperimentSpec(
        pipeline=[
            {"name": "graph", "op": "generate", "model": "gnp", "n": 16, "seed": 3},
            {"name": "rel", "op": "build", "input": "graph", "kind": "clique", "level": 1},
            {"name": "sol", "op": "solve", "input": "rel"},
            {"name": "rep", "op": "report", "input": "sol"},
        ],
        seed=7,
        out_dir=str(out_dir),
    )


def test_clique_pipeline_gap_and_determinism(tmp_path):
    reps = run_experiment(_clique_spec(tmp_path / "a"))
    assert len(reps) == 1
    (rep,) = reps
    assert rep.opt == brute_force_opt("clique", gnp_half(16, 3))
    assert rep.gap >= 1 - 1e-6
    run_experiment(_clique_spec(tmp_path / "b"))
    for name in ("graph", "rel", "sol"):
        a = (tmp_path / "a" / f"{name}.json").read_bytes()
        assert a == (tmp_path / "b" / f"{name}.json").read_bytes()


def test_csp_pipeline(tmp_path):
    spec = ExperimentSpec(
        pipeline=[
            {"name": "inst", "op": "generate", "type": "csp", "n": 8, "m": 3, "K": 3},
            {"name": "plaus", "op": "plausibility", "input": "inst", "tau": 3, "zeta": 0.1, "eta": 0.5},
            {"name": "rel", "op": "build", "input": "inst", "kind": "csp", "level": 2},
            {"name": "sol", "op": "solve", "input": "rel"},
            {"name": "rep", "op": "report", "input": "sol", "opt": 3},
        ],
        out_dir=str(tmp_path),
    )
    (rep,) = run_experiment(spec)
    assert rep.frac <= 3 + 1e-4
    assert json.loads((tmp_path / "plaus.json").read_text())["status"] in ("holds", "violated", "undecided")


def test_spec_validation():
    with pytest.raises(ValidationError, match="earlier stage"):
        ExperimentSpec(pipeline=[{"name": "s", "op": "solve", "input": "nope"}]).validate()
    with pytest.raises(ValidationError, match="unknown op"):
        ExperimentSpec(pipeline=[{"name": "s", "op": "bake"}]).validate()
    spec = _clique_spec("x")
    assert ExperimentSpec.from_json(json.dumps(spec.to_json())) == spec


def test_stage_seeds_distinct_and_stable():
    seeds = [stage_seed(0, i) for i in range(5)]
    assert len(set(seeds)) == 5 and seeds == [stage_seed(0, i) for i in range(5)]


def test_cli_solve_and_trace(tmp_path, capsys):
    g = tmp_path / "g.json"
    assert main(["gen-graph", "--n", "8", "--seed", "1", "--out", str(g)]) == 0
    sol, trace = tmp_path / "s.json", tmp_path / "t.csv"
    code = main(["solve", "--kind", "clique", "--in", str(g), "--opt", "bruteforce",
                 "--trace", str(trace), "--out", str(sol)])
    assert code == 0
    data = json.loads(sol.read_text())
    assert data["gap"] >= 1 - 1e-6
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["iteration", "primal_residual", "psd_violation"] and len(rows) > 1


def test_exit_codes(tmp_path, capsys):
    g = tmp_path / "g.json"
    main(["gen-graph", "--n", "10", "--seed", "0", "--out", str(g)])
    assert main(["solve", "--kind", "clique", "--level", "2", "--in", str(g), "--max-iter", "3",
                 "--out", str(tmp_path / "s.json")]) == 3
    assert main(["solve", "--kind", "dks", "--in", str(g), "--param", "k=3"]) == 2
    assert main(["solve", "--kind", "clique", "--in", str(tmp_path / "missing.json")]) == 2
    assert main(["solve", "--kind", "clique", "--in", str(g), "--opt", "bruteforce", "--budget", "5",
                 "--out", str(tmp_path / "s.json")]) == 4


def test_cli_theta_and_report(tmp_path, capsys):
    g = tmp_path / "c.json"
    main(["gen-graph", "--model", "cycle", "--n", "5", "--out", str(g)])
    out = tmp_path / "theta.json"
    assert main(["theta", "--in", str(g), "--out", str(out)]) == 0
    vals = json.loads(out.read_text())
    assert vals["primal"] == pytest.approx(5**0.5, abs=1e-3)
    emit_report([_report()], "json", tmp_path / "r.json")
    assert main(["report", str(tmp_path / "r.json")]) == 0
    assert capsys.readouterr().out.splitlines()[0] == ",".join(CSV_COLUMNS)


def test_budget_flag_does_not_leak(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("SOSLAB_BUDGET", raising=False)
    g = tmp_path / "g.json"
    main(["gen-graph", "--n", "10", "--seed", "0", "--out", str(g)])
    main(["solve", "--kind", "clique", "--in", str(g), "--opt", "bruteforce", "--budget", "5"])
    assert "SOSLAB_BUDGET" not in os.environ
