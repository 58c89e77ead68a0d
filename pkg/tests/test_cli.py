import json

from qrest import pipeline
from qrest.cli import main
from qrest.errors import SolverFailure


def test_full_cli_flow(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["--seed", "3", "--out", out, "gen", "coherence-2q", "--count", "40"]) == 0
    ds = str(tmp_path / "coherence-2q.jsonl")
    assert main(["--out", out, "label", ds, "--measure", "l1"]) == 0
    assert main(["--out", out, "train", ds, "--measure", "l1", "--grid", "c=1,10;tau=1", "--folds", "3"]) == 0
    model = capsys.readouterr().out.strip().splitlines()[-1]
    assert model.endswith(".L1Coherence.svr.model.json")
    assert main(["--out", out, "eval", model, ds]) == 0
    assert main(["--out", out, "perturb-eval", model, ds, "--level", "0.02"]) == 0
    capsys.readouterr()
    assert main(["report", out]) == 0
    assert (tmp_path / "report.md").exists() and (tmp_path / "report.csv").exists()


def test_usage_errors_exit_1(tmp_path):
    assert main(["gen", "no-such-system"]) == 1
    assert main(["--workers", "0", "gen", "coherence-2q"]) == 1
    assert main(["report", str(tmp_path)]) == 1
    assert main(["label", str(tmp_path / "missing.jsonl")]) == 1


def test_failure_budget_exit_2(tmp_path, monkeypatch):
    assert main(["--out", str(tmp_path), "gen", "coherence-2q", "--count", "3"]) == 0

    def boom(rho, tol=1e-7):
        raise SolverFailure("synthetic")

    monkeypatch.setattr(pipeline.measures, "c_geometric", boom)
    ds = str(tmp_path / "coherence-2q.jsonl")
    assert main(["label", ds, "--measure", "geom", "--failure-budget", "0.5"]) == 2
    man = json.loads(pipeline.manifest_path(tmp_path / "coherence-2q.jsonl").read_text())
    assert man["stages"][-1]["command"] == "label"
