import json
import os
import subprocess
import sys

import pytest

from graphite.cli import main
from graphite.io import load_dataset, load_transformed


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "g"
    assert main(["synth", "--out", str(out), "--nodes", "60", "--features", "40", "--noise", "0.3",
                 "--p-out", "0.1", "--seed", "1"]) == 0
    return out


def test_synth_and_transform(tmp_path, dataset, capsys):
    out = tmp_path / "gs"
    assert main(["transform", "--in", str(dataset), "--out", str(out)]) == 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    g = load_dataset(dataset)
    t = load_transformed(out)
    assert report["nodes_before"] == g.num_nodes
    assert report["edges_after"] == g.num_edges + g.feature_nnz == t.num_edges
    assert json.loads((out / "size_report.json").read_text()) == report


def test_nhb(tmp_path, dataset):
    assert main(["nhb", "--in", str(dataset), "--out", str(tmp_path / "n")]) == 0
    assert load_dataset(tmp_path / "n").num_edges >= load_dataset(dataset).num_edges


def test_homophily_outputs(tmp_path, dataset, capsys):
    rep, svg = tmp_path / "h.json", tmp_path / "h.svg"
    assert main(["homophily", "--dataset", str(dataset), "--out", str(rep), "--svg", str(svg), "--nhb"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [l.split("\t")[0] for l in lines] == ["h_feature", "h_edge", "h_adjusted", "h_and"]
    data = json.loads(rep.read_text())
    assert data["before"]["edge_universe"] == "E" and data["after"]["edge_universe"] == "E*"
    assert set(data) == {"dataset", "before", "after", "improvement", "nhb"}
    assert svg.read_text().startswith("<svg")


def test_train_writes_log_and_checkpoint(tmp_path, dataset, capsys):
    log, ck = tmp_path / "log.jsonl", tmp_path / "c.bin"
    args = ["train", "--dataset", str(dataset), "--steps", "3", "--splits", "2", "--layers", "1",
            "--hidden", "8", "--lr", "0.01", "--out", str(log), "--checkpoint", str(ck)]
    assert main(args) == 0
    records = [json.loads(l) for l in log.read_text().splitlines()]
    assert [r["kind"] for r in records].count("header") == 2
    assert records[-1]["kind"] == "aggregate" and records[-1]["replicates"] == 2
    assert ck.read_bytes()[:8] == b"GRPHCKPT"
    assert main(args + ["--no-transform"]) == 0


def test_gradcheck_passes(capsys):
    assert main(["gradcheck"]) == 0
    assert capsys.readouterr().out.startswith("PASS gradcheck")


def test_gradcheck_fails_with_impossible_tolerance(capsys):
    assert main(["gradcheck", "--tol", "0"]) == 1


def test_verify_small(capsys):
    assert main(["verify-theorems", "--trials", "20", "--seed", "7", "--witness-graphs", "2",
                 "--mean-cases", "200"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 6 and all(l.startswith("PASS") for l in lines)


def test_bad_input_exits_nonzero(tmp_path, capsys):
    assert main(["transform", "--in", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_conflicting_flags(tmp_path, dataset, capsys):
    rc = main(["transform", "--in", str(dataset), "--out", str(tmp_path / "o"), "--zero-graph-features",
               "--row-normalize"])
    assert rc == 1


def test_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        main(["transform", "--bogus"])
    assert exc.value.code == 2


def test_python_kernels_via_env(tmp_path):
    env = dict(os.environ, GRAPHITE_KERNELS="python")
    code = "from graphite import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
