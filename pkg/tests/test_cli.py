import csv
import json
import subprocess
import sys

import pytest

from grmlab.bundle import read_bundle
from grmlab.cli import main

SMALL_MIX = ["--num-domains", "3", "--nodes-per-domain", "20", "--num-classes", "2",
             "--feature-dim", "4", "--edge-prob", "0.1"]
TINY = {"hidden": 6, "d_z": 4, "epochs": 1, "eval_repeats": 1, "batch_size": 4}


def write_config(path, **kw):
    path.write_text(json.dumps({**TINY, **kw}))
    return str(path)


def test_synth_writes_a_readable_bundle(tmp_path):
    out = tmp_path / "mix.json"
    assert main(["synth", "--kind", "mix", "--out", str(out), "--seed", "1",
                 "--bias-ratio", "0.5", *SMALL_MIX]) == 0
    ds = read_bundle(out)
    assert ds.task == "node" and len(ds.examples) == 60
    out = tmp_path / "motif.json"
    assert main(["synth", "--kind", "motif", "--out", str(out), "--seed", "2", "--b", "1.0",
                 "--num-graphs", "8"]) == 0
    assert read_bundle(out).task == "graph"


def test_train_then_eval(tmp_path):
    data = tmp_path / "mix.json"
    main(["synth", "--kind", "mix", "--out", str(data), "--seed", "0", *SMALL_MIX])
    cfg = write_config(tmp_path / "c.json", data=str(data))
    ckpt, log, report = tmp_path / "m.npz", tmp_path / "log.csv", tmp_path / "r.csv"
    assert main(["train", "--config", cfg, "--out", str(ckpt), "--log", str(log)]) == 0
    assert next(csv.reader(open(log))) == ["step", "L_s", "L_r", "L_d", "total"]
    assert main(["eval", "--ckpt", str(ckpt), "--data", str(data), "--report", str(report)]) == 0
    rows = list(csv.reader(open(report)))
    assert rows[0] == ["domain", "value"] and [r[0] for r in rows[-2:]] == ["min", "avg"]
    assert main(["eval", "--ckpt", str(ckpt), "--data", str(data), "--report", str(report),
                 "--split", "valid"]) == 0
    assert [r[0] for r in csv.reader(open(report))][1] == "1"


def test_sweep_and_ablate_reports(tmp_path):
    synth = {"kind": "mix", "num_domains": 3, "nodes_per_domain": 20, "num_classes": 2,
             "feature_dim": 4, "edge_prob": 0.1}
    cfg = write_config(tmp_path / "c.json", synth=synth)
    report = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", cfg, "--ratios", "0,0.9", "--report", str(report)]) == 0
    rows = list(csv.reader(open(report)))
    assert rows[0] == ["ratio", "method", "seed", "min", "avg"] and len(rows) == 5
    report = tmp_path / "abl.csv"
    assert main(["ablate", "--config", cfg, "--report", str(report)]) == 0
    rows = list(csv.reader(open(report)))
    assert [r[0] for r in rows[1:]] == ["GRM", "GRM\\R", "GRM\\I", "GRM\\V"]


def test_bench_prints_csv(capsys):
    assert main(["bench", "--sizes", "8,16"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,edges,seconds" and len(lines) == 3


def one_line_error(capsys):
    err = capsys.readouterr().err
    assert err.startswith("error: ") and err.count("\n") == 1
    return err


@pytest.mark.parametrize("argv,code", [
    ([], 2),
    (["frobnicate"], 2),
    (["synth", "--kind", "mix", "--out", "x.json"], 2),
    (["bench", "--sizes", "a,b"], 2),
    (["bench", "--sizes", "20,10"], 1),
    (["synth", "--kind", "mix", "--out", "x.json", "--seed", "0", "--bias-ratio", "2"], 1),
    (["train", "--config", "missing.json", "--out", "m.npz"], 1),
])
def test_errors_exit_nonzero_with_one_line(argv, code, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code
    one_line_error(capsys)


def test_bad_config_field_is_reported(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", learning_rat=0.1)
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "m.npz")]) == 1
    assert "learning_rat" in one_line_error(capsys)


def test_eval_rejects_mismatched_data(tmp_path, capsys):
    mix, motif = tmp_path / "mix.json", tmp_path / "motif.json"
    main(["synth", "--kind", "mix", "--out", str(mix), "--seed", "0", *SMALL_MIX])
    main(["synth", "--kind", "motif", "--out", str(motif), "--seed", "0", "--num-graphs", "4"])
    cfg = write_config(tmp_path / "c.json", data=str(mix))
    main(["train", "--config", cfg, "--out", str(tmp_path / "m.npz")])
    capsys.readouterr()
    assert main(["eval", "--ckpt", str(tmp_path / "m.npz"), "--data", str(motif),
                 "--report", str(tmp_path / "r.csv")]) == 1
    assert "does not match" in one_line_error(capsys)


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "grmlab", "bench", "--sizes", "6"],
                         capture_output=True, text=True, cwd=tmp_path)
    assert out.returncode == 0 and out.stdout.startswith("n,edges,seconds")
    out = subprocess.run([sys.executable, "-m", "grmlab", "eval"], capture_output=True, text=True)
    assert out.returncode == 2 and out.stderr.count("\n") == 1
