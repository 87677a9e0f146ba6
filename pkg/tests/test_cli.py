import csv
import os
import subprocess
import sys

import pytest

from robustae.cli import main


def synth(tmp_path, kind, *extra):
    out = tmp_path / kind
    assert main(["synth", kind, "--out", str(out), *extra]) == 0
    return str(out / f"{kind}.manifest")


def test_synth_writes_manifests(tmp_path, capsys):
    path = synth(tmp_path, "digits", "--n-normal", "6", "--n-anomaly", "2", "--format", "bin")
    assert capsys.readouterr().out.strip() == path
    text = open(path).read()
    assert "image_shape=1,16,16" in text and "x_path=digits_x.bin" in text


def test_detect_end_to_end_and_eval(tmp_path, capsys):
    manifest = synth(tmp_path, "line")
    out = tmp_path / "run"
    code = main(["detect", "--method", "pca", "--k", "1", "--manifest", manifest, "--out", str(out),
                 "--seeds", "7,7"])
    assert code == 0
    with open(out / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and rows[0] == rows[1] and float(rows[0]["auroc"]) == 1.0
    capsys.readouterr()
    assert main(["eval", str(out / "seed7_scores.csv"), "--out", str(tmp_path / "ev")]) == 0
    assert "auroc=1.0000" in capsys.readouterr().out


def test_config_file_and_equals_overrides(tmp_path):
    manifest = synth(tmp_path, "line")
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"method=pca\nmanifest={manifest}\nk=1\nseeds=0\n")
    assert main(["detect", "--config", str(cfg), f"--out={tmp_path / 'o'}"]) == 0
    assert (tmp_path / "o" / "summary.csv").exists()


def test_sweep_subcommand(tmp_path, capsys):
    manifest = synth(tmp_path, "manifold", "--n-normal", "20", "--n-anomaly", "2", "--dims", "5")
    code = main(["sweep", "--param", "k", "--grid", "1,2", "--method", "pca", "--manifest", manifest,
                 "--out", str(tmp_path / "sw"), "--seeds", "0,1"])
    assert code == 0
    assert "k=1" in capsys.readouterr().out
    assert (tmp_path / "sw" / "sweep.csv").exists() and (tmp_path / "sw" / "k_2" / "metrics.csv").exists()


@pytest.mark.parametrize("method", ["rpca-convex", "rpca-factored", "drmf"])
def test_inductive_rejects_transductive_methods(tmp_path, method, capsys):
    manifest = synth(tmp_path, "manifold")
    assert main(["inductive", "--method", method, "--manifest", manifest, "--out", str(tmp_path / "x")]) == 2
    assert "transductive" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_exit_codes(tmp_path):
    manifest = synth(tmp_path, "line")
    assert main(["detect", "--manifest", manifest, "--colour", "red"]) == 2
    assert main(["detect", "--manifest", manifest, "--method", "svm"]) == 2
    assert main(["detect", "--manifest", str(tmp_path / "missing")]) == 2
    assert main(["bogus"]) == 2
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "x.csv").write_text("1,2\n3,oops\n")
    (bad / "d.manifest").write_text("x_path=x.csv\n")
    assert main(["detect", "--method", "pca", "--manifest", str(bad / "d.manifest"), "--out",
                 str(tmp_path / "o")]) == 3
    assert main(["eval", str(tmp_path / "nothing.csv")]) == 3


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    import robustae.experiment as ex
    from robustae.errors import DivergenceError

    def diverge(*a, **k):
        raise DivergenceError("objective exploded")

    monkeypatch.setattr(ex, "fit_method", diverge)
    manifest = synth(tmp_path, "line")
    assert main(["detect", "--method", "pca", "--manifest", manifest, "--out", str(tmp_path / "o"),
                 "--seeds", "0"]) == 4


def test_help_lists_config_keys():
    res = subprocess.run([sys.executable, "-m", "robustae.cli", "detect", "--help"], capture_output=True,
                         text=True, env={**os.environ, "COLUMNS": "200"})
    assert res.returncode == 0
    assert "lambda" in res.stdout and "alternations" in res.stdout
