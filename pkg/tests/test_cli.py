"""Command line interface and export formats."""

import csv
import json
import os

import numpy as np
import pytest

from prbmlab.cli import main
from prbmlab.sweep import SweepConfig


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sample_command(tmp_path, capsys):
    assert main(["sample", "--size", "64", "--alpha", "0.0",
                 "--realizations", "4", "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "spectrum std" in out
    hist = _read_csv(tmp_path / "histogram.csv")
    assert set(hist[0]) == {"value", "count"}
    assert sum(int(r["count"]) for r in hist) == 64 * 4
    spec = _read_csv(tmp_path / "spectrum.csv")
    assert set(spec[0]) == {"index", "eigenvalue", "ipr"}
    assert len(spec) == 64


def test_gap_command_dense(tmp_path, capsys):
    assert main(["gap", "--size", "12", "--alpha-h", "0.3", "--alpha-l", "0.9",
                 "--gamma", "0.8", "--seed", "5", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "gap = " in out and "method = dense" in out
    spec = _read_csv(tmp_path / "spectrum.csv")
    assert len(spec) == 144
    assert max(float(r["re_lambda"]) for r in spec) <= 1e-8
    mode = _read_csv(tmp_path / "mode_populations.csv")
    assert len(mode) == 12
    with open(tmp_path / "mode.json") as fh:
        payload = json.load(fh)
    assert payload["shape"] == [12, 12]
    m = np.asarray(payload["re"]) + 1j * np.asarray(payload["im"])
    assert abs(np.linalg.norm(m) - 1.0) < 1e-9


def test_gap_command_power(tmp_path, capsys):
    assert main(["gap", "--size", "40", "--dense-limit", "16", "--gamma", "2.0",
                 "--alpha-l", "1.0", "--seed", "6", "--tol", "1e-7",
                 "--out", str(tmp_path)]) == 0
    assert "method = power-iteration" in capsys.readouterr().out


def test_ratemat_command(tmp_path, capsys):
    assert main(["ratemat", "--size", "20", "--regime", "strong",
                 "--alpha-h", "0.2", "--alpha-l", "0.5", "--gamma", "5.0",
                 "--seed", "7", "--out", str(tmp_path)]) == 0
    assert "rate gap" in capsys.readouterr().out
    with open(tmp_path / "ratemat.json") as fh:
        header = json.load(fh)
    assert header["regime"] == "strong-regularized"
    assert header["gamma"] == 5.0
    assert len(header["basis_labels"]) == 20
    triplets = _read_csv(tmp_path / "ratemat.csv")
    a = np.zeros((20, 20))
    for row in triplets:
        a[int(row["i"]), int(row["j"])] = float(row["a_ij"])
    assert np.max(np.abs(a.sum(axis=1))) < 1e-12


def test_evolve_command(tmp_path, capsys):
    assert main(["evolve", "--size", "10", "--gamma", "4.0", "--alpha-l", "0.6",
                 "--seed", "8", "--windows", "3:6,6:9", "--points", "41",
                 "--plot", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "window 3-6/Delta" in out
    rows = _read_csv(tmp_path / "trajectory.csv")
    assert len(rows) == 41 * 10
    fits = _read_csv(tmp_path / "relaxation.csv")
    assert len(fits) == 2 * 10
    assert os.path.getsize(tmp_path / "trajectory.png") > 0


def test_sweep_report_classify_pipeline(tmp_path, capsys):
    config = dict(alpha_h=[0.0], alpha_l=[0.0], gamma=[0.5],
                  sizes=[8, 12, 16, 24, 32, 48, 64, 96],
                  realizations=2, tasks=["rate-gap-weak"], base_seed=11)
    cfg_path = tmp_path / "config.json"
    with open(cfg_path, "w") as fh:
        json.dump(config, fh)
    sweep_dir = tmp_path / "run"
    assert main(["sweep", "--config", str(cfg_path), "--out", str(sweep_dir),
                 "--threads", "1"]) == 0
    assert (sweep_dir / "records.jsonl").exists()

    report_dir = tmp_path / "report"
    assert main(["report", "--records", str(sweep_dir),
                 "--out", str(report_dir)]) == 0
    summary = _read_csv(report_dir / "summary.csv")
    assert {r["metric"] for r in summary} >= {"gap", "vector_ipr"}
    figs = [p for p in os.listdir(report_dir) if p.endswith(".png")]
    assert figs, "report should render at least one figure"

    gaps = sorted((int(r["size"]), float(r["mean"]), float(r["std"]))
                  for r in summary if r["metric"] == "gap")
    series_path = tmp_path / "series.csv"
    with open(series_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["size", "mean", "std"])
        writer.writerows(gaps)
    capsys.readouterr()
    assert main(["classify", "--input", str(series_path)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["label"] in {"gapped", "hydrodynamic", "Lifshitz", "inconclusive"}
    assert set(fit["residuals"]) == {"gapped", "hydrodynamic", "Lifshitz"}


def test_report_renders_phase_diagram(tmp_path):
    config = dict(alpha_h=[0.25, 1.0], alpha_l=[0.25, 1.0], gamma=[0.5],
                  sizes=[12], realizations=2, tasks=["rate-gap-weak"],
                  base_seed=3)
    cfg_path = tmp_path / "config.json"
    with open(cfg_path, "w") as fh:
        json.dump(config, fh)
    assert main(["sweep", "--config", str(cfg_path),
                 "--out", str(tmp_path / "run")]) == 0
    assert main(["report", "--records", str(tmp_path / "run"),
                 "--out", str(tmp_path / "rep")]) == 0
    figs = os.listdir(tmp_path / "rep")
    assert any(f.startswith("phase_diagram") for f in figs)


def test_outdir_env_var(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PRBMLAB_OUTDIR", str(tmp_path / "envout"))
    assert main(["sample", "--size", "16", "--alpha", "1.0",
                 "--realizations", "2", "--seed", "1"]) == 0
    capsys.readouterr()
    assert (tmp_path / "envout" / "histogram.csv").exists()


def test_sweep_resume_flag(tmp_path):
    config = dict(alpha_h=[0.0], alpha_l=[0.0], gamma=[1.0], sizes=[10],
                  realizations=2, tasks=["rate-gap-weak"], base_seed=5)
    cfg_path = tmp_path / "config.json"
    with open(cfg_path, "w") as fh:
        json.dump(config, fh)
    out = tmp_path / "run"
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
    first = (out / "records.jsonl").read_bytes()
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out),
                 "--resume"]) == 0
    assert (out / "records.jsonl").read_bytes() == first
