import csv
import shutil
import subprocess
import sys

import numpy as np
import pytest

from anoscore.cli import SCORE_COLUMNS, main
from anoscore.evaluation import ScoreRecord, auc_pairwise
from anoscore.imagecore import load_pgm, save_pgm


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--seed", "7", "--normal", "3", "--anomaly", "3", "--out", str(root / "data")]) == 0
    assert main(["init-gen", "--seed", "1", "--out", str(root / "gen.tgen")]) == 0
    assert main(["project", "--manifest", str(root / "data/manifest.csv"),
                 "--gen-params", str(root / "gen.tgen"), "--steps", "10",
                 "--out", str(root / "proj")]) == 0
    assert main(["score", "--manifest", str(root / "data/manifest.csv"),
                 "--recon-dir", str(root / "proj"), "--out", str(root / "scores")]) == 0
    return root


def test_synth_outputs(pipeline, capsys):
    data = pipeline / "data"
    assert len(list(data.glob("*.pgm"))) == 6
    assert len(read_rows(data / "manifest.csv")) == 7


def test_synth_requires_out(capsys):
    assert main(["synth", "--seed", "7"]) == 2
    assert "usage" in capsys.readouterr().err


def test_synth_repeatable(pipeline, tmp_path):
    assert main(["synth", "--seed", "7", "--normal", "3", "--anomaly", "3", "--out", str(tmp_path)]) == 0
    for f in (pipeline / "data").iterdir():
        assert f.read_bytes() == (tmp_path / f.name).read_bytes()


def test_project_outputs(pipeline):
    proj = pipeline / "proj"
    rows = read_rows(proj / "projections.csv")
    assert rows[0] == ["id", "final_loss", "initial_loss", "steps_taken"]
    assert len(rows) == 7
    for sid, final, initial, steps in rows[1:]:
        assert float(final) <= float(initial)
        assert 0 <= int(steps) <= 10
        assert load_pgm(proj / f"{sid}_recon.pgm").shape == (64, 64)
        assert len((proj / f"{sid}.z").read_bytes()) == 8 * 4


def test_project_rerun_identical(pipeline, tmp_path):
    assert main(["project", "--manifest", str(pipeline / "data/manifest.csv"),
                 "--gen-params", str(pipeline / "gen.tgen"), "--steps", "10",
                 "--out", str(tmp_path)]) == 0
    for f in (pipeline / "proj").iterdir():
        assert f.read_bytes() == (tmp_path / f.name).read_bytes()


def test_project_rejects_zero_steps(pipeline, tmp_path):
    assert main(["project", "--manifest", str(pipeline / "data/manifest.csv"),
                 "--gen-params", str(pipeline / "gen.tgen"), "--steps", "0",
                 "--out", str(tmp_path)]) == 2


def test_project_missing_inputs(pipeline, tmp_path):
    assert main(["project", "--manifest", str(tmp_path / "nope.csv"),
                 "--gen-params", str(pipeline / "gen.tgen"), "--out", str(tmp_path)]) == 3
    assert main(["project", "--manifest", str(pipeline / "data/manifest.csv"),
                 "--gen-params", str(tmp_path / "nope.tgen"), "--out", str(tmp_path)]) == 3


def test_score_schema(pipeline):
    rows = read_rows(pipeline / "scores/scores.csv")
    assert rows[0] == SCORE_COLUMNS
    assert all(len(r) == 12 for r in rows)
    for r in rows[1:]:
        assert all(cell != "" for cell in r)


def test_score_identity_row(tmp_path):
    img = np.full((64, 64), 200, np.uint8)
    img[20:40, 20:40] = 40
    save_pgm(img, tmp_path / "x.pgm")
    save_pgm(img, tmp_path / "x_recon.pgm")
    (tmp_path / "manifest.csv").write_text("id,label,path\nx,normal,x.pgm\n")
    assert main(["score", "--manifest", str(tmp_path / "manifest.csv"),
                 "--recon-dir", str(tmp_path), "--out", str(tmp_path / "s")]) == 0
    header, row = read_rows(tmp_path / "s/scores.csv")
    rec = dict(zip(header, row))
    assert rec["a_canny"] == "0" and rec["a_mse"] == "0.0" and rec["psnr"] == "inf"
    assert rec["a_origin"] == "" and rec["a_pg_anogan"] == ""  # no latent file
    assert int(rec["baseline_edges"]) > 0


def test_score_baseline_only(pipeline, tmp_path):
    assert main(["score", "--manifest", str(pipeline / "data/manifest.csv"),
                 "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "scores.csv")
    for r in rows[1:]:
        rec = dict(zip(rows[0], r))
        assert rec["baseline_edges"] != ""
        assert all(rec[c] == "" for c in SCORE_COLUMNS if c not in ("id", "label", "baseline_edges"))


def test_score_kappa_alpha_flags(pipeline, tmp_path):
    assert main(["score", "--manifest", str(pipeline / "data/manifest.csv"),
                 "--recon-dir", str(pipeline / "proj"), "--kappa", "0", "--alpha", "1",
                 "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "scores.csv")
    for r in rows[1:]:
        rec = dict(zip(rows[0], r))
        assert float(rec["a_f_anogan"]) == float(rec["a_mse"])
        assert float(rec["a_pg_anogan"]) == float(rec["a_res"])


def test_score_default_weights(pipeline):
    rows = read_rows(pipeline / "scores/scores.csv")
    for r in rows[1:]:
        rec = {k: float(v) for k, v in zip(rows[0][2:], r[2:])}
        assert rec["a_f_anogan"] == pytest.approx(rec["a_mse"] + 1.0 * rec["a_d"], rel=1e-12)
        assert rec["a_pg_anogan"] == pytest.approx(0.05 * rec["a_res"] + 0.95 * rec["a_origin"], rel=1e-12)


def test_score_shape_mismatch(tmp_path):
    save_pgm(np.zeros((64, 64), np.uint8), tmp_path / "x.pgm")
    save_pgm(np.zeros((32, 32), np.uint8), tmp_path / "x_recon.pgm")
    (tmp_path / "manifest.csv").write_text("id,label,path\nx,normal,x.pgm\n")
    assert main(["score", "--manifest", str(tmp_path / "manifest.csv"),
                 "--recon-dir", str(tmp_path), "--out", str(tmp_path)]) == 5


def test_score_missing_reconstruction(pipeline, tmp_path):
    recon = tmp_path / "recon"
    shutil.copytree(pipeline / "proj", recon)
    (recon / "normal_0_recon.pgm").unlink()
    assert main(["score", "--manifest", str(pipeline / "data/manifest.csv"),
                 "--recon-dir", str(recon), "--out", str(tmp_path)]) == 3


def write_scores(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_COLUMNS)
        for sid, label, value in rows:
            cells = [sid, label] + [""] * 10
            cells[SCORE_COLUMNS.index("a_mse")] = value
            w.writerow(cells)


def test_eval_perfect_and_ties(tmp_path, capsys):
    write_scores(tmp_path / "s.csv", [("a", "anomaly", "0.9"), ("b", "anomaly", "0.8"),
                                      ("c", "normal", "0.2"), ("d", "normal", "0.1")])
    assert main(["eval", "--scores", str(tmp_path / "s.csv"), "--out", str(tmp_path)]) == 0
    assert "a_mse: auc=1.0000" in capsys.readouterr().out
    write_scores(tmp_path / "t.csv", [("a", "anomaly", "3"), ("c", "normal", "3")])
    assert main(["eval", "--scores", str(tmp_path / "t.csv"), "--out", str(tmp_path)]) == 0
    assert "auc=0.5000" in capsys.readouterr().out


def test_eval_outputs_and_oracle(pipeline, tmp_path, capsys):
    assert main(["eval", "--scores", str(pipeline / "scores/scores.csv"),
                 "--score-col", "a_canny", "--bins", "4", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    rows = read_rows(pipeline / "scores/scores.csv")
    records = [ScoreRecord(r[0], r[1], float(r[2])) for r in rows[1:]]
    assert f"a_canny: auc={auc_pairwise(records):.4f}" in out
    assert "psnr (normal):" in out and "standard deviation" in out
    roc = read_rows(tmp_path / "roc_a_canny.csv")
    assert roc[0] == ["fpr", "tpr", "threshold"] and roc[1] == ["0.0", "0.0", "inf"]
    hist = read_rows(tmp_path / "hist_a_canny.csv")
    assert hist[0] == ["bin_lo", "bin_hi", "count_normal", "count_anomaly"] and len(hist) == 5
    assert sum(int(r[2]) for r in hist[1:]) == 3 and sum(int(r[3]) for r in hist[1:]) == 3


def test_eval_single_class(tmp_path):
    write_scores(tmp_path / "s.csv", [("a", "normal", "1"), ("b", "normal", "2")])
    assert main(["eval", "--scores", str(tmp_path / "s.csv"), "--score-col", "a_mse",
                 "--out", str(tmp_path)]) == 6


def test_eval_warns_below_half(tmp_path, capsys):
    write_scores(tmp_path / "s.csv", [("a", "anomaly", "0.1"), ("b", "normal", "0.9")])
    assert main(["eval", "--scores", str(tmp_path / "s.csv"), "--out", str(tmp_path)]) == 0
    captured = capsys.readouterr()
    assert "auc=0.0000" in captured.out
    assert "warning" in captured.err


def test_eval_unknown_column(pipeline, tmp_path):
    assert main(["eval", "--scores", str(pipeline / "scores/scores.csv"),
                 "--score-col", "nope", "--out", str(tmp_path)]) == 2


def test_bad_thread_env(pipeline, tmp_path, monkeypatch):
    monkeypatch.setenv("ANOSCORE_THREADS", "zero")
    assert main(["synth", "--normal", "1", "--anomaly", "1", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "anoscore", "synth"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
