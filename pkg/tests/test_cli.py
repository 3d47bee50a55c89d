"""Command-line entry point tests, run in-process through main(argv)."""

import json

import pytest

from pumpwatch.cli import main
from pumpwatch.dataset import load_dataset


@pytest.fixture(scope="module")
def dataset_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "pumps.jsonl"
    rc = main(["generate", "--out", str(path),
               "--n-samples-per-condition", "8", "--seed", "7"])
    assert rc == 0
    return path


def _run_args(dataset_file, outdir, command="run"):
    return [command,
            "--dataset", str(dataset_file),
            "--output-dir", str(outdir),
            "--feature-sets", "vib1d",
            "--detectors", "bm_iqr,bm_pca",
            "--max-epochs", "2"]


def test_generate_writes_loadable_dataset(dataset_file):
    ds = load_dataset(dataset_file)
    assert len(ds) == 40
    assert sum(s.is_anomaly for s in ds) == 20


def test_generate_flag_overrides_config_file(tmp_path, capsys):
    gen_cfg = tmp_path / "gen.json"
    gen_cfg.write_text(json.dumps({"n_samples_per_condition": 2, "seed": 1}))
    out = tmp_path / "d.jsonl"
    rc = main(["generate", "--out", str(out), "--gen-config", str(gen_cfg),
               "--n-samples-per-condition", "3"])
    assert rc == 0
    assert "wrote 15 samples" in capsys.readouterr().out
    assert len(load_dataset(out)) == 15


def test_run_prints_tables_and_writes_report(dataset_file, tmp_path, capsys):
    rc = main(_run_args(dataset_file, tmp_path / "out"))
    assert rc == 0
    out = capsys.readouterr().out
    assert "== BM IQR ==" in out and "== BM PCA ==" in out
    assert (tmp_path / "out" / "report.json").is_file()


def test_train_then_evaluate_then_report(dataset_file, tmp_path, capsys):
    outdir = tmp_path / "out"
    assert main(_run_args(dataset_file, outdir, command="train")) == 0
    assert "artifacts" in capsys.readouterr().out
    assert not (outdir / "report.json").exists()

    assert main(_run_args(dataset_file, outdir, command="evaluate")) == 0
    eval_out = capsys.readouterr().out
    assert "== BM IQR ==" in eval_out

    assert main(["report", "--output-dir", str(outdir)]) == 0
    assert capsys.readouterr().out == eval_out


def test_report_via_explicit_path(dataset_file, tmp_path, capsys):
    outdir = tmp_path / "out"
    assert main(_run_args(dataset_file, outdir)) == 0
    run_out = capsys.readouterr().out
    assert main(["report", "--report", str(outdir / "report.json")]) == 0
    assert capsys.readouterr().out == run_out


def test_config_file_drives_run(dataset_file, tmp_path, capsys):
    cfg = {"dataset": {"load": str(dataset_file)},
           "feature_sets": ["vib1d"],
           "detectors": ["bm_iqr"],
           "output_dir": str(tmp_path / "out")}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(cfg_path)]) == 0
    assert "== BM IQR ==" in capsys.readouterr().out
    resolved = json.loads((tmp_path / "out" / "config_resolved.json").read_text())
    assert resolved["detectors"][0]["kind"] == "BM_IQR"


def test_unknown_detector_exits_2(dataset_file, tmp_path, capsys):
    args = _run_args(dataset_file, tmp_path / "out")
    args[args.index("bm_iqr,bm_pca")] = "svm"
    assert main(args) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_dataset_file_exits_2(tmp_path, capsys):
    rc = main(["run", "--dataset", str(tmp_path / "nope.jsonl"),
               "--output-dir", str(tmp_path / "out"),
               "--feature-sets", "vib1d", "--detectors", "bm_iqr"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_invalid_split_exits_2(dataset_file, tmp_path, capsys):
    args = _run_args(dataset_file, tmp_path / "out") + ["--train-frac", "0.9"]
    assert main(args) == 2
    assert "sum to 1" in capsys.readouterr().err


def test_evaluate_before_train_exits_2(dataset_file, tmp_path, capsys):
    rc = main(_run_args(dataset_file, tmp_path / "fresh", command="evaluate"))
    assert rc == 2
    assert "normalizer" in capsys.readouterr().err


def test_report_without_source_exits_2(capsys):
    assert main(["report"]) == 2
    assert "error:" in capsys.readouterr().err
