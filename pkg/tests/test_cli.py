import io

import numpy as np
import pytest

from scaledvr.cli import main
from scaledvr.dataset import load_libsvm, parse_libsvm
from scaledvr.harness import load_records


def test_run_writes_csv(tiny_svm_path, tmp_path, capsys):
    out = tmp_path / "records.csv"
    rc = main([
        "run", "--dataset", tiny_svm_path, "--loss", "logistic",
        "--method", "sarah", "--eta", "0.5", "--batch", "4",
        "--passes", "3", "--seeds", "0,1", "--out", str(out),
    ])
    assert rc == 0
    records = load_records(out)
    assert {r.seed for r in records} == {0, 1}
    assert all(r.echo.method == "sarah" for r in records)
    assert "wrote" in capsys.readouterr().out


def test_run_stdout_and_determinism(tiny_svm_path, capsys):
    args = [
        "run", "--dataset", tiny_svm_path, "--loss", "logistic",
        "--method", "lsvrg", "--eta", "0.25", "--batch", "3",
        "--passes", "2", "--seeds", "0",
    ]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    second = capsys.readouterr().out
    assert first == second
    assert first.splitlines()[0].startswith("method,scaled,dataset")


def test_run_jsonl_format(tiny_svm_path, tmp_path):
    out = tmp_path / "records.jsonl"
    rc = main([
        "run", "--dataset", tiny_svm_path, "--loss", "nllsq",
        "--method", "sgd", "--eta", "0.1", "--batch", "4",
        "--passes", "2", "--seeds", "0", "--format", "jsonl",
        "--out", str(out),
    ])
    assert rc == 0
    records = load_records(out, fmt="jsonl")
    assert records[0].echo.loss_kind == "nllsq"


def test_config_file_and_flag_override(tiny_svm_path, tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(
        "\n".join([
            "# defaults for the tiny experiment",
            f"dataset = {tiny_svm_path}",
            "loss = logistic",
            "method = sarah",
            "eta = 0.5",
            "batch = 4",
            "passes = 2",
            "seeds = 0",
            "scaled = true",
            "alpha = 1e-2",
            "beta = avg",
        ])
    )
    out1 = tmp_path / "a.csv"
    assert main(["run", "--config", str(cfgfile), "--out", str(out1)]) == 0
    recs = load_records(out1)
    assert recs[0].echo.eta == 0.5
    assert recs[0].echo.scaled is True
    assert recs[0].echo.beta == "avg"

    out2 = tmp_path / "b.csv"
    assert main(["run", "--config", str(cfgfile), "--eta", "0.125",
                 "--out", str(out2)]) == 0
    recs2 = load_records(out2)
    assert recs2[0].echo.eta == 0.125  # flag wins over file


def test_grid_prints_cells_and_best(tiny_svm_path, capsys):
    rc = main([
        "grid", "--dataset", tiny_svm_path, "--loss", "logistic",
        "--method", "sarah", "--eta", "0.5,0.25", "--batch", "4",
        "--passes", "2", "--seeds", "0", "--objective", "loss",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("cell ") == 2
    assert "best " in out


def test_corrupt_round_trip(tiny_svm_path, tmp_path):
    out = tmp_path / "corrupted.svm"
    rc = main(["corrupt", "--dataset", tiny_svm_path, "--kmin", "0",
               "--kmax", "0", "--out", str(out)])
    assert rc == 0
    orig = load_libsvm(tiny_svm_path)
    back = load_libsvm(str(out))
    assert np.array_equal(back.values, orig.values)
    assert np.array_equal(back.indices, orig.indices)


def test_corrupt_rescales(tiny_svm_path, tmp_path):
    out = tmp_path / "corrupted.svm"
    assert main(["corrupt", "--dataset", tiny_svm_path, "--kmin", "-1",
                 "--kmax", "1", "--out", str(out)]) == 0
    orig = load_libsvm(tiny_svm_path)
    back = load_libsvm(str(out), d=orig.d)
    ratios = back.values / orig.values
    assert ratios.min() < 1.0 < ratios.max()


def test_diag_d0_reports_per_seed(tiny_svm_path, capsys):
    rc = main(["diag-d0", "--dataset", tiny_svm_path, "--loss", "logistic",
               "--warmup", "10", "--batch", "8", "--seeds", "0,1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("relative error") == 2
    assert "seeds below 0.1" in out


def test_check_grad_ok(tiny_svm_path, capsys):
    rc = main(["check-grad", "--dataset", tiny_svm_path, "--loss", "logistic"])
    assert rc == 0
    assert "ok" in capsys.readouterr().out


def test_audit_clean(tiny_svm_path, capsys):
    rc = main([
        "audit", "--dataset", tiny_svm_path, "--loss", "logistic",
        "--method", "sarah", "--scaled", "--eta", "0.25", "--batch", "4",
        "--warmup", "2", "--passes", "3", "--seeds", "0,1",
    ])
    assert rc == 0
    assert "no bound violations" in capsys.readouterr().out


def test_missing_dataset_is_reported(tmp_path, capsys):
    rc = main(["run", "--dataset", str(tmp_path / "nope.svm"), "--loss", "logistic",
               "--method", "sgd", "--eta", "0.1", "--passes", "1", "--batch", "1",
               "--seeds", "0"])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_malformed_dataset_is_reported(tmp_path, capsys):
    bad = tmp_path / "bad.svm"
    bad.write_text("+1 3:1 2:1\n")
    rc = main(["run", "--dataset", str(bad), "--loss", "logistic",
               "--method", "sgd", "--eta", "0.1", "--passes", "1", "--batch", "1",
               "--seeds", "0"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "line 1" in err


def test_missing_required_flag(tiny_svm_path, capsys):
    with pytest.raises(SystemExit):
        main(["run", "--dataset", tiny_svm_path, "--loss", "logistic",
              "--method", "sarah"])  # no eta anywhere
