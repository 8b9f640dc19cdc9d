import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from dtclust.cli import main
from dtclust.ingest import read_tensor, write_tensor
from dtclust.simgen import gen_3d
from dtclust.tensor import DenseTensor


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    ds = gen_3d(50, 20, 0.8, seed=0)
    write_tensor(ds.stacked(), d / "sim.dtns")
    np.savetxt(d / "truth.csv", ds.truth_assignment, fmt="%d")
    return d


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_decompose_outputs(dataset, tmp_path):
    rc = main(["decompose", "--input", str(dataset / "sim.dtns"), "--rank", "2",
               "--sparsity", "10", "--lambda", "0.1", "--output-dir", str(tmp_path)])
    assert rc == 0
    w = np.loadtxt(tmp_path / "weights.csv", delimiter=",")
    assert w.shape == (2,)
    for j, d in enumerate((20, 20, 20, 50)):
        f = np.loadtxt(tmp_path / f"factor_mode{j}.csv", delimiter=",")
        assert f.shape == (d, 2)
        if j < 3:
            assert np.count_nonzero(f, axis=0).max() <= 10
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["iterations"]) == 2
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["sparsity_resolved"] == [10, 10, 10, None]
    assert cfg["fusion_resolved"] == [0.1, 0.1, 0.1, 0.0]


def test_cluster_with_truth(dataset, tmp_path, capsys):
    rc = main(["cluster", "--input", str(dataset / "sim.dtns"), "--k", "4", "--rank", "2",
               "--sparsity", "0.5", "--lambda", "0.1", "--truth", str(dataset / "truth.csv"),
               "--output-dir", str(tmp_path)])
    assert rc == 0
    assert "clustering_error=0.000" in capsys.readouterr().out
    assert float(_rows(tmp_path / "metrics.csv")[0]["clustering_error"]) == 0.0
    labels = np.loadtxt(tmp_path / "assignment.csv")
    assert labels.shape == (50,) and set(labels.tolist()) == {1, 2, 3, 4}
    assert np.loadtxt(tmp_path / "centers.csv", delimiter=",").shape == (4, 2)


def test_cluster_json_emit(dataset, tmp_path):
    rc = main(["cluster", "--input", str(dataset / "sim.dtns"), "--k", "4",
               "--sparsity", "0.5", "--emit", "json", "--output-dir", str(tmp_path)])
    assert rc == 0
    assert json.loads((tmp_path / "metrics.json").read_text())[0]["K"] == 4


def test_missing_input_is_config_error(tmp_path, capsys):
    missing = tmp_path / "nowhere.dtns"
    rc = main(["decompose", "--input", str(missing), "--output-dir", str(tmp_path)])
    assert rc == 2
    assert str(missing) in capsys.readouterr().err


def test_sparsity_exceeding_dim_rejected_before_work(dataset, tmp_path):
    out = tmp_path / "out"
    rc = main(["decompose", "--input", str(dataset / "sim.dtns"), "--sparsity", "21",
               "--output-dir", str(out)])
    assert rc == 2
    assert not out.exists()


@pytest.mark.parametrize("argv", [
    ["--sparsity", "1,2"],
    ["--lambda", "-1"],
    ["--tie-modes", "0,3"],
    ["--sparsity", "abc"],
])
def test_bad_constraints(dataset, tmp_path, argv):
    rc = main(["decompose", "--input", str(dataset / "sim.dtns"), "--output-dir", str(tmp_path)]
              + argv)
    assert rc == 2


def test_malformed_file_is_config_error(tmp_path):
    p = tmp_path / "bad.dtns"
    p.write_bytes(b"nope")
    assert main(["decompose", "--input", str(p), "--output-dir", str(tmp_path)]) == 2


def test_cluster_k_validation(dataset, tmp_path):
    base = ["cluster", "--input", str(dataset / "sim.dtns"), "--output-dir", str(tmp_path)]
    assert main(base + ["--k", "auto"]) == 2
    assert main(base + ["--k", "51"]) == 2
    assert main(base + ["--k", "0"]) == 2


def test_runtime_error_exit_code(tmp_path):
    p = tmp_path / "zero.dtns"
    write_tensor(DenseTensor.zeros((3, 3, 3)), p)
    assert main(["decompose", "--input", str(p), "--output-dir", str(tmp_path)]) == 1


def test_simulate_single_rep(tmp_path):
    rc = main(["simulate", "--design", "2d", "--n", "20", "--d", "10", "--mu", "1.5",
               "--reps", "1", "--sparsity", "0.5", "--lambda", "0", "--export-data",
               "--workers", "1", "--output-dir", str(tmp_path)])
    assert rc == 0
    reps = _rows(tmp_path / "replications.csv")
    assert len(reps) == 1 and float(reps[0]["seconds"]) > 0
    summary = _rows(tmp_path / "summary.csv")[0]
    assert math.isnan(float(summary["recovery_error_se"]))
    assert read_tensor(tmp_path / "data_rep0.dtns").dims == (10, 10, 20)


def test_simulate_json_two_reps(tmp_path):
    rc = main(["simulate", "--design", "2d", "--n", "20", "--d", "10", "--mu", "1.5",
               "--reps", "2", "--sparsity", "0.5", "--lambda", "0", "--workers", "1",
               "--emit", "json", "--output-dir", str(tmp_path)])
    assert rc == 0
    summary = json.loads((tmp_path / "summary.json").read_text())[0]
    assert summary["reps"] == 2 and summary["recovery_error_se"] >= 0


def test_simulate_bad_design(tmp_path):
    assert main(["simulate", "--design", "2d", "--d", "5", "--output-dir", str(tmp_path)]) == 2


def test_tune(dataset, tmp_path, capsys):
    rc = main(["tune", "--input", str(dataset / "sim.dtns"), "--sparsity", "0.5,1.0",
               "--lambda", "0,0.1", "--gap-b", "10", "--output-dir", str(tmp_path)])
    assert rc == 0
    assert len(_rows(tmp_path / "bic_grid.csv")) == 4
    assert len(_rows(tmp_path / "gap.csv")) == 8
    chosen = json.loads((tmp_path / "chosen.json").read_text())
    assert chosen["K"] == 4 and chosen["s"] == 0.5
    assert "K=4" in capsys.readouterr().out


def test_connect(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 60))
    x[1, 30:] = x[0, 30:] + 0.05 * rng.standard_normal(30)
    src = tmp_path / "ts.csv"
    np.savetxt(src, x, delimiter=",", header="a,b,c", comments="")
    rc = main(["connect", "--input", str(src), "--width", "10", "--step", "5", "--k", "2",
               "--rank", "1", "--lambda", "0.1", "--output-dir", str(tmp_path / "o")])
    assert rc == 0
    T = read_tensor(tmp_path / "o" / "corr.dtns")
    assert T.dims == (4, 4, 11)
    f0 = np.loadtxt(tmp_path / "o" / "factor_mode0.csv")
    f1 = np.loadtxt(tmp_path / "o" / "factor_mode1.csv")
    np.testing.assert_array_equal(f0, f1)
    assert len(np.loadtxt(tmp_path / "o" / "assignment.csv")) == 11


def test_connect_window_too_wide(tmp_path):
    src = tmp_path / "ts.csv"
    np.savetxt(src, np.ones((2, 5)), delimiter=",")
    assert main(["connect", "--input", str(src), "--width", "10",
                 "--output-dir", str(tmp_path)]) == 2


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "dtclust.cli", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0
    for sub in ("decompose", "cluster", "simulate", "tune", "connect"):
        assert sub in out.stdout
