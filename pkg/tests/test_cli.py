import json

import numpy as np
import pytest

from iwnet.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main


def _csvs(tmp_path, nan=False):
    rng = np.random.default_rng(0)
    xs, xt = rng.normal(0, 1, (60, 2)), rng.normal(1, 1, (50, 2))
    src = tmp_path / "src.csv"
    tgt = tmp_path / "tgt.csv"
    with open(src, "w") as f:
        f.write("a,b,y\n")
        for i, (a, b) in enumerate(xs):
            f.write(f"{'nan' if nan and i == 0 else a},{b},{a + b}\n")
    with open(tgt, "w") as f:
        f.write("a,b\n")
        for a, b in xt:
            f.write(f"{a},{b}\n")
    return src, tgt


@pytest.mark.parametrize("method,params", [
    ("nnw", []), ("kmm", ["--param", "sigma_grid=[1.0]"]),
    ("iwn", ["--param", "max_iters=20", "--param", "patience=20"]),
])
def test_weigh_writes_weights(tmp_path, capsys, method, params):
    src, tgt = _csvs(tmp_path)
    out = tmp_path / "w.csv"
    code = main(["weigh", "--source", str(src), "--target", str(tgt),
                 "--target-columns", "y", "--method", method,
                 "--out", str(out), *params])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "weight" and len(lines) == 61
    w = np.array([float(v) for v in lines[1:]])
    slack = np.sqrt(59 / 60) if method == "kmm" else 1e-6
    assert np.all(w >= 0) and abs(w.mean() - 1) <= slack
    assert "wrote 60 weights" in capsys.readouterr().out


def test_weigh_config_errors(tmp_path):
    src, tgt = _csvs(tmp_path)
    base = ["weigh", "--source", str(src), "--target", str(tgt),
            "--out", str(tmp_path / "w.csv")]
    # y left among the inputs: schemas differ
    assert main(base) == EXIT_CONFIG
    assert main(base + ["--target-columns", "zzz"]) == EXIT_CONFIG
    assert main(base + ["--target-columns", "y", "--param", "oops"]) \
        == EXIT_CONFIG
    assert main(base + ["--target-columns", "y", "--param", "bogus=1"]) \
        == EXIT_CONFIG


def test_weigh_runtime_failure(tmp_path):
    src, tgt = _csvs(tmp_path, nan=True)
    code = main(["weigh", "--source", str(src), "--target", str(tgt),
                 "--target-columns", "y", "--method", "nnw",
                 "--out", str(tmp_path / "w.csv")])
    assert code == EXIT_RUNTIME


def test_bench_exit_codes(tmp_path, capsys):
    assert main(["bench", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    cfg = {"dataset": {"dim": 2, "pool_size": 100}, "n": 50, "repetitions": 1,
           "methods": ["nnw"]}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["bench", str(tmp_path / "c.json"),
                 "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "Avg Score Ratio" in capsys.readouterr().out
    assert (tmp_path / "o" / "runs.csv").exists()
    # a csv dataset whose file does not exist fails at run time
    cfg = {"dataset": {"kind": "csv", "path": "nope.csv",
                       "target_columns": ["y"]}, "bias": "input",
           "methods": ["nnw"]}
    (tmp_path / "d.json").write_text(json.dumps(cfg))
    assert main(["bench", str(tmp_path / "d.json")]) == EXIT_RUNTIME


def test_scaling_and_synthetic_commands(tmp_path, capsys):
    assert main(["scaling", "--sizes", "40", "--dims", "2", "--methods",
                 "nnw", "--out", str(tmp_path)]) == EXIT_OK
    assert "nnw" in capsys.readouterr().out
    assert main(["synthetic", "--dim", "2", "--n", "100", "--iterations",
                 "20", "--eval-every", "10", "--components", "3", "--no-kmm",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "synthetic_trace.csv").exists()


def test_ablation_command(capsys):
    assert main(["ablation", "--layers", "0", "--units", "4",
                 "--batch-sizes", "8", "--reps", "1", "--iterations", "5",
                 "--dim", "2", "--n", "50", "--pool-size", "60"]) == EXIT_OK
    assert "size" in capsys.readouterr().out


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2
