import subprocess
import sys

import pytest

from lser.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, main

SMALL = ["--episodes", "6", "--hidden", "16", "--batch-size", "8", "--buffer-capacity", "200", "--n-h", "4"]


def run_twice(tmp_path, argv):
    outs = []
    for i in range(2):
        path = tmp_path / f"out{i}.csv"
        assert main(argv + ["--out", str(path)]) == EXIT_OK
        outs.append(path.read_bytes())
    return outs


@pytest.mark.parametrize(
    "argv",
    [
        ["train", *SMALL, "--seed", "3"],
        ["train", *SMALL, "--variant", "per"],
        ["compare", *SMALL, "--variants", "lser,uniform,lser_s", "--seeds", "0,1"],
        ["sweep-hash", *SMALL, "--values", "2,4"],
        ["sweep-eps", *SMALL],
        ["validate-lsh", "--trials", "2000"],
    ],
)
def test_byte_identical(tmp_path, argv):
    a, b = run_twice(tmp_path, argv)
    assert a == b and a


def test_train_csv_schema(tmp_path):
    path = tmp_path / "m.csv"
    assert main(["train", *SMALL, "--out", str(path)]) == EXIT_OK
    lines = path.read_text().splitlines()
    assert lines[0] == "variant,seed,episode,ctr,cum_reward,buffer_size,wallclock_ms"
    assert len(lines) == 7


def test_compare_rows_and_summary(tmp_path):
    out, summary = tmp_path / "m.csv", tmp_path / "s.csv"
    argv = ["compare", *SMALL, "--variants", "lser,uniform", "--seeds", "0,1,2", "--out", str(out), "--summary-out", str(summary)]
    assert main(argv) == EXIT_OK
    assert len(out.read_text().splitlines()) == 1 + 2 * 3 * 6
    assert len(summary.read_text().splitlines()) == 3


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("variant=uniform\nepisodes=4\nhidden=16\nbatch_size=8\n")
    out = tmp_path / "m.csv"
    assert main(["train", "--config", str(cfg), "--episodes", "2", "--out", str(out)]) == EXIT_OK
    rows = out.read_text().splitlines()[1:]
    assert len(rows) == 2 and all(r.startswith("uniform,") for r in rows)


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--variant", "nope"],
        ["train", "--eps-max", "3"],
        ["train", "--episodes", "x"],
        ["validate-lsh", "--trials", "10"],
        ["bench", "--sizes", "10,5"],
    ],
)
def test_invalid_config_exit(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_validate_lsh_failure_exit(tmp_path):
    assert main(["validate-lsh", "--trials", "1000", "--angles", "60", "--tolerance", "1e-9", "--out", str(tmp_path / "v.csv")]) == EXIT_CHECK


def test_checkpoint_written(tmp_path):
    ck = tmp_path / "a.ckpt"
    assert main(["train", *SMALL, "--checkpoint", str(ck), "--out", str(tmp_path / "m.csv")]) == EXIT_OK
    assert ck.read_text().startswith("lser-checkpoint 1")


def test_bench_schema(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--sizes", "128,256", "--bucket-size", "16", "--ops", "100", "--batch", "4", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "buffer,size,op,median_ns,ops,bucket_count"
    assert len(lines) == 1 + 12


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lser", "validate-lsh", "--trials", "1000"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("theta,trials,empirical")
