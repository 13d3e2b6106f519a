"""Command-line behavior: exit codes, output, and byte-level determinism."""

import json
import os

import pytest

from tempkd.cli import main


@pytest.fixture
def config_path(tmp_path, tiny_config_dict):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config_dict))
    return str(path)


def _out(tmp_path, name="out"):
    return str(tmp_path / name)


# --- usage errors exit 1 ---------------------------------------------------

@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["compare", "--no-such-flag"],
    ["compare", "--seeds"],
    ["grad-check", "--seed", "NaN-ish"],
])
def test_usage_errors_exit_one(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1
    assert "error" in capsys.readouterr().err


# --- config errors exit 1 ----------------------------------------------------

def test_missing_config_file_exits_one(tmp_path, capsys):
    code = main(["generate-data", "--config", str(tmp_path / "nope.json")])
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_invalid_json_exits_one(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{oops")
    assert main(["generate-data", "--config", str(path)]) == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_unknown_config_key_exits_one(tmp_path, capsys):
    path = tmp_path / "typo.json"
    path.write_text(json.dumps({"scheduler": {"t_mim": 4.0}}))
    assert main(["generate-data", "--config", str(path)]) == 1
    assert "unknown key" in capsys.readouterr().err


def test_duplicate_seed_override_exits_one(config_path, tmp_path, capsys):
    code = main(["generate-data", "--config", config_path,
                 "--output-dir", _out(tmp_path), "--seeds", "7", "7"])
    assert code == 1
    assert "duplicates" in capsys.readouterr().err


# --- generate-data -----------------------------------------------------------

def test_generate_data_writes_csvs(config_path, tmp_path, capsys):
    out = _out(tmp_path)
    assert main(["generate-data", "--config", config_path,
                 "--output-dir", out]) == 0
    stdout = capsys.readouterr().out
    assert "24 rows" in stdout and "6 rows" in stdout
    assert os.path.exists(os.path.join(out, "data", "train.csv"))
    assert os.path.exists(os.path.join(out, "data", "test.csv"))
    assert os.path.exists(os.path.join(out, "manifest.txt"))


# --- train-teacher / distill ----------------------------------------------

def test_train_then_distill(config_path, tmp_path, capsys):
    out = _out(tmp_path)
    assert main(["train-teacher", "--config", config_path,
                 "--output-dir", out]) == 0
    stdout = capsys.readouterr().out
    assert "teacher: train accuracy" in stdout
    assert os.path.exists(os.path.join(out, "runs", "teacher", "model.bin"))

    assert main(["distill", "--config", config_path,
                 "--output-dir", out]) == 0
    stdout = capsys.readouterr().out
    assert "dts-8-4-s11: test accuracy" in stdout
    assert "dts-8-4-s12: test accuracy" in stdout
    for seed in (11, 12):
        run_dir = os.path.join(out, "runs", f"dts-8-4-s{seed}")
        assert os.path.exists(os.path.join(run_dir, "metrics.csv"))


def test_distill_without_teacher_exits_two(config_path, tmp_path, capsys):
    code = main(["distill", "--config", config_path,
                 "--output-dir", _out(tmp_path)])
    assert code == 2
    assert "train-teacher" in capsys.readouterr().err


def test_seed_override_changes_run_names(config_path, tmp_path, capsys):
    out = _out(tmp_path)
    assert main(["train-teacher", "--config", config_path,
                 "--output-dir", out]) == 0
    assert main(["distill", "--config", config_path, "--output-dir", out,
                 "--seeds", "42"]) == 0
    assert "dts-8-4-s42" in capsys.readouterr().out


# --- compare / sweep -------------------------------------------------------

def test_compare_prints_ranked_table(config_path, tmp_path, capsys):
    out = _out(tmp_path)
    assert main(["compare", "--config", config_path,
                 "--output-dir", out]) == 0
    stdout = capsys.readouterr().out
    header = stdout.splitlines()[0].split()
    assert header == ["rank", "scheduler", "kind", "mean_acc", "stddev",
                      "seeds"]
    for name in ("dts-8-4", "static-4", "cosine-8-4", "linear-8-4", "none"):
        assert name in stdout
    assert f"summary: {os.path.join(out, 'summary.csv')}" in stdout
    assert os.path.exists(os.path.join(out, "summary.csv"))


def test_sweep_prints_plot_rows(config_path, tmp_path, capsys):
    out = _out(tmp_path)
    assert main(["sweep", "--config", config_path,
                 "--output-dir", out]) == 0
    stdout = capsys.readouterr().out
    for label in ("3->1", "4->2", "6->4", "8->4", "11->9"):
        assert f"{label}: mean test accuracy" in stdout
    assert f"plot data: {os.path.join(out, 'sweep.csv')}" in stdout


# --- grad-check ------------------------------------------------------------

def test_grad_check_passes(capsys):
    assert main(["grad-check"]) == 0
    stdout = capsys.readouterr().out
    lines = stdout.strip().splitlines()
    assert len(lines) == 4
    assert all("PASS" in line for line in lines[:3])
    assert lines[3] == "all gradient checks passed"


def test_grad_check_perturb_exits_three(capsys):
    assert main(["grad-check", "--perturb"]) == 3
    captured = capsys.readouterr()
    assert "FAIL" in captured.out
    assert "FAILED" in captured.err


# --- byte-level determinism ---------------------------------------------------

def _tree_bytes(root):
    """{relative path: content} for every file except the manifest (its
    created: line carries a wall-clock timestamp)."""
    out = {}
    for dirpath, _, filenames in os.walk(root):
        for filename in filenames:
            if filename == "manifest.txt":
                continue
            path = os.path.join(dirpath, filename)
            out[os.path.relpath(path, root)] = open(path, "rb").read()
    return out


def test_compare_rerun_is_byte_identical(config_path, tmp_path, monkeypatch):
    # identical configs (same relative output_dir) run from two directories
    trees = []
    for name in ("a", "b"):
        workdir = tmp_path / name
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        assert main(["compare", "--config", config_path,
                     "--output-dir", "out"]) == 0
        trees.append(str(workdir / "out"))
    a, b = _tree_bytes(trees[0]), _tree_bytes(trees[1])
    assert set(a) == set(b)
    assert all(a[k] == b[k] for k in a)
    # and the manifests differ only in their timestamp line
    strip = lambda p: [l for l in open(p).read().splitlines()
                       if not l.startswith("created:")]
    assert strip(os.path.join(trees[0], "manifest.txt")) == \
        strip(os.path.join(trees[1], "manifest.txt"))
