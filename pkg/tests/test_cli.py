import csv
import json

import numpy as np
import pytest

from mps.cli import main
from mps.datasets import load_csv
from mps.learners import ModelClass, forward_select
from mps.viz import forest_from_json

from conftest import random_regression, write_csv


@pytest.fixture
def tiny_csv(tmp_path):
    dm = random_regression(1, 40, 3)
    rows = [list(r) + [y] for r, y in zip(dm.x, dm.y)]
    return write_csv(tmp_path / "tiny.csv", dm.names + ["y"], rows)


class TestRun:
    def test_tiny_run_writes_all_artifacts(self, tiny_csv, tmp_path):
        out = tmp_path / "out"
        rc = main(["run", "--data", str(tiny_csv), "--response", "y",
                   "--model", "ols", "--depth", "2", "--r", "8",
                   "--p-star", "0.9", "--gamma", "0.5", "--seed", "3",
                   "--out", str(out)])
        assert rc == 0
        for name in ("forest.json", "forest.dot", "forest.svg", "models.csv",
                     "manifest.json"):
            assert (out / name).exists()
        forest = forest_from_json((out / "forest.json").read_text())
        assert all(len(p) == 2 for p in forest.paths())
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "run"
        assert manifest["config"]["r"] == 8
        assert list(manifest["inputs"])[0].endswith("tiny.csv")

    def test_test_split_records_losses(self, tiny_csv, tmp_path):
        out = tmp_path / "out"
        rc = main(["run", "--data", str(tiny_csv), "--response", "y",
                   "--depth", "2", "--r", "6", "--seed", "3",
                   "--test-split", "0.25", "--out", str(out)])
        assert rc == 0
        with open(out / "models.csv", newline="") as fh:
            records = list(csv.DictReader(fh))
        assert records and all(float(r["test_loss"]) > 0 for r in records)

    def test_missing_file_exits_one(self, tmp_path, capsys):
        rc = main(["run", "--data", "/no/such.csv", "--response", "y",
                   "--depth", "1", "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_bad_flag_exits_two(self, tiny_csv, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--data", str(tiny_csv), "--response", "y",
                  "--depth", "1", "--out", str(tmp_path), "--bogus"])
        assert exc.value.code == 2

    def test_bad_model_choice_exits_two(self, tiny_csv, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--data", str(tiny_csv), "--response", "y",
                  "--model", "forest", "--depth", "1", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestSimulate:
    def test_single_oracle_rep(self, tmp_path, capsys):
        out = tmp_path / "sim"
        rc = main(["simulate", "--setup", "1", "--snr", "4", "--reps", "1",
                   "--methods", "oracle", "--seed", "1", "--n-test", "1000",
                   "--out", str(out)])
        assert rc == 0
        with open(out / "results.csv", newline="") as fh:
            records = list(csv.DictReader(fh))
        assert len(records) == 1 and records[0]["method"] == "oracle"
        assert "oracle" in capsys.readouterr().out

    def test_setup_defaults_materialized(self, tmp_path):
        out = tmp_path / "sim3"
        main(["simulate", "--setup", "3", "--reps", "1", "--methods", "oracle",
              "--n-test", "500", "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["n"] == 500
        assert manifest["config"]["p"] == 100
        assert manifest["config"]["r"] == 50
        assert manifest["config"]["p_star"] == 0.50
        out1 = tmp_path / "sim1"
        main(["simulate", "--setup", "1", "--reps", "1", "--methods", "oracle",
              "--n-test", "500", "--out", str(out1)])
        cfg = json.loads((out1 / "manifest.json").read_text())["config"]
        assert (cfg["n"], cfg["p"], cfg["s"], cfg["r"], cfg["p_star"]) == \
            (100, 10, 5, 200, 0.95)

    def test_custom_setup_requires_dimensions(self, tmp_path):
        rc = main(["simulate", "--setup", "custom", "--reps", "1",
                   "--methods", "oracle", "--out", str(tmp_path / "x")])
        assert rc == 1


class TestRenderAndFss:
    def test_render_is_byte_stable(self, tiny_csv, tmp_path):
        out = tmp_path / "out"
        main(["run", "--data", str(tiny_csv), "--response", "y", "--depth", "2",
              "--r", "6", "--seed", "3", "--out", str(out)])
        r1 = tmp_path / "r1"
        r2 = tmp_path / "r2"
        for r in (r1, r2):
            rc = main(["render", "--in", str(out / "forest.json"),
                       "--layout", "radial", "--out", str(r)])
            assert rc == 0
        assert (r1 / "forest.svg").read_bytes() == (r2 / "forest.svg").read_bytes()

    def test_render_linear_layout_writes_dot(self, tiny_csv, tmp_path):
        out = tmp_path / "out"
        main(["run", "--data", str(tiny_csv), "--response", "y", "--depth", "2",
              "--r", "6", "--seed", "3", "--out", str(out)])
        rd = tmp_path / "rd"
        main(["render", "--in", str(out / "forest.json"),
              "--layout", "linear_tree", "--out", str(rd)])
        assert (rd / "forest.dot").read_text().startswith("digraph")

    def test_fss_gamma_one_prints_forward_path(self, tiny_csv, tmp_path, capsys):
        out = tmp_path / "fss"
        rc = main(["fss", "--data", str(tiny_csv), "--response", "y",
                   "--depth", "2", "--r", "4", "--gamma", "1.0", "--B", "3",
                   "--seed", "0", "--out", str(out)])
        assert rc == 0
        doc = json.loads((out / "fss_path.json").read_text())
        data = load_csv(tiny_csv, "y")
        expected = forward_select(ModelClass("ols"), data, 2)
        assert doc["indices"] == expected
        assert " -> ".join(doc["path"]) in capsys.readouterr().out


class TestDiagnose:
    def test_output_schema(self, tmp_path, capsys):
        out = tmp_path / "diag"
        rc = main(["diagnose-resampling", "--n-list", "60,120", "--B", "20",
                   "--reps", "5", "--scheme", "both", "--out", str(out)])
        assert rc == 0
        with open(out / "diagnostic.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        assert header == ["scheme", "n", "rep", "proportion"]
        assert len(rows) == 2 * 2 * 5
        schemes = {r[0] for r in rows}
        assert schemes == {"subsample", "bootstrap"}
        assert all(0.0 <= float(r[3]) <= 1.0 for r in rows)


class TestVersionFlag:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "mps" in capsys.readouterr().out


class TestThreadsEnvFallback:
    def test_mps_threads_env_sets_default(self, monkeypatch, tiny_csv, tmp_path):
        monkeypatch.setenv("MPS_THREADS", "3")
        out = tmp_path / "env"
        rc = main(["run", "--data", str(tiny_csv), "--response", "y",
                   "--depth", "2", "--r", "6", "--seed", "3",
                   "--out", str(out)])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["threads"] == 3
