import csv
import hashlib
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from forestbench.cli import (
    available_presets,
    build_parser,
    load_config,
    main,
    parse_config_text,
)

DATA_DIR = Path(__file__).parent / "data"


def run(args):
    return main(args)


class TestSimulate:
    def test_strobl_writes_200x5_csv(self, tmp_path):
        assert run(["simulate", "strobl", "--n", "200", "--seed", "7",
                    "--out", str(tmp_path)]) == 0
        with (tmp_path / "dataset.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["X1", "X2", "X3", "X4", "X5", "y"]
        assert len(rows) == 201
        meta = json.loads((tmp_path / "dataset.csv.meta.json").read_text())
        assert meta["task"] == "classification"
        assert meta["relevant_set"] == [1]

    def test_discrete_grid_benchmark_inputs(self, tmp_path):
        assert run(["simulate", "discrete-grid", "--n", "1000", "--p", "50",
                    "--seed", "3", "--out", str(tmp_path)]) == 0
        with (tmp_path / "dataset.csv").open() as fh:
            header = fh.readline().strip().split(",")
        assert len(header) == 51

    def test_unknown_generator_is_usage_error(self, tmp_path, capsys):
        assert run(["simulate", "nosuch", "--out", str(tmp_path)]) == 2


class TestTrain:
    def test_same_seed_gives_identical_forest_file(self, tmp_path):
        run(["simulate", "strobl", "--n", "60", "--seed", "5", "--out", str(tmp_path)])
        data = str(tmp_path / "dataset.csv")
        digests = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert run(["train", "--data", data, "--trees", "4", "--mtry", "2",
                        "--seed", "11", "--out", str(out)]) == 0
            digests.append(hashlib.sha256((out / "forest.json").read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_zero_trees_is_usage_error(self, tmp_path):
        assert run(["train", "--data", "x.csv", "--trees", "0",
                    "--out", str(tmp_path)]) == 2

    def test_missing_data_is_runtime_error(self, tmp_path, capsys):
        assert run(["train", "--data", str(tmp_path / "none.csv"),
                    "--out", str(tmp_path)]) == 1
        assert "error:" in capsys.readouterr().err


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    run(["simulate", "strobl", "--n", "80", "--seed", "5", "--out", str(root)])
    run(["train", "--data", str(root / "dataset.csv"), "--trees", "6", "--mtry", "2",
         "--min-leaf", "2", "--seed", "9", "--out", str(root)])
    return root


class TestImportance:
    def test_five_method_csv(self, trained, tmp_path):
        assert run(["importance", "--forest", str(trained / "forest.json"),
                    "--data", str(trained / "dataset.csv"),
                    "--methods", "mdi,mdi-oob,naive-oob,mda,split-count",
                    "--seed", "2", "--out", str(tmp_path)]) == 0
        with (tmp_path / "importance.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["feature", "mdi", "mdi-oob", "naive-oob", "mda", "split-count"]
        assert len(rows) == 6

    def test_covariance_inbag_column_equals_mdi(self, trained, tmp_path):
        run(["importance", "--forest", str(trained / "forest.json"),
             "--data", str(trained / "dataset.csv"),
             "--methods", "mdi,mdi-covariance-inbag", "--out", str(tmp_path)])
        with (tmp_path / "importance.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            a, b = float(row["mdi"]), float(row["mdi-covariance-inbag"])
            assert abs(a - b) <= 1e-10 * (1 + abs(a))

    def test_full_subsample_with_oob_method_fails_cleanly(self, tmp_path, capsys):
        run(["simulate", "strobl", "--n", "40", "--seed", "1", "--out", str(tmp_path)])
        run(["train", "--data", str(tmp_path / "dataset.csv"), "--trees", "3",
             "--sampling", "subsample:1.0", "--out", str(tmp_path)])
        code = run(["importance", "--forest", str(tmp_path / "forest.json"),
                    "--data", str(tmp_path / "dataset.csv"),
                    "--methods", "mdi-oob", "--out", str(tmp_path)])
        assert code == 1
        assert "out-of-bag" in capsys.readouterr().err

    def test_unknown_method_is_usage_error(self, trained, tmp_path):
        assert run(["importance", "--forest", str(trained / "forest.json"),
                    "--data", str(trained / "dataset.csv"),
                    "--methods", "shap", "--out", str(tmp_path)]) == 2


class TestSweep:
    def test_leaf_sweep_writes_table_and_figure(self, tmp_path):
        assert run(["sweep", "--axis", "min-leaf", "--grid", "1,40",
                    "--generator", "strobl", "--n", "80", "--trees", "10",
                    "--replicates", "2", "--method", "mdi", "--seed", "4",
                    "--out", str(tmp_path)]) == 0
        assert (tmp_path / "sweep.csv").exists()
        ET.parse(tmp_path / "sweep.svg")  # must be well-formed XML

    def test_depth_axis(self, tmp_path):
        assert run(["sweep", "--axis", "max-depth", "--grid", "1,3",
                    "--generator", "strobl", "--n", "60", "--trees", "5",
                    "--replicates", "2", "--seed", "4", "--out", str(tmp_path)]) == 0
        with (tmp_path / "sweep.csv").open() as fh:
            assert fh.readline().startswith("max_depth,")

    def test_inverse_leaf_probe_writes_fit(self, tmp_path):
        assert run(["sweep", "--axis", "inverse-leaf", "--grid", "5,10,20",
                    "--n", "200", "--p", "4", "--trees", "4", "--replicates", "2",
                    "--seed", "4", "--out", str(tmp_path)]) == 0
        fit = json.loads((tmp_path / "scaling_fit.json").read_text())
        assert set(fit) == {"slope", "intercept", "pearson_r"}

    def test_preset_config_resolves(self, tmp_path):
        # Override the preset's scale so the smoke run stays fast.
        assert run(["sweep", "--config", "leafsize_mdi_strobl", "--grid", "1,30",
                    "--n", "50", "--trees", "4", "--replicates", "2",
                    "--out", str(tmp_path)]) == 0

    def test_bad_grid_is_usage_error(self, tmp_path):
        assert run(["sweep", "--grid", "5,4", "--out", str(tmp_path)]) == 2


class TestBench:
    def test_smoke_mode_and_summary(self, tmp_path, capsys):
        assert run(["bench", "table1_sim_deep_cls", "--replicates", "2",
                    "--methods", "mdi,mdi-oob", "--workers", "2",
                    "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "mdi:" in out and "mdi-oob:" in out
        with (tmp_path / "report.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert sum(row["record"] == "summary" for row in rows) == 2

    def test_malformed_config_reports_line_number(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("generator = strobl\nthis line is broken\n")
        assert run(["bench", str(bad), "--out", str(tmp_path)]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("generator = strobl\nbananas = 4\n")
        assert run(["bench", str(bad), "--out", str(tmp_path)]) == 1
        assert "bananas" in capsys.readouterr().err

    def test_missing_config_lists_presets(self, tmp_path, capsys):
        assert run(["bench", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == 1
        assert "table1_sim_deep_cls" in capsys.readouterr().err


class TestDeterminismAcrossWorkers:
    def test_bench_outputs_byte_identical_for_any_worker_count(self, tmp_path):
        digests = {}
        for workers in ("1", "2"):
            for fmt in ("csv", "json"):
                out = tmp_path / f"w{workers}_{fmt}"
                assert run(["bench", "table1_sim_deep_cls", "--replicates", "2",
                            "--methods", "mdi,mdi-oob", "--workers", workers,
                            "--format", fmt, "--out", str(out)]) == 0
                payload = (out / f"report.{fmt}").read_bytes()
                digests.setdefault(fmt, set()).add(hashlib.sha256(payload).hexdigest())
        assert len(digests["csv"]) == 1
        assert len(digests["json"]) == 1


class TestConfigParsing:
    def test_comments_and_spacing(self):
        mapping = parse_config_text("# heading\n  a = 1 \n\nb=two\n", "test")
        assert mapping == {"a": "1", "b": "two"}

    def test_duplicate_key_rejected(self):
        with pytest.raises(Exception, match="line 2.*duplicate"):
            parse_config_text("a = 1\na = 2\n", "test")

    def test_all_presets_parse(self):
        for name in available_presets():
            mapping, source = load_config(name)
            assert mapping, name
            assert source == name


class TestHelpGolden:
    @pytest.mark.parametrize(
        "name", ["main", "simulate", "train", "importance", "sweep", "bench"]
    )
    def test_help_matches_golden(self, name, monkeypatch):
        monkeypatch.setenv("COLUMNS", "80")
        parser = build_parser()
        if name == "main":
            text = parser.format_help()
        else:
            subparsers = parser._subparsers._group_actions[0]
            text = subparsers.choices[name].format_help()
        golden = (DATA_DIR / f"help_{name}.txt").read_text()
        assert text == golden

    def test_every_documented_flag_appears_in_help(self):
        flags = {
            "simulate": ["--n", "--p", "--n-relevant", "--task", "--noise-mult",
                         "--correlation", "--seed", "--out"],
            "train": ["--data", "--trees", "--min-leaf", "--max-depth", "--mtry",
                      "--sampling", "--seed", "--workers", "--out",
                      "--allow-zero-gain-splits"],
            "importance": ["--forest", "--data", "--methods", "--n-repeats",
                           "--seed", "--format", "--out"],
            "sweep": ["--config", "--axis", "--grid", "--generator", "--trees",
                      "--mtry", "--method", "--replicates", "--seed", "--workers",
                      "--out"],
            "bench": ["--replicates", "--methods", "--fixed-relevant-set", "--seed",
                      "--workers", "--format", "--out"],
        }
        for name, expected in flags.items():
            text = (DATA_DIR / f"help_{name}.txt").read_text()
            for flag in expected:
                assert flag in text, (name, flag)

    def test_help_exits_zero(self):
        assert run(["--help"]) == 0
        assert run(["train", "--help"]) == 0
