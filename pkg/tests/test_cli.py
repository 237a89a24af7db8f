import csv
import io
import json
import math
import subprocess
import sys

import pytest

from photonlink.cli import execute, run


def table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# config: ")
    return json.loads(lines[0][len("# config: "):]), list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def run_ok(argv):
    text, out = execute(argv)
    assert out is None
    return table(text)


class TestExamples:
    def test_budget(self):
        _, rows = run_ok(["budget", "--attenuation", "0.15", "--length", "500"])
        row = rows[0]
        assert float(row["transmission"]) == pytest.approx(3.1623e-8, rel=1e-4)
        assert float(row["transmission"]) == pytest.approx(10**-7.5, rel=1e-12)
        assert float(row["detection_rate"]) == pytest.approx(10**2.5, rel=1e-9)
        assert float(row["ledger_extension"]) == pytest.approx(220.0)
        assert row["ledger_mode"] == "rounded"

    def test_budget_exact_ledger(self):
        _, rows = run_ok(["budget", "--ledger", "exact"])
        assert rows[0]["ledger_mode"] == "exact"
        assert float(rows[0]["ledger_total_db"]) == pytest.approx(33.0, abs=0.01)

    def test_amplify_unit_gain(self):
        _, rows = run_ok(["amplify", "--t2", "0.5", "--s2", "0.3"])
        assert float(rows[0]["gain"]) == pytest.approx(1.0, abs=1e-12)

    def test_amplify_oracle_matches_analytic(self):
        _, analytic = run_ok(["amplify", "--t2", "0.7", "--s2", "0.4"])
        _, oracle = run_ok(["amplify", "--t2", "0.7", "--s2", "0.4", "--oracle"])
        assert oracle[0]["source"] == "oracle"
        for key in ("p_psi_plus", "p_psi_minus", "p_rejected", "conditional_photon_probability"):
            assert float(oracle[0][key]) == pytest.approx(float(analytic[0][key]), abs=1e-12)

    def test_amplify_threshold_and_mc(self):
        _, rows = run_ok(["amplify", "--s2", "0.01", "--threshold", "--mc", "--trials", "2000"])
        assert float(rows[0]["t_min2"]) == pytest.approx(0.5, abs=1e-3)
        assert int(rows[0]["mc_trials"]) == 2000

    def test_repeater_two_links(self):
        argv = ["repeater", "--links", "2", "--p", "0.5", "--strategy", "parallel-memory", "--tau", "inf"]
        _, rows = run_ok(argv + ["--trials", "100000", "--seed", "7"])
        row = rows[0]
        assert abs(float(row["mean_slots"]) - 8 / 3) <= 3 * float(row["std_error"])
        assert float(row["analytic_slots"]) == pytest.approx(8 / 3, rel=1e-12)
        assert row["analytic_applies"] == "true"


class TestExitCodes:
    def test_success(self, capsys):
        assert run(["budget"]) == 0
        assert capsys.readouterr().out.startswith("# config: ")

    @pytest.mark.parametrize(
        "argv,path",
        [
            (["amplify", "--t2", "1.5"], "amplify"),
            (["amplify", "--detector", "ccd"], "amplify.detector"),
            (["budget", "--length", "abc"], "budget.length"),
            (["repeater", "--bogus", "1"], "argv"),
            (["repeater", "--photon-bandwidth", "2e9"], "repeater"),
            (["repeater", "--trials", "0"], "repeater.trials"),
            (["budget", "--min-rate", "0"], "budget.min_rate"),
        ],
    )
    def test_config_error(self, argv, path, capsys):
        assert run(argv) == 1
        err = capsys.readouterr().err
        assert "config error" in err and path in err

    @pytest.mark.parametrize(
        "argv",
        [
            ["amplify", "--t2", "1", "--s2", "0"],  # zero gain denominator
            ["amplify", "--s2", "1", "--threshold"],  # nothing to amplify above
            ["budget", "--min-rate", "1e11"],  # unreachable rate
        ],
    )
    def test_computation_error(self, argv, capsys):
        assert run(argv) == 2
        assert "computation error" in capsys.readouterr().err

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "photonlink", "amplify", "--t2", "2"], capture_output=True, text=True
        )
        assert proc.returncode == 1
        assert "amplify" in proc.stderr
        assert proc.stdout == ""


class TestConfigFile:
    def test_file_then_flag_precedence(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"budget": {"length": 300, "attenuation": 0.2}}))
        echo, rows = run_ok(["budget", "--config", str(cfg), "--length", "100"])
        assert echo["budget"]["length"] == 100.0
        assert echo["budget"]["attenuation"] == 0.2
        assert float(rows[0]["transmission"]) == pytest.approx(0.01)

    def test_unknown_nested_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"repeater": {"linkz": 3}}))
        assert run(["repeater", "--config", str(cfg)]) == 1
        assert "repeater.linkz" in capsys.readouterr().err

    def test_unknown_top_level_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"budgets": {}}))
        assert run(["budget", "--config", str(cfg)]) == 1
        assert "budgets" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("{not json")
        assert run(["budget", "--config", str(cfg)]) == 1

    def test_missing_file(self, tmp_path):
        assert run(["budget", "--config", str(tmp_path / "missing.json")]) == 1

    def test_echo_has_every_default(self):
        echo, _ = run_ok(["repeater", "--p", "0.5", "--trials", "10"])
        assert echo["command"] == "repeater" and echo["seed"] == 0 and echo["format"] == "csv"
        assert echo["repeater"]["tau"] == math.inf
        assert echo["repeater"]["links"] == 2


ROUND_TRIP = [
    ["budget", "--length", "123.456", "--detector-efficiency", "0.37", "--diqip-efficiency", "0.71"],
    ["amplify", "--t2", "0.63", "--s2", "0.17", "--phase", "0.3", "--mc", "--trials", "500", "--seed", "99"],
    ["amplify", "--detector", "threshold", "--efficiency", "0.9", "--dark", "0.01", "--oracle"],
    ["repeater", "--links", "4", "--p", "0.3", "--trials", "300", "--seed", "12345", "--tau", "0.01"],
    ["sweep", "--command", "repeater", "--param", "p", "--values", "0.2,0.4", "--set", "trials=100", "--seed", "3"],
]


@pytest.mark.parametrize("fmt", ["csv", "structured"])
@pytest.mark.parametrize("argv", ROUND_TRIP, ids=lambda a: a[0] + "-" + a[2])
def test_round_trip(argv, fmt, tmp_path):
    first, _ = execute(argv + ["--format", fmt])
    if fmt == "csv":
        echo = json.loads(first.splitlines()[0][len("# config: "):])
    else:
        echo = json.loads(first)["config"]
    cfg = tmp_path / "echo.json"
    cfg.write_text(json.dumps(echo))
    again, _ = execute([argv[0], "--config", str(cfg)])
    assert again == first


def test_seed_changes_monte_carlo():
    base = ["amplify", "--mc", "--trials", "1000"]
    _, a = run_ok(base + ["--seed", "1"])
    _, b = run_ok(base + ["--seed", "2"])
    assert a[0]["mc_herald_probability"] != b[0]["mc_herald_probability"]


def test_seed_range():
    assert run(["amplify", "--seed", str(2**64)]) == 1
    assert run(["amplify", "--seed", str(2**64 - 1)]) == 0


class TestSweep:
    def test_row_count_and_order(self):
        echo, rows = run_ok(["sweep", "--command", "amplify", "--param", "t2", "--start", "0.1", "--stop", "0.9", "--num", "9"])
        grid = [float(r["sweep_t2"]) for r in rows]
        assert len(rows) == 9
        assert grid == sorted(grid)
        assert grid[0] == pytest.approx(0.1) and grid[-1] == pytest.approx(0.9)
        gains = [float(r["gain"]) for r in rows]
        assert gains == sorted(gains)
        assert echo["amplify"]["s2"] == 0.1

    def test_explicit_values_keep_order(self):
        _, rows = run_ok(["sweep", "--command", "budget", "--param", "length", "--values", "300,100,200"])
        assert [float(r["length"]) for r in rows] == [300.0, 100.0, 200.0]

    def test_base_override(self):
        _, rows = run_ok(["sweep", "--command", "amplify", "--param", "t2", "--values", "0.5", "--set", "s2=0.4"])
        assert float(rows[0]["s2"]) == 0.4

    def test_unknown_param(self, capsys):
        assert run(["sweep", "--command", "amplify", "--param", "length", "--values", "1"]) == 1
        assert "sweep.param" in capsys.readouterr().err

    def test_missing_grid(self):
        assert run(["sweep", "--command", "amplify", "--param", "t2"]) == 1

    def test_bad_grid_point_is_config_error(self, capsys):
        assert run(["sweep", "--command", "amplify", "--param", "t2", "--values", "0.5,1.5"]) == 1

    def test_structured(self):
        text, _ = execute(["sweep", "--command", "amplify", "--param", "s2", "--values", "0.1,0.2", "--format", "structured"])
        doc = json.loads(text)
        assert [r["sweep_s2"] for r in doc["rows"]] == [0.1, 0.2]


class TestOutputFile:
    def test_writes_file(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        assert run(["budget", "--out", str(out)]) == 0
        assert capsys.readouterr().out == ""
        assert out.read_text().startswith("# config: ")

    def test_config_error_leaves_no_file(self, tmp_path):
        out = tmp_path / "r.csv"
        assert run(["amplify", "--t2", "7", "--out", str(out)]) == 1
        assert list(tmp_path.iterdir()) == []

    def test_computation_error_leaves_no_file(self, tmp_path):
        out = tmp_path / "r.csv"
        assert run(["sweep", "--command", "amplify", "--param", "s2", "--values", "0.5,0", "--set", "t2=1", "--out", str(out)]) == 2
        assert list(tmp_path.iterdir()) == []

    def test_existing_file_untouched_on_error(self, tmp_path):
        out = tmp_path / "r.csv"
        out.write_text("keep")
        assert run(["budget", "--length", "-1", "--out", str(out)]) == 1
        assert out.read_text() == "keep"


def test_floats_round_trip_through_csv():
    _, rows = run_ok(["budget", "--attenuation", "0.17", "--length", "333.3"])
    assert float(rows[0]["transmission"]) == 10.0 ** (-0.17 * 333.3 / 10.0)
