import json
import math
import subprocess
import sys

import numpy as np
import pytest

from cfmimo.cli import main
from cfmimo.experiments import COLUMNS, CDF_COLUMNS, read_output

SMALL = ["--aps", "12", "--users", "4", "--snapshots", "3", "--fadings", "400", "--seed", "5"]


def run(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_rates_csv(tmp_path):
    code, out = run(tmp_path, "rates", *SMALL)
    assert code == 0
    meta, cols, rows = read_output(out)
    assert tuple(cols) == COLUMNS
    assert meta["config"]["num_aps"] == 12 and meta["plan"]["base_seed"] == 5
    assert meta["config"]["training_len"] == 2
    quantities = {r[4] for r in rows}
    assert quantities == {"ds", "bu", "ui", "sinr", "rate"}
    assert len([r for r in rows if r[3] == "normalized" and r[4] == "rate"]) == 3 * 4


def test_stdout_when_no_out(capsys):
    assert main(["rates", *SMALL, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["figure"] == "custom" and doc["columns"] == list(COLUMNS)


def test_term_comparison_reports_pi_over_4(tmp_path):
    code, out = run(tmp_path, "figure", "term-comparison", *SMALL)
    assert code == 0
    meta, _, rows = read_output(out)
    ratios = np.array([r[5] for r in rows if r[3] == "ratio" and r[4] == "ds"])
    np.testing.assert_allclose(ratios, math.pi / 4, rtol=1e-12)
    assert meta["summary"]["ratio"]["ds"]["median"] == pytest.approx(0.785, abs=1e-3)


def test_rate_cdf_three_curves(tmp_path):
    code, out = run(tmp_path, "figure", "rate-cdf", *SMALL, "--overhead-adjusted")
    assert code == 0
    _, _, rows = read_output(out)
    for scheme in ("normalized", "normalized-mc", "conventional"):
        assert len([r for r in rows if r[3] == scheme and r[4] == "rate"]) == 12
        adj = [r[5] for r in rows if r[3] == scheme and r[4] == "rate_overhead_adjusted"]
        raw = [r[5] for r in rows if r[3] == scheme and r[4] == "rate"]
        np.testing.assert_allclose(adj, np.array(raw) * (1 - 2 / 200))


def test_cdf_flag(tmp_path):
    code, out = run(tmp_path, "figure", "rate-cdf", *SMALL, "--cdf")
    assert code == 0
    _, cols, rows = read_output(out)
    assert tuple(cols) == CDF_COLUMNS
    norm = [r for r in rows if r[0] == "normalized" and r[1] == "rate"]
    assert len(norm) == 12 and norm[-1][3] == 1.0
    assert all(a[2] <= b[2] for a, b in zip(norm, norm[1:]))


def test_ui_gap_with_forced_orthogonal_pilots(tmp_path):
    code, out = run(tmp_path, "figure", "ui-gap", "--aps", "12", "--users", "4", "--set",
                    "training_len=4", "--forced-orthogonal", "--snapshots", "2", "--fadings", "4000")
    assert code == 0
    meta, _, rows = read_output(out)
    gap = {(r[0], r[1], r[2]): r[5] for r in rows if r[4] == "ui_gap"}
    se = {(r[0], r[1], r[2]): r[5] for r in rows if r[4] == "ui_actual_stderr"}
    assert all(r[5] == 0.0 for r in rows if r[4] == "pilot_overlap")
    assert all(gap[k] <= 4 * se[k] for k in gap)
    assert "shared_pilot_gap_ratio_median" not in meta["summary"]


def test_csv_and_json_encode_identical_numbers(tmp_path):
    main(["rates", *SMALL, "--out", str(tmp_path / "a.csv")])
    main(["rates", *SMALL, "--format", "json", "--out", str(tmp_path / "a.json")])
    m1, c1, r1 = read_output(tmp_path / "a.csv")
    m2, c2, r2 = read_output(tmp_path / "a.json")
    assert list(c1) == list(c2)
    assert [tuple(r) for r in r1] == [tuple(r) for r in r2]
    m1.pop("timestamp"), m2.pop("timestamp")
    assert m1 == m2


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_rerun_reproduces_file(tmp_path, fmt, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    first = tmp_path / f"first.{fmt}"
    second = tmp_path / f"second.{fmt}"
    assert main(["figure", "rate-cdf", *SMALL, "--format", fmt, "--out", str(first)]) == 0
    assert main(["rerun", str(first), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_rerun_ignores_timestamp(tmp_path, monkeypatch):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1")
    main(["rates", *SMALL, "--out", str(first)])
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "2")
    main(["rerun", str(first), "--out", str(second)])
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("# timestamp=")]
    assert strip(first) == strip(second)


def test_config_file(tmp_path):
    cfg = tmp_path / "scenario.cfg"
    cfg.write_text("# small\nnum_aps = 14\nnum_users = 4\narea_side = 500\n")
    code, out = run(tmp_path, "rates", "--config", str(cfg), "--snapshots", "1")
    assert code == 0
    meta, _, _ = read_output(out)
    assert meta["config"]["num_aps"] == 14 and meta["config"]["area_side"] == 500.0


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "scenario.cfg"
    cfg.write_text("num_aps = 14\nnum_users = 4\n")
    code, out = run(tmp_path, "rates", "--config", str(cfg), "--aps", "20", "--snapshots", "1")
    assert code == 0
    assert read_output(out)[0]["config"]["num_aps"] == 20


@pytest.mark.parametrize("args", [
    ["rates", "--aps", "10", "--users", "40"],
    ["rates", "--set", "num_antennas=4"],
    ["rates", "--set", "noequals"],
    ["rates", "--snapshots", "0"],
    ["figure", "ui-gap", "--aps", "20", "--users", "6", "--forced-orthogonal"],
])
def test_invalid_configuration_exit_code(args, capsys):
    assert main(args) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_key_in_config_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("num_aps = 14\nfoo = 1\n")
    assert main(["rates", "--config", str(cfg)]) == 2


def test_runtime_errors_exit_1(tmp_path, capsys):
    assert main(["rates", *SMALL, "--out", str(tmp_path / "missing" / "x.csv")]) == 1
    assert main(["rates", "--config", str(tmp_path / "nope.cfg")]) == 1
    assert main(["rerun", str(tmp_path / "nope.csv")]) == 1


def test_validate_subcommand(capsys):
    assert main(["validate", "--fadings", "100000"]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out and "FAIL" not in out


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cfmimo", "rates", *SMALL, "--format", "json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["config"]["num_users"] == 4
    bad = subprocess.run([sys.executable, "-m", "cfmimo", "rates", "--aps", "3", "--users", "5"],
                         capture_output=True, text=True)
    assert bad.returncode == 2
