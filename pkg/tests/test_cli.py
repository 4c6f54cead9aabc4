"""Command-line surface: flags, payload schemas, exit codes, config files."""

import csv
import io
import json
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from bcqtl.cli import main
from bcqtl.kernels import LocScaleParams, get_kernel
from bcqtl.likelihood import PhenotypeGroups, write_groups_csv
from bcqtl.simharness import simulate_scan_dataset

from conftest import make_groups, write_scan_csvs


def run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def groups_file(tmp_path):
    path = tmp_path / "groups.csv"
    write_groups_csv(make_groups(77, sizes=(25, 8, 8, 25)), path)
    return path


# ---------------------------------------------------------------------------
# usage errors
# ---------------------------------------------------------------------------


def test_no_command_is_usage_error():
    code, _, err = run_cli([])
    assert code == 1
    assert "usage" in err


def test_unknown_command_is_usage_error():
    code, _, err = run_cli(["frobnicate"])
    assert code == 1


def test_missing_required_flag_is_usage_error():
    code, _, err = run_cli(["critval", "--kind", "full"])
    assert code == 1
    assert "error" in err


def test_r_and_d_are_mutually_exclusive():
    code, _, _ = run_cli(
        ["critval", "--r", "0.1", "--d", "5", "--kind", "full", "--reps", "2000"]
    )
    assert code == 1


# ---------------------------------------------------------------------------
# critval
# ---------------------------------------------------------------------------


def test_critval_prints_one_row_per_alpha():
    code, out, _ = run_cli(
        ["critval", "--r", "0.1", "--kind", "full",
         "--alpha", "0.1,0.05,0.01", "--reps", "4000", "--seed", "0"]
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "alpha,critical_value"
    rows = [ln.split(",") for ln in lines[1:]]
    assert [float(a) for a, _ in rows] == [0.1, 0.05, 0.01]
    crits = [float(c) for _, c in rows]
    assert crits[0] < crits[1] < crits[2]  # smaller alpha, larger cutoff


def test_critval_star_kind_and_d_flag():
    code, out, _ = run_cli(
        ["critval", "--d", "5", "--kind", "star", "--reps", "4000"]
    )
    assert code == 0
    val = float(out.strip().splitlines()[1].split(",")[1])
    assert 2.0 < val < 8.0


def test_critval_save_table(tmp_path):
    dest = tmp_path / "table.csv"
    code, _, _ = run_cli(
        ["critval", "--r", "0.1", "--kind", "full", "--reps", "3000",
         "--save-table", str(dest)]
    )
    assert code == 0
    from bcqtl.asymptotics import load_table

    table = load_table(dest)
    assert table.n == 3000 and table.kind == "full"


def test_critval_bad_alpha_list():
    code, _, _ = run_cli(
        ["critval", "--r", "0.1", "--kind", "full", "--alpha", "1.5"]
    )
    assert code == 1


def test_critval_save_table_unwritable(tmp_path):
    code, _, err = run_cli(
        ["critval", "--r", "0.1", "--kind", "full", "--reps", "2000",
         "--save-table", str(tmp_path / "no" / "dir" / "t.csv")]
    )
    assert code == 2


# ---------------------------------------------------------------------------
# test subcommand
# ---------------------------------------------------------------------------


def test_test_lrt_json_payload(groups_file):
    code, out, _ = run_cli(
        ["test", "--input", str(groups_file), "--kernel", "normal",
         "--r", "0.1", "--reps", "4000", "--davies"]
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["kind"] == "full"
    assert payload["statistic"] >= 0.0
    assert 0.0 < payload["p_value_rep"] <= 1.0
    assert 0.0 <= payload["p_value_davies"] <= 1.0
    assert payload["converged"] is True
    assert set(payload) == {
        "statistic", "kind", "p_value_rep", "p_value_davies", "theta_hat",
        "mu1", "mu2", "sigma1", "sigma2", "mu0", "sigma0", "converged",
    }


def test_test_equal_scale_kind(groups_file):
    code, out, _ = run_cli(
        ["test", "--input", str(groups_file), "--kernel", "normal",
         "--d", "5", "--equal-scale", "--reps", "4000"]
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["kind"] == "equal_scale"
    assert payload["sigma1"] == payload["sigma2"]


def test_test_csv_output(groups_file):
    code, out, _ = run_cli(
        ["test", "--input", str(groups_file), "--kernel", "normal",
         "--r", "0.1", "--reps", "2000", "--out", "csv"]
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][0] == "statistic"
    assert len(rows) == 2


def test_test_nonparam_method(groups_file):
    code, out, _ = run_cli(
        ["test", "--input", str(groups_file), "--kernel", "normal",
         "--r", "0.1", "--method", "ks", "--reps", "500"]
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["method"] == "ks"
    assert 0.0 < payload["p_value"] <= 1.0
    assert set(payload) == {"statistic", "method", "p_value", "tied", "n_groups"}


def test_test_missing_input_maps_to_data_error(tmp_path):
    code, _, err = run_cli(
        ["test", "--input", str(tmp_path / "nope.csv"), "--kernel", "normal",
         "--r", "0.1"]
    )
    assert code == 2
    assert "cannot read" in err


def test_test_unknown_kernel_is_usage_error(groups_file):
    code, _, _ = run_cli(
        ["test", "--input", str(groups_file), "--kernel", "gamma", "--r", "0.1"]
    )
    assert code == 1  # argparse choices reject it


# ---------------------------------------------------------------------------
# scan subcommand
# ---------------------------------------------------------------------------


def test_scan_end_to_end(tmp_path):
    ds = simulate_scan_dataset(
        [0.0, 10.0, 20.0], 60, 5.0,
        LocScaleParams(0.0, 1.0), LocScaleParams(1.5, 1.0),
        get_kernel("normal"), seed=2,
    )
    mp, gp, pp = write_scan_csvs(ds, tmp_path)
    dest = tmp_path / "results.csv"
    code, out, _ = run_cli(
        ["scan", "--map", str(mp), "--geno", str(gp), "--pheno", str(pp),
         "--kernel", "normal", "--reps", "2000", "--out", str(dest),
         "--nonparam", "--perm-reps", "200", "--normality", "--davies"]
    )
    assert code == 0
    assert "scanned 2 intervals" in out
    with open(dest, newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3
    header = rows[0]
    for needed in ("rn", "p_rn", "rn_star", "p_ks", "p_norm_g1", "untestable"):
        assert needed in header


def test_scan_bad_geno_maps_to_data_error(tmp_path):
    ds = simulate_scan_dataset(
        [0.0, 10.0], 20, 5.0, LocScaleParams(0.0, 1.0), LocScaleParams(1.0, 1.0),
        get_kernel("normal"), seed=3,
    )
    mp, gp, pp = write_scan_csvs(ds, tmp_path)
    gp.write_text(gp.read_text().replace(",1", ",7", 1))
    code, _, err = run_cli(
        ["scan", "--map", str(mp), "--geno", str(gp), "--pheno", str(pp),
         "--kernel", "normal", "--out", str(tmp_path / "r.csv")]
    )
    assert code == 2
    assert "must be 0, 1 or NA" in err


# ---------------------------------------------------------------------------
# simulate subcommand
# ---------------------------------------------------------------------------


def test_simulate_type1_run(tmp_path):
    conf = tmp_path / "sim.toml"
    conf.write_text(
        """
[scenario]
kind = "type1"
kernel = "normal"
mu1 = 0.0
sigma1 = 1.0
d = 5.0
n = 60
n_reps = 30
seed = 4

[fit]
theta_grid_size = 11

[calibration]
methods = ["rn", "rn_star"]
nulldist_n = 3000
"""
    )
    dest = tmp_path / "rows.csv"
    code, out, _ = run_cli(["simulate", "--config", str(conf), "--out", str(dest)])
    assert code == 0
    assert "type1:" in out
    with open(dest, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {row["method"] for row in rows} == {"rn", "rn_star"}
    for row in rows:
        assert 0.0 <= float(row["rate"]) <= 1.0
    manifest = json.loads((tmp_path / "rows.csv.manifest.json").read_text())
    assert manifest["kind"] == "type1"
    assert manifest["seed"] == 4
    assert "versions" in manifest and "bcqtl" in manifest["versions"]


def test_simulate_power_run(tmp_path):
    conf = tmp_path / "sim.toml"
    conf.write_text(
        """
[scenario]
kind = "power"
kernel = "normal"
mu1 = 0.0
sigma1 = 1.0
mu2 = 2.0
r = 0.1
n = 80
n_reps = 25
seed = 5

[fit]
theta_grid_size = 11

[calibration]
methods = ["rn"]
calib_reps = 1000
"""
    )
    dest = tmp_path / "rows.csv"
    code, out, _ = run_cli(["simulate", "--config", str(conf), "--out", str(dest)])
    assert code == 0
    assert "power:" in out
    rows = list(csv.DictReader(open(dest, newline="")))
    assert len(rows) == 1
    assert float(rows[0]["rate"]) > 0.5
    assert float(rows[0]["kl"]) > 0.0


def test_simulate_unknown_scenario_key(tmp_path):
    conf = tmp_path / "sim.toml"
    conf.write_text(
        """
[scenario]
kind = "type1"
kernel = "normal"
mu1 = 0.0
sigma1 = 1.0
r = 0.1
banana = 3
"""
    )
    code, _, err = run_cli(["simulate", "--config", str(conf), "--out", str(tmp_path / "c.csv")])
    assert code == 2
    assert "banana" in err


def test_simulate_bad_toml(tmp_path):
    conf = tmp_path / "sim.toml"
    conf.write_text("[scenario\nkind=")
    code, _, err = run_cli(["simulate", "--config", str(conf), "--out", str(tmp_path / "c.csv")])
    assert code == 2


def test_simulate_missing_config(tmp_path):
    code, _, err = run_cli(
        ["simulate", "--config", str(tmp_path / "no.toml"), "--out", str(tmp_path / "c.csv")]
    )
    assert code == 2
    assert "cannot read" in err


# ---------------------------------------------------------------------------
# kl subcommand
# ---------------------------------------------------------------------------


def test_kl_case_config(tmp_path):
    conf = tmp_path / "case.toml"
    conf.write_text(
        """
[case]
kernel = "normal"
mu1 = 0.0
sigma1 = 1.0
mu2 = 0.5
sigma2 = 1.0
theta = 0.5
d = 5.0
"""
    )
    code, out, _ = run_cli(["kl", "--config", str(conf)])
    assert code == 0
    payload = json.loads(out)
    assert payload["kl_x100"] == pytest.approx(2.887, abs=0.01)
    assert payload["mu0"] == pytest.approx(0.25, abs=1e-6)
    assert payload["theta"] == 0.5


def test_kl_top_level_keys_allowed(tmp_path):
    conf = tmp_path / "case.toml"
    conf.write_text('kernel = "normal"\nmu1 = 0.0\nsigma1 = 1.0\nmu2 = 1.0\nsigma2 = 1.0\nr = 0.1\n')
    code, out, _ = run_cli(["kl", "--config", str(conf)])
    assert code == 0
    assert json.loads(out)["kl"] > 0.0
