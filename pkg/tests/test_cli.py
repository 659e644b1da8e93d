import csv

import numpy as np
import pytest

from obstaclefem.cli import main

BASE = ["nE", "nDof", "est", "eta", "estContact", "oscF"]
ERRS = ["errNormU", "errNormV", "errU", "errSigma", "errDivSigmaLambda"]


def run_cli(*args):
    return main([str(a) for a in args])


def read_table(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def test_run_smooth_writes_expected_table(tmp_path):
    out = tmp_path / "smooth.csv"
    code = run_cli("run", "--example", "smooth", "--form", "A", "--set", "Ks",
                   "--mode", "uniform", "--max-levels", "4",
                   "--initial-n", "2", "--output", out)
    assert code == 0
    rows = read_table(out)
    assert len(rows) == 4
    assert list(rows[0].keys()) == BASE + ERRS + ["iters"]
    for row in rows:
        est = float(row["est"])
        parts = (float(row["eta"])**2 + float(row["estContact"])**2
                 + float(row["oscF"])**2)
        assert est**2 == pytest.approx(parts, rel=1e-12)
    assert [int(r["nE"]) for r in rows] == [8, 16, 32, 64]


def test_run_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run_cli("run", "--example", "pyramid", "--form", "C",
                       "--set", "K1", "--mode", "adaptive", "--theta", "0.25",
                       "--max-levels", "5", "--initial-n", "1",
                       "--output", out) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_pyramid_has_no_error_columns(tmp_path):
    out = tmp_path / "pyr.csv"
    assert run_cli("run", "--example", "pyramid", "--form", "A", "--set", "Ks",
                   "--mode", "uniform", "--max-levels", "2",
                   "--initial-n", "1", "--output", out) == 0
    rows = read_table(out)
    assert list(rows[0].keys()) == BASE + ["iters"]


def test_invalid_pair_exits_2_and_names_supported_pairs(tmp_path, capsys):
    out = tmp_path / "x.csv"
    code = run_cli("run", "--example", "smooth", "--form", "A", "--set", "K1",
                   "--output", out)
    assert code == 2
    message = capsys.readouterr().err
    assert "A+Ks" in message and "C+K1" in message
    assert not out.exists()


def test_invalid_theta_exits_2(tmp_path):
    assert run_cli("run", "--example", "smooth", "--form", "A", "--set", "Ks",
                   "--theta", "1.5", "--output", tmp_path / "x.csv") == 2


def test_nonconvergence_exits_3_with_partial_table(tmp_path, capsys):
    out = tmp_path / "partial.csv"
    code = run_cli("run", "--example", "smooth", "--form", "A", "--set", "Ks",
                   "--mode", "uniform", "--max-levels", "3", "--initial-n", "2",
                   "--max-solver-iterations", "1", "--output", out)
    assert code == 3
    assert out.exists()
    with open(out) as handle:
        lines = handle.read().strip().split("\n")
    assert lines[0].startswith("nE,nDof,est")
    assert "did not converge" in capsys.readouterr().err


def test_dump_mesh_levels(tmp_path):
    out = tmp_path / "run.csv"
    assert run_cli("run", "--example", "smooth", "--form", "A", "--set", "Ks",
                   "--mode", "uniform", "--max-levels", "3", "--initial-n", "1",
                   "--dump-mesh", "0,2", "--output", out) == 0
    for level, n_elem in [(0, 2), (2, 8)]:
        dump = tmp_path / f"run.mesh{level}.txt"
        lines = dump.read_text().strip().split("\n")
        n_v, n_e = map(int, lines[0].split())
        assert n_e == n_elem
        assert len(lines) == 1 + n_v + n_e
    assert not (tmp_path / "run.mesh1.txt").exists()


def test_rates_command_power_law(tmp_path, capsys):
    path = tmp_path / "table.csv"
    n = np.array([100, 200, 400, 800, 1600])
    with open(path, "w") as handle:
        handle.write("nE,est\n")
        for ni in n:
            handle.write(f"{ni},{float(3.0 * ni ** -0.5)!r}\n")
    assert run_cli("rates", path, "est") == 0
    out = capsys.readouterr().out
    assert "0.5000" in out
    assert run_cli("rates", path, "est", "--tail", "5") == 0


def test_rates_command_missing_column(tmp_path, capsys):
    path = tmp_path / "table.csv"
    path.write_text("nE,est\n100,1.0\n200,0.7\n400,0.5\n")
    assert run_cli("rates", path, "bogus") == 2
    assert "bogus" in capsys.readouterr().err
    assert run_cli("rates", path, "est", "--tail", "9") == 2


def test_beta_override_recorded_in_stdout(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert run_cli("run", "--example", "lshape", "--form", "A", "--set", "Ks",
                   "--mode", "uniform", "--max-levels", "2", "--initial-n", "1",
                   "--beta", "3", "--output", out) == 0
    assert "beta=3" in capsys.readouterr().out
