import numpy as np

from viking.cli import main
from viking.datagen import DesignKind, gen_design, gen_wellspecified, write_dataset_csv


def run_cli(*args):
    return main(list(args))


def test_unknown_subcommand_is_usage_error(capsys):
    assert run_cli("frobnicate") == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_is_usage_error(capsys):
    assert run_cli("simulate", "--wat", "1") == 1


def test_missing_subcommand(capsys):
    assert run_cli() == 1


def test_simulate_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli("simulate", "--experiment", "ws-iid", "--n", "50", "--seed", "4",
                   "--out", str(out1)) == 0
    assert run_cli("simulate", "--experiment", "ws-iid", "--n", "50", "--seed", "4",
                   "--out", str(out2)) == 0
    f1, f2 = out1 / "ws-iid-seed4.csv", out2 / "ws-iid-seed4.csv"
    assert f1.read_bytes() == f2.read_bytes()


def test_filter_happy_path(tmp_path, capsys):
    data = tmp_path / "data.csv"
    write_dataset_csv(gen_wellspecified(gen_design(DesignKind.IID, 40, 3), seed=3), data)
    code = run_cli("filter", "--data", str(data), "--method", "viking", "--setting", "scalar",
                   "--seed", "1", "--n-mc", "2", "--out", str(tmp_path))
    assert code == 0
    trace = tmp_path / "trace-viking-scalar.csv"
    assert trace.exists()
    assert len(trace.read_text().splitlines()) == 41


def test_filter_wrong_dimension_exits_1(tmp_path, capsys):
    data = tmp_path / "data.csv"
    write_dataset_csv(gen_wellspecified(gen_design(DesignKind.IID, 30, 3), seed=3), data)
    code = run_cli("filter", "--data", str(data), "--method", "viking",
                   "--experiment", "resonator", "--out", str(tmp_path))
    assert code == 1
    assert "dimension" in capsys.readouterr().err


def test_filter_numerical_failure_exits_2(tmp_path, capsys):
    data = tmp_path / "data.csv"
    write_dataset_csv(gen_wellspecified(gen_design(DesignKind.IID, 20, 5), seed=5), data)
    cfg = tmp_path / "degenerate.cfg"
    cfg.write_text("p0 = 0\nq0 = 0\nsigma0 = 0\ns0 = 0\nlearn_a = false\nlearn_b = false\n"
                   "rho_a = 0\nrho_b = 0\n", encoding="utf-8")
    code = run_cli("filter", "--data", str(data), "--method", "viking",
                   "--config", str(cfg), "--out", str(tmp_path))
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


def test_experiment_happy_path(tmp_path, capsys):
    code = run_cli("experiment", "--experiment", "ms-noniid", "--method", "viking",
                   "--setting", "diagonal", "--seed", "7", "--n", "60", "--n-mc", "2",
                   "--out", str(tmp_path))
    assert code == 0
    cell = tmp_path / "ms-noniid" / "viking-diagonal"
    assert (cell / "seed7.csv").exists()
    assert (cell / "summary.csv").exists()
    assert "ms-noniid" in capsys.readouterr().out


def test_experiment_cli_determinism(tmp_path):
    args = ("experiment", "--experiment", "ws-iid", "--method", "kalman-constant",
            "--seeds", "1,2", "--n", "60")
    out1, out2 = tmp_path / "x", tmp_path / "y"
    assert run_cli(*args, "--out", str(out1)) == 0
    assert run_cli(*args, "--out", str(out2)) == 0
    rel = "ws-iid/kalman-constant-diagonal/summary.csv"
    assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()


def test_config_file_overridden_by_flags(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("experiment = ws-iid\nn = 20\nseed = 1\nn_mc = 2\n", encoding="utf-8")
    code = run_cli("experiment", "--config", str(cfg), "--experiment", "ms-iid",
                   "--method", "kalman-constant", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "ms-iid").exists()
    assert not (tmp_path / "ws-iid").exists()


def test_sweep_nmc_cli(tmp_path, capsys):
    code = run_cli("sweep-nmc", "--experiment", "ws-iid", "--setting", "scalar", "--seeds", "1,2",
                   "--n", "40", "--nmc-list", "1,3", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "sweep-nmc" / "ws-iid-scalar.csv").exists()
    out = capsys.readouterr().out
    assert "n_mc=1" in out and "ratio=1" in out


def test_grid_cli_small(tmp_path, capsys):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("rho_a = 0.001\n", encoding="utf-8")  # rho_b stays the full ladder
    code = run_cli("grid", "--experiment", "ws-iid", "--config", str(cfg), "--seeds", "1",
                   "--n", "30", "--n-mc", "2", "--out", str(tmp_path))
    assert code == 0
    assert "best [rho_a=0.001,rho_b=" in capsys.readouterr().out


def test_help_exits_zero(capsys):
    assert run_cli("--help") == 0
