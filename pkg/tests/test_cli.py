"""CLI, config, manifests, snapshots, and byte-reproducibility."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mmplab.cli import main
from mmplab.fields import Grid
from mmplab.decay_character import generate_data_with_character
from mmplab.harness import (CSV_COLUMNS, RunConfig, execute_run, format_float,
                            read_series_csv, report_from_run)
from mmplab.snapshots import (SnapshotFormatError, read_snapshot,
                              write_snapshot, MAGIC)

CONFIG_TEXT = """
[grid]
n = 16
length = 6.283185307179586

[params]
mu = 1.0
gamma = 1.0
chi = 0.5
nu = 1.0

[init]
kind = power
r_star = 0.0
seed = 3
amplitude = 0.01

[time]
dt = 0.1
t_end = 1.0
output_every = 2

[output]
dir = run
save_snapshots = false
"""


class TestCliBasics:
    def test_no_arguments_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_flag_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["symbol-check", "--bogus", "1"])
        assert exc.value.code == 2

    def test_fit_rate(self, tmp_path, capsys):
        t = np.geomspace(1.0, 1e3, 40)
        vals = (1 + t) ** -1.5
        lines = ["t,l2_z_sq"] + [f"{format_float(a)},{format_float(b)}"
                                 for a, b in zip(t, vals)]
        csv = tmp_path / "series.csv"
        csv.write_text("\n".join(lines) + "\n")
        rc = main(["fit-rate", "--csv", str(csv), "--column", "l2_z_sq",
                   "--window", "1", "1000"])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["exponent"] == pytest.approx(-1.5, abs=1e-9)

    def test_fit_rate_unknown_column(self, tmp_path):
        csv = tmp_path / "series.csv"
        csv.write_text("t,a\n1.0,1.0\n")
        rc = main(["fit-rate", "--csv", str(csv), "--column", "nope",
                   "--window", "0", "1"])
        assert rc == 2

    def test_decay_char_power(self, capsys):
        rc = main(["decay-char", "--kind", "power", "--r", "0.5"])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["r_star"] == pytest.approx(0.5, abs=0.05)
        assert not out["boundary"]

    def test_symbol_check_reports_violations_honestly(self, capsys):
        rc = main(["symbol-check", "--samples", "500", "--seed", "1"])
        out = json.loads(capsys.readouterr().out)
        # the four-way minimum is not a valid bound (magnetic sector), so
        # the check fails with a positive violation while certifying the
        # quadratic decay lambda_max <= -C |xi|^2
        assert rc == 1
        assert out["max_violation"] > 0
        assert out["quadratic_decay_holds"]
        assert out["empirical_C_true"] > 0

    def test_symbol_check_invalid_params(self, capsys):
        rc = main(["symbol-check", "--chi", "0.001", "--samples", "10"])
        out = json.loads(capsys.readouterr().out)
        assert rc == 1
        assert "error" in out

    def test_linear_decay_stdout(self, capsys):
        rc = main(["linear-decay", "--r-star", "0", "--t-lo", "10",
                   "--t-hi", "100", "--n-times", "6", "--per-decade", "16"])
        lines = capsys.readouterr().out.strip().splitlines()
        assert rc == 0
        assert lines[0] == "t,l2_z_sq,l2_u_sq,l2_w_sq,l2_b_sq,h1_z_sq"
        assert len(lines) == 7


class TestConfig:
    def test_hash_stability_and_key_order(self):
        a = RunConfig.from_text(CONFIG_TEXT)
        reordered = CONFIG_TEXT.replace(
            "mu = 1.0\ngamma = 1.0", "gamma = 1.0\nmu = 1.0")
        b = RunConfig.from_text(reordered)
        assert a.config_hash() == b.config_hash()

    def test_hash_changes_with_values(self):
        a = RunConfig.from_text(CONFIG_TEXT)
        b = RunConfig.from_text(CONFIG_TEXT.replace("seed = 3", "seed = 4"))
        assert a.config_hash() != b.config_hash()

    def test_defaults_fill_missing_sections(self):
        cfg = RunConfig.from_text("[grid]\nn = 8\n")
        assert cfg.grid().n == 8
        assert cfg.params().chi == 0.5
        assert cfg.solver_config().scheme == "etd-rk2"

    def test_fit_window_defaults_to_last_two_decades(self):
        cfg = RunConfig.from_text(CONFIG_TEXT)
        assert cfg.fit_window(1000.0) == (10.0, 1000.0)


class TestRunDirectory:
    def test_simulate_run_artifacts(self, tmp_path):
        cfg = RunConfig.from_text(CONFIG_TEXT)
        out, traj = execute_run(cfg, out_dir=tmp_path / "run")
        assert (out / "series.csv").exists()
        assert (out / "config.ini").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_hash"] == cfg.config_hash()
        assert manifest["summary"]["monotone_energy"]
        header = (out / "series.csv").read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        cols = read_series_csv(out / "series.csv")
        assert cols["t"][-1] == pytest.approx(1.0)
        assert np.all(np.isnan(cols["l2_diff_z_sq"]))  # not a paired run

    def test_compare_linear_run(self, tmp_path):
        cfg = RunConfig.from_text(CONFIG_TEXT)
        out, traj = execute_run(cfg, out_dir=tmp_path / "cmp", pair_linear=True)
        cols = read_series_csv(out / "series.csv")
        assert np.all(np.isfinite(cols["l2_diff_z_sq"]))
        assert (out / "extra_series.csv").exists()
        report = report_from_run(out)
        assert report["r_star"] == 0.0
        assert (out / "series.csv").exists()

    def test_zero_data_compare_linear_differences_vanish(self, tmp_path):
        cfg = RunConfig.from_text(CONFIG_TEXT.replace("kind = power",
                                                      "kind = zero"))
        out, traj = execute_run(cfg, out_dir=tmp_path / "zero", pair_linear=True)
        assert traj.column("l2_diff_z_sq").max() == 0.0

    def test_blowup_preserves_partial_results(self, tmp_path):
        import warnings
        from mmplab.solver import BlowupError
        # non-finite amplitude makes the very first step blow up
        text = CONFIG_TEXT.replace("amplitude = 0.01", "amplitude = nan")
        cfg = RunConfig.from_text(text)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(BlowupError):
                execute_run(cfg, out_dir=tmp_path / "boom")
        out = tmp_path / "boom"
        assert (out / "series.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert "blowup_t" in manifest["summary"]

    def test_save_snapshots(self, tmp_path):
        cfg = RunConfig.from_text(CONFIG_TEXT.replace(
            "save_snapshots = false", "save_snapshots = true"))
        out, traj = execute_run(cfg, out_dir=tmp_path / "snaps")
        files = sorted((out / "snapshots").glob("*.snap"))
        assert len(files) == len(traj.times)
        state = read_snapshot(files[0])
        assert state.grid.n == 16

    def test_report_cli_roundtrip(self, tmp_path, capsys):
        cfg = RunConfig.from_text(CONFIG_TEXT)
        out, _ = execute_run(cfg, out_dir=tmp_path / "rep", pair_linear=True)
        rc = main(["report", "--run", str(out), "--window", "0.2", "1.0"])
        payload = json.loads(capsys.readouterr().out)
        assert rc in (0, 1)
        assert (out / "report.json").exists()
        assert payload["config_hash"] == cfg.config_hash()
        assert payload["bound_valid"]

    def test_report_disables_rate_claims_when_bound_invalid(self, tmp_path):
        import warnings
        text = CONFIG_TEXT.replace("chi = 0.5", "chi = 0.001")
        cfg = RunConfig.from_text(text)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out, _ = execute_run(cfg, out_dir=tmp_path / "nb", pair_linear=True)
        report = report_from_run(out, window=(0.2, 1.0))
        assert not report["bound_valid"]
        assert report["overall_pass"] is None
        assert all(row["pass"] is None
                   for row in report["rows"] + report["gap_rows"])


class TestReproducibility:
    def test_byte_identical_csv_across_worker_counts(self, tmp_path):
        # acceptance-level contract exercised through the real CLI
        cfg_path = tmp_path / "c.ini"
        cfg_path.write_text(CONFIG_TEXT)
        outputs = {}
        for threads in ("1", "4"):
            out_dir = tmp_path / f"run{threads}"
            env = dict(os.environ, MMP_THREADS=threads)
            proc = subprocess.run(
                [sys.executable, "-m", "mmplab.cli", "simulate", "--config",
                 str(cfg_path), "--out", str(out_dir)],
                capture_output=True, text=True, env=env)
            assert proc.returncode == 0, proc.stderr
            outputs[threads] = (out_dir / "series.csv").read_bytes()
        assert outputs["1"] == outputs["4"]


class TestSnapshots:
    def test_roundtrip(self, tmp_path):
        grid = Grid(8, 2 * np.pi)
        state = generate_data_with_character(grid, 0.0, seed=5, amplitude=1.0)
        path = tmp_path / "state.snap"
        write_snapshot(path, state)
        back = read_snapshot(path)
        assert back.grid == grid
        assert back.solenoidal_u and back.solenoidal_b
        for a, b in zip(back.components(), state.components()):
            # storage is complex64
            assert np.abs(a - b).max() < 1e-6

    def test_magic_header(self, tmp_path):
        grid = Grid(8, 2 * np.pi)
        state = generate_data_with_character(grid, 0.0, seed=5, amplitude=1.0)
        path = tmp_path / "state.snap"
        write_snapshot(path, state)
        assert path.read_bytes()[:16] == MAGIC
        assert len(MAGIC) == 16

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.snap"
        path.write_bytes(b"not a snapshot at all")
        with pytest.raises(SnapshotFormatError):
            read_snapshot(path)

    def test_decay_char_from_snapshot(self, tmp_path, capsys):
        grid = Grid(32, 2 * np.pi)
        state = generate_data_with_character(grid, 0.0, seed=5, amplitude=1.0,
                                             sigma=16.0)
        path = tmp_path / "field.snap"
        write_snapshot(path, state)
        rc = main(["decay-char", "--field", str(path)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["kind"] == "sampled"
        assert abs(out["r_star"]) < 0.25


class TestSelftestCommand:
    def test_exit_zero(self, capsys):
        rc = main(["selftest"])
        assert rc == 0
        assert "[PASS]" in capsys.readouterr().out
