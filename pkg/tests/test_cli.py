"""End-to-end tests of the command-line interface.

Each test drives ``ptdimer.cli.main`` in-process with an argv list and
checks exit codes, written files, manifests, and stream output.
"""

import json
import math

import pytest

from ptdimer import critical_damping, read_trajectory_csv
from ptdimer.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestSpectrum:
    def test_modal_json_to_stdout(self, capsys):
        assert run_cli("spectrum", "--epsilon", "0.075", "--out", "-") == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["phase"] == "unbroken"
        assert "boundary_distance" in payload
        got = sorted(im for _, im in payload["eigenvalues"])
        expected = sorted(
            s * math.sqrt(1.0 + sign * 0.075)
            for s in (1.0, -1.0)
            for sign in (1.0, -1.0)
        )
        assert got == pytest.approx(expected, abs=1e-14)
        assert all(re == 0.0 for re, _ in payload["eigenvalues"])

    def test_two_box_json(self, capsys):
        assert run_cli(
            "spectrum", "--magnitude", "1.0", "--theta", "1.5707963267948966",
            "--g", "2.0", "--out", "-",
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"eigenvalues", "phase", "critical_coupling"}
        assert payload["phase"] == "unbroken"
        assert payload["critical_coupling"] == pytest.approx(1.0)

    def test_csv_format(self, tmp_path):
        out = tmp_path / "spec.csv"
        assert run_cli(
            "spectrum", "--epsilon", "0.3", "--format", "csv",
            "--out", str(out), "--manifest", "none",
        ) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "re,im"
        assert len(lines) == 5

    def test_half_specified_two_box_rejected(self, capsys):
        assert run_cli("spectrum", "--magnitude", "1.0", "--out", "-") == 1
        assert "magnitude/theta" in capsys.readouterr().err

    def test_no_problem_selected_rejected(self, capsys):
        assert run_cli("spectrum", "--out", "-") == 1
        assert "epsilon" in capsys.readouterr().err


class TestSimulate:
    def test_writes_trajectory_and_manifest(self, tmp_path):
        out = tmp_path / "run.csv"
        assert run_cli(
            "simulate", "--epsilon", "0.075", "--t-end", "50.0",
            "--dt", "0.01", "--out", str(out),
        ) == 0
        series = read_trajectory_csv(out)
        assert series.times[-1] == pytest.approx(50.0)
        manifest = json.loads((tmp_path / "run.csv.manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["outputs"] == [str(out)]
        # every parameter is echoed, including ones left at their defaults
        assert manifest["params"]["epsilon"] == 0.075
        assert manifest["params"]["stride"] == 10
        assert manifest["params"]["model"] == "lossless"
        assert manifest["params"]["init"] == "1,0,0,0"
        assert manifest["tool_version"]
        assert manifest["started"] <= manifest["finished"]

    def test_rerun_is_byte_identical(self, tmp_path):
        args = ("simulate", "--epsilon", "0.2", "--a", "0.1",
                "--model", "linear", "--t-end", "20.0", "--dt", "0.01")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(*args, "--out", str(a), "--manifest", "none") == 0
        assert run_cli(*args, "--out", str(b), "--manifest", "none") == 0
        assert a.read_bytes() == b.read_bytes()

    def test_stdout_streaming(self, capsys):
        assert run_cli(
            "simulate", "--epsilon", "0.075", "--t-end", "1.0",
            "--dt", "0.01", "--out", "-",
        ) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "t,x,p,y,q,E_x,E_y"
        assert len(lines) == 12  # header + ceil(100/10)+1 sampled states

    def test_transfer_model_writes_event_log(self, tmp_path):
        out = tmp_path / "run.csv"
        assert run_cli(
            "simulate", "--model", "transfer", "--epsilon", "0.05",
            "--g", "0.1", "--t-end", "50.0", "--dt", "0.01",
            "--out", str(out),
        ) == 0
        transfer = tmp_path / "run.transfer.csv"
        assert transfer.exists()
        manifest = json.loads((tmp_path / "run.csv.manifest.json").read_text())
        assert manifest["outputs"] == [str(out), str(transfer)]

    def test_invalid_epsilon_names_field(self, capsys):
        assert run_cli("simulate", "--epsilon", "-1.0", "--out", "-") == 1
        assert "epsilon" in capsys.readouterr().err

    def test_missing_required_flag(self, capsys):
        assert run_cli("simulate", "--out", "-") == 1
        assert "epsilon" in capsys.readouterr().err

    def test_blowup_exits_numerical_failure(self, tmp_path, capsys):
        code = run_cli(
            "simulate", "--model", "linear", "--epsilon", "0.2",
            "--a", "0.6", "--dt", "0.01", "--t-end", "200.0",
            "--out", str(tmp_path / "run.csv"),
        )
        assert code == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_oversized_dt_needs_override(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        base = ("simulate", "--epsilon", "0.075", "--dt", "0.05",
                "--t-end", "10.0", "--out", str(out))
        assert run_cli(*base) == 1
        assert "allow_large_dt" in capsys.readouterr().err
        assert run_cli(*base, "--allow-large-dt") == 0


class TestClassify:
    def test_lossless_chain_is_unbroken(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        assert run_cli(
            "simulate", "--epsilon", "0.075", "--t-end", "400.0",
            "--dt", "0.01", "--out", str(out), "--manifest", "none",
        ) == 0
        assert run_cli("classify", "--in", str(out), "--format", "json",
                       "--out", "-") == 0
        assert json.loads(capsys.readouterr().out) == {"label": "unbroken"}

    def test_text_format(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        run_cli("simulate", "--epsilon", "0.075", "--t-end", "400.0",
                "--dt", "0.01", "--out", str(out), "--manifest", "none")
        assert run_cli("classify", "--in", str(out), "--out", "-") == 0
        assert capsys.readouterr().out.strip() == "unbroken"

    def test_missing_file_is_io_error(self, tmp_path, capsys):
        code = run_cli("classify", "--in", str(tmp_path / "nope.csv"),
                       "--out", "-")
        assert code == 3
        assert "i/o error" in capsys.readouterr().err

    def test_thin_series_is_numerical_failure(self, tmp_path, capsys):
        out = tmp_path / "thin.csv"
        run_cli("simulate", "--epsilon", "0.075", "--t-end", "1.0",
                "--dt", "0.01", "--out", str(out), "--manifest", "none")
        assert run_cli("classify", "--in", str(out), "--out", "-") == 2
        assert "numerical failure" in capsys.readouterr().err


class TestTof:
    def test_json_output(self, capsys):
        assert run_cli("tof", "--epsilon", "1.0", "--out", "-") == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["epsilon"] == 1.0
        assert payload["T"][0] == pytest.approx(4.829017024527686, rel=1e-9)
        assert abs(payload["T"][1]) < 1e-12

    def test_csv_output(self, capsys):
        assert run_cli("tof", "--epsilon", "0.5", "--format", "csv",
                       "--out", "-") == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "T_re,T_im,tail_bound,converged,L,epsilon,E"
        assert len(lines) == 2

    def test_overflowing_exponent_fails(self, capsys):
        assert run_cli("tof", "--epsilon", "600", "--out", "-") == 2
        assert "numerical failure" in capsys.readouterr().err


class TestSweepBoundary:
    def test_sweep_then_boundary_chain(self, tmp_path):
        pmap = tmp_path / "map.csv"
        assert run_cli(
            "sweep", "--mode", "spectral-eps-a",
            "--epsilon-range", "0.05,0.6,4", "--param-range", "0,0.8,9",
            "--out", str(pmap),
        ) == 0
        manifest_path = tmp_path / "map.csv.manifest.json"
        manifest = json.loads(manifest_path.read_text())
        assert manifest["grid"]["mode"] == "spectral-eps-a"
        assert manifest["n_errors"] == 0
        assert manifest["wall_seconds"] >= 0.0

        boundary = tmp_path / "boundary.csv"
        assert run_cli(
            "boundary", "--map", str(pmap),
            "--sweep-manifest", str(manifest_path),
            "--iterations", "12", "--out", str(boundary),
        ) == 0
        lines = boundary.read_text().splitlines()
        assert lines[0] == "epsilon,critical_value,half_width"
        assert len(lines) == 5
        for line in lines[1:]:
            eps, crit, half_width = map(float, line.split(","))
            assert abs(crit - critical_damping(eps)) <= 1e-6 + half_width

    def test_sweep_rejects_stdout(self, capsys):
        code = run_cli("sweep", "--mode", "spectral-eps-a",
                       "--epsilon-range", "0.05,0.6,4",
                       "--param-range", "0,0.8,9", "--out", "-")
        assert code == 1
        assert "out" in capsys.readouterr().err

    def test_degenerate_epsilon_axis_rejected(self, tmp_path, capsys):
        code = run_cli("sweep", "--mode", "spectral-eps-a",
                       "--epsilon-range", "0.3,0.3,1",
                       "--param-range", "0,0.8,9",
                       "--out", str(tmp_path / "map.csv"))
        assert code == 1
        assert "epsilon_range" in capsys.readouterr().err


class TestConfigAndManifest:
    def test_config_file_supplies_parameters(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text('epsilon = 0.3\nformat = "json"\n')
        assert run_cli("spectrum", "--config", str(cfg), "--out", "-") == 0
        payload = json.loads(capsys.readouterr().out)
        top = max(im for _, im in payload["eigenvalues"])
        assert top == pytest.approx(math.sqrt(1.3), abs=1e-14)

    def test_explicit_flag_beats_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("epsilon = 0.3\n")
        assert run_cli("spectrum", "--config", str(cfg),
                       "--epsilon", "0.075", "--out", "-") == 0
        payload = json.loads(capsys.readouterr().out)
        top = max(im for _, im in payload["eigenvalues"])
        assert top == pytest.approx(math.sqrt(1.075), abs=1e-14)

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("t_endd = 5.0\n")
        code = run_cli("simulate", "--epsilon", "0.075",
                       "--config", str(cfg), "--out", "-")
        assert code == 1
        assert "t_endd" in capsys.readouterr().err

    def test_manifest_none_suppresses_file(self, tmp_path):
        out = tmp_path / "run.csv"
        assert run_cli("simulate", "--epsilon", "0.075", "--t-end", "5.0",
                       "--dt", "0.01", "--out", str(out),
                       "--manifest", "none") == 0
        assert list(tmp_path.glob("*.manifest.json")) == []

    def test_manifest_explicit_path(self, tmp_path):
        out = tmp_path / "run.csv"
        manifest = tmp_path / "custom.json"
        assert run_cli("simulate", "--epsilon", "0.075", "--t-end", "5.0",
                       "--dt", "0.01", "--out", str(out),
                       "--manifest", str(manifest)) == 0
        assert json.loads(manifest.read_text())["command"] == "simulate"

    def test_stdout_output_skips_manifest(self, tmp_path, capsys,
                                          monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert run_cli("spectrum", "--epsilon", "0.075", "--out", "-") == 0
        capsys.readouterr()
        assert list(tmp_path.iterdir()) == []


class TestUsageErrors:
    def test_unknown_command(self, capsys):
        assert run_cli("frobnicate") == 1
        assert "ptdimer: error" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert run_cli("spectrum", "--bogus", "1") == 1
        assert "ptdimer: error" in capsys.readouterr().err

    def test_malformed_range(self, tmp_path, capsys):
        code = run_cli("sweep", "--mode", "spectral-eps-a",
                       "--epsilon-range", "0.05;0.6;4",
                       "--param-range", "0,0.8,9",
                       "--out", str(tmp_path / "map.csv"))
        assert code == 1
        assert "epsilon_range" in capsys.readouterr().err

    def test_malformed_init_vector(self, capsys):
        code = run_cli("simulate", "--epsilon", "0.075",
                       "--init", "1,0,0", "--out", "-")
        assert code == 1
        assert "init" in capsys.readouterr().err
