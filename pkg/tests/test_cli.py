import json

import numpy as np
import pytest

from polygrid.cli import EXIT_INPUT, EXIT_OK, main
from polygrid.files import complex_matrix_to_json


@pytest.fixture(scope="module")
def small_files(tmp_path_factory):
    """A 5-node single-feeder system written out as CLI input files."""
    root = tmp_path_factory.mktemp("cli_system")
    z = complex_matrix_to_json(np.array([[0.02 + 0.06j]]))
    grid = {
        "per_unit": {"Pb_W": 10e6, "Vb_V": 24.9e3},
        "phases": 1,
        "nodes": [
            {"id": "S", "role": "slack"},
            {"id": "L", "role": "resource"},
            {"id": "Z1", "role": "zero"},
            {"id": "Z2", "role": "zero"},
            {"id": "Z3", "role": "zero"},
        ],
        "branches": [
            {"from": "S", "to": "Z1", "z_pu": z},
            {"from": "Z1", "to": "Z2", "z_pu": z},
            {"from": "Z2", "to": "Z3", "z_pu": z},
            {"from": "Z3", "to": "L", "z_pu": z},
        ],
        "shunts": [],
    }
    devices = {
        "thevenin": [
            {
                "node": "S",
                "v_source_polar_pu_deg": [[1.0, 0.0]],
                "z_pu": complex_matrix_to_json(np.array([[0.001 + 0.01j]])),
            }
        ],
        "polynomial": [
            {
                "node": "L",
                "phases": [
                    {
                        "p0": -0.4,
                        "q0": -0.1,
                        "v0": 1.0,
                        "alpha_re": 0.0,
                        "beta_re": 0.0,
                        "gamma_re": 1.0,
                        "alpha_im": 0.0,
                        "beta_im": 0.0,
                        "gamma_im": 1.0,
                    }
                ],
            }
        ],
    }
    profiles = "time,node,lambda\n" + "\n".join(
        f"{t},L,{0.5 + 0.02 * t}" for t in range(4)
    )
    grid_path = root / "grid.json"
    devices_path = root / "devices.json"
    profiles_path = root / "profiles.csv"
    grid_path.write_text(json.dumps(grid))
    devices_path.write_text(json.dumps(devices))
    profiles_path.write_text(profiles + "\n")
    return grid_path, devices_path, profiles_path


def run_cli(args):
    return main([str(a) for a in args])


class TestValidate:
    def test_bundled_system_passes(self, capsys):
        assert run_cli(["validate"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "kron eligible: True" in out

    def test_small_system(self, small_files, capsys):
        grid, devices, _ = small_files
        assert run_cli(["validate", "--grid", grid, "--devices", devices]) == EXIT_OK


class TestPfs:
    def test_constant_loading(self, small_files, capsys):
        grid, devices, _ = small_files
        code = run_cli(
            ["pfs", "--grid", grid, "--devices", devices, "--lambda", "1.0"]
        )
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["converged"]
        assert payload["iterations"] <= 6
        assert len(payload["voltages"]) == 5
        assert payload["wall_time_ns"] > 0

    def test_profile_time_index(self, small_files, capsys):
        grid, devices, profiles = small_files
        code = run_cli(
            [
                "pfs",
                "--grid",
                grid,
                "--devices",
                devices,
                "--profiles",
                profiles,
                "--lambda",
                "2",
            ]
        )
        assert code == EXIT_OK
        assert json.loads(capsys.readouterr().out)["converged"]

    def test_reduced_step(self, small_files, capsys):
        grid, devices, _ = small_files
        code = run_cli(
            [
                "pfs",
                "--grid",
                grid,
                "--devices",
                devices,
                "--lambda",
                "1.0",
                "--step",
                "1",
                "--batch",
                "3",
            ]
        )
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["voltages"]) == 2  # S and L remain

    def test_step_out_of_range(self, small_files, capsys):
        grid, devices, _ = small_files
        code = run_cli(
            [
                "pfs",
                "--grid",
                grid,
                "--devices",
                devices,
                "--lambda",
                "1.0",
                "--step",
                "9",
                "--batch",
                "3",
            ]
        )
        assert code == EXIT_INPUT

    def test_missing_grid_file(self, capsys):
        assert run_cli(["pfs", "--grid", "/nope.json", "--lambda", "1.0"]) == EXIT_INPUT


class TestSe:
    def test_estimate_small(self, small_files, capsys):
        grid, devices, _ = small_files
        code = run_cli(
            ["se", "--grid", grid, "--devices", devices, "--lambda", "1.0",
             "--seed", "3", "--draws", "4"]
        )
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["rmse_vs_truth"] < 0.01
        assert payload["cond_gain"] > 1.0
        assert len(payload["x_hat"]) == 10


class TestVsa:
    def test_nose_curve_csv(self, small_files, tmp_path, capsys):
        grid, devices, _ = small_files
        nose = tmp_path / "nose.csv"
        code = run_cli(
            ["vsa", "--grid", grid, "--devices", devices, "--nose-csv", nose]
        )
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["nose_detected"]
        assert payload["lambda_max"] > 0
        lines = nose.read_text().strip().splitlines()
        assert lines[0] == "xi,v_min,v_mean"
        assert len(lines) == len(payload["trace"]) + 1


class TestReduce:
    def test_schedule_summary(self, small_files, capsys):
        grid, devices, _ = small_files
        code = run_cli(
            ["reduce", "--grid", grid, "--devices", devices, "--batch", "3"]
        )
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["steps"]) == 2
        assert payload["steps"][1]["eliminated_nodes"] == ["Z1", "Z2", "Z3"]

    def test_single_step_with_matrices(self, small_files, capsys):
        grid, devices, _ = small_files
        code = run_cli(
            ["reduce", "--grid", grid, "--devices", devices, "--batch", "3",
             "--step", "1"]
        )
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["y_reduced"]) == 2


class TestBench:
    def test_small_bench_writes_reports(self, small_files, tmp_path, capsys):
        grid, devices, profiles = small_files
        out = tmp_path / "out"
        code = run_cli(
            [
                "bench", "--grid", grid, "--devices", devices, "--profiles", profiles,
                "--batch", "3", "--repetitions", "1", "--warmup", "0",
                "--time-index", "1", "--out-dir", out,
            ]
        )
        assert code == EXIT_OK
        assert (out / "benchmark.csv").exists()
        assert (out / "benchmark.json").exists()
        assert (out / "plot_times.py").exists()
        assert (out / "plot_condition.py").exists()
        text = capsys.readouterr().out
        assert "step  0  pfs  ok" in text

    def test_parallel_mode(self, small_files, tmp_path, capsys):
        grid, devices, profiles = small_files
        out = tmp_path / "out_par"
        code = run_cli(
            [
                "bench", "--grid", grid, "--devices", devices, "--profiles", profiles,
                "--batch", "3", "--time-index", "1", "--out-dir", out, "--parallel",
            ]
        )
        assert code == EXIT_OK
        report = json.loads((out / "benchmark.json").read_text())
        assert all(c["median_time_ns"] is None for c in report["cells"])
