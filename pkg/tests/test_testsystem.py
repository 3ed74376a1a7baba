import json

import numpy as np
import pytest

from polygrid.errors import InputFormatError
from polygrid.grid import validate_hypotheses
from polygrid.testsystem import TestSystemSpec, build_test_system, default_paths


class TestBundledSystem:
    def test_counts(self, test_system):
        grid, devices = test_system
        assert grid.n_nodes == 116
        assert grid.dimension == 348
        assert len(grid.slack_nodes) == 1
        assert len(grid.resource_nodes) == 15
        assert len(grid.zero_injection_nodes) == 100
        assert len(grid.branches) == 115
        assert len(devices.polynomial) == 15

    def test_hypotheses_hold(self, test_system):
        grid, _ = test_system
        report = validate_hypotheses(grid)
        assert report.passed
        assert report.kron_eligible

    def test_slack_thevenin_rating(self, test_system):
        _, devices = test_system
        spec = TestSystemSpec()
        z = devices.thevenin["S"].z
        assert np.allclose(z, z[0, 0] * np.eye(3))  # diagonal, equal entries
        assert abs(z[0, 0]) == pytest.approx(spec.slack_impedance_pu, rel=1e-9)
        assert z[0, 0].real / z[0, 0].imag == pytest.approx(0.1, rel=1e-9)
        assert z[0, 0] == pytest.approx(0.00995 + 0.0995j, rel=1e-2)

    def test_positive_sequence_source(self, test_system):
        _, devices = test_system
        v = devices.thevenin["S"].v_source
        assert np.allclose(np.abs(v), 1.0)
        assert np.angle(v[1]) == pytest.approx(-2 * np.pi / 3)
        assert np.angle(v[2]) == pytest.approx(2 * np.pi / 3)

    def test_compensators_pinned_at_one(self, test_system):
        _, devices = test_system
        for node, series in devices.profile.factors.items():
            if node.startswith("C"):
                assert np.all(series == 1.0)

    def test_loads_consume_generators_inject(self, test_system):
        _, devices = test_system
        for node, pm in devices.polynomial.items():
            total_p = float(np.sum(pm.p0))
            if node.startswith("L"):
                assert total_p < 0
            elif node.startswith("G"):
                assert total_p > 0
            else:
                assert total_p == 0
                assert float(np.sum(pm.q0)) > 0

    def test_zero_injection_names_ordered(self, test_system):
        grid, _ = test_system
        assert grid.zero_injection_nodes == tuple(f"Z{i}" for i in range(1, 101))


class TestBuildErrors:
    def test_missing_config_code(self, tmp_path):
        configs = json.loads(default_paths()["line_configs"].read_text())
        del configs["configs"]["IEEE-301"]
        path = tmp_path / "configs.json"
        path.write_text(json.dumps(configs))
        with pytest.raises(InputFormatError, match="IEEE-301"):
            build_test_system(line_configs_path=path)

    def test_count_mismatch(self, tmp_path):
        grid_data = json.loads(default_paths()["grid"].read_text())
        # drop one zero-injection node and its branches
        grid_data["nodes"] = [n for n in grid_data["nodes"] if n["id"] != "Z100"]
        grid_data["branches"] = [
            b for b in grid_data["branches"] if "Z100" not in (b["from"], b["to"])
        ]
        path = tmp_path / "grid.json"
        path.write_text(json.dumps(grid_data))
        with pytest.raises(InputFormatError, match="node counts"):
            build_test_system(grid_path=path)

    def test_base_mismatch(self, tmp_path):
        grid_data = json.loads(default_paths()["grid"].read_text())
        grid_data["per_unit"]["Pb_W"] = 5e6
        path = tmp_path / "grid.json"
        path.write_text(json.dumps(grid_data))
        with pytest.raises(InputFormatError, match="bases"):
            build_test_system(grid_path=path)


class TestDeterminism:
    def test_rebuild_is_identical(self, test_system):
        grid1, _ = test_system
        grid2, _ = build_test_system()
        assert grid1.nodes == grid2.nodes
        for b1, b2 in zip(grid1.branches, grid2.branches):
            assert np.array_equal(b1.z, b2.z)
