"""The bundled 116-node benchmark feeder.

One slack node feeds five laterals. Each lateral is a chain of 20
zero-injection nodes with a generator, a load, and a compensator tapped at
chain positions 5, 10, and 15. All lines are 5 km of untransposed overhead
construction. The topology, line constants, device parameters, and loading
profiles live in editable data files under ``polygrid/data``; this module
loads them and validates the counts against the expected layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .devices import DeviceSet
from .errors import InputFormatError
from .files import load_device_set, load_grid, load_line_configs
from .grid import GridModel


@dataclass(frozen=True)
class TestSystemSpec:
    """Expected layout and ratings of the benchmark feeder."""

    __test__ = False  # not a pytest class despite the name

    n_slack: int = 1
    n_resource: int = 15
    n_zero_injection: int = 100
    n_phases: int = 3
    line_length_km: float = 5.0
    config_codes: tuple[str, ...] = ("IEEE-300", "IEEE-301")
    sc_power_va: float = 100e6
    slack_r_over_x: float = 0.1
    base_power_w: float = 10e6
    base_voltage_v: float = 24.9e3

    @property
    def slack_impedance_pu(self) -> float:
        """Magnitude of the slack source impedance: Pb / S_sc in per unit."""
        return self.base_power_w / self.sc_power_va


def data_path(name: str) -> Path:
    return Path(str(resources.files("polygrid").joinpath("data", name)))


def default_paths() -> dict[str, Path]:
    return {
        "grid": data_path("test_grid.json"),
        "devices": data_path("test_devices.json"),
        "line_configs": data_path("line_configs.json"),
        "profiles": data_path("profiles.csv"),
    }


def build_test_system(
    spec: TestSystemSpec | None = None,
    grid_path=None,
    devices_path=None,
    line_configs_path=None,
    profiles_path=None,
) -> tuple[GridModel, DeviceSet]:
    """Load the benchmark system and check it against the expected layout."""
    spec = spec or TestSystemSpec()
    paths = default_paths()
    configs = load_line_configs(line_configs_path or paths["line_configs"])
    for code in spec.config_codes:
        if code not in configs:
            raise InputFormatError(f"line configuration {code!r} is missing")

    grid = load_grid(grid_path or paths["grid"], configs)
    if grid.n_phases != spec.n_phases:
        raise InputFormatError(
            f"expected {spec.n_phases} phases, grid has {grid.n_phases}"
        )
    counts = (
        len(grid.slack_nodes),
        len(grid.resource_nodes),
        len(grid.zero_injection_nodes),
    )
    expected = (spec.n_slack, spec.n_resource, spec.n_zero_injection)
    if counts != expected:
        raise InputFormatError(
            f"node counts (slack, resource, zero) = {counts}, expected {expected}"
        )
    if abs(grid.base.power_w - spec.base_power_w) > 1e-6 or abs(
        grid.base.voltage_v - spec.base_voltage_v
    ) > 1e-6:
        raise InputFormatError("per-unit bases do not match the system spec")

    devices = load_device_set(
        devices_path or paths["devices"], profiles_path or paths["profiles"]
    )
    devices.validate_against(grid)
    return grid, devices
