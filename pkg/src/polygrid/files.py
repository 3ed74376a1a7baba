"""File formats: grid descriptions, line configurations, devices, profiles.

All physical-unit conversion to per unit happens here, at ingestion.
Complex matrices are serialized as nested lists of [re, im] pairs.

Grid description (JSON)
    per_unit {Pb_W, Vb_V}; phases; nodes [{id, role}] with role in
    slack | resource | zero; branches [{from, to, config_code, length_km}]
    or [{from, to, z_pu}]; shunts [{node, y_pu}]; line_model "pi" | "series"
    (whether configured lines contribute charging shunts to their end nodes).

Line configurations (JSON)
    configs {code: {z_ohm_per_km, y_s_per_km?}}; impedance per km in ohms,
    optional shunt admittance per km in siemens.

Devices (JSON)
    thevenin [{node, v_source_polar_pu_deg [[mag, deg] per phase], z_pu}];
    polynomial [{node, phases [{p0, q0, v0, alpha_re, beta_re, gamma_re,
    alpha_im, beta_im, gamma_im}]}]. Powers and voltages in per unit.

Profiles (CSV)
    header time,node,lambda; one loading factor per (time step, node).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .devices import DeviceSet, LoadingProfile, PolynomialModel, TheveninEquivalent
from .errors import InputFormatError
from .grid import Branch, GridModel, PerUnitBase, Shunt
from .kron import ReductionStep


def complex_matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def complex_matrix_from_json(data, name: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"{name}: expected nested [re, im] lists") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InputFormatError(f"{name}: expected shape (rows, cols, 2), got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True)
class LineConfig:
    """Per-km compound parameters of one line construction code."""

    code: str
    z_ohm_per_km: np.ndarray
    y_s_per_km: np.ndarray | None = None


def load_line_configs(path) -> dict[str, LineConfig]:
    raw = _read_json(path)
    configs = {}
    for code, entry in raw.get("configs", {}).items():
        z = complex_matrix_from_json(entry["z_ohm_per_km"], f"config {code} impedance")
        y = None
        if entry.get("y_s_per_km") is not None:
            y = complex_matrix_from_json(entry["y_s_per_km"], f"config {code} shunt")
        configs[code] = LineConfig(code=code, z_ohm_per_km=z, y_s_per_km=y)
    if not configs:
        raise InputFormatError(f"{path}: no line configurations found")
    return configs


def _read_json(path) -> dict:
    path = Path(path)
    try:
        with path.open() as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputFormatError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: invalid JSON ({exc})") from exc


def load_grid(path, line_configs: dict[str, LineConfig] | None = None) -> GridModel:
    """Read a grid description, converting physical units to per unit.

    Branches given by configuration code require ``line_configs``. When the
    file sets line_model to "pi", each configured line's shunt admittance
    (if any) is split in half onto its end nodes.
    """
    raw = _read_json(path)
    try:
        base = PerUnitBase(
            power_w=float(raw["per_unit"]["Pb_W"]),
            voltage_v=float(raw["per_unit"]["Vb_V"]),
        )
        n_phases = int(raw["phases"])
        nodes = [(str(n["id"]), str(n["role"])) for n in raw["nodes"]]
        line_model = raw.get("line_model", "series")
        if line_model not in ("pi", "series"):
            raise InputFormatError(f"{path}: unknown line_model {line_model!r}")

        zb = base.impedance_ohm
        branches = []
        charging: dict[str, np.ndarray] = {}
        for b in raw.get("branches", []):
            if "z_pu" in b:
                z_pu = complex_matrix_from_json(b["z_pu"], "branch impedance")
            else:
                code = b.get("config_code")
                if code is None:
                    raise InputFormatError(
                        f"{path}: branch {b.get('from')}-{b.get('to')} has neither z_pu nor config_code"
                    )
                if line_configs is None or code not in line_configs:
                    raise InputFormatError(f"{path}: missing line configuration {code!r}")
                cfg = line_configs[code]
                length = float(b["length_km"])
                z_pu = cfg.z_ohm_per_km * length / zb
                if line_model == "pi" and cfg.y_s_per_km is not None:
                    y_half = cfg.y_s_per_km * length * zb / 2.0
                    for end in (str(b["from"]), str(b["to"])):
                        charging[end] = charging.get(end, 0) + y_half
            branches.append(Branch(from_node=str(b["from"]), to_node=str(b["to"]), z=z_pu))

        shunts: dict[str, np.ndarray] = dict(charging)
        for s in raw.get("shunts", []):
            y = complex_matrix_from_json(s["y_pu"], "shunt admittance")
            node = str(s["node"])
            shunts[node] = shunts.get(node, 0) + y

        return GridModel(
            n_phases=n_phases,
            nodes=nodes,
            branches=branches,
            shunts=[Shunt(node=n, y=y) for n, y in sorted(shunts.items())],
            base=base,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputFormatError):
            raise
        raise InputFormatError(f"{path}: {exc}") from exc


def load_devices(path) -> DeviceSet:
    raw = _read_json(path)
    try:
        thevenin = {}
        for entry in raw.get("thevenin", []):
            polar = np.asarray(entry["v_source_polar_pu_deg"], dtype=float)
            v = polar[:, 0] * np.exp(1j * np.deg2rad(polar[:, 1]))
            te = TheveninEquivalent(
                node=str(entry["node"]),
                v_source=v,
                z=complex_matrix_from_json(entry["z_pu"], "Thevenin impedance"),
            )
            thevenin[te.node] = te
        polynomial = {}
        for entry in raw.get("polynomial", []):
            phases = entry["phases"]
            pm = PolynomialModel(
                node=str(entry["node"]),
                p0=[p["p0"] for p in phases],
                q0=[p["q0"] for p in phases],
                v0=[p["v0"] for p in phases],
                alpha_re=[p["alpha_re"] for p in phases],
                beta_re=[p["beta_re"] for p in phases],
                gamma_re=[p["gamma_re"] for p in phases],
                alpha_im=[p["alpha_im"] for p in phases],
                beta_im=[p["beta_im"] for p in phases],
                gamma_im=[p["gamma_im"] for p in phases],
            )
            polynomial[pm.node] = pm
        return DeviceSet(thevenin=thevenin, polynomial=polynomial)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, InputFormatError):
            raise
        raise InputFormatError(f"{path}: {exc}") from exc


def load_profiles(path) -> LoadingProfile:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) < {"time", "node", "lambda"}:
                raise InputFormatError(f"{path}: expected header time,node,lambda")
            samples: dict[str, dict[int, float]] = {}
            for row in reader:
                samples.setdefault(row["node"], {})[int(row["time"])] = float(row["lambda"])
    except FileNotFoundError:
        raise InputFormatError(f"{path}: file not found") from None
    except (KeyError, ValueError) as exc:
        if isinstance(exc, InputFormatError):
            raise
        raise InputFormatError(f"{path}: {exc}") from exc
    if not samples:
        raise InputFormatError(f"{path}: no profile rows")
    times = sorted({t for series in samples.values() for t in series})
    factors = {}
    for node, series in samples.items():
        if sorted(series) != times:
            raise InputFormatError(f"{path}: node {node} misses some time steps")
        factors[node] = np.array([series[t] for t in times], dtype=float)
    return LoadingProfile(times=np.asarray(times, dtype=float), factors=factors)


def load_device_set(devices_path, profiles_path=None) -> DeviceSet:
    devices = load_devices(devices_path)
    if profiles_path is not None:
        profile = load_profiles(profiles_path)
        devices = DeviceSet(
            thevenin=devices.thevenin, polynomial=devices.polynomial, profile=profile
        )
    return devices


def reduction_step_to_json(step: ReductionStep, include_matrices: bool = True) -> dict:
    """JSON-serializable view of a reduction step."""
    out = {
        "step_index": step.step_index,
        "retained": [int(i) for i in step.retained],
        "eliminated": [int(i) for i in step.eliminated],
        "eliminated_nodes": list(step.eliminated_nodes),
        "dimension": int(step.dimension),
        "partial_batch": bool(step.partial_batch),
    }
    if include_matrices:
        out["y_reduced"] = complex_matrix_to_json(step.y_reduced)
        out["recovery"] = complex_matrix_to_json(step.recovery)
    return out
