"""Benchmark harness: conditioning and timing across the reduction schedule.

For every step of the schedule the three studies run on the reduced model:
power flow (iterations, Jacobian condition number, solve time), state
estimation (gain condition number, estimate error, solve time), and
stability assessment (continuation steps, loadability, trace time).
Timing uses a monotonic clock, discards warmup runs, and reports medians.
Every cell embeds a correctness check and is only marked valid when that
check passes. With a fixed seed, all non-timing fields are reproducible
bit for bit.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .case import AnalysisCase, full_case, loading_from_profile, loading_vector, reduced_case
from .devices import DeviceSet
from .errors import PolygridError
from .estimation import (
    PmuSpec,
    build_measurement_model,
    emulate_pmu,
    exact_measurements,
    wls_apply,
    wls_factorize,
    wls_solve,
)
from .grid import GridModel
from .kron import recover_interior, reduction_schedule
from .powerflow import solve_nrm
from .vsa import Trajectory, run_continuation

ANALYSES = ("pfs", "se", "vsa")


@dataclass(frozen=True)
class BenchmarkConfig:
    """Knobs of one benchmark run; defaults match the bundled system."""

    batch: int = 10
    time_index: int = 12
    seed: int = 12061
    repetitions: int = 30
    warmup: int = 3
    sigma: float = 0.1
    eps: float = 1e-8
    consistency_tol: float = 1e-8
    vsa_origin: float = 1.0
    pmu: PmuSpec = field(default_factory=PmuSpec)
    mode: str = "timing"  # "timing" (sequential) or "correctness" (parallel, untimed)

    def to_json(self) -> dict:
        return {
            "batch": self.batch,
            "time_index": self.time_index,
            "seed": self.seed,
            "repetitions": self.repetitions,
            "warmup": self.warmup,
            "sigma": self.sigma,
            "eps": self.eps,
            "consistency_tol": self.consistency_tol,
            "vsa_origin": self.vsa_origin,
            "mode": self.mode,
            "pmu": {
                "fsr_voltage": self.pmu.fsr_voltage,
                "fsr_current": self.pmu.fsr_current,
                "sigma_magnitude": self.pmu.sigma_magnitude,
                "sigma_angle": self.pmu.sigma_angle,
                "virtual_scale": self.pmu.virtual_scale,
            },
        }


@dataclass
class BenchCell:
    step: int
    analysis: str
    metrics: dict
    times_ns: list[int]
    median_time_ns: int | None
    passed: bool
    error: str = ""

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "analysis": self.analysis,
            "metrics": self.metrics,
            "times_ns": list(self.times_ns),
            "median_time_ns": self.median_time_ns,
            "passed": self.passed,
            "error": self.error,
        }


@dataclass
class BenchmarkReport:
    config: dict
    system: dict
    cells: list[BenchCell]

    def cell(self, step: int, analysis: str) -> BenchCell:
        for c in self.cells:
            if c.step == step and c.analysis == analysis:
                return c
        raise KeyError((step, analysis))

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.cells)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "system": self.system,
            "cells": [c.to_json() for c in self.cells],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BenchmarkReport":
        cells = [
            BenchCell(
                step=c["step"],
                analysis=c["analysis"],
                metrics=c["metrics"],
                times_ns=list(c["times_ns"]),
                median_time_ns=c["median_time_ns"],
                passed=c["passed"],
                error=c.get("error", ""),
            )
            for c in data["cells"]
        ]
        return cls(config=data["config"], system=data["system"], cells=cells)


def default_stability_trajectory(case: AnalysisCase, origin: float = 1.0) -> Trajectory:
    """Vary the consumers: direction 1 on resource nodes with negative total P0."""
    nodes = case.resource_nodes
    t = np.zeros(len(nodes))
    for i, name in enumerate(nodes):
        pm = case.devices.polynomial[name]
        if float(np.sum(pm.p0)) < 0.0:
            t[i] = 1.0
    if not np.any(t):
        t[:] = 1.0
    return Trajectory(lam0=np.full(len(nodes), origin), t=t)


def _solution_checksum(*arrays) -> str:
    """Stable digest of solution vectors, for cross-run reproducibility checks."""
    digest = hashlib.sha256()
    for a in arrays:
        a = np.asarray(a)
        if np.iscomplexobj(a):
            a = np.concatenate([a.real.ravel(), a.imag.ravel()])
        digest.update(np.round(np.asarray(a, dtype=float).ravel(), 12).tobytes())
    return digest.hexdigest()[:16]


def _timed(kernel, repetitions: int, warmup: int) -> tuple[list[int], int | None]:
    """Run the kernel warmup+repetitions times; return kept samples and median."""
    if repetitions <= 0:
        return [], None
    samples = []
    for i in range(warmup + repetitions):
        start = time.perf_counter_ns()
        kernel()
        samples.append(time.perf_counter_ns() - start)
    kept = samples[warmup:]
    return kept, int(np.median(kept))


def _bench_lambda(case0: AnalysisCase, config: BenchmarkConfig) -> np.ndarray:
    if case0.devices.profile is not None:
        return loading_from_profile(case0, config.time_index)
    return loading_vector(case0, 1.0)


def _pfs_cell(case, lam, v_full, step, config) -> BenchCell:
    timed = lambda: solve_nrm(case, lam, eps=config.eps, compute_condition=False)
    times, median = ([], None) if config.mode == "correctness" else _timed(
        timed, config.repetitions, config.warmup
    )
    result = solve_nrm(case, lam, eps=config.eps, compute_condition=True)
    v = result.voltage()
    if step is not None and step.eliminated.size:
        retained_dev = float(np.max(np.abs(v - v_full[step.retained])))
        interior_dev = float(
            np.max(np.abs(recover_interior(step, v) - v_full[step.eliminated]))
        )
    else:
        retained_dev = float(np.max(np.abs(v - v_full)))
        interior_dev = 0.0
    consistent = (
        result.converged
        and retained_dev <= config.consistency_tol
        and interior_dev <= config.consistency_tol
    )
    metrics = {
        "iterations": result.iterations,
        "converged": result.converged,
        "cond_jacobian": result.jacobian_condition,
        "final_mismatch_inf": result.final_mismatch_inf,
        "retained_deviation": retained_dev,
        "interior_deviation": interior_dev,
        "consistency_pass": consistent,
        "solution_checksum": _solution_checksum(v),
    }
    step_index = step.step_index if step is not None else 0
    return BenchCell(step_index, "pfs", metrics, times, median, consistent), v


def _se_cell(case, truth_v, step_index, config) -> BenchCell:
    model = build_measurement_model(case, config.pmu)
    y = emulate_pmu(truth_v, case, config.pmu, seed=(config.seed, step_index))

    def kernel():
        factor = wls_factorize(model)
        wls_apply(model, factor, y)

    times, median = ([], None) if config.mode == "correctness" else _timed(
        kernel, config.repetitions, config.warmup
    )
    estimate = wls_solve(model.with_measurements(y))
    x_true = np.concatenate([truth_v.real, truth_v.imag])
    rmse = float(np.sqrt(np.mean((estimate.x_hat - x_true) ** 2)))
    exact = wls_apply(model, wls_factorize(model), exact_measurements(truth_v, case))
    recovery_err = float(np.max(np.abs(exact - x_true)))
    consistent = recovery_err <= 1e-9
    metrics = {
        "cond_gain": estimate.gain_condition,
        "rmse_vs_truth": rmse,
        "residual_norm": estimate.residual_norm,
        "noiseless_recovery_error": recovery_err,
        "n_virtual_nodes": len(case.zero_injection_nodes),
        "consistency_pass": consistent,
        "solution_checksum": _solution_checksum(estimate.x_hat),
    }
    return BenchCell(step_index, "se", metrics, times, median, consistent)


def _vsa_cell(case, traj, step_index, config, lambda_max_ref) -> BenchCell:
    timed = lambda: run_continuation(case, traj, sigma=config.sigma, eps=config.eps)
    times, median = ([], None) if config.mode == "correctness" else _timed(
        timed, config.repetitions, config.warmup
    )
    result = run_continuation(case, traj, sigma=config.sigma, eps=config.eps)
    if lambda_max_ref is None:
        lambda_max_ref = result.lambda_max
    consistent = bool(
        result.nose_detected
        and abs(result.lambda_max - lambda_max_ref) <= config.sigma
    )
    metrics = {
        "lambda_max": result.lambda_max,
        "continuation_steps": result.steps,
        "nose_detected": result.nose_detected,
        "lambda_max_reference": lambda_max_ref,
        "consistency_pass": consistent,
        "solution_checksum": _solution_checksum(
            [result.lambda_max], [p.xi for p in result.trace]
        ),
    }
    return BenchCell(step_index, "vsa", metrics, times, median, consistent)


def run_benchmark(
    grid: GridModel,
    devices: DeviceSet,
    schedule=None,
    config: BenchmarkConfig | None = None,
) -> BenchmarkReport:
    """Run all three studies at every reduction step and collect the report.

    Analysis failures are recorded in their cell and the benchmark carries
    on. In "correctness" mode the cells run concurrently and timing fields
    stay empty; in "timing" mode everything runs sequentially on one worker.
    """
    config = config or BenchmarkConfig()
    if schedule is None:
        schedule = reduction_schedule(grid, config.batch)
    case0 = full_case(grid, devices)
    lam = _bench_lambda(case0, config)

    base = solve_nrm(case0, lam, eps=config.eps, compute_condition=False)
    if not base.converged:
        raise PolygridError("power flow on the unreduced system did not converge")
    v_full = base.voltage()
    traj0 = default_stability_trajectory(case0, config.vsa_origin)
    try:
        vsa0 = run_continuation(case0, traj0, sigma=config.sigma, eps=config.eps)
        lambda_max_ref = vsa0.lambda_max
    except PolygridError:
        # recorded again per cell; reduced cells then reference themselves
        lambda_max_ref = None

    def cases():
        for step in schedule:
            yield step, (
                case0 if step.eliminated.size == 0 else reduced_case(grid, devices, step)
            )

    def build_cells(step, case):
        cells = []
        truth = None
        for analysis in ANALYSES:
            try:
                if analysis == "pfs":
                    cell, truth = _pfs_cell(case, lam, v_full, step, config)
                elif analysis == "se":
                    if truth is None:
                        truth = solve_nrm(
                            case, lam, eps=config.eps, compute_condition=False
                        ).voltage()
                    cell = _se_cell(case, truth, step.step_index, config)
                else:
                    traj = default_stability_trajectory(case, config.vsa_origin)
                    cell = _vsa_cell(case, traj, step.step_index, config, lambda_max_ref)
            except PolygridError as exc:
                cell = BenchCell(
                    step.step_index, analysis, {}, [], None, False, error=str(exc)
                )
            cells.append(cell)
        return cells

    all_cells: list[BenchCell] = []
    if config.mode == "correctness":
        with concurrent.futures.ThreadPoolExecutor() as pool:
            futures = [pool.submit(build_cells, step, case) for step, case in cases()]
            for fut in futures:
                all_cells.extend(fut.result())
    else:
        for step, case in cases():
            all_cells.extend(build_cells(step, case))

    system = {
        "n_nodes": grid.n_nodes,
        "n_phases": grid.n_phases,
        "n_branches": len(grid.branches),
        "n_slack": len(grid.slack_nodes),
        "n_resource": len(grid.resource_nodes),
        "n_zero_injection": len(grid.zero_injection_nodes),
        "steps": len(schedule),
    }
    return BenchmarkReport(config=config.to_json(), system=system, cells=all_cells)


# -- report emission -------------------------------------------------------


def _csv_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv_rows(report: BenchmarkReport) -> list[tuple[str, str, str, str]]:
    """Stable (step, analysis, metric, value) rows."""
    rows = []
    for cell in report.cells:
        for metric in sorted(cell.metrics):
            rows.append(
                (str(cell.step), cell.analysis, metric, _csv_value(cell.metrics[metric]))
            )
        if cell.median_time_ns is not None:
            rows.append(
                (str(cell.step), cell.analysis, "median_time_ns", str(cell.median_time_ns))
            )
        rows.append((str(cell.step), cell.analysis, "passed", _csv_value(cell.passed)))
        if cell.error:
            rows.append((str(cell.step), cell.analysis, "error", cell.error))
    return rows


def emit_report(report: BenchmarkReport, out_dir, fmt: str = "both") -> list[Path]:
    """Write the report as CSV and/or JSON; returns written paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PolygridError(f"cannot create output directory {out_dir}: {exc}") from exc
    written = []
    if fmt in ("csv", "both"):
        path = out_dir / "benchmark.csv"
        lines = ["step,analysis,metric,value"]
        lines += [",".join(row) for row in report_to_csv_rows(report)]
        _write_text(path, "\n".join(lines) + "\n")
        written.append(path)
    if fmt in ("json", "both"):
        path = out_dir / "benchmark.json"
        _write_text(path, json.dumps(report.to_json(), indent=1, sort_keys=True) + "\n")
        written.append(path)
    return written


def _write_text(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise PolygridError(f"cannot write {path}: {exc}") from exc


PLOT_TIMES_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Median execution time per reduction step, one line per analysis.

Reads benchmark.csv (columns step,analysis,metric,value) from the same
directory and writes execution_times.png.
\"\"\"
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
series = defaultdict(dict)
with (here / "benchmark.csv").open() as fh:
    for row in csv.DictReader(fh):
        if row["metric"] == "median_time_ns":
            series[row["analysis"]][int(row["step"])] = float(row["value"]) / 1e6

fig, ax = plt.subplots(figsize=(6, 4))
for analysis, points in sorted(series.items()):
    steps = sorted(points)
    ax.semilogy(steps, [points[s] for s in steps], marker="o", label=analysis.upper())
ax.set_xlabel("reduction step")
ax.set_ylabel("median execution time [ms]")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(here / "execution_times.png", dpi=150)
print("wrote", here / "execution_times.png")
"""

PLOT_CONDITION_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Condition numbers per reduction step: power-flow Jacobian and gain matrix.

Reads benchmark.csv from the same directory and writes condition_numbers.png.
\"\"\"
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
wanted = {("pfs", "cond_jacobian"): "Jacobian", ("se", "cond_gain"): "gain matrix"}
series = defaultdict(dict)
with (here / "benchmark.csv").open() as fh:
    for row in csv.DictReader(fh):
        key = (row["analysis"], row["metric"])
        if key in wanted:
            series[wanted[key]][int(row["step"])] = float(row["value"])

fig, ax = plt.subplots(figsize=(6, 4))
for label, points in sorted(series.items()):
    steps = sorted(points)
    ax.semilogy(steps, [points[s] for s in steps], marker="s", label=label)
ax.set_xlabel("reduction step")
ax.set_ylabel("condition number")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(here / "condition_numbers.png", dpi=150)
print("wrote", here / "condition_numbers.png")
"""


def emit_plots(out_dir) -> list[Path]:
    """Write plot scripts that rebuild the report figures from benchmark.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    times = out_dir / "plot_times.py"
    cond = out_dir / "plot_condition.py"
    _write_text(times, PLOT_TIMES_SCRIPT)
    _write_text(cond, PLOT_CONDITION_SCRIPT)
    return [times, cond]
