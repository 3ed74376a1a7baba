"""Command-line interface.

Subcommands: validate, pfs, se, vsa, reduce, bench. All of them default to
the bundled benchmark system when no input files are given. Exit codes:
0 all checks pass, 2 analysis failure, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .case import full_case, loading_from_profile, loading_vector, reduced_case
from .errors import InputFormatError, PolygridError
from .estimation import (
    PmuSpec,
    build_measurement_model,
    emulate_pmu,
    monte_carlo_estimates,
    wls_solve,
)
from .files import (
    load_device_set,
    load_grid,
    load_line_configs,
    reduction_step_to_json,
)
from .grid import validate_hypotheses
from .kron import reduction_schedule
from .powerflow import solve_nrm
from .testsystem import default_paths
from .vsa import run_continuation

EXIT_OK = 0
EXIT_ANALYSIS = 2
EXIT_INPUT = 3


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--grid", type=Path, help="grid description JSON (default: bundled)")
    parser.add_argument("--devices", type=Path, help="device file JSON (default: bundled)")
    parser.add_argument("--line-configs", type=Path, help="line configuration JSON")
    parser.add_argument("--profiles", type=Path, help="loading profile CSV")
    parser.add_argument("--seed", type=int, default=12061, help="root random seed")
    parser.add_argument("--out-dir", type=Path, help="directory for output files")
    parser.add_argument(
        "--format", choices=("json", "csv", "both"), default="both", help="report format"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polygrid",
        description="Polyphase grid analyses over a Kron reduction schedule.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the grid hypotheses and report")
    _add_common(p)

    p = sub.add_parser("pfs", help="power-flow study")
    _add_common(p)
    p.add_argument("--lambda", dest="loading", default="1.0",
                   help="profile time index (integer) or constant factor (with decimal point)")
    p.add_argument("--step", type=int, default=0, help="reduction step")
    p.add_argument("--batch", type=int, default=10, help="nodes eliminated per step")

    p = sub.add_parser("se", help="linear state estimation")
    _add_common(p)
    p.add_argument("--lambda", dest="loading", default="1.0")
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--draws", type=int, default=1, help="Monte Carlo noise draws")

    p = sub.add_parser("vsa", help="continuation voltage stability assessment")
    _add_common(p)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--sigma", type=float, default=0.1, help="continuation step size")
    p.add_argument("--nose-csv", type=Path, help="write the traced curve as CSV")

    p = sub.add_parser("reduce", help="compute and export reduction steps")
    _add_common(p)
    p.add_argument("--step", type=int, help="export one step with full matrices")
    p.add_argument("--batch", type=int, default=10)

    p = sub.add_parser("bench", help="full conditioning/timing benchmark")
    _add_common(p)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--repetitions", type=int, default=30, help="timed samples per cell")
    p.add_argument("--warmup", type=int, default=3, help="discarded warm runs per cell")
    p.add_argument("--time-index", type=int, default=12, help="profile hour for loading")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument(
        "--parallel",
        action="store_true",
        help="correctness-only mode: run cells concurrently, skip timing",
    )

    return parser


def _load_system(args):
    paths = default_paths()
    configs = load_line_configs(args.line_configs or paths["line_configs"])
    grid = load_grid(args.grid or paths["grid"], configs)
    profiles = args.profiles or (paths["profiles"] if args.devices is None else None)
    devices = load_device_set(args.devices or paths["devices"], profiles)
    devices.validate_against(grid)
    return grid, devices


def _case_at_step(grid, devices, step_index: int, batch: int):
    if step_index == 0:
        return full_case(grid, devices), None
    schedule = reduction_schedule(grid, batch)
    if step_index >= len(schedule):
        raise InputFormatError(
            f"step {step_index} out of range; the schedule has {len(schedule)} steps"
        )
    step = schedule[step_index]
    return reduced_case(grid, devices, step), step


def _parse_loading(case, text: str):
    if "." in text or "e" in text.lower():
        return loading_vector(case, float(text))
    return loading_from_profile(case, int(text))


def _emit(args, name: str, payload: dict):
    text = json.dumps(payload, indent=1, sort_keys=True)
    print(text)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / name).write_text(text + "\n")


def _cmd_validate(args) -> int:
    grid, _ = _load_system(args)
    report = validate_hypotheses(grid)
    for check in report.checks:
        status = "pass" if check.passed else "FAIL"
        detail = f"  ({check.detail})" if check.detail else ""
        print(f"{status}  {check.name:20s} {check.target}{detail}")
    print(f"kron eligible: {report.kron_eligible}")
    return EXIT_OK if report.passed else EXIT_ANALYSIS


def _cmd_pfs(args) -> int:
    grid, devices = _load_system(args)
    case, _ = _case_at_step(grid, devices, args.step, args.batch)
    lam = _parse_loading(case, args.loading)
    start = time.perf_counter_ns()
    result = solve_nrm(case, lam)
    wall = time.perf_counter_ns() - start
    voltages = [
        {
            "node": name,
            "phase": p,
            "magnitude_pu": float(result.state.e[i * case.n_phases + p]),
            "angle_rad": float(result.state.theta[i * case.n_phases + p]),
        }
        for i, (name, _) in enumerate(case.node_roles)
        for p in range(case.n_phases)
    ]
    _emit(
        args,
        "pfs.json",
        {
            "step": args.step,
            "converged": result.converged,
            "iterations": result.iterations,
            "final_mismatch_inf": result.final_mismatch_inf,
            "cond_jacobian": result.jacobian_condition,
            "wall_time_ns": wall,
            "voltages": voltages,
        },
    )
    return EXIT_OK if result.converged else EXIT_ANALYSIS


def _cmd_se(args) -> int:
    grid, devices = _load_system(args)
    case, _ = _case_at_step(grid, devices, args.step, args.batch)
    lam = _parse_loading(case, args.loading)
    truth = solve_nrm(case, lam, compute_condition=False)
    if not truth.converged:
        print("power flow for the measurement truth did not converge", file=sys.stderr)
        return EXIT_ANALYSIS
    v = truth.voltage()
    x_true = np.concatenate([v.real, v.imag])
    pmu = PmuSpec()

    start = time.perf_counter_ns()
    model = build_measurement_model(case, pmu)
    y = emulate_pmu(v, case, pmu, seed=(args.seed, 0))
    estimate = wls_solve(model.with_measurements(y))
    wall = time.perf_counter_ns() - start

    if args.draws > 1:
        estimates = monte_carlo_estimates(case, v, pmu, args.draws, args.seed)
        rmse = float(np.sqrt(np.mean((estimates - x_true) ** 2)))
    else:
        rmse = float(np.sqrt(np.mean((estimate.x_hat - x_true) ** 2)))
    _emit(
        args,
        "se.json",
        {
            "step": args.step,
            "draws": args.draws,
            "cond_gain": estimate.gain_condition,
            "rmse_vs_truth": rmse,
            "residual_norm": estimate.residual_norm,
            "noise_model": model.noise_model,
            "wall_time_ns": wall,
            "x_hat": [float(x) for x in estimate.x_hat],
        },
    )
    return EXIT_OK


def _cmd_vsa(args) -> int:
    grid, devices = _load_system(args)
    case, _ = _case_at_step(grid, devices, args.step, args.batch)
    traj = bench_mod.default_stability_trajectory(case)
    start = time.perf_counter_ns()
    result = run_continuation(case, traj, sigma=args.sigma)
    wall = time.perf_counter_ns() - start
    trace = [
        {
            "xi": point.xi,
            "v_min": point.v_min,
            "v_mean": point.v_mean,
            "mismatch_inf": point.mismatch_inf,
        }
        for point in result.trace
    ]
    _emit(
        args,
        "vsa.json",
        {
            "step": args.step,
            "lambda_max": result.lambda_max,
            "steps": result.steps,
            "nose_detected": result.nose_detected,
            "wall_time_ns": wall,
            "trace": trace,
        },
    )
    if args.nose_csv is not None:
        lines = ["xi,v_min,v_mean"]
        lines += [f"{p.xi!r},{p.v_min!r},{p.v_mean!r}" for p in result.trace]
        args.nose_csv.parent.mkdir(parents=True, exist_ok=True)
        args.nose_csv.write_text("\n".join(lines) + "\n")
    return EXIT_OK if result.nose_detected else EXIT_ANALYSIS


def _cmd_reduce(args) -> int:
    grid, devices = _load_system(args)
    schedule = reduction_schedule(grid, args.batch)
    if args.step is not None:
        if args.step >= len(schedule):
            raise InputFormatError(
                f"step {args.step} out of range; the schedule has {len(schedule)} steps"
            )
        payload = reduction_step_to_json(schedule[args.step], include_matrices=True)
        _emit(args, f"reduction_step_{args.step}.json", payload)
    else:
        payload = {
            "steps": [reduction_step_to_json(s, include_matrices=False) for s in schedule]
        }
        _emit(args, "reduction_schedule.json", payload)
    return EXIT_OK


def _cmd_bench(args) -> int:
    grid, devices = _load_system(args)
    config = bench_mod.BenchmarkConfig(
        batch=args.batch,
        time_index=args.time_index,
        seed=args.seed,
        repetitions=args.repetitions,
        warmup=args.warmup,
        sigma=args.sigma,
        mode="correctness" if args.parallel else "timing",
    )
    report = bench_mod.run_benchmark(grid, devices, config=config)
    out_dir = args.out_dir or Path("bench_out")
    written = bench_mod.emit_report(report, out_dir, fmt=args.format)
    written += bench_mod.emit_plots(out_dir)
    for cell in report.cells:
        median = (
            f"{cell.median_time_ns / 1e6:10.3f} ms"
            if cell.median_time_ns is not None
            else "   (untimed)"
        )
        status = "ok " if cell.passed else "FAIL"
        print(f"step {cell.step:2d}  {cell.analysis:3s}  {status} {median}  {cell.error}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK if report.all_passed else EXIT_ANALYSIS


COMMANDS = {
    "validate": _cmd_validate,
    "pfs": _cmd_pfs,
    "se": _cmd_se,
    "vsa": _cmd_vsa,
    "reduce": _cmd_reduce,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PolygridError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
