"""Run the conditioning/timing benchmark across the reduction schedule.

Each cell times one study at one reduction step (median over warm
repetitions) and embeds a correctness check: power-flow solutions must
match the unreduced ones, noiseless estimation must recover the truth,
and the loadability limit must be invariant. This demo uses a trimmed
repetition count; the CLI equivalent of the full run is

    polygrid bench --out-dir bench_out

which also writes benchmark.csv / benchmark.json and the plot scripts.
"""

from polygrid import build_test_system
from polygrid.bench import BenchmarkConfig, emit_plots, emit_report, run_benchmark

grid, devices = build_test_system()
config = BenchmarkConfig(repetitions=5, warmup=1)
report = run_benchmark(grid, devices, config=config)

print("step  analysis  median [ms]   key metric")
for cell in report.cells:
    if cell.analysis == "pfs":
        extra = f"cond(J) = {cell.metrics['cond_jacobian']:.3e}"
    elif cell.analysis == "se":
        extra = f"cond(gain) = {cell.metrics['cond_gain']:.3e}"
    else:
        extra = (f"lambda_max = {cell.metrics['lambda_max']:.3f} "
                 f"in {cell.metrics['continuation_steps']} steps")
    ms = cell.median_time_ns / 1e6
    print(f"  {cell.step:2d}  {cell.analysis:>4s}    {ms:10.3f}   {extra}")

for analysis in ("pfs", "se", "vsa"):
    t0 = report.cell(0, analysis).median_time_ns
    t10 = report.cell(10, analysis).median_time_ns
    print(f"{analysis}: step-0 to step-10 speedup {t0 / t10:.1f}x")
print(f"all correctness checks passed: {report.all_passed}")

paths = emit_report(report, "bench_out") + emit_plots("bench_out")
print("\nwrote:", *[str(p) for p in paths], sep="\n  ")
