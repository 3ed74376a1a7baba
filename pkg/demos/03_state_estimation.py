"""Estimate the grid state from noisy synchrophasor measurements.

Slack and resource nodes carry PMUs measuring voltage and injected current
phasors; zero-injection nodes enter as near-exact virtual measurements.
In rectangular coordinates the model is linear, so one weighted
least-squares solve recovers the state. Kron reduction removes the
virtual measurements and improves the gain-matrix conditioning by orders
of magnitude.
"""

import numpy as np

from polygrid import (
    PmuSpec,
    build_measurement_model,
    build_test_system,
    emulate_pmu,
    monte_carlo_estimates,
    reduction_schedule,
    solve_nrm,
    wls_solve,
)
from polygrid.case import full_case, loading_from_profile, reduced_case

grid, devices = build_test_system()
schedule = reduction_schedule(grid, batch=10)
pmu = PmuSpec()  # 20 kV / 100 A ranges, class-0.1-like noise
print(f"PMU noise: {pmu.sigma_magnitude} pu of range (magnitude), "
      f"{pmu.sigma_angle} rad (angle); virtual channels {pmu.virtual_scale}x tighter")

for k in (0, 5, 10):
    case = (
        full_case(grid, devices)
        if k == 0
        else reduced_case(grid, devices, schedule[k])
    )
    lam = loading_from_profile(case, 12)
    truth = solve_nrm(case, lam, compute_condition=False).voltage()
    x_true = np.concatenate([truth.real, truth.imag])

    model = build_measurement_model(case, pmu)
    y = emulate_pmu(truth, case, pmu, seed=(42, k))
    estimate = wls_solve(model.with_measurements(y))
    rmse = np.sqrt(np.mean((estimate.x_hat - x_true) ** 2))
    print(f"\nstep {k:2d}: {case.dimension} terminals, "
          f"{len(case.zero_injection_nodes)} virtual nodes")
    print(f"  gain condition number: {estimate.gain_condition:.3e}")
    print(f"  estimate RMSE vs truth: {rmse:.2e} pu")

# Monte Carlo: the estimator is unbiased, and each draw is reproducible
# from (root seed, draw index) regardless of evaluation order.
case = reduced_case(grid, devices, schedule[10])
lam = loading_from_profile(case, 12)
truth = solve_nrm(case, lam, compute_condition=False).voltage()
x_true = np.concatenate([truth.real, truth.imag])
estimates = monte_carlo_estimates(case, truth, pmu, n_draws=500, root_seed=7)
print(f"\n500-draw mean absolute bias: {np.abs(estimates.mean(axis=0) - x_true).max():.2e} pu")
