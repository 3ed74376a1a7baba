"""Polyphase power-grid analysis toolkit.

Builds compound-admittance models of unbalanced polyphase grids, eliminates
zero-injection nodes by Kron reduction, and runs three studies on full or
reduced models: Newton-Raphson power flow, linear weighted-least-squares
state estimation from synchrophasor data, and continuation-based voltage
stability assessment. A benchmark harness measures how the reduction
affects matrix conditioning and execution time.
"""

from .case import AnalysisCase, full_case, loading_from_profile, loading_vector, reduced_case
from .devices import (
    DeviceSet,
    LoadingProfile,
    PolynomialModel,
    TheveninEquivalent,
    pm_power,
    stack_device_powers,
    te_power,
)
from .grid import (
    Branch,
    GridModel,
    NodeRole,
    PerUnitBase,
    Shunt,
    ValidationReport,
    build_admittance,
    injected_power,
    positive_sequence_voltage,
    validate_hypotheses,
)
from .kron import ReductionStep, kron_reduce, recover_interior, reduction_schedule
from .linalg import condition_number_2, lu_solve, schur_complement
from .powerflow import (
    PolarState,
    PowerFlowResult,
    flat_start,
    full_vs_reduced_consistency,
    jacobian,
    mismatch,
    solve_nrm,
)
from .estimation import (
    EstimateResult,
    MeasurementModel,
    PmuSpec,
    build_measurement_model,
    emulate_pmu,
    monte_carlo_estimates,
    wls_solve,
)
from .vsa import (
    ContinuationState,
    Trajectory,
    VsaResult,
    augmented_mismatch,
    corrector,
    run_continuation,
    tangent_predictor,
)
from .testsystem import TestSystemSpec, build_test_system

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
