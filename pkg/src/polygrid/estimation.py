"""Linear state estimation from synchrophasor and virtual measurements.

Slack and resource nodes are instrumented with phasor measurement units
that report phase-to-ground voltages and injected currents; zero-injection
nodes contribute exact-zero current constraints treated as very precise
virtual measurements. In rectangular coordinates the measurement model is
linear, so the state follows from one weighted least-squares solve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .case import AnalysisCase
from .errors import RankDeficientError, SingularGainError
from .linalg import condition_number_2

# Nominal voltage magnitude used when mapping polar noise onto rectangular
# channels (PMUs sit near 1 pu in normal operation).
NOMINAL_VOLTAGE_PU = 1.0


@dataclass(frozen=True)
class PmuSpec:
    """Instrument ranges and noise levels of the measurement layer.

    Magnitude noise is specified relative to the full-scale range, angle
    noise in radians. Virtual (zero-injection) channels use the same
    standard deviations divided by ``virtual_scale``.
    """

    fsr_voltage: float = 20e3
    fsr_current: float = 100.0
    sigma_magnitude: float = 1e-3
    sigma_angle: float = 1.5e-3
    virtual_scale: float = 100.0

    def __post_init__(self):
        for name in ("fsr_voltage", "fsr_current", "virtual_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("sigma_magnitude", "sigma_angle"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class MeasurementModel:
    """Linear model y = C x + v with diagonal noise covariance.

    The state is x = [Re V; Im V] over all retained terminals. Rows of C:
    instrumented voltages (real then imaginary selector blocks), then the
    real and imaginary current equations of every retained terminal.
    ``r_diag`` is the diagonal of the covariance; ``y`` is attached per
    measurement draw with :meth:`with_measurements`.
    """

    c: np.ndarray
    r_diag: np.ndarray
    instrumented: np.ndarray
    n_states: int
    noise_model: dict
    y: np.ndarray | None = None

    def with_measurements(self, y: np.ndarray) -> "MeasurementModel":
        y = np.asarray(y, dtype=float).ravel()
        if y.size != self.c.shape[0]:
            raise ValueError(f"measurement vector has {y.size} entries, expected {self.c.shape[0]}")
        return replace(self, y=y)


@dataclass(frozen=True)
class EstimateResult:
    x_hat: np.ndarray
    gain_condition: float
    residual_norm: float

    def voltage(self) -> np.ndarray:
        n = self.x_hat.size // 2
        return self.x_hat[:n] + 1j * self.x_hat[n:]


def rectangular_sigmas(case: AnalysisCase, pmu: PmuSpec) -> dict:
    """Polar noise levels propagated onto rectangular channels.

    Per channel pair the variance is the larger of the magnitude variance
    and the angle-induced one (first-order, diagonalized by the maximum).
    Voltage channels evaluate the angle term at the nominal 1 pu magnitude,
    current channels at the instrument's full-scale range.
    """
    fsr_v_pu = pmu.fsr_voltage / case.base.voltage_phase_v
    fsr_i_pu = pmu.fsr_current / case.base.current_a
    sigma_v = max(pmu.sigma_magnitude * fsr_v_pu, pmu.sigma_angle * NOMINAL_VOLTAGE_PU)
    sigma_i = max(pmu.sigma_magnitude * fsr_i_pu, pmu.sigma_angle * fsr_i_pu)
    return {
        "fsr_voltage_pu": fsr_v_pu,
        "fsr_current_pu": fsr_i_pu,
        "sigma_voltage_rect": sigma_v,
        "sigma_current_rect": sigma_i,
        "sigma_virtual_rect": sigma_i / pmu.virtual_scale,
        "mapping": "max(sigma_mag^2, (|z| sigma_angle)^2) per rectangular channel; "
        "|z| = 1 pu for voltages, FSR for currents",
    }


def build_measurement_model(case: AnalysisCase, pmu: PmuSpec) -> MeasurementModel:
    """Assemble C and R for the case's retained nodes.

    Uses the case's (possibly reduced) admittance matrix; zero-injection
    nodes still present contribute virtual current rows, fully reduced
    models have none.
    """
    if pmu.sigma_magnitude == 0 or pmu.sigma_angle == 0:
        raise ValueError("measurement weights need strictly positive noise levels")
    n = case.dimension
    instrumented = case.instrumented_indices
    n_meas_v = instrumented.size

    gamma = np.zeros((n_meas_v, n))
    gamma[np.arange(n_meas_v), instrumented] = 1.0
    g = case.y.real
    b = case.y.imag
    zero_block = np.zeros((n_meas_v, n))
    c = np.block(
        [
            [gamma, zero_block],
            [zero_block, gamma],
            [g, -b],
            [b, g],
        ]
    )

    sig = rectangular_sigmas(case, pmu)
    current_var = np.full(n, sig["sigma_current_rect"] ** 2)
    virtual = np.setdiff1d(np.arange(n), instrumented)
    current_var[virtual] = sig["sigma_virtual_rect"] ** 2
    r_diag = np.concatenate(
        [
            np.full(2 * n_meas_v, sig["sigma_voltage_rect"] ** 2),
            current_var,
            current_var,
        ]
    )

    if np.linalg.matrix_rank(c) < 2 * n:
        raise RankDeficientError("measurement matrix is rank deficient; model unobservable")
    return MeasurementModel(
        c=c,
        r_diag=r_diag,
        instrumented=instrumented,
        n_states=2 * n,
        noise_model=sig,
    )


def emulate_pmu(
    truth_v: np.ndarray, case: AnalysisCase, pmu: PmuSpec, seed
) -> np.ndarray:
    """Measurement vector from a solved voltage profile plus polar noise.

    Measured phasors are perturbed in polar coordinates (magnitude noise
    scaled by the instrument's full-scale range, angle noise absolute) and
    converted to rectangular. Virtual channels are exact zeros. The result
    is deterministic per seed; a (root, index) tuple seed gives independent
    draws that do not depend on evaluation order.
    """
    v = np.asarray(truth_v, dtype=complex).ravel()
    if v.size != case.dimension:
        raise ValueError("truth voltage does not match the case dimension")
    i_inj = case.y @ v
    instrumented = case.instrumented_indices
    sig = rectangular_sigmas(case, pmu)
    rng = np.random.default_rng(seed)

    def pollute(phasors, sigma_mag_pu):
        mag = np.abs(phasors) + rng.normal(0.0, sigma_mag_pu, phasors.size)
        ang = np.angle(phasors) + rng.normal(0.0, pmu.sigma_angle, phasors.size)
        return mag * np.exp(1j * ang)

    v_meas = pollute(v[instrumented], pmu.sigma_magnitude * sig["fsr_voltage_pu"])
    i_meas = pollute(i_inj[instrumented], pmu.sigma_magnitude * sig["fsr_current_pu"])

    i_all = np.zeros(case.dimension, dtype=complex)
    i_all[instrumented] = i_meas
    return np.concatenate([v_meas.real, v_meas.imag, i_all.real, i_all.imag])


def exact_measurements(truth_v: np.ndarray, case: AnalysisCase) -> np.ndarray:
    """Noise-free measurement vector (useful as a consistency oracle)."""
    v = np.asarray(truth_v, dtype=complex).ravel()
    i_inj = case.y @ v
    instrumented = case.instrumented_indices
    i_all = np.zeros(case.dimension, dtype=complex)
    i_all[instrumented] = i_inj[instrumented]
    return np.concatenate(
        [v[instrumented].real, v[instrumented].imag, i_all.real, i_all.imag]
    )


def gain_matrix(model: MeasurementModel) -> np.ndarray:
    """Weighted normal matrix C' R^-1 C."""
    return model.c.T @ (model.c / model.r_diag[:, None])


def wls_factorize(model: MeasurementModel):
    """Cholesky factorization of the gain matrix, reusable across draws.

    Returns (gain, cho_factor); pass the pair to :func:`wls_apply`.
    """
    gain = gain_matrix(model)
    try:
        cho = scipy.linalg.cho_factor(gain, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularGainError(str(exc)) from exc
    return gain, cho


def wls_apply(model: MeasurementModel, factor, y: np.ndarray) -> np.ndarray:
    """Estimate for one measurement vector given a gain factorization.

    Two iterative-refinement passes, with residuals computed from the
    original C, R, and y, keep the solve accurate when virtual-measurement
    weights make the gain badly conditioned; the factored gain then acts
    only as the solve operator, so its formation error does not limit the
    result.
    """
    _, cho = factor
    x = scipy.linalg.cho_solve(cho, model.c.T @ (y / model.r_diag), check_finite=False)
    for _ in range(2):
        residual = y - model.c @ x
        x = x + scipy.linalg.cho_solve(
            cho, model.c.T @ (residual / model.r_diag), check_finite=False
        )
    return x


def wls_solve(model: MeasurementModel) -> EstimateResult:
    """Weighted least-squares estimate of the attached measurement vector."""
    if model.y is None:
        raise ValueError("the measurement model carries no measurement vector")
    factor = wls_factorize(model)
    x_hat = wls_apply(model, factor, model.y)
    residual = model.y - model.c @ x_hat
    return EstimateResult(
        x_hat=x_hat,
        gain_condition=condition_number_2(factor[0]),
        residual_norm=float(np.linalg.norm(residual)),
    )


def monte_carlo_estimates(
    case: AnalysisCase,
    truth_v: np.ndarray,
    pmu: PmuSpec,
    n_draws: int,
    root_seed: int,
) -> np.ndarray:
    """Stacked estimates over independent noise draws (one row per draw).

    Draw i uses seed (root_seed, i), so a worker pool splitting the draw
    range produces identical rows regardless of the worker count.
    """
    model = build_measurement_model(case, pmu)
    factor = wls_factorize(model)
    out = np.empty((n_draws, model.n_states))
    for i in range(n_draws):
        y = emulate_pmu(truth_v, case, pmu, seed=(root_seed, i))
        out[i] = wls_apply(model, factor, y)
    return out
