"""Power-flow study: polar mismatch equations and the Newton-Raphson solver.

The power-flow equations are written as mismatch equations: the network
injections S(V) minus the stacked device injections must vanish at a
solution. All voltage magnitudes and angles are unknowns, including the
slack node's (the slack enters through its Thevenin power, not through a
fixed-voltage constraint).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import AnalysisCase, full_case, loading_vector, reduced_case
from .devices import pm_power_magnitude_derivative, stack_device_powers
from .errors import SingularJacobianError, SingularMatrixError
from .grid import NodeRole, injected_power, positive_sequence_voltage
from .kron import recover_interior
from .linalg import condition_number_2, lu_factor, lu_solve_factored

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITER = 50

# Divergence heuristic: stop after this many consecutive iterations whose
# mismatch norm exceeds 10x the initial one.
DIVERGENCE_FACTOR = 10.0
DIVERGENCE_STREAK = 3


@dataclass(frozen=True)
class PolarState:
    """Voltage magnitudes (pu) and angles (rad) over all retained terminals."""

    e: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float).ravel()
        theta = np.asarray(self.theta, dtype=float).ravel()
        if e.size != theta.size:
            raise ValueError("magnitude and angle vectors differ in length")
        if np.any(e <= 0):
            raise ValueError("voltage magnitudes must be positive")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "theta", wrap_angles(theta))

    @property
    def dimension(self) -> int:
        return self.e.size

    def voltage(self) -> np.ndarray:
        return self.e * np.exp(1j * self.theta)

    @classmethod
    def from_voltage(cls, v: np.ndarray) -> "PolarState":
        v = np.asarray(v, dtype=complex).ravel()
        return cls(e=np.abs(v), theta=np.angle(v))


@dataclass(frozen=True)
class PowerFlowResult:
    state: PolarState
    iterations: int
    final_mismatch_inf: float
    jacobian_condition: float
    converged: bool

    def voltage(self) -> np.ndarray:
        return self.state.voltage()


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Map angles to (-pi, pi]."""
    wrapped = np.angle(np.exp(1j * np.asarray(theta, dtype=float)))
    # np.angle returns [-pi, pi]; fold the open end.
    wrapped[wrapped == -np.pi] = np.pi
    return wrapped


def flat_start(case: AnalysisCase) -> PolarState:
    """Positive-sequence phasors of magnitude 1 at every node."""
    seq = positive_sequence_voltage(case.n_phases)
    v = np.tile(seq, case.n_nodes)
    return PolarState.from_voltage(v)


def mismatch(case: AnalysisCase, state: PolarState, lam) -> np.ndarray:
    """Stacked real mismatch [dP; dQ] at the given state and loading."""
    v = state.voltage()
    ds = injected_power(case.y, v) - stack_device_powers(
        case.devices, case, v, loading_vector(case, lam)
    )
    return np.concatenate([ds.real, ds.imag])


def _network_power_derivatives(y, v, e_angle):
    """Complex derivative matrices of S = V o conj(Y V) wrt E and theta."""
    i_inj = y @ v
    conj_y = np.conj(y)
    d_e = conj_y * (v[:, None] * np.conj(e_angle)[None, :])
    d_t = -1j * conj_y * (v[:, None] * np.conj(v)[None, :])
    diag = np.arange(v.size)
    d_e[diag, diag] += e_angle * np.conj(i_inj)
    d_t[diag, diag] += 1j * v * np.conj(i_inj)
    return d_e, d_t


def jacobian(case: AnalysisCase, state: PolarState, lam) -> np.ndarray:
    """Analytic Jacobian of the mismatch wrt [E; theta].

    Includes the voltage dependence of the Thevenin slack powers and of the
    polynomial resource models.
    """
    lam_vec = loading_vector(case, lam)
    v = state.voltage()
    e_angle = np.exp(1j * state.theta)
    d_e, d_t = _network_power_derivatives(case.y, v, e_angle)

    r = 0
    for i, (name, role) in enumerate(case.node_roles):
        sl = slice(i * case.n_phases, (i + 1) * case.n_phases)
        if role is NodeRole.SLACK:
            te = case.devices.thevenin[name]
            v_n = v[sl]
            i_te = te.y @ (te.v_source - v_n)
            block_e = -np.conj(te.y) * (v_n[:, None] * np.conj(e_angle[sl])[None, :])
            block_t = 1j * np.conj(te.y) * (v_n[:, None] * np.conj(v_n)[None, :])
            diag = np.arange(case.n_phases)
            block_e[diag, diag] += e_angle[sl] * np.conj(i_te)
            block_t[diag, diag] += 1j * v_n * np.conj(i_te)
            d_e[sl, sl] -= block_e
            d_t[sl, sl] -= block_t
        elif role is NodeRole.RESOURCE:
            pm = case.devices.polynomial[name]
            ds_de = pm_power_magnitude_derivative(pm, state.e[sl], float(lam_vec[r]))
            idx = np.arange(sl.start, sl.stop)
            d_e[idx, idx] -= ds_de
            r += 1

    return np.block([[d_e.real, d_t.real], [d_e.imag, d_t.imag]])


def _fold_negative_magnitudes(e: np.ndarray, theta: np.ndarray):
    """Re-express phasors with negative magnitude as positive-magnitude ones."""
    neg = e <= 0
    if np.any(neg):
        e = np.where(neg, np.maximum(-e, 1e-12), e)
        theta = np.where(neg, theta + np.pi, theta)
    return e, theta


def solve_nrm(
    case: AnalysisCase,
    lam,
    init: PolarState | None = None,
    eps: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
    compute_condition: bool = True,
) -> PowerFlowResult:
    """Newton-Raphson on the mismatch equations.

    Pure Newton steps with angle re-wrapping after each update. Returns the
    best state with ``converged=False`` on failure instead of raising;
    a singular Jacobian raises SingularJacobianError.
    """
    if eps <= 0:
        raise ValueError("tolerance must be positive")
    state = init if init is not None else flat_start(case)
    lam_vec = loading_vector(case, lam)

    norm0 = None
    streak = 0
    iterations = 0
    last_jacobian = None
    f = mismatch(case, state, lam_vec)
    norm = float(np.max(np.abs(f))) if f.size else 0.0
    norm0 = norm
    converged = norm <= eps
    while not converged and iterations < max_iter:
        jac = jacobian(case, state, lam_vec)
        last_jacobian = jac
        try:
            step = lu_solve_factored(lu_factor(jac), f)
        except SingularMatrixError as exc:
            raise SingularJacobianError(str(exc)) from exc
        n = state.dimension
        e_new = state.e - step[:n]
        theta_new = state.theta - step[n:]
        e_new, theta_new = _fold_negative_magnitudes(e_new, theta_new)
        state = PolarState(e=e_new, theta=theta_new)
        iterations += 1
        f = mismatch(case, state, lam_vec)
        norm = float(np.max(np.abs(f)))
        converged = norm <= eps
        if not converged and norm > DIVERGENCE_FACTOR * norm0:
            streak += 1
            if streak >= DIVERGENCE_STREAK:
                break
        else:
            streak = 0

    cond = float("nan")
    if compute_condition:
        if last_jacobian is None:
            last_jacobian = jacobian(case, state, lam_vec)
        cond = condition_number_2(last_jacobian)
    return PowerFlowResult(
        state=state,
        iterations=iterations,
        final_mismatch_inf=norm,
        jacobian_condition=cond,
        converged=bool(converged),
    )


@dataclass(frozen=True)
class ConsistencyRow:
    step_index: int
    converged: bool
    iterations: int
    retained_deviation: float
    interior_deviation: float


@dataclass(frozen=True)
class ConsistencyReport:
    rows: tuple[ConsistencyRow, ...]
    tolerance: float

    @property
    def max_retained_deviation(self) -> float:
        return max((r.retained_deviation for r in self.rows), default=0.0)

    @property
    def max_interior_deviation(self) -> float:
        return max((r.interior_deviation for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return all(
            r.converged
            and r.retained_deviation <= self.tolerance
            and r.interior_deviation <= self.tolerance
            for r in self.rows
        )


def full_vs_reduced_consistency(
    grid,
    devices,
    schedule,
    lam,
    eps: float = DEFAULT_TOLERANCE,
    tolerance: float = 1e-8,
) -> ConsistencyReport:
    """Solve every reduction step and compare against the unreduced solution.

    For each step the retained-node voltages must match the step-0 solution
    and the recovered interior voltages must match the step-0 voltages of
    the eliminated nodes.
    """
    base_case = full_case(grid, devices)
    lam_vec = loading_vector(base_case, lam)
    base = solve_nrm(base_case, lam_vec, eps=eps, compute_condition=False)
    if not base.converged:
        raise SingularJacobianError("full model power flow did not converge")
    v_full = base.voltage()

    rows = [ConsistencyRow(0, True, base.iterations, 0.0, 0.0)]
    for step in schedule:
        if step.step_index == 0 and step.eliminated.size == 0:
            continue
        case = reduced_case(grid, devices, step)
        res = solve_nrm(case, lam_vec, eps=eps, compute_condition=False)
        v_red = res.voltage()
        retained_dev = float(np.max(np.abs(v_red - v_full[step.retained])))
        if step.eliminated.size:
            v_rec = recover_interior(step, v_red)
            interior_dev = float(np.max(np.abs(v_rec - v_full[step.eliminated])))
        else:
            interior_dev = 0.0
        rows.append(
            ConsistencyRow(
                step.step_index, res.converged, res.iterations, retained_dev, interior_dev
            )
        )
    return ConsistencyReport(rows=tuple(rows), tolerance=tolerance)
