"""Voltage stability assessment by predictor-corrector continuation.

Loading factors follow a straight trajectory lam(xi) = lam0 + xi * t. The
continuation traces solutions of the augmented mismatch equations along
that trajectory, past the loadability nose, using a tangent predictor and
a Newton corrector with local parameterization: the component of
[E; theta; xi] with the largest tangent magnitude is pinned during each
correction, which keeps the bordered system regular at the nose where pure
loading-parameterized Newton becomes singular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import AnalysisCase, loading_vector
from .devices import pm_power_unit
from .errors import (
    CorrectorFailedError,
    SingularAugmentedJacobianError,
    SingularMatrixError,
)
from .grid import NodeRole
from .powerflow import PolarState, jacobian, mismatch, solve_nrm
from .linalg import lu_factor, lu_solve_factored

DEFAULT_STEP_SIZE = 0.1
DEFAULT_TOLERANCE = 1e-8
MAX_HALVINGS = 6
CORRECTOR_MAX_NEWTON = 15

# Consecutive clean steps before the step size is doubled back toward base.
RESTORE_AFTER_SUCCESSES = 2

# The trace stops once the lower branch has fallen this far below the nose.
LOWER_BRANCH_FRACTION = 0.9


@dataclass(frozen=True)
class Trajectory:
    """Loading trajectory lam0 + xi * t over the resource nodes."""

    lam0: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        lam0 = np.asarray(self.lam0, dtype=float).ravel()
        t = np.asarray(self.t, dtype=float).ravel()
        if lam0.size != t.size:
            raise ValueError("origin and direction differ in length")
        if not np.any(t):
            raise ValueError("trajectory direction must be nonzero")
        object.__setattr__(self, "lam0", lam0)
        object.__setattr__(self, "t", t)

    def at(self, xi: float) -> np.ndarray:
        return self.lam0 + xi * self.t


@dataclass(frozen=True)
class ContinuationState:
    """One accepted point of the continuation trace."""

    x: PolarState
    xi: float
    tangent: np.ndarray | None
    index: int


@dataclass(frozen=True)
class TracePoint:
    xi: float
    v_min: float
    v_mean: float
    mismatch_inf: float


@dataclass(frozen=True)
class VsaResult:
    lambda_max: float
    nose_state: PolarState
    steps: int
    trace: tuple[TracePoint, ...]
    nose_detected: bool
    # Per accepted step: (step size used, halvings it took). Diagnostics for
    # the adaptive step-control policy.
    step_log: tuple[tuple[float, int], ...] = ()


def augmented_mismatch(
    case: AnalysisCase, x: PolarState, xi: float, traj: Trajectory
) -> np.ndarray:
    """Mismatch evaluated at the trajectory point lam(xi)."""
    return mismatch(case, x, traj.at(xi))


def loading_direction_derivative(
    case: AnalysisCase, x: PolarState, traj: Trajectory
) -> np.ndarray:
    """Derivative of the augmented mismatch wrt xi.

    Device powers enter the mismatch with a minus sign and are linear in
    the loading factor, so only resource rows with a nonzero trajectory
    direction contribute.
    """
    v = x.voltage()
    d = np.zeros(case.dimension, dtype=complex)
    r = 0
    for i, (name, role) in enumerate(case.node_roles):
        if role is NodeRole.RESOURCE:
            if traj.t[r] != 0.0:
                sl = slice(i * case.n_phases, (i + 1) * case.n_phases)
                pm = case.devices.polynomial[name]
                d[sl] = -traj.t[r] * pm_power_unit(pm, v[sl])
            r += 1
    return np.concatenate([d.real, d.imag])


def _bordered_matrix(case, x, xi, traj, index):
    jac = jacobian(case, x, traj.at(xi))
    dxi = loading_direction_derivative(case, x, traj)
    m = np.zeros((jac.shape[0] + 1, jac.shape[1] + 1))
    m[:-1, :-1] = jac
    m[:-1, -1] = dxi
    m[-1, index] = 1.0
    return m


def tangent_predictor(
    case: AnalysisCase,
    traj: Trajectory,
    state: ContinuationState,
    sigma: float,
):
    """Tangent step from an accepted point.

    Solves the bordered system for the curve tangent, normalizes it to unit
    Euclidean length, orients it along the previous tangent (or toward
    increasing loading on the first step), and advances by sigma. Returns
    the predicted state, predicted xi, the tangent, and the index of its
    largest-magnitude component, which parameterizes the next correction.
    """
    m = _bordered_matrix(case, state.x, state.xi, traj, state.index)
    rhs = np.zeros(m.shape[0])
    rhs[-1] = 1.0
    try:
        tau = lu_solve_factored(lu_factor(m), rhs)
    except SingularMatrixError as exc:
        raise SingularAugmentedJacobianError(str(exc)) from exc
    tau = tau / np.linalg.norm(tau)
    if state.tangent is not None:
        if float(tau @ state.tangent) < 0.0:
            tau = -tau
    elif tau[-1] < 0.0:
        tau = -tau

    n = state.x.dimension
    e_pred = state.x.e + sigma * tau[:n]
    theta_pred = state.x.theta + sigma * tau[n : 2 * n]
    xi_pred = state.xi + sigma * tau[-1]
    e_pred, theta_pred = _fold(e_pred, theta_pred)
    x_pred = PolarState(e=e_pred, theta=theta_pred)
    next_index = int(np.argmax(np.abs(tau)))
    return x_pred, xi_pred, tau, next_index


def _fold(e, theta):
    neg = e <= 0
    if np.any(neg):
        e = np.where(neg, np.maximum(-e, 1e-12), e)
        theta = np.where(neg, theta + np.pi, theta)
    return e, theta


def corrector(
    case: AnalysisCase,
    traj: Trajectory,
    x_guess: PolarState,
    xi_guess: float,
    index: int,
    eps: float = DEFAULT_TOLERANCE,
    max_newton: int = CORRECTOR_MAX_NEWTON,
):
    """Newton correction with the indexed component held at its guess.

    Returns (state, xi, iterations). Raises CorrectorFailedError when the
    iteration does not reach the tolerance; the caller halves the step and
    retries the predictor.
    """
    x = x_guess
    xi = float(xi_guess)
    n = x.dimension
    for it in range(max_newton + 1):
        g = augmented_mismatch(case, x, xi, traj)
        norm = float(np.max(np.abs(g)))
        if norm <= eps:
            return x, xi, it
        if not np.isfinite(norm) or norm > 1e8:
            break
        if it == max_newton:
            break
        m = _bordered_matrix(case, x, xi, traj, index)
        rhs = np.concatenate([-g, [0.0]])
        try:
            dz = lu_solve_factored(lu_factor(m), rhs)
        except SingularMatrixError as exc:
            raise CorrectorFailedError(f"singular corrector system: {exc}") from exc
        e_new = x.e + dz[:n]
        theta_new = x.theta + dz[n : 2 * n]
        xi += float(dz[-1])
        e_new, theta_new = _fold(e_new, theta_new)
        x = PolarState(e=e_new, theta=theta_new)
    raise CorrectorFailedError(
        f"corrector stalled at |g| = {norm:.3e} after {max_newton} iterations"
    )


def _trace_point(case, traj, x: PolarState, xi: float) -> TracePoint:
    g = augmented_mismatch(case, x, xi, traj)
    return TracePoint(
        xi=float(xi),
        v_min=float(x.e.min()),
        v_mean=float(x.e.mean()),
        mismatch_inf=float(np.max(np.abs(g))),
    )


def run_continuation(
    case: AnalysisCase,
    traj: Trajectory,
    sigma: float = DEFAULT_STEP_SIZE,
    eps: float = DEFAULT_TOLERANCE,
    max_steps: int = 1000,
) -> VsaResult:
    """Trace the solution curve from xi = 0 and report the loadability limit.

    The nose is detected when the oriented tangent's loading component
    changes sign; tracing continues down the lower branch until the loading
    falls 10% below the maximum, then stops. ``lambda_max`` is the largest
    accepted loading parameter, found at resolution sigma.
    """
    if sigma <= 0:
        raise ValueError("step size must be positive")
    base = solve_nrm(case, loading_vector(case, traj.lam0), eps=eps, compute_condition=False)
    if not base.converged:
        raise CorrectorFailedError("power flow at the trajectory origin did not converge")

    xi_index = 2 * base.state.dimension
    current = ContinuationState(x=base.state, xi=0.0, tangent=None, index=xi_index)
    trace = [_trace_point(case, traj, base.state, 0.0)]
    step_log: list[tuple[float, int]] = []
    lambda_max = 0.0
    nose_state = base.state
    nose_detected = False
    sigma_current = sigma
    success_streak = 0
    steps = 0

    while steps < max_steps:
        halvings = 0
        sig = sigma_current
        while True:
            try:
                x_pred, xi_pred, tau, next_index = tangent_predictor(case, traj, current, sig)
                x_corr, xi_corr, _ = corrector(case, traj, x_pred, xi_pred, next_index, eps=eps)
                break
            except (CorrectorFailedError, SingularAugmentedJacobianError) as exc:
                halvings += 1
                if halvings > MAX_HALVINGS:
                    raise CorrectorFailedError(
                        f"step failed after {MAX_HALVINGS} halvings at xi = {current.xi:.4f}"
                    ) from exc
                sig /= 2.0

        current = ContinuationState(x=x_corr, xi=xi_corr, tangent=tau, index=next_index)
        steps += 1
        trace.append(_trace_point(case, traj, x_corr, xi_corr))
        step_log.append((sig, halvings))
        if xi_corr > lambda_max:
            lambda_max = xi_corr
            nose_state = x_corr
        if tau[-1] < 0.0:
            nose_detected = True

        if halvings:
            sigma_current = sig
            success_streak = 0
        else:
            success_streak += 1
            if success_streak >= RESTORE_AFTER_SUCCESSES and sigma_current < sigma:
                sigma_current = min(sigma, 2.0 * sigma_current)
                success_streak = 0

        if nose_detected and xi_corr <= LOWER_BRANCH_FRACTION * lambda_max:
            break

    return VsaResult(
        lambda_max=float(lambda_max),
        nose_state=nose_state,
        steps=steps,
        trace=tuple(trace),
        nose_detected=nose_detected,
        step_log=tuple(step_log),
    )
