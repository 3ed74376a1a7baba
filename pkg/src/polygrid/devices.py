"""Aggregate node behavior: slack sources, resource models, loading profiles.

Slack nodes are voltage sources behind a compound impedance (Thevenin
equivalent). Resource nodes inject powers that are quadratic polynomials of
the local voltage magnitude, scaled by a loading factor. Zero-injection
nodes inject nothing by definition.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import GridModel, NodeRole
from .linalg import as_matrix


@dataclass(frozen=True)
class TheveninEquivalent:
    """Ideal polyphase voltage source behind an invertible compound impedance."""

    node: str
    v_source: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v_source, dtype=complex).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("source voltage must be finite")
        object.__setattr__(self, "v_source", v)
        z = as_matrix(self.z, "Thevenin Z")
        if z.shape != (v.size, v.size):
            raise ValueError(f"Thevenin Z shape {z.shape} does not match {v.size} phases")
        y = np.linalg.inv(z)
        if not np.all(np.isfinite(y)):
            raise ValueError("Thevenin impedance must be invertible")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "_y", y)

    @property
    def y(self) -> np.ndarray:
        """Inverse of the source impedance."""
        return self._y


def _normalized_triplet(alpha, beta, gamma, label: str):
    a = np.asarray(alpha, dtype=float).ravel()
    b = np.asarray(beta, dtype=float).ravel()
    g = np.asarray(gamma, dtype=float).ravel()
    total = a + b + g
    if np.any(np.abs(total) < 1e-12):
        raise ValueError(f"{label} coefficients sum to zero and cannot be normalized")
    if np.any(np.abs(total - 1.0) > 1e-9):
        warnings.warn(
            f"{label} coefficients sum to {total} instead of 1; renormalizing",
            stacklevel=3,
        )
        a, b, g = a / total, b / total, g / total
    return a, b, g


@dataclass(frozen=True)
class PolynomialModel:
    """Quadratic voltage-dependence model of a resource node.

    Per phase, the injected power is
    lam * (p0 * f_re(|V|) + 1j * q0 * f_im(|V|)) with
    f(v) = alpha (v/v0)^2 + beta (v/v0) + gamma. The coefficient triplets
    are normalized to sum to 1, so (p0, q0) is the injection at |V| = v0.
    """

    node: str
    p0: np.ndarray
    q0: np.ndarray
    v0: np.ndarray
    alpha_re: np.ndarray
    beta_re: np.ndarray
    gamma_re: np.ndarray
    alpha_im: np.ndarray
    beta_im: np.ndarray
    gamma_im: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.p0, dtype=float).ravel().size
        for name in ("p0", "q0", "v0"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            if arr.size == 1 and n > 1:
                arr = np.full(n, arr[0])
            if arr.size != n:
                raise ValueError(f"{name} must have one entry per phase")
            object.__setattr__(self, name, arr)
        if np.any(self.v0 <= 0):
            raise ValueError("reference voltage v0 must be positive")
        a, b, g = _normalized_triplet(
            self.alpha_re, self.beta_re, self.gamma_re, f"{self.node} active"
        )
        object.__setattr__(self, "alpha_re", np.broadcast_to(a, (n,)).copy())
        object.__setattr__(self, "beta_re", np.broadcast_to(b, (n,)).copy())
        object.__setattr__(self, "gamma_re", np.broadcast_to(g, (n,)).copy())
        a, b, g = _normalized_triplet(
            self.alpha_im, self.beta_im, self.gamma_im, f"{self.node} reactive"
        )
        object.__setattr__(self, "alpha_im", np.broadcast_to(a, (n,)).copy())
        object.__setattr__(self, "beta_im", np.broadcast_to(b, (n,)).copy())
        object.__setattr__(self, "gamma_im", np.broadcast_to(g, (n,)).copy())

    @property
    def n_phases(self) -> int:
        return self.p0.size


@dataclass(frozen=True)
class LoadingProfile:
    """Loading-factor time series per resource node, equal across phases."""

    times: np.ndarray
    factors: dict[str, np.ndarray]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        object.__setattr__(self, "times", t)
        cleaned = {}
        for node, series in self.factors.items():
            arr = np.asarray(series, dtype=float).ravel()
            if arr.size != t.size:
                raise ValueError(f"profile for {node} has {arr.size} samples, expected {t.size}")
            cleaned[node] = arr
        object.__setattr__(self, "factors", cleaned)

    def at(self, time_index: int, nodes) -> np.ndarray:
        """Loading factors of the given nodes at one time step."""
        return np.array([self.factors[n][time_index] for n in nodes])


@dataclass(frozen=True)
class DeviceSet:
    """All device models of a grid, keyed by node id."""

    thevenin: dict[str, TheveninEquivalent]
    polynomial: dict[str, PolynomialModel]
    profile: LoadingProfile | None = None

    def validate_against(self, grid: GridModel):
        """Every slack node needs a Thevenin model, every resource node a polynomial one."""
        for node in grid.slack_nodes:
            if node not in self.thevenin:
                raise ValueError(f"slack node {node!r} has no Thevenin equivalent")
        for node in grid.resource_nodes:
            if node not in self.polynomial:
                raise ValueError(f"resource node {node!r} has no polynomial model")


def te_power(te: TheveninEquivalent, v_s: np.ndarray) -> np.ndarray:
    """Power injected by a Thevenin equivalent at node voltage V_s.

    S = V_s o conj(Y_te (V_source - V_s)).
    """
    v_s = np.asarray(v_s, dtype=complex).ravel()
    if v_s.size != te.v_source.size:
        raise ValueError("voltage vector does not match the phase count")
    return v_s * np.conj(te.y @ (te.v_source - v_s))


def pm_power(pm: PolynomialModel, v_r: np.ndarray, lam: float) -> np.ndarray:
    """Power injected by a polynomial model at node voltage V_r and loading lam.

    One loading factor covers all phases of the node; per-phase loading
    would only need lam to become a vector here, since the reference
    values and coefficients are already per phase.
    """
    v_r = np.asarray(v_r, dtype=complex).ravel()
    if v_r.size != pm.n_phases:
        raise ValueError("voltage vector does not match the phase count")
    u = np.abs(v_r) / pm.v0
    f_re = pm.alpha_re * u**2 + pm.beta_re * u + pm.gamma_re
    f_im = pm.alpha_im * u**2 + pm.beta_im * u + pm.gamma_im
    return lam * (pm.p0 * f_re + 1j * pm.q0 * f_im)


def pm_power_unit(pm: PolynomialModel, v_r: np.ndarray) -> np.ndarray:
    """Injected power per unit loading factor (pm_power at lam = 1)."""
    return pm_power(pm, v_r, 1.0)


def pm_power_magnitude_derivative(pm: PolynomialModel, e_r: np.ndarray, lam: float) -> np.ndarray:
    """d S / d|V| per phase: lam (p0 f_re' + j q0 f_im') with f' = 2a v / v0^2 + b / v0."""
    e_r = np.asarray(e_r, dtype=float).ravel()
    df_re = 2.0 * pm.alpha_re * e_r / pm.v0**2 + pm.beta_re / pm.v0
    df_im = 2.0 * pm.alpha_im * e_r / pm.v0**2 + pm.beta_im / pm.v0
    return lam * (pm.p0 * df_re + 1j * pm.q0 * df_im)


def stack_device_powers(
    devices: DeviceSet,
    grid_or_nodes,
    v: np.ndarray,
    lam: np.ndarray,
) -> np.ndarray:
    """Stacked device injections in canonical order.

    Thevenin powers on slack blocks, polynomial powers on resource blocks,
    exact zeros on zero-injection blocks. ``lam`` holds one loading factor
    per resource node, in canonical resource order.
    """
    if isinstance(grid_or_nodes, GridModel):
        nodes = [(n, grid_or_nodes.roles[n]) for n in grid_or_nodes.nodes]
        n_phases = grid_or_nodes.n_phases
    else:
        nodes = list(grid_or_nodes.node_roles)
        n_phases = grid_or_nodes.n_phases
    v = np.asarray(v, dtype=complex).ravel()
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if v.size != len(nodes) * n_phases:
        raise ValueError("voltage vector does not match the node set")

    out = np.zeros(v.size, dtype=complex)
    r = 0
    for i, (name, role) in enumerate(nodes):
        sl = slice(i * n_phases, (i + 1) * n_phases)
        if role is NodeRole.SLACK:
            te = devices.thevenin.get(name)
            if te is None:
                raise ValueError(f"slack node {name!r} has no Thevenin equivalent")
            out[sl] = te_power(te, v[sl])
        elif role is NodeRole.RESOURCE:
            pm = devices.polynomial.get(name)
            if pm is None:
                raise ValueError(f"resource node {name!r} has no polynomial model")
            if r >= lam.size:
                raise ValueError("loading vector shorter than the resource node count")
            out[sl] = pm_power(pm, v[sl], float(lam[r]))
            r += 1
        # zero-injection block stays exactly 0
    if r != lam.size:
        raise ValueError(f"loading vector has {lam.size} entries, expected {r}")
    return out
