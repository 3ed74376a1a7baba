"""Polyphase grid model: compound parameters, admittance assembly, validation.

A grid is a set of polyphase nodes joined by compound branch impedances and
optionally loaded by compound shunt admittances. Every node exposes the same
number of phase terminals and carries a role: slack, resource, or
zero-injection. All electrical quantities are in per unit; conversion from
physical units happens at ingestion (see :mod:`polygrid.files`).

Nodes are kept in a canonical order (slack, then resource, then
zero-injection, phases contiguous per node) and all flat vector/matrix
indexing in the package follows that order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph

from .errors import (
    DisconnectedGraphError,
    NonSymmetricParameterError,
    SingularBranchImpedanceError,
)
from .linalg import as_matrix, lu_factor

# Entrywise tolerance for compound-parameter symmetry.
SYMMETRY_ATOL = 1e-12

# Relative eigenvalue threshold separating "positive definite" from
# "semidefinite" when classifying Re{Z}.
DEFINITENESS_RTOL = 1e-12


class NodeRole(enum.Enum):
    SLACK = "slack"
    RESOURCE = "resource"
    ZERO_INJECTION = "zero"


ROLE_ORDER = (NodeRole.SLACK, NodeRole.RESOURCE, NodeRole.ZERO_INJECTION)


@dataclass(frozen=True)
class PerUnitBase:
    """Per-unit system: base power in W and base line-to-line voltage in V."""

    power_w: float
    voltage_v: float

    def __post_init__(self):
        if self.power_w <= 0 or self.voltage_v <= 0:
            raise ValueError("per-unit bases must be positive")

    @property
    def impedance_ohm(self) -> float:
        return self.voltage_v**2 / self.power_w

    @property
    def current_a(self) -> float:
        """Base current for line-to-line voltage base: Pb / (sqrt(3) Vb)."""
        return self.power_w / (np.sqrt(3.0) * self.voltage_v)

    @property
    def voltage_phase_v(self) -> float:
        """Phase-to-ground voltage base Vb / sqrt(3)."""
        return self.voltage_v / np.sqrt(3.0)


@dataclass(frozen=True)
class Branch:
    """Polyphase branch between two nodes with compound impedance z (pu)."""

    from_node: str
    to_node: str
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", as_matrix(self.z, "branch Z"))
        if self.z.shape[0] != self.z.shape[1]:
            raise ValueError("branch Z must be square")
        if self.from_node == self.to_node:
            raise ValueError(f"branch endpoints coincide at {self.from_node!r}")


@dataclass(frozen=True)
class Shunt:
    """Polyphase shunt at one node with compound admittance y (pu)."""

    node: str
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", as_matrix(self.y, "shunt Y"))
        if self.y.shape[0] != self.y.shape[1]:
            raise ValueError("shunt Y must be square")


class GridModel:
    """Immutable polyphase grid in canonical node order.

    Parameters
    ----------
    n_phases : number of phase terminals per node (>= 1).
    nodes : iterable of (node id, NodeRole) pairs. The constructor reorders
        them canonically (slack, resource, zero-injection), preserving the
        listed order inside each role group.
    branches, shunts : compound elements; every referenced node must exist
        and every compound matrix must be n_phases x n_phases.
    base : the per-unit system the parameters are expressed in.
    """

    def __init__(self, n_phases, nodes, branches, shunts=(), base=None):
        if n_phases < 1:
            raise ValueError("n_phases must be >= 1")
        self.n_phases = int(n_phases)
        self.base = base if base is not None else PerUnitBase(1.0, 1.0)

        pairs = [(str(n), NodeRole(r)) for n, r in nodes]
        seen = set()
        for name, _ in pairs:
            if name in seen:
                raise ValueError(f"duplicate node id {name!r}")
            seen.add(name)
        ordered = [p for role in ROLE_ORDER for p in pairs if p[1] is role]
        self.nodes = tuple(name for name, _ in ordered)
        self.roles = {name: role for name, role in ordered}
        self._position = {name: i for i, name in enumerate(self.nodes)}

        self.branches = tuple(branches)
        self.shunts = tuple(shunts)
        for b in self.branches:
            if b.z.shape != (self.n_phases, self.n_phases):
                raise ValueError(f"branch {b.from_node}-{b.to_node} Z has shape {b.z.shape}")
            for end in (b.from_node, b.to_node):
                if end not in self._position:
                    raise ValueError(f"branch references unknown node {end!r}")
        for s in self.shunts:
            if s.y.shape != (self.n_phases, self.n_phases):
                raise ValueError(f"shunt at {s.node} Y has shape {s.y.shape}")
            if s.node not in self._position:
                raise ValueError(f"shunt references unknown node {s.node!r}")

    # -- indexing helpers -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def dimension(self) -> int:
        """Number of (node, phase) terminals = length of all flat vectors."""
        return self.n_nodes * self.n_phases

    def nodes_with_role(self, role: NodeRole) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if self.roles[n] is role)

    @property
    def slack_nodes(self):
        return self.nodes_with_role(NodeRole.SLACK)

    @property
    def resource_nodes(self):
        return self.nodes_with_role(NodeRole.RESOURCE)

    @property
    def zero_injection_nodes(self):
        return self.nodes_with_role(NodeRole.ZERO_INJECTION)

    def node_position(self, node: str) -> int:
        return self._position[node]

    def flat_slice(self, node: str) -> slice:
        """Flat index range of one node's phase terminals."""
        i = self._position[node]
        return slice(i * self.n_phases, (i + 1) * self.n_phases)

    def flat_indices(self, names) -> np.ndarray:
        """Flat (node, phase) indices of the given nodes, canonical order."""
        out = []
        for name in sorted(names, key=self.node_position):
            s = self.flat_slice(name)
            out.extend(range(s.start, s.stop))
        return np.asarray(out, dtype=np.intp)


def positive_sequence_voltage(n_phases: int, magnitude: float = 1.0) -> np.ndarray:
    """Balanced phasor set of the given magnitude, phase k at -2*pi*k/P."""
    angles = -2.0 * np.pi * np.arange(n_phases) / n_phases
    return magnitude * np.exp(1j * angles)


def _is_symmetric(m: np.ndarray, atol: float = SYMMETRY_ATOL) -> bool:
    return bool(np.all(np.abs(m - m.T) <= atol))


def _real_part_eigen_range(m: np.ndarray) -> tuple[float, float]:
    w = np.linalg.eigvalsh((m.real + m.real.T) / 2.0)
    return float(w.min()), float(w.max())


def _is_invertible(m: np.ndarray) -> bool:
    try:
        lu_factor(m)
        return True
    except Exception:
        return False


def _connected(grid: GridModel) -> bool:
    n = grid.n_nodes
    if n <= 1:
        return True
    rows = [grid.node_position(b.from_node) for b in grid.branches]
    cols = [grid.node_position(b.to_node) for b in grid.branches]
    adj = scipy.sparse.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n)
    )
    n_comp, _ = scipy.sparse.csgraph.connected_components(adj, directed=False)
    return n_comp == 1


@dataclass(frozen=True)
class CheckResult:
    name: str
    target: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the structural hypotheses checks on a grid."""

    checks: tuple[CheckResult, ...]
    kron_eligible: bool = field(default=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]


def validate_hypotheses(grid: GridModel) -> ValidationReport:
    """Check the structural assumptions the analyses rely on.

    Per branch: Z symmetric, Z invertible, Re{Z} positive semidefinite
    (with a separate strict-definiteness flag that gates Kron reduction).
    Per nonzero shunt: Y symmetric, Y invertible, Re{Y} positive
    semidefinite. Globally: the branch graph must be weakly connected.
    Failures are reported, not raised.
    """
    checks: list[CheckResult] = []
    all_re_z_pd = True
    for b in grid.branches:
        tag = f"{b.from_node}-{b.to_node}"
        checks.append(CheckResult("branch_symmetry", tag, _is_symmetric(b.z)))
        checks.append(CheckResult("branch_invertible", tag, _is_invertible(b.z)))
        lo, hi = _real_part_eigen_range(b.z)
        psd = lo >= -DEFINITENESS_RTOL * max(1.0, abs(hi))
        pd = lo > DEFINITENESS_RTOL * max(1.0, abs(hi))
        checks.append(
            CheckResult("branch_re_psd", tag, psd, f"min eig Re(Z) = {lo:.3e}")
        )
        all_re_z_pd &= pd
    for s in grid.shunts:
        if not np.any(s.y):
            continue
        checks.append(CheckResult("shunt_symmetry", s.node, _is_symmetric(s.y)))
        checks.append(CheckResult("shunt_invertible", s.node, _is_invertible(s.y)))
        lo, hi = _real_part_eigen_range(s.y)
        psd = lo >= -DEFINITENESS_RTOL * max(1.0, abs(hi))
        checks.append(
            CheckResult("shunt_re_psd", s.node, psd, f"min eig Re(Y) = {lo:.3e}")
        )
    connected = _connected(grid)
    checks.append(
        CheckResult("weak_connectivity", "branch graph", connected)
    )
    report = ValidationReport(
        checks=tuple(checks),
        kron_eligible=connected and all_re_z_pd and all(c.passed for c in checks),
    )
    return report


def build_admittance(grid: GridModel) -> np.ndarray:
    """Assemble the compound admittance matrix relating I = Y V.

    Y = A_P' Y_L A_P + Y_T with A_P the polyphase incidence matrix
    (edge-to-vertex incidence Kronecker the phase identity), Y_L the block
    diagonal of branch admittances (inverted branch impedances), and Y_T the
    block diagonal of accumulated node shunts.
    """
    if not _connected(grid):
        raise DisconnectedGraphError("branch graph is not weakly connected")
    n_p = grid.n_phases
    dim = grid.dimension

    branch_admittances = []
    for b in grid.branches:
        tag = f"{b.from_node}-{b.to_node}"
        if not _is_symmetric(b.z):
            raise NonSymmetricParameterError(f"branch {tag} impedance is not symmetric")
        try:
            y_l = scipy.linalg.inv(b.z)
        except scipy.linalg.LinAlgError as exc:
            raise SingularBranchImpedanceError(f"branch {tag}: {exc}") from exc
        if not np.all(np.isfinite(y_l)):
            raise SingularBranchImpedanceError(f"branch {tag} impedance is singular")
        branch_admittances.append(y_l)

    for s in grid.shunts:
        if np.any(s.y) and not _is_symmetric(s.y):
            raise NonSymmetricParameterError(f"shunt at {s.node} is not symmetric")

    if grid.branches:
        incidence = np.zeros((len(grid.branches), grid.n_nodes))
        for k, b in enumerate(grid.branches):
            incidence[k, grid.node_position(b.from_node)] = 1.0
            incidence[k, grid.node_position(b.to_node)] = -1.0
        a_p = np.kron(incidence, np.eye(n_p))
        y_blocks = scipy.linalg.block_diag(*branch_admittances)
        y = a_p.T @ y_blocks @ a_p
    else:
        y = np.zeros((dim, dim), dtype=complex)

    y_t = np.zeros((dim, dim), dtype=complex)
    for s in grid.shunts:
        sl = grid.flat_slice(s.node)
        y_t[sl, sl] += s.y
    return y + y_t


def injected_power(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Injected complex powers S = V o conj(Y V) (Hadamard product)."""
    y = as_matrix(y, "Y")
    v = np.asarray(v, dtype=complex).ravel()
    if y.shape[1] != v.size:
        raise ValueError(f"dimension mismatch: Y is {y.shape}, V has {v.size}")
    return v * np.conj(y @ v)


def branch_currents(grid: GridModel, v: np.ndarray) -> list[np.ndarray]:
    """Per-branch phase current vectors I_l = Z_l^-1 (V_from - V_to)."""
    v = np.asarray(v, dtype=complex).ravel()
    out = []
    for b in grid.branches:
        dv = v[grid.flat_slice(b.from_node)] - v[grid.flat_slice(b.to_node)]
        out.append(np.linalg.solve(b.z, dv))
    return out


def total_branch_losses(grid: GridModel, v: np.ndarray) -> complex:
    """Total complex power absorbed by the branches, sum of I_l^H Z_l I_l."""
    total = 0.0 + 0.0j
    for b, i_l in zip(grid.branches, branch_currents(grid, v)):
        total += np.conj(i_l) @ (b.z @ i_l)
    return complex(total)


def total_shunt_absorption(grid: GridModel, v: np.ndarray) -> complex:
    """Total complex power absorbed by the shunts."""
    v = np.asarray(v, dtype=complex).ravel()
    total = 0.0 + 0.0j
    for s in grid.shunts:
        vn = v[grid.flat_slice(s.node)]
        total += vn @ np.conj(s.y @ vn)
    return complex(total)
