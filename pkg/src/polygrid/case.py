"""Analysis case: the network model an individual study runs against.

A case bundles the (possibly Kron-reduced) admittance matrix with the
retained nodes, their roles, and the device set. Power flow, state
estimation, and stability assessment all consume cases, so a reduced model
is interchangeable with the full one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .devices import DeviceSet
from .grid import GridModel, NodeRole, PerUnitBase, build_admittance
from .kron import ReductionStep


@dataclass(frozen=True)
class AnalysisCase:
    """Immutable network model over the retained nodes, canonical order."""

    y: np.ndarray
    n_phases: int
    node_roles: tuple[tuple[str, NodeRole], ...]
    devices: DeviceSet
    base: PerUnitBase
    step: ReductionStep | None = None

    def __post_init__(self):
        dim = len(self.node_roles) * self.n_phases
        if self.y.shape != (dim, dim):
            raise ValueError(
                f"admittance is {self.y.shape} but the case has {dim} terminals"
            )

    # -- structure ---------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.node_roles)

    @property
    def dimension(self) -> int:
        return self.n_nodes * self.n_phases

    @property
    def step_index(self) -> int:
        return self.step.step_index if self.step is not None else 0

    def nodes_with_role(self, role: NodeRole) -> tuple[str, ...]:
        return tuple(n for n, r in self.node_roles if r is role)

    @property
    def slack_nodes(self):
        return self.nodes_with_role(NodeRole.SLACK)

    @property
    def resource_nodes(self):
        return self.nodes_with_role(NodeRole.RESOURCE)

    @property
    def zero_injection_nodes(self):
        return self.nodes_with_role(NodeRole.ZERO_INJECTION)

    def flat_slice(self, node: str) -> slice:
        for i, (name, _) in enumerate(self.node_roles):
            if name == node:
                return slice(i * self.n_phases, (i + 1) * self.n_phases)
        raise KeyError(node)

    def role_indices(self, role: NodeRole) -> np.ndarray:
        out = []
        for i, (_, r) in enumerate(self.node_roles):
            if r is role:
                out.extend(range(i * self.n_phases, (i + 1) * self.n_phases))
        return np.asarray(out, dtype=np.intp)

    @property
    def instrumented_indices(self) -> np.ndarray:
        """Flat indices of slack and resource terminals (always retained)."""
        out = []
        for i, (_, r) in enumerate(self.node_roles):
            if r is not NodeRole.ZERO_INJECTION:
                out.extend(range(i * self.n_phases, (i + 1) * self.n_phases))
        return np.asarray(out, dtype=np.intp)


def full_case(grid: GridModel, devices: DeviceSet) -> AnalysisCase:
    """Unreduced case over all grid nodes."""
    devices.validate_against(grid)
    return AnalysisCase(
        y=build_admittance(grid),
        n_phases=grid.n_phases,
        node_roles=tuple((n, grid.roles[n]) for n in grid.nodes),
        devices=devices,
        base=grid.base,
    )


def reduced_case(grid: GridModel, devices: DeviceSet, step: ReductionStep) -> AnalysisCase:
    """Case over the nodes retained by a reduction step.

    The schedule eliminates whole zero-injection nodes, so the retained
    node list is the grid's canonical list minus the eliminated ones.
    """
    devices.validate_against(grid)
    dropped = set(step.eliminated_nodes)
    retained = tuple(
        (n, grid.roles[n]) for n in grid.nodes if n not in dropped
    )
    if len(retained) * grid.n_phases != step.retained.size:
        raise ValueError("reduction step does not match the grid's node set")
    return AnalysisCase(
        y=step.y_reduced,
        n_phases=grid.n_phases,
        node_roles=retained,
        devices=devices,
        base=grid.base,
        step=step,
    )


def loading_vector(case: AnalysisCase, lam) -> np.ndarray:
    """Per-resource-node loading factors from a scalar, vector, or profile time."""
    nodes = case.resource_nodes
    if np.isscalar(lam):
        return np.full(len(nodes), float(lam))
    arr = np.asarray(lam, dtype=float).ravel()
    if arr.size != len(nodes):
        raise ValueError(f"expected {len(nodes)} loading factors, got {arr.size}")
    return arr


def loading_from_profile(case: AnalysisCase, time_index: int) -> np.ndarray:
    """Loading factors for all resource nodes at one profile time step."""
    profile = case.devices.profile
    if profile is None:
        raise ValueError("the device set has no loading profile")
    return profile.at(time_index, case.resource_nodes)
