"""Elimination of zero-injection nodes via the Schur complement.

Nodes with zero injected current can be removed from the admittance model
without changing the current-voltage relation at the remaining nodes; their
voltages stay recoverable through a fixed linear map. The reduction is done
at the matrix level: a reduced model keeps only the admittance matrix and
the recovery operator, not branch-level parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    PreconditionViolatedError,
    SingularBlockError,
    SingularInteriorBlockError,
    SingularMatrixError,
)
from .grid import GridModel, build_admittance, validate_hypotheses
from .linalg import as_index_set, as_matrix, lu_factor, lu_solve_factored, schur_complement


@dataclass(frozen=True)
class ReductionStep:
    """One reduced admittance model plus the interior-voltage recovery map.

    ``retained`` and ``eliminated`` are flat (node, phase) indices into the
    original matrix. ``recovery`` maps retained voltages to eliminated ones:
    V_eliminated = recovery @ V_retained.
    """

    step_index: int
    retained: np.ndarray
    eliminated: np.ndarray
    y_reduced: np.ndarray
    recovery: np.ndarray
    eliminated_nodes: tuple[str, ...] = field(default=())
    partial_batch: bool = field(default=False)

    @property
    def dimension(self) -> int:
        return self.retained.size


def kron_reduce(y: np.ndarray, eliminate, step_index: int = 0) -> ReductionStep:
    """Eliminate the given flat indices from an admittance matrix.

    The caller guarantees the eliminated terminals carry zero injected
    current. Raises SingularInteriorBlockError when the eliminated block
    is not invertible.
    """
    y = as_matrix(y, "Y")
    n = y.shape[0]
    if y.shape[0] != y.shape[1]:
        raise ValueError(f"Y must be square, got {y.shape}")
    eliminate = as_index_set(eliminate, n, "eliminate")
    keep = np.setdiff1d(np.arange(n, dtype=np.intp), eliminate)

    if eliminate.size == 0:
        return ReductionStep(
            step_index=step_index,
            retained=keep,
            eliminated=eliminate,
            y_reduced=y.copy(),
            recovery=np.zeros((0, n), dtype=complex),
        )
    if keep.size == 0:
        raise ValueError("cannot eliminate every terminal")

    try:
        interior = lu_factor(y[np.ix_(eliminate, eliminate)])
        y_reduced = schur_complement(y, keep, eliminate)
    except (SingularBlockError, SingularMatrixError) as exc:
        raise SingularInteriorBlockError(str(exc)) from exc
    recovery = -lu_solve_factored(interior, y[np.ix_(eliminate, keep)])
    return ReductionStep(
        step_index=step_index,
        retained=keep,
        eliminated=eliminate,
        y_reduced=y_reduced,
        recovery=recovery,
    )


def recover_interior(step: ReductionStep, v_retained: np.ndarray) -> np.ndarray:
    """Voltages of the eliminated terminals from the retained ones."""
    v = np.asarray(v_retained, dtype=complex).ravel()
    if v.size != step.recovery.shape[1]:
        raise ValueError(
            f"retained voltage vector has {v.size} entries, expected {step.recovery.shape[1]}"
        )
    return step.recovery @ v


def reduction_schedule(
    grid: GridModel, batch: int, y: np.ndarray | None = None
) -> list[ReductionStep]:
    """Progressive elimination of the grid's zero-injection nodes.

    Step 0 is the unreduced model; step k eliminates the last k * batch
    zero-injection nodes (in canonical order). When ``batch`` does not
    divide the zero-injection count, a final smaller batch is appended and
    flagged on the step.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    report = validate_hypotheses(grid)
    if not report.kron_eligible:
        failed = ", ".join(f"{c.name}({c.target})" for c in report.failures())
        raise PreconditionViolatedError(
            f"grid is not eligible for reduction: {failed or 'Re(Z) not positive definite'}"
        )
    if y is None:
        y = build_admittance(grid)

    zero_nodes = grid.zero_injection_nodes
    counts = list(range(0, len(zero_nodes) + 1, batch))
    if counts[-1] != len(zero_nodes):
        counts.append(len(zero_nodes))
        warnings.warn(
            f"batch {batch} does not divide {len(zero_nodes)} zero-injection nodes; "
            "final step uses a smaller batch",
            stacklevel=2,
        )

    steps = []
    for k, count in enumerate(counts):
        dropped = zero_nodes[len(zero_nodes) - count:]
        flat = grid.flat_indices(dropped)
        step = kron_reduce(y, flat, step_index=k)
        steps.append(
            ReductionStep(
                step_index=k,
                retained=step.retained,
                eliminated=step.eliminated,
                y_reduced=step.y_reduced,
                recovery=step.recovery,
                eliminated_nodes=tuple(dropped),
                partial_batch=bool(count % batch) if count else False,
            )
        )
    return steps
