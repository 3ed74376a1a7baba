"""Dense complex linear-algebra kernel shared by all analyses.

Everything downstream (admittance reduction, Newton solves, least squares,
continuation) is built on three primitives: an LU solve with a relative
pivot-singularity guard, the Schur complement of a partitioned matrix, and
the 2-norm condition number from a full SVD. Matrices are plain numpy
arrays; all functions are pure and thread-safe.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import SingularBlockError, SingularMatrixError

# A pivot smaller than this fraction of the largest pivot is treated as zero.
PIVOT_RTOL = 1e-13

# Singular values below this are treated as exactly zero by condition_number_2.
SMIN_FLOOR = 1e-300


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D floating array and reject non-finite entries.

    Complex input stays complex; real input stays real (a real matrix is
    just a complex one with zero imaginary parts, and the real LU/SVD
    paths are considerably faster).
    """
    m = np.asarray(a)
    dtype = complex if np.iscomplexobj(m) else float
    m = np.asarray(m, dtype=dtype)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_index_set(indices, dim: int, name: str = "index set") -> np.ndarray:
    """Validate a strictly increasing set of flat indices below ``dim``."""
    ix = np.asarray(indices, dtype=np.intp).ravel()
    if ix.size:
        if ix.min() < 0 or ix.max() >= dim:
            raise ValueError(f"{name} has indices outside [0, {dim})")
        if np.any(np.diff(ix) <= 0):
            raise ValueError(f"{name} must be strictly increasing")
    return ix


def lu_factor(a: np.ndarray):
    """LU-factorize a square matrix, rejecting numerically singular input.

    Returns the opaque (lu, piv) pair accepted by :func:`lu_solve_factored`.
    Raises SingularMatrixError when the smallest pivot magnitude falls below
    ``PIVOT_RTOL`` times the largest one.
    """
    a = as_matrix(a, "A")
    n, m = a.shape
    if n != m:
        raise ValueError(f"A must be square, got {a.shape}")
    if n == 0:
        raise ValueError("A must have at least one row")
    with warnings.catch_warnings():
        # an exactly-zero pivot triggers scipy's LinAlgWarning; the pivot
        # check below turns it into a typed error instead
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.max() == 0.0 or pivots.min() < PIVOT_RTOL * pivots.max():
        raise SingularMatrixError(
            f"pivot ratio {pivots.min():.3e}/{pivots.max():.3e} below {PIVOT_RTOL:g}"
        )
    return lu, piv


def lu_solve_factored(factorization, b: np.ndarray) -> np.ndarray:
    """Solve A X = B reusing a factorization from :func:`lu_factor`."""
    lu, piv = factorization
    b = np.asarray(b)
    vector_rhs = b.ndim == 1
    bm = as_matrix(b, "B")
    if np.iscomplexobj(bm) and not np.iscomplexobj(lu):
        lu = lu.astype(complex)
    if bm.shape[0] != lu.shape[0]:
        raise ValueError(f"B has {bm.shape[0]} rows, expected {lu.shape[0]}")
    x = scipy.linalg.lu_solve((lu, piv), bm, check_finite=False)
    return x.ravel() if vector_rhs else x


def lu_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B by partial-pivoting LU.

    Deterministic for identical inputs. A 1-D right-hand side returns a
    1-D solution; a 2-D one returns a matrix of matching width.
    """
    return lu_solve_factored(lu_factor(a), b)


def schur_complement(m: np.ndarray, keep, drop) -> np.ndarray:
    """Schur complement M[keep,keep] - M[keep,drop] M[drop,drop]^-1 M[drop,keep].

    ``keep`` and ``drop`` must partition range(n). An empty ``drop`` returns
    the plain restriction M[keep,keep]; an empty ``keep`` returns a 0x0
    matrix. Raises SingularBlockError when M[drop,drop] is singular.
    """
    m = as_matrix(m, "M")
    n = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"M must be square, got {m.shape}")
    keep = as_index_set(keep, n, "keep")
    drop = as_index_set(drop, n, "drop")
    combined = np.concatenate([keep, drop])
    if combined.size != n or np.unique(combined).size != n:
        raise ValueError("keep and drop must partition the index range")
    if keep.size == 0:
        return np.zeros((0, 0), dtype=m.dtype)
    if drop.size == 0:
        return m[np.ix_(keep, keep)].copy()
    try:
        interior = lu_factor(m[np.ix_(drop, drop)])
    except SingularMatrixError as exc:
        raise SingularBlockError(f"M[drop,drop] is singular: {exc}") from exc
    coupling = lu_solve_factored(interior, m[np.ix_(drop, keep)])
    return m[np.ix_(keep, keep)] - m[np.ix_(keep, drop)] @ coupling


def condition_number_2(a: np.ndarray) -> float:
    """2-norm condition number sigma_max / sigma_min from a full SVD.

    Returns +inf when the smallest singular value is below ``SMIN_FLOOR``.
    """
    a = as_matrix(a, "A")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"A must be square, got {a.shape}")
    if not np.any(a):
        raise ValueError("A must be nonzero")
    sigma = np.linalg.svd(a, compute_uv=False)
    smin = sigma.min()
    if smin < SMIN_FLOOR:
        return float("inf")
    return float(sigma.max() / smin)
