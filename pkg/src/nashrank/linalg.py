"""Dense numerical kernels: ranks, independent columns, dual bases, selector
and coordinate matrices.

Observation matrices are plain n-by-m arrays whose k-th column is the k-th
observed strategy (the row player's strategies are stacked the same way, i.e.
already transposed into column form).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .core import DEFAULT_TOL, DataSet, NashRankError, Tolerances

__all__ = [
    "DependentColumns",
    "NonGenericData",
    "col_strategy_matrix",
    "row_strategy_matrix",
    "numerical_rank",
    "independent_columns",
    "dual_basis",
    "is_generic",
    "coordinate_map",
    "selector_matrix",
    "least_norm_solve",
]


class DependentColumns(NashRankError):
    """A matrix that was required to have independent columns does not."""


class NonGenericData(NashRankError):
    """Observed strategies are not generic (linearly independent with m <= n)."""


def col_strategy_matrix(d: DataSet) -> np.ndarray:
    """n x m matrix whose k-th column is the k-th observed column strategy."""
    return np.column_stack([o.col_strategy.probs for o in d.observations])


def row_strategy_matrix(d: DataSet) -> np.ndarray:
    """n x m matrix whose k-th column is the k-th observed row strategy."""
    return np.column_stack([o.row_strategy.probs for o in d.observations])


def numerical_rank(M: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> int:
    """Count of singular values above tol_rank * sigma_max * max(rows, cols)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    cutoff = tol.tol_rank * s[0] * max(M.shape)
    return int(np.count_nonzero(s > cutoff))


def independent_columns(Y: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> list[int]:
    """Earliest maximal set of linearly independent columns, scanning left to right."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    target = numerical_rank(Y, tol)
    picked: list[int] = []
    for j in range(Y.shape[1]):
        if len(picked) == target:
            break
        if numerical_rank(Y[:, picked + [j]], tol) > len(picked):
            picked.append(j)
    return picked


def dual_basis(Yhat: np.ndarray) -> np.ndarray:
    """Matrix G with G.T @ Yhat = I, for Yhat with independent columns.

    Among the many duals when t < n this is the least-norm one, obtained from
    the pseudoinverse; it is deterministic and well conditioned.
    """
    Yhat = np.asarray(Yhat, dtype=float)
    if Yhat.ndim == 1:
        Yhat = Yhat.reshape(-1, 1)
    t = Yhat.shape[1]
    if numerical_rank(Yhat) < t:
        raise DependentColumns(f"columns are not independent (rank < {t})")
    return np.linalg.pinv(Yhat).T


def is_generic(Y: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True when the columns are linearly independent (which requires m <= n)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, m = Y.shape
    return m <= n and numerical_rank(Y, tol) == m


def coordinate_map(Y: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """m x n matrix V with V @ y_k = e_k for every column y_k of a generic Y."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if not is_generic(Y, tol):
        raise NonGenericData("coordinate map needs independent observed strategies")
    return dual_basis(Y).T


def selector_matrix(
    Y_all: np.ndarray, subset: Iterable[int], tol: Tolerances = DEFAULT_TOL
) -> np.ndarray:
    """n x n map acting as the identity on the selected observed strategies and
    as zero on the remaining ones."""
    Y_all = np.atleast_2d(np.asarray(Y_all, dtype=float))
    if not is_generic(Y_all, tol):
        raise NonGenericData("selector matrices need independent observed strategies")
    n = Y_all.shape[0]
    idx = sorted(int(i) for i in subset)
    if not idx:
        return np.zeros((n, n))
    G = dual_basis(Y_all)
    return Y_all[:, idx] @ G[:, idx].T


def least_norm_solve(
    Y: np.ndarray, targets: Sequence[float], tol: Tolerances = DEFAULT_TOL
) -> np.ndarray:
    """Minimum-norm f with f . y_k = targets[k] for every column y_k of a generic Y."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if not is_generic(Y, tol):
        raise NonGenericData("least-norm interpolation needs independent observed strategies")
    t = np.asarray(targets, dtype=float)
    if t.size != Y.shape[1]:
        raise ValueError(f"{Y.shape[1]} columns but {t.size} targets")
    f, *_ = np.linalg.lstsq(Y.T, t, rcond=None)
    return f
