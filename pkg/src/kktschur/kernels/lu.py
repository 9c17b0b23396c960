"""Dense LU with partial pivoting for non-identity diagonal blocks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..errors import DimensionError, SingularBlockError

SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class LUFactors:
    """Packed ``P A = L U``; ``piv`` is the LAPACK row-interchange sequence."""

    dim: int
    lu: np.ndarray
    piv: np.ndarray
    flops: int

    @property
    def nnz(self):
        return int(np.count_nonzero(self.lu))

    def lower(self):
        return np.tril(self.lu, -1) + np.eye(self.dim)

    def upper(self):
        return np.triu(self.lu)

    def row_permutation(self):
        """``perm`` such that ``A[perm] = L U``."""
        perm = np.arange(self.dim)
        for i, p in enumerate(self.piv):
            perm[i], perm[p] = perm[p], perm[i]
        return perm


def lu_flops(n):
    """Multiply-adds as 2 FLOPs, divisions as 1."""
    return sum((n - k - 1) + 2 * (n - k - 1) ** 2 for k in range(n))


def lu_solve_flops(n, nrhs):
    return nrhs * (2 * n * n - n)


def lu_factor(block, block_index=None):
    a = np.asarray(block, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"LU needs a square block, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return LUFactors(0, np.zeros((0, 0)), np.zeros(0, dtype=np.int32), 0)
    scale = np.max(np.abs(a))
    where = "" if block_index is None else f" (diagonal block {block_index})"
    if scale == 0.0:
        raise SingularBlockError(f"zero block{where}", block_index)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < SINGULAR_RTOL * scale:
        k = int(np.argmin(pivots))
        raise SingularBlockError(f"pivot {k} below threshold{where}", block_index)
    return LUFactors(n, lu, piv, lu_flops(n))


def lu_solve(f, rhs):
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape[0] != f.dim:
        raise DimensionError(f"rhs has {b.shape[0]} rows, factor has dim {f.dim}")
    return sla.lu_solve((f.lu, f.piv), b, check_finite=False)
