"""Schur-complement factorization of KKT matrices whose pivot block is block triangular.

The KKT matrix is partitioned as ``M = [[A, B^T], [B, C]]`` where
``C = [[W_yy, J^T], [J, 0]]`` and ``J`` is block lower triangular.  ``C`` is
permuted to block triangular form and factorized block by block, the
(small) Schur complement ``S = A - B^T C^{-1} B`` is formed densely and
factorized with Bunch-Kaufman.  The inertia of ``C`` is ``(n_y, n_y, 0)``
for any symmetric ``W_yy``, so the inertia of ``M`` follows from ``S``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .blocktri import BTFactors, bt_factorize, bt_solve
from .errors import DimensionError, StructuralError
from .generator import assemble_pivot_matrix
from .kernels.ldlt import Inertia, LBLTFactors, bunch_kaufman
from .sparse import SparseMatrix, SymmetricSparse, as_dense
from .structure import (maximum_matching, pivot_block_structure,
                        structured_pivot_permutation, upper_violations)

DEFAULT_TOL = 1e-5
DEFAULT_MAX_ITERS = 10
PHASES = ("factor-pivot", "build-schur", "factor-schur")


@dataclass(frozen=True, eq=False)
class SchurFactors:
    bt: BTFactors
    S: np.ndarray
    s_factors: LBLTFactors
    B: SparseMatrix
    b_cols: np.ndarray
    n_A: int
    n_y: int
    asymmetry: float
    flops: dict
    times: dict
    reg: float = 0.0
    _b_csc: object = field(default=None, repr=False)

    @property
    def n_C(self):
        return 2 * self.n_y

    @property
    def dim(self):
        return self.n_A + self.n_C

    @property
    def nnz(self):
        """Stored entries of the structured factorization: C factors, S factors and B."""
        return self.bt.nnz + self.s_factors.nnz + self.B.nnz

    @property
    def total_flops(self):
        return sum(self.flops.values())

    def solve_flops(self, nrhs=1):
        nnz_b = self.B.nnz
        return (2 * self.bt.solve_flops(nrhs) + 2 * 2 * nnz_b * nrhs
                + self.s_factors.solve_flops(nrhs))


def _pivot_tags(j_structure):
    """Carry J's off-diagonal tags to both triangular copies inside the permuted pivot matrix."""
    nb = j_structure.nblocks
    tags = {}
    for (i, j), t in j_structure.tags.items():
        tags[(i, j)] = t
        # J^T block (j, i), reversed in both directions, lands at (nb + nb-1-j, nb + nb-1-i)
        tags[(2 * nb - 1 - j, 2 * nb - 1 - i)] = t
    return tags


def factor_pivot_matrix(W_yy, J, j_structure):
    """Check ``J`` structurally and factorize the permuted pivot matrix."""
    n_y = J.nrows
    if J.ncols != n_y or W_yy.dim != n_y:
        raise DimensionError("J and W_yy must both be n_y x n_y")
    if j_structure.dim != n_y:
        raise DimensionError(f"J block structure has dim {j_structure.dim}, expected {n_y}")
    if upper_violations(J, j_structure):
        raise StructuralError("J is not block lower triangular under the given block structure")
    match = maximum_matching(J)
    if not match.perfect:
        raise StructuralError(f"J is structurally singular (deficiency {match.deficiency})",
                              deficiency=match.deficiency)
    C = assemble_pivot_matrix(W_yy, J).full()
    p_row, p_col = structured_pivot_permutation(n_y)
    st = pivot_block_structure(j_structure)
    st = st.with_tags(_pivot_tags(j_structure))
    return bt_factorize(C, p_row, p_col, st)


def schur_factorize(A, B, W_yy, J, j_structure, reg=0.0, reg_dim=None, use_numba=None):
    """Factorize ``[[A, B^T], [B, C]]`` through the Schur complement of ``C``.

    ``reg`` adds ``reg * I`` to the leading ``reg_dim`` diagonal entries of
    ``A`` (default: all of ``A``).  ``C`` itself is never regularized.
    """
    if isinstance(A, SparseMatrix):
        A = SymmetricSparse.from_full(A)
    n_A = A.dim
    n_y = J.nrows
    if B.shape != (2 * n_y, n_A):
        raise DimensionError(f"B has shape {B.shape}, expected ({2 * n_y}, {n_A})")
    times = {}
    flops = {}

    t0 = time.perf_counter()
    bt = factor_pivot_matrix(W_yy, J, j_structure)
    times["factor-pivot"] = time.perf_counter() - t0
    flops["factor-pivot"] = int(bt.factor_flops)

    t0 = time.perf_counter()
    S = A.to_dense()
    if reg:
        k = n_A if reg_dim is None else int(reg_dim)
        S[np.arange(k), np.arange(k)] += reg
    b_csc = B.to_scipy()
    cols = B.nonzero_columns()
    build = 0
    if cols.size:
        bsub = b_csc[:, cols]
        X = bt_solve(bt, bsub.toarray())
        S[np.ix_(cols, cols)] -= np.asarray(bsub.T @ X)
        build = bt.solve_flops(cols.size) + 2 * bsub.nnz * cols.size
    scale = float(np.max(np.abs(S))) if S.size else 0.0
    asym = float(np.max(np.abs(S - S.T))) / scale if scale > 0 else 0.0
    S = 0.5 * (S + S.T)
    times["build-schur"] = time.perf_counter() - t0
    flops["build-schur"] = int(build)

    t0 = time.perf_counter()
    sf = bunch_kaufman(S, use_numba=use_numba)
    times["factor-schur"] = time.perf_counter() - t0
    flops["factor-schur"] = int(sf.flops)

    return SchurFactors(bt, S, sf, B, cols, n_A, n_y, asym, flops, times, float(reg), b_csc)


def factorize_system(system, reg=0.0, use_numba=None):
    """:func:`schur_factorize` for a generated :class:`KKTSystem`; ``reg`` shifts the x block only."""
    return schur_factorize(system.A, system.B, system.W_yy, system.J, system.j_structure,
                           reg=reg, reg_dim=system.n_x, use_numba=use_numba)


def _b(f):
    return f._b_csc if f._b_csc is not None else f.B.to_scipy()


def schur_solve(f, r):
    """Solve ``M x = r``: eliminate through ``C``, solve with ``S``, back-substitute."""
    r = np.asarray(r, dtype=np.float64)
    vec = r.ndim == 1
    R = as_dense(r)
    if R.shape[0] != f.dim:
        raise DimensionError(f"rhs has {R.shape[0]} rows, expected {f.dim}")
    r_A, r_C = R[:f.n_A], R[f.n_A:]
    B = _b(f)
    w = bt_solve(f.bt, r_C)
    r_S = r_A - np.asarray(B.T @ w)
    x_A = as_dense(f.s_factors.solve(r_S))
    x_C = bt_solve(f.bt, r_C - np.asarray(B @ x_A))
    x = np.vstack([x_A, x_C])
    return x[:, 0] if vec else x


def schur_inertia(f):
    """Inertia of ``M``: ``(n_y, n_y, 0)`` from ``C`` plus the inertia of ``S``."""
    return Inertia(f.n_y, f.n_y, 0) + f.s_factors.inertia


def check_inertia_target(i, n, m):
    """True when ``i`` is the inertia a KKT matrix needs for a descent step: ``(n, m, 0)``."""
    return tuple(i) == (int(n), int(m), 0)


def perturb_schur(f, i, j, delta):
    """Test hook: factors whose ``S`` carries an extra ``delta`` at ``(i, j)`` and ``(j, i)``."""
    S = f.S.copy()
    S[i, j] += delta
    if i != j:
        S[j, i] += delta
    return replace(f, S=S, s_factors=bunch_kaufman(S))


@dataclass
class SolveReport:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    inertia: Inertia | None = None
    times: dict = field(default_factory=dict)
    history: list = field(default_factory=list)


def _as_operator(M):
    if isinstance(M, SymmetricSparse):
        M = M.full()
    if isinstance(M, SparseMatrix):
        return M.to_scipy()
    return np.asarray(M, dtype=np.float64)


def refine(solve, M, r, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS):
    """Iterative refinement with residuals from the full matrix ``M``.

    Returns ``(x, residual, iterations, history)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    op = _as_operator(M)
    r = np.asarray(r, dtype=np.float64)
    x = solve(r)
    res = r - op @ x
    norm = float(np.max(np.abs(res))) if res.size else 0.0
    history = [norm]
    it = 0
    while norm >= tol and it < max_iters:
        x = x + solve(res)
        it += 1
        res = r - op @ x
        norm = float(np.max(np.abs(res))) if res.size else 0.0
        history.append(norm)
    return x, norm, it, history


def solve_refined(f, M, r, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS):
    """:func:`schur_solve` followed by iterative refinement; never raises on non-convergence."""
    t0 = time.perf_counter()
    x, norm, it, history = refine(lambda b: schur_solve(f, b), M, r, tol, max_iters)
    times = dict(f.times)
    times["solve"] = time.perf_counter() - t0
    return SolveReport(x, norm, it, norm < tol, schur_inertia(f), times, history)


__all__ = ["PHASES", "SchurFactors", "SolveReport", "check_inertia_target", "factor_pivot_matrix",
           "factorize_system", "perturb_schur", "refine", "schur_factorize", "schur_inertia",
           "schur_solve", "solve_refined"]
