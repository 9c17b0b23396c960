"""Factorize the diagonal blocks of a block lower triangular matrix and backsolve.

Only diagonal blocks are factorized, so fill cannot appear outside them.
Identity diagonal blocks (the neural-network case) are detected exactly
and skipped.  Off-diagonal blocks keep whichever representation suits the
product in the sequential block solve: a vector for diagonal blocks, a
contiguous array for dense ones and CSC for the rest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, StructuralError
from .kernels.lu import LUFactors, lu_factor, lu_solve, lu_solve_flops
from .sparse import Permutation, SparseMatrix, as_dense, extract, permute
from .structure import DENSE, DIAGONAL, SPARSE, classify_block, upper_violations

PANEL_WIDTH = 32


@dataclass(frozen=True, eq=False)
class OffDiagonalBlock:
    row_block: int
    col_block: int
    kind: str
    data: object
    nnz: int
    shape: tuple

    def product_flops(self, nrhs):
        if self.kind == DENSE:
            return 2 * self.shape[0] * self.shape[1] * nrhs
        return 2 * self.nnz * nrhs


@dataclass(frozen=True, eq=False)
class BTFactors:
    """Factors of ``P M Q``.  ``diag[i]`` is ``None`` for an identity block."""

    structure: object
    p_row: Permutation
    p_col: Permutation
    diag: tuple
    offdiag: tuple
    factor_flops: int
    input_offdiag_nnz: int
    panel_width: int = PANEL_WIDTH

    @property
    def dim(self):
        return self.structure.dim

    @property
    def n_identity(self):
        return sum(1 for f in self.diag if f is None)

    @property
    def stored_offdiag_nnz(self):
        return sum(blk.nnz for row in self.offdiag for blk in row)

    @property
    def diag_nnz(self):
        total = 0
        for i, f in enumerate(self.diag):
            total += int(self.structure.sizes[i]) if f is None else f.nnz
        return total

    @property
    def nnz(self):
        """Stored entries: diagonal-block factors plus off-diagonal blocks."""
        return self.diag_nnz + self.stored_offdiag_nnz

    def solve_flops(self, nrhs=1):
        total = 0
        for i, row in enumerate(self.offdiag):
            total += sum(blk.product_flops(nrhs) for blk in row)
            f = self.diag[i]
            if f is not None:
                total += lu_solve_flops(f.dim, nrhs)
        return total


def _is_identity(blk):
    r, c, v = blk.coo()
    return blk.nnz == blk.nrows and np.array_equal(r, c) and np.all(v == 1.0)


def bt_factorize(m, p_row, p_col, structure, dense_hint=(), dense_threshold=0.5,
                 panel_width=PANEL_WIDTH):
    """Factor ``P m Q`` given its block lower triangular ``structure``.

    Tags already present in ``structure.tags`` are honoured; blocks named in
    ``dense_hint`` are stored densely whatever their density.
    """
    if m.nrows != m.ncols or m.nrows != structure.dim:
        raise DimensionError(f"matrix {m.shape} does not match structure of dim {structure.dim}")
    mp = permute(m, p_row, p_col)
    bad = upper_violations(mp, structure)
    if bad:
        raise StructuralError(f"permuted matrix has {bad} entries above the block diagonal")
    hints = set(map(tuple, dense_hint))
    nb = structure.nblocks
    diag = []
    flops = 0
    for i in range(nb):
        lo, hi = structure.block_range(i)
        blk = extract(mp, (lo, hi), (lo, hi))
        if _is_identity(blk):
            diag.append(None)
            continue
        f = lu_factor(blk.to_dense(), block_index=i)
        flops += f.flops
        diag.append(f)

    r, c, v = mp.coo()
    br, bc = structure.block_of(r), structure.block_of(c)
    low = br > bc
    r, c, v, br, bc = r[low], c[low], v[low], br[low], bc[low]
    rows = [[] for _ in range(nb)]
    if r.size:
        order = np.lexsort((bc, br))
        r, c, v, br, bc = r[order], c[order], v[order], br[order], bc[order]
        keys = br * nb + bc
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        ends = np.r_[starts[1:], keys.size]
        for s, e in zip(starts, ends):
            i, j = int(br[s]), int(bc[s])
            r0, r1 = structure.block_range(i)
            c0, c1 = structure.block_range(j)
            blk = SparseMatrix.from_coo(r1 - r0, c1 - c0, r[s:e] - r0, c[s:e] - c0, v[s:e])
            kind = DENSE if (i, j) in hints else structure.tags.get((i, j))
            if kind is None or (kind == DIAGONAL and classify_block(blk) != DIAGONAL):
                kind = classify_block(blk, dense_threshold)
            if kind == DIAGONAL:
                data = np.zeros(r1 - r0)
                br_, _, bv = blk.coo()
                data[br_] = bv
            elif kind == DENSE:
                data = np.ascontiguousarray(blk.to_dense())
            else:
                kind = SPARSE
                data = blk.to_scipy().tocsr()
            rows[i].append(OffDiagonalBlock(i, j, kind, data, blk.nnz, blk.shape))
    return BTFactors(structure, p_row, p_col, tuple(diag), tuple(tuple(x) for x in rows),
                     flops, int(r.size), panel_width)


def _solve_permuted(f, rhs):
    """Sequential block solve of ``(P M Q) y = rhs`` in place on a copy."""
    x = np.array(rhs, dtype=np.float64, order="F", copy=True)
    st = f.structure
    width = max(1, f.panel_width)
    for c0 in range(0, x.shape[1], width):
        panel = x[:, c0:c0 + width]
        for i in range(st.nblocks):
            lo, hi = st.block_range(i)
            yi = panel[lo:hi]
            for blk in f.offdiag[i]:
                j0, j1 = st.block_range(blk.col_block)
                xj = panel[j0:j1]
                if blk.kind == DIAGONAL:
                    yi -= blk.data[:, None] * xj
                else:
                    yi -= blk.data @ xj
            if f.diag[i] is not None:
                panel[lo:hi] = lu_solve(f.diag[i], yi)
        x[:, c0:c0 + width] = panel
    return x


def bt_solve(f, rhs):
    """Solve ``M x = rhs`` for the original (unpermuted) ``M``; rhs is a matrix."""
    b = as_dense(rhs)
    if b.shape[0] != f.dim:
        raise DimensionError(f"rhs has {b.shape[0]} rows, expected {f.dim}")
    y = _solve_permuted(f, b[f.p_row.forward])
    x = np.empty_like(y)
    x[f.p_col.forward] = y
    return x


def bt_solve_original(f, rhs):
    """Like :func:`bt_solve` but also accepts a vector and returns the same shape."""
    b = np.asarray(rhs, dtype=np.float64)
    x = bt_solve(f, b)
    return x[:, 0] if b.ndim == 1 else x


def bt_solve_permuted(f, rhs):
    """Solve the permuted system ``(P M Q) y = rhs`` directly."""
    b = as_dense(rhs)
    if b.shape[0] != f.dim:
        raise DimensionError(f"rhs has {b.shape[0]} rows, expected {f.dim}")
    return _solve_permuted(f, b)


def reconstruct_permuted(f):
    """Dense ``P M Q`` rebuilt from the stored factors (testing aid)."""
    st = f.structure
    out = np.zeros((st.dim, st.dim))
    for i, fac in enumerate(f.diag):
        lo, hi = st.block_range(i)
        if fac is None:
            out[lo:hi, lo:hi] = np.eye(hi - lo)
        else:
            perm = fac.row_permutation()
            blk = np.empty((fac.dim, fac.dim))
            blk[perm] = fac.lower() @ fac.upper()
            out[lo:hi, lo:hi] = blk
    for row in f.offdiag:
        for blk in row:
            r0, r1 = st.block_range(blk.row_block)
            c0, c1 = st.block_range(blk.col_block)
            if blk.kind == DIAGONAL:
                out[r0:r1, c0:c1] = np.diag(blk.data)
            elif blk.kind == DENSE:
                out[r0:r1, c0:c1] = blk.data
            else:
                out[r0:r1, c0:c1] = blk.data.toarray()
    return out


__all__ = ["BTFactors", "LUFactors", "OffDiagonalBlock", "bt_factorize", "bt_solve",
           "bt_solve_original", "bt_solve_permuted", "reconstruct_permuted"]
