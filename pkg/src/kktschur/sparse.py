"""Sparse containers, permutations and the small set of products the solvers need.

Matrices are immutable compressed-column (CSC) objects with sorted row
indices and no duplicates.  Dense matrices are plain column-major numpy
arrays; :func:`as_dense` normalizes inputs to that layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, StructuralError


def as_dense(b, ncols=None):
    """Return ``b`` as a 2-D column-major float64 array (vectors become one column)."""
    arr = np.asarray(b, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"expected a vector or matrix, got ndim={arr.ndim}")
    if ncols is not None and arr.shape[1] != ncols:
        raise DimensionError(f"expected {ncols} columns, got {arr.shape[1]}")
    return np.asfortranarray(arr)


class SparseMatrix:
    """Immutable sparse matrix in compressed-column form.

    Build one with :meth:`from_coo` (or :func:`to_compressed`); duplicates are
    summed and exact zeros dropped there.  The raw arrays ``indptr``,
    ``indices`` and ``data`` are read-only views.
    """

    __slots__ = ("nrows", "ncols", "indptr", "indices", "data", "_coo_cache")

    def __init__(self, nrows, ncols, indptr, indices, data):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        for arr in (self.indptr, self.indices, self.data):
            arr.flags.writeable = False
        self._coo_cache = None

    # -- construction -------------------------------------------------
    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise DimensionError("row, column and value arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= nrows
                          or cols.min() < 0 or cols.max() >= ncols):
            raise StructuralError(f"entry index out of range for {nrows}x{ncols} matrix")
        keys = cols * max(nrows, 1) + rows
        uniq, inv = np.unique(keys, return_inverse=True)
        summed = np.zeros(uniq.size)
        np.add.at(summed, inv, vals)
        keep = summed != 0.0
        uniq, summed = uniq[keep], summed[keep]
        out_cols = uniq // max(nrows, 1)
        out_rows = uniq - out_cols * max(nrows, 1)
        indptr = np.zeros(ncols + 1, dtype=np.int64)
        np.cumsum(np.bincount(out_cols, minlength=ncols), out=indptr[1:])
        return cls(nrows, ncols, indptr, out_rows, summed)

    @classmethod
    def from_entries(cls, nrows, ncols, entries):
        if len(entries) == 0:
            return cls.from_coo(nrows, ncols, [], [], [])
        r, c, v = zip(*entries)
        return cls.from_coo(nrows, ncols, r, c, v)

    @classmethod
    def from_dense(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        r, c = np.nonzero(arr)
        return cls.from_coo(arr.shape[0], arr.shape[1], r, c, arr[r, c])

    @classmethod
    def from_scipy(cls, m):
        m = sp.coo_matrix(m)
        return cls.from_coo(m.shape[0], m.shape[1], m.row, m.col, m.data)

    @classmethod
    def identity(cls, n, scale=1.0):
        idx = np.arange(n)
        return cls.from_coo(n, n, idx, idx, np.full(n, float(scale)))

    @classmethod
    def zeros(cls, nrows, ncols):
        return cls.from_coo(nrows, ncols, [], [], [])

    # -- views ----------------------------------------------------------
    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return int(self.data.size)

    def coo(self):
        """Return ``(rows, cols, vals)`` sorted by column, then row."""
        if self._coo_cache is None:
            cols = np.repeat(np.arange(self.ncols, dtype=np.int64), np.diff(self.indptr))
            self._coo_cache = (self.indices, cols, self.data)
        return self._coo_cache

    def entries(self):
        r, c, v = self.coo()
        return list(zip(r.tolist(), c.tolist(), v.tolist()))

    def entry_set(self):
        return set(self.entries())

    def pattern(self):
        """Set of structurally nonzero ``(row, col)`` positions."""
        r, c, _ = self.coo()
        return set(zip(r.tolist(), c.tolist()))

    def to_dense(self):
        out = np.zeros((self.nrows, self.ncols), order="F")
        r, c, v = self.coo()
        out[r, c] = v
        return out

    def to_scipy(self):
        return sp.csc_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def column(self, j):
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def nonzero_columns(self):
        return np.flatnonzero(np.diff(self.indptr))

    def transpose(self):
        r, c, v = self.coo()
        return SparseMatrix.from_coo(self.ncols, self.nrows, c, r, v)

    @property
    def T(self):
        return self.transpose()

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.data, other.data))

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def to_compressed(entries, shape):
    """Compress a list of ``(row, col, value)`` triples into a :class:`SparseMatrix`."""
    return SparseMatrix.from_entries(shape[0], shape[1], entries)


class SymmetricSparse:
    """Symmetric matrix stored by its lower triangle (``row >= col``)."""

    __slots__ = ("dim", "lower")

    def __init__(self, lower):
        if lower.nrows != lower.ncols:
            raise DimensionError("symmetric storage needs a square matrix")
        r, c, _ = lower.coo()
        if np.any(r < c):
            raise StructuralError("lower-triangle storage holds an entry above the diagonal")
        self.dim = lower.nrows
        self.lower = lower

    @classmethod
    def from_coo(cls, dim, rows, cols, vals):
        """Build from lower-triangle coordinates; upper entries are mirrored down."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        lo = np.maximum(rows, cols)
        hi = np.minimum(rows, cols)
        return cls(SparseMatrix.from_coo(dim, dim, lo, hi, vals))

    @classmethod
    def from_full(cls, m):
        """Take the lower triangle of a full symmetric matrix (no symmetry check)."""
        if isinstance(m, np.ndarray):
            m = SparseMatrix.from_dense(m)
        r, c, v = m.coo()
        keep = r >= c
        return cls(SparseMatrix.from_coo(m.nrows, m.ncols, r[keep], c[keep], v[keep]))

    @property
    def nnz(self):
        return self.lower.nnz

    def full(self):
        r, c, v = self.lower.coo()
        off = r != c
        return SparseMatrix.from_coo(
            self.dim, self.dim,
            np.concatenate([r, c[off]]), np.concatenate([c, r[off]]),
            np.concatenate([v, v[off]]))

    def to_dense(self):
        return self.full().to_dense()

    def __eq__(self, other):
        if not isinstance(other, SymmetricSparse):
            return NotImplemented
        return self.lower == other.lower

    __hash__ = None

    def __repr__(self):
        return f"SymmetricSparse(dim={self.dim}, nnz_lower={self.nnz})"


@dataclass(frozen=True, eq=False)
class Permutation:
    """``forward[i]`` is the original index placed at position ``i``."""

    forward: np.ndarray

    def __post_init__(self):
        fwd = np.asarray(self.forward, dtype=np.int64).copy()
        if fwd.ndim != 1 or not np.array_equal(np.sort(fwd), np.arange(fwd.size)):
            raise StructuralError("permutation vector is not a bijection on 0..n-1")
        fwd.flags.writeable = False
        object.__setattr__(self, "forward", fwd)

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))

    @classmethod
    def from_one_based(cls, seq):
        return cls(np.asarray(seq, dtype=np.int64) - 1)

    @property
    def size(self):
        return int(self.forward.size)

    def inverse(self):
        inv = np.empty_like(self.forward)
        inv[self.forward] = np.arange(self.size)
        return Permutation(inv)

    def then(self, other):
        """Permutation equivalent to applying ``self`` and then ``other``."""
        if other.size != self.size:
            raise DimensionError("permutation sizes differ")
        return Permutation(self.forward[other.forward])

    def one_based(self):
        return (self.forward + 1).tolist()

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.forward, other.forward)

    __hash__ = None

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"Permutation({self.forward.tolist()})"


def permute(m, p_row, p_col):
    """Return ``P m Q`` with ``out[i, j] = m[p_row.forward[i], p_col.forward[j]]``."""
    if p_row.size != m.nrows or p_col.size != m.ncols:
        raise DimensionError(
            f"permutation sizes ({p_row.size}, {p_col.size}) do not match {m.shape}")
    r, c, v = m.coo()
    inv_r = p_row.inverse().forward
    inv_c = p_col.inverse().forward
    return SparseMatrix.from_coo(m.nrows, m.ncols, inv_r[r], inv_c[c], v)


def spmm(a, b):
    """Sparse times dense; returns a column-major array."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != a.ncols:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return np.asfortranarray(a.to_scipy() @ b)


def spmv(a, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != a.ncols:
        raise DimensionError(f"cannot multiply {a.shape} by vector of length {x.size}")
    return a.to_scipy() @ x


def spmm_t(a, b):
    """``a^T b`` computed column by column without forming the transpose."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
        squeeze = True
    else:
        squeeze = False
    if b.shape[0] != a.nrows:
        raise DimensionError(f"cannot multiply transpose of {a.shape} by {b.shape}")
    out = np.asfortranarray(a.to_scipy().T @ b)
    return out[:, 0] if squeeze else out


def extract(m, row_range, col_range):
    """Submatrix ``m[r0:r1, c0:c1]`` with indices relative to the block."""
    r0, r1 = row_range
    c0, c1 = col_range
    if not (0 <= r0 <= r1 <= m.nrows and 0 <= c0 <= c1 <= m.ncols):
        raise DimensionError(f"range {row_range}x{col_range} outside {m.shape}")
    lo, hi = m.indptr[c0], m.indptr[c1]
    rows = m.indices[lo:hi]
    cols = np.repeat(np.arange(c0, c1), np.diff(m.indptr[c0:c1 + 1]))
    vals = m.data[lo:hi]
    keep = (rows >= r0) & (rows < r1)
    return SparseMatrix.from_coo(r1 - r0, c1 - c0, rows[keep] - r0, cols[keep] - c0, vals[keep])


def add(a, b, alpha=1.0, beta=1.0):
    """``alpha * a + beta * b`` for equally shaped sparse matrices."""
    if a.shape != b.shape:
        raise DimensionError(f"cannot add {a.shape} and {b.shape}")
    ra, ca, va = a.coo()
    rb, cb, vb = b.coo()
    return SparseMatrix.from_coo(a.nrows, a.ncols, np.concatenate([ra, rb]),
                                 np.concatenate([ca, cb]),
                                 np.concatenate([alpha * va, beta * vb]))


def block_matrix(blocks):
    """Assemble a 2-D list of SparseMatrix (or ``None`` for zero) blocks."""
    row_sizes = []
    col_sizes = []
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            if len(row_sizes) <= i:
                row_sizes.extend([None] * (i + 1 - len(row_sizes)))
            if len(col_sizes) <= j:
                col_sizes.extend([None] * (j + 1 - len(col_sizes)))
            row_sizes[i] = blk.nrows
            col_sizes[j] = blk.ncols
    if None in row_sizes or None in col_sizes or len(row_sizes) != len(blocks):
        raise DimensionError("every block row and column needs at least one sized block")
    roff = np.concatenate([[0], np.cumsum(row_sizes)])
    coff = np.concatenate([[0], np.cumsum(col_sizes)])
    rr, cc, vv = [], [], []
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            if blk.shape != (row_sizes[i], col_sizes[j]):
                raise DimensionError(f"block ({i}, {j}) has shape {blk.shape}")
            r, c, v = blk.coo()
            rr.append(r + roff[i])
            cc.append(c + coff[j])
            vv.append(v)
    return SparseMatrix.from_coo(int(roff[-1]), int(coff[-1]),
                                 np.concatenate(rr) if rr else [],
                                 np.concatenate(cc) if cc else [],
                                 np.concatenate(vv) if vv else [])
