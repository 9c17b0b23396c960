"""Matrix Market coordinate files.

Only ``coordinate real|integer general|symmetric`` is supported.  Indices
are 1-based on disk and 0-based in memory.  Symmetric files carry the lower
triangle and load as :class:`SymmetricSparse`.
"""

from __future__ import annotations

import numpy as np

from .errors import StructuralError
from .sparse import SparseMatrix, SymmetricSparse

_BANNER = "%%MatrixMarket"


def _fmt(x):
    return repr(float(x))


def write_matrix_market(path, m, comment=None):
    """Write ``m`` with entries ordered by column, then row."""
    symmetric = isinstance(m, SymmetricSparse)
    mat = m.lower if symmetric else m
    r, c, v = mat.coo()
    lines = [f"{_BANNER} matrix coordinate real {'symmetric' if symmetric else 'general'}"]
    if comment:
        lines.extend("%" + line for line in comment.splitlines())
    lines.append(f"{mat.nrows} {mat.ncols} {mat.nnz}")
    lines.extend(f"{i + 1} {j + 1} {_fmt(x)}" for i, j, x in zip(r.tolist(), c.tolist(), v.tolist()))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path):
    """Return a :class:`SparseMatrix` (general) or :class:`SymmetricSparse`."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != _BANNER or header[1].lower() != "matrix":
            raise ValueError(f"{path}: not a Matrix Market matrix file")
        fmt, field, symm = (h.lower() for h in header[2:])
        if fmt != "coordinate" or field not in ("real", "integer", "double"):
            raise ValueError(f"{path}: unsupported format {fmt} {field}")
        if symm not in ("general", "symmetric"):
            raise ValueError(f"{path}: unsupported symmetry {symm}")
        line = fh.readline()
        while line.startswith("%") or not line.strip():
            if not line:
                raise ValueError(f"{path}: missing size line")
            line = fh.readline()
        nrows, ncols, nnz = (int(tok) for tok in line.split())
        body = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if body.shape[0] != nnz or (nnz and body.shape[1] < 3):
        raise ValueError(f"{path}: expected {nnz} entries, found {body.shape[0]}")
    rows = body[:, 0].astype(np.int64) - 1
    cols = body[:, 1].astype(np.int64) - 1
    vals = body[:, 2]
    if symm == "symmetric":
        if nrows != ncols:
            raise StructuralError(f"{path}: symmetric matrix must be square")
        return SymmetricSparse.from_coo(nrows, rows, cols, vals)
    return SparseMatrix.from_coo(nrows, ncols, rows, cols, vals)
