"""Bunch-Kaufman LBL^T factorization and the generic sparse LDL^T baseline.

Both routines share one elimination kernel.  It works on a full symmetric
dense array plus a boolean structural pattern.  Each elimination step only
touches rows that are structurally nonzero in the pivot column(s), so the
dense factorization and the sparse baseline differ only in the input
ordering and in how a zero pivot is treated.  The pattern is updated
symbolically (no cancellation), which is what the factor nnz counts report.

FLOP convention: a multiply-add is 2 FLOPs, a division 1.  Trailing updates
are charged for the lower triangle only, as a symmetric code would be.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .._jit import USE_NUMBA, njit
from ..errors import BaselineBreakdown, DimensionError
from ..sparse import Permutation, SparseMatrix, SymmetricSparse, permute

ALPHA = (1.0 + math.sqrt(17.0)) / 8.0
PIVOT_ZERO_RTOL = 1e-13
ZERO_EIG_RTOL = 1e-9


class Inertia(NamedTuple):
    n_plus: int
    n_minus: int
    n_zero: int

    def __add__(self, other):
        return Inertia(self.n_plus + other.n_plus, self.n_minus + other.n_minus,
                       self.n_zero + other.n_zero)

    @property
    def dim(self):
        return self.n_plus + self.n_minus + self.n_zero


def _swap_numpy(a, pat, perm, i, j):
    a[[i, j], :] = a[[j, i], :]
    a[:, [i, j]] = a[:, [j, i]]
    pat[[i, j], :] = pat[[j, i], :]
    pat[:, [i, j]] = pat[:, [j, i]]
    perm[i], perm[j] = perm[j], perm[i]


def _eliminate_numpy(a, pat, perm, piv, alpha, zero_tol, allow_zero):
    """Vectorized reference path; see :func:`_eliminate_numba` for the loop form."""
    n = a.shape[0]
    flops = 0
    k = 0
    while k < n:
        below = np.flatnonzero(pat[k + 1:, k]) + k + 1
        colmax = 0.0
        r = -1
        if below.size:
            vals = np.abs(a[below, k])
            t = int(np.argmax(vals))
            colmax = float(vals[t])
            r = int(below[t])
        akk = abs(a[k, k])
        if max(akk, colmax) <= zero_tol:
            if not allow_zero:
                return k, flops
            a[below, k] = 0.0
            pat[below, k] = False
            piv[k] = 1
            k += 1
            continue
        if akk >= alpha * colmax:
            step, kp = 1, k
        else:
            row = np.flatnonzero(pat[r, k:]) + k
            row = row[row != r]
            rowmax = float(np.max(np.abs(a[r, row]))) if row.size else 0.0
            if akk * rowmax >= alpha * colmax * colmax:
                step, kp = 1, k
            elif abs(a[r, r]) >= alpha * rowmax:
                step, kp = 1, r
            else:
                step, kp = 2, r
        kk = k + step - 1
        if kp != kk:
            _swap_numpy(a, pat, perm, kk, kp)
        if step == 1:
            d = a[k, k]
            idx = np.flatnonzero(pat[k + 1:, k]) + k + 1
            w = a[idx, k].copy()
            lcol = w / d
            if idx.size:
                ix = np.ix_(idx, idx)
                a[ix] -= np.outer(lcol, w)
                pat[ix] = True
            a[idx, k] = lcol
            m = idx.size
            flops += m + m * (m + 1)
            piv[k] = 1
        else:
            d11, d21, d22 = a[k, k], a[k + 1, k], a[k + 1, k + 1]
            det = d11 * d22 - d21 * d21
            i11, i12, i22 = d22 / det, -d21 / det, d11 / det
            s11, s22 = bool(pat[k + 1, k + 1]), bool(pat[k, k])
            idx = np.flatnonzero(pat[k + 2:, k] | pat[k + 2:, k + 1]) + k + 2
            w1 = a[idx, k].copy()
            w2 = a[idx, k + 1].copy()
            p1 = pat[idx, k].copy()
            p2 = pat[idx, k + 1].copy()
            l1 = w1 * i11 + w2 * i12
            l2 = w1 * i12 + w2 * i22
            q1 = (p1 & s11) | p2
            q2 = p1 | (p2 & s22)
            if idx.size:
                ix = np.ix_(idx, idx)
                a[ix] -= np.outer(l1, w1) + np.outer(l2, w2)
                pat[ix] |= np.outer(q1, p1) | np.outer(q2, p2)
            a[idx, k] = l1
            a[idx, k + 1] = l2
            pat[idx, k] = q1
            pat[idx, k + 1] = q2
            m = idx.size
            flops += 6 + 8 * m + 2 * m * (m + 1)
            piv[k] = 2
            piv[k + 1] = 0
        k += step
    return -1, flops


@njit
def _eliminate_numba(a, pat, perm, piv, alpha, zero_tol, allow_zero):
    n = a.shape[0]
    flops = 0
    idx = np.empty(n, dtype=np.int64)
    w1 = np.empty(n)
    w2 = np.empty(n)
    l1 = np.empty(n)
    l2 = np.empty(n)
    p1 = np.empty(n, dtype=np.bool_)
    p2 = np.empty(n, dtype=np.bool_)
    q1 = np.empty(n, dtype=np.bool_)
    q2 = np.empty(n, dtype=np.bool_)
    k = 0
    while k < n:
        colmax = 0.0
        r = -1
        for i in range(k + 1, n):
            if pat[i, k]:
                v = abs(a[i, k])
                if r < 0 or v > colmax:
                    colmax = v
                    r = i
        akk = abs(a[k, k])
        if max(akk, colmax) <= zero_tol:
            if not allow_zero:
                return k, flops
            for i in range(k + 1, n):
                if pat[i, k]:
                    a[i, k] = 0.0
                    pat[i, k] = False
            piv[k] = 1
            k += 1
            continue
        step = 1
        kp = k
        if akk < alpha * colmax:
            rowmax = 0.0
            for j in range(k, n):
                if j != r and pat[r, j]:
                    v = abs(a[r, j])
                    if v > rowmax:
                        rowmax = v
            if akk * rowmax >= alpha * colmax * colmax:
                kp = k
            elif abs(a[r, r]) >= alpha * rowmax:
                kp = r
            else:
                step = 2
                kp = r
        kk = k + step - 1
        if kp != kk:
            for j in range(n):
                t = a[kk, j]
                a[kk, j] = a[kp, j]
                a[kp, j] = t
                b = pat[kk, j]
                pat[kk, j] = pat[kp, j]
                pat[kp, j] = b
            for i in range(n):
                t = a[i, kk]
                a[i, kk] = a[i, kp]
                a[i, kp] = t
                b = pat[i, kk]
                pat[i, kk] = pat[i, kp]
                pat[i, kp] = b
            ti = perm[kk]
            perm[kk] = perm[kp]
            perm[kp] = ti
        if step == 1:
            d = a[k, k]
            m = 0
            for i in range(k + 1, n):
                if pat[i, k]:
                    idx[m] = i
                    w1[m] = a[i, k]
                    l1[m] = a[i, k] / d
                    m += 1
            for jj in range(m):
                j = idx[jj]
                wj = w1[jj]
                for ii in range(m):
                    i = idx[ii]
                    a[i, j] -= l1[ii] * wj
                    pat[i, j] = True
            for ii in range(m):
                a[idx[ii], k] = l1[ii]
            flops += m + m * (m + 1)
            piv[k] = 1
        else:
            d11 = a[k, k]
            d21 = a[k + 1, k]
            d22 = a[k + 1, k + 1]
            det = d11 * d22 - d21 * d21
            i11 = d22 / det
            i12 = -d21 / det
            i22 = d11 / det
            s11 = pat[k + 1, k + 1]
            s22 = pat[k, k]
            m = 0
            for i in range(k + 2, n):
                if pat[i, k] or pat[i, k + 1]:
                    idx[m] = i
                    w1[m] = a[i, k]
                    w2[m] = a[i, k + 1]
                    p1[m] = pat[i, k]
                    p2[m] = pat[i, k + 1]
                    m += 1
            for ii in range(m):
                l1[ii] = w1[ii] * i11 + w2[ii] * i12
                l2[ii] = w1[ii] * i12 + w2[ii] * i22
                q1[ii] = (p1[ii] and s11) or p2[ii]
                q2[ii] = p1[ii] or (p2[ii] and s22)
            for jj in range(m):
                j = idx[jj]
                for ii in range(m):
                    i = idx[ii]
                    a[i, j] -= l1[ii] * w1[jj] + l2[ii] * w2[jj]
                    if (q1[ii] and p1[jj]) or (q2[ii] and p2[jj]):
                        pat[i, j] = True
            for ii in range(m):
                i = idx[ii]
                a[i, k] = l1[ii]
                a[i, k + 1] = l2[ii]
                pat[i, k] = q1[ii]
                pat[i, k + 1] = q2[ii]
            flops += 6 + 8 * m + 2 * m * (m + 1)
            piv[k] = 2
            piv[k + 1] = 0
        k += step
    return -1, flops


def eliminate(a, pat, perm, piv, alpha=ALPHA, zero_tol=0.0, allow_zero=True, use_numba=None):
    """Run the in-place kernel on the selected backend; returns ``(status, flops)``."""
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        status, flops = _eliminate_numba(a, pat, perm, piv, alpha, zero_tol, allow_zero)
    else:
        status, flops = _eliminate_numpy(a, pat, perm, piv, alpha, zero_tol, allow_zero)
    return int(status), int(flops)


def _eig2(a, b, c):
    mid = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    return mid + rad, mid - rad


def _classify(values, tol):
    plus = minus = zero = 0
    for v in values:
        if abs(v) <= tol:
            zero += 1
        elif v > 0:
            plus += 1
        else:
            minus += 1
    return Inertia(plus, minus, zero)


@dataclass(frozen=True, eq=False)
class LBLTFactors:
    """``P M P^T = L B L^T`` with ``B`` made of 1x1 and 2x2 pivot blocks.

    ``piv[k]`` is 1 for a 1x1 pivot at ``k``, 2 for the first index of a 2x2
    pivot and 0 for its second index.  ``diag`` and ``offdiag`` hold ``B``
    (``offdiag[k]`` is the (k+1, k) entry of a 2x2 block starting at ``k``).
    """

    dim: int
    L: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray
    piv: np.ndarray
    perm: Permutation
    inertia: Inertia
    nnz: int
    flops: int
    zero_tol: float

    @property
    def pivot_blocks(self):
        out = []
        for k in range(self.dim):
            if self.piv[k] == 1:
                out.append(np.array([[self.diag[k]]]))
            elif self.piv[k] == 2:
                out.append(np.array([[self.diag[k], self.offdiag[k]],
                                     [self.offdiag[k], self.diag[k + 1]]]))
        return out

    @property
    def n_two_by_two(self):
        return int(np.count_nonzero(self.piv == 2))

    def block_diagonal(self):
        b = np.diag(self.diag)
        for k in np.flatnonzero(self.piv == 2):
            b[k + 1, k] = b[k, k + 1] = self.offdiag[k]
        return b

    def reconstruct(self):
        """Return ``M`` rebuilt from the factors (unpermuted)."""
        pm = self.L @ self.block_diagonal() @ self.L.T
        out = np.empty_like(pm)
        p = self.perm.forward
        out[np.ix_(p, p)] = pm
        return out

    def solve_flops(self, nrhs=1):
        lnnz = int(np.count_nonzero(self.L)) - self.dim
        n1 = int(np.count_nonzero(self.piv == 1))
        n2 = self.n_two_by_two
        return nrhs * (4 * lnnz + n1 + 6 * n2)

    def solve(self, rhs):
        b = np.asarray(rhs, dtype=np.float64)
        vec = b.ndim == 1
        if b.shape[0] != self.dim:
            raise DimensionError(f"rhs has {b.shape[0]} rows, factor has dim {self.dim}")
        if self.dim == 0:
            return b.copy()
        y = b.reshape(self.dim, -1)[self.perm.forward]
        y = sla.solve_triangular(self.L, y, lower=True, unit_diagonal=True, check_finite=False)
        k = 0
        while k < self.dim:
            if self.piv[k] == 1:
                d = self.diag[k]
                y[k] = y[k] / d if abs(d) > self.zero_tol else 0.0
                k += 1
            else:
                d11, d21, d22 = self.diag[k], self.offdiag[k], self.diag[k + 1]
                det = d11 * d22 - d21 * d21
                y0, y1 = y[k].copy(), y[k + 1].copy()
                y[k] = (d22 * y0 - d21 * y1) / det
                y[k + 1] = (d11 * y1 - d21 * y0) / det
                k += 2
        y = sla.solve_triangular(self.L.T, y, lower=False, unit_diagonal=True, check_finite=False)
        x = np.empty_like(y)
        x[self.perm.forward] = y
        return x[:, 0] if vec else x


def _to_dense_symmetric(m):
    if isinstance(m, SymmetricSparse):
        return m.to_dense()
    if isinstance(m, SparseMatrix):
        return m.to_dense()
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square symmetric matrix, got shape {a.shape}")
    return a


def _finish(a, pat, perm, piv, flops, zero_tol):
    n = a.shape[0]
    diag = np.diag(a).copy()
    offdiag = np.zeros(n)
    lower = np.tril(a, -1)
    lpat = np.tril(pat, -1)
    for k in np.flatnonzero(piv == 2):
        offdiag[k] = a[k + 1, k]
        lower[k + 1, k] = 0.0
        lpat[k + 1, k] = False
    lower[~lpat] = 0.0
    L = lower + np.eye(n)
    values = []
    k = 0
    while k < n:
        if piv[k] == 1:
            values.append(diag[k])
            k += 1
        else:
            values.extend(_eig2(diag[k], offdiag[k], diag[k + 1]))
            k += 2
    inertia = _classify(values, zero_tol)
    nnz = int(np.count_nonzero(lpat)) + int(np.count_nonzero(piv == 1)) + 3 * int(np.count_nonzero(piv == 2))
    return LBLTFactors(n, L, diag, offdiag, piv.copy(), Permutation(perm), inertia, nnz,
                       flops, zero_tol)


def bunch_kaufman(m, zero_rtol=PIVOT_ZERO_RTOL, use_numba=None):
    """Dense LBL^T with Bunch-Kaufman partial pivoting and inertia."""
    a = np.array(_to_dense_symmetric(m), dtype=np.float64, order="C")
    n = a.shape[0]
    scale = float(np.max(np.abs(a))) if n else 0.0
    zero_tol = zero_rtol * scale
    pat = a != 0.0
    perm = np.arange(n, dtype=np.int64)
    piv = np.zeros(n, dtype=np.int64)
    _, flops = eliminate(a, pat, perm, piv, ALPHA, zero_tol, True, use_numba)
    return _finish(a, pat, perm, piv, flops, zero_tol)


@dataclass(frozen=True, eq=False)
class BaselineResult:
    """Outcome of the generic sparse LDL^T comparator."""

    factors: LBLTFactors
    ordering: str
    input_nnz: int

    @property
    def factor_nnz(self):
        return self.factors.nnz

    @property
    def flops(self):
        return self.factors.flops

    @property
    def fill(self):
        return self.factors.nnz - self.input_nnz

    def solve(self, rhs):
        return self.factors.solve(rhs)


def sparse_ldlt_baseline(m, ordering="natural", zero_rtol=PIVOT_ZERO_RTOL, use_numba=None):
    """Factor a symmetric sparse matrix in a fixed elimination order.

    Pivots are chosen by the Bunch-Kaufman test within the given order: a 2x2
    pivot is taken only when the 1x1 candidate fails the ``alpha`` test.
    ``ordering`` is ``"natural"`` or ``"reverse"``.  A structurally or
    numerically zero pivot column raises :class:`BaselineBreakdown`.
    """
    if isinstance(m, SparseMatrix):
        m = SymmetricSparse.from_full(m)
    if not isinstance(m, SymmetricSparse):
        m = SymmetricSparse.from_full(SparseMatrix.from_dense(np.asarray(m)))
    n = m.dim
    if ordering in ("natural", None):
        order = Permutation.identity(n)
    elif ordering in ("reverse", "reverse-order"):
        order = Permutation(np.arange(n)[::-1])
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    full = permute(m.full(), order, order)
    a = np.ascontiguousarray(full.to_dense())
    scale = float(np.max(np.abs(a))) if n else 0.0
    zero_tol = zero_rtol * scale
    pat = a != 0.0
    perm = order.forward.copy()
    piv = np.zeros(n, dtype=np.int64)
    status, flops = eliminate(a, pat, perm, piv, ALPHA, zero_tol, False, use_numba)
    if status >= 0:
        raise BaselineBreakdown(f"no acceptable pivot at elimination step {status}", status)
    factors = _finish(a, pat, perm, piv, flops, zero_tol)
    return BaselineResult(factors, "natural" if ordering in ("natural", None) else "reverse", m.nnz)
