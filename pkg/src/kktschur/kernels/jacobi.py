"""Jacobi eigenvalue iteration, used only as an independent inertia oracle.

The compiled path runs classic cyclic-by-row sweeps.  The numpy path uses a
round-robin ordering so each round applies n/2 disjoint rotations at once.
Both stop when the off-diagonal Frobenius norm falls below
``off_rtol * ||M||_F``.
"""

from __future__ import annotations

import math

import numpy as np

from .._jit import USE_NUMBA, njit
from .ldlt import ZERO_EIG_RTOL, Inertia, _classify

OFF_RTOL = 1e-12
MAX_SWEEPS = 100


@njit
def _offnorm(a):
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                s += a[i, j] * a[i, j]
    return math.sqrt(s)


@njit
def _jacobi_numba(a, tol, max_sweeps):
    n = a.shape[0]
    sweeps = 0
    while sweeps < max_sweeps and _offnorm(a) >= tol:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.hypot(theta, 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
    return sweeps


def _round_robin(n):
    """Yield ``(p, q)`` index arrays covering every pair once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    for _ in range(m - 1):
        half = m // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        keep = hi < n
        yield lo[keep], hi[keep]
        players = [players[0]] + [players[-1]] + players[1:-1]


def _offnorm_numpy(a):
    return math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))


def _jacobi_numpy(a, tol, max_sweeps):
    n = a.shape[0]
    sweeps = 0
    while sweeps < max_sweeps and _offnorm_numpy(a) >= tol:
        sweeps += 1
        for p, q in _round_robin(n):
            apq = a[p, q]
            live = apq != 0.0
            if not np.any(live):
                continue
            safe = np.where(live, apq, 1.0)
            # a tiny a_pq sends theta to inf, which correctly gives t = 0
            with np.errstate(over="ignore"):
                theta = (a[q, q] - a[p, p]) / (2.0 * safe)
                t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(live, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p[live], q[live]] = 0.0
            a[q[live], p[live]] = 0.0
    return sweeps


def jacobi_eigenvalues(m, off_rtol=OFF_RTOL, max_sweeps=MAX_SWEEPS, use_numba=None):
    """Eigenvalues of a symmetric matrix (unsorted diagonal after convergence)."""
    a = np.array(m, dtype=np.float64, order="C")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    tol = off_rtol * float(np.linalg.norm(a))
    if use_numba is None:
        use_numba = USE_NUMBA
    if a.shape[0] > 1:
        if use_numba:
            _jacobi_numba(a, tol, max_sweeps)
        else:
            _jacobi_numpy(a, tol, max_sweeps)
    return np.diag(a).copy()


def inertia_oracle(m, zero_rtol=ZERO_EIG_RTOL, off_rtol=OFF_RTOL, use_numba=None):
    """Inertia from Jacobi eigenvalues; zero means ``|lambda| <= zero_rtol * max|m_ij|``."""
    a = np.asarray(m.to_dense() if hasattr(m, "to_dense") else m, dtype=np.float64)
    if a.size == 0:
        return Inertia(0, 0, 0)
    eig = jacobi_eigenvalues(a, off_rtol=off_rtol, use_numba=use_numba)
    return _classify(eig, zero_rtol * float(np.max(np.abs(a))))
