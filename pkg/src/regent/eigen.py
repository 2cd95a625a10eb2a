"""Eigenvalues of small dense real matrices.

Pipeline: split the matrix into the diagonal blocks of its strongly
connected components (a permutation similarity that isolates eigenvalues),
balance each block by diagonal scaling, reduce it to upper Hessenberg form
with Householder reflections, and finish with the Francis double-shift QR
iteration.  Complex-conjugate pairs come out of trailing 2x2 blocks.

The SCC split matters for DFA transition matrices: they are usually
reducible and often carry repeated eigenvalues (e.g. a chain of states with
self-loops), which a single QR sweep would resolve only to about
``eps ** (1 / multiplicity)``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = ["ConvergenceError", "balance", "eigen_moduli", "eigvals", "hessenberg", "hqr"]

RADIX = 2.0
MAX_N = 256


class ConvergenceError(ArithmeticError):
    """QR iteration did not deflate within its iteration cap."""


def balance(a: np.ndarray) -> np.ndarray:
    """Diagonal similarity scaling (powers of two) equalizing row and column norms."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    sqrdx = RADIX * RADIX
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.abs(a[:, i]).sum() - abs(a[i, i])
            r = np.abs(a[i, :]).sum() - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / RADIX
            f = 1.0
            s = c + r
            while c < g:
                f *= RADIX
                c *= sqrdx
            g = r * RADIX
            while c > g:
                f /= RADIX
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Orthogonal similarity reduction to upper Hessenberg form."""
    h = np.array(a, dtype=float)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        alpha = -math.copysign(norm, x[0])
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        h[k + 1:, k:] -= 2.0 * np.outer(v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def hqr(h: np.ndarray, tol: float = 1e-10, max_iter: int | None = None) -> np.ndarray:
    """All eigenvalues of an upper Hessenberg matrix (Francis double shift).

    A subdiagonal entry deflates once it is below ``tol`` relative to its two
    diagonal neighbours.  Raises :class:`ConvergenceError` after ``max_iter``
    total iterations (default ``100 * n``).
    """
    a = np.array(h, dtype=float)
    n = a.shape[0]
    if max_iter is None:
        max_iter = 100 * n
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = np.abs(np.triu(a, -1)).sum()
    eps = np.finfo(float).eps
    nn = n - 1
    shift = 0.0
    total = 0
    x = y = w = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= tol * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + shift
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += shift
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if total >= max_iter:
                raise ConvergenceError(
                    f"QR iteration did not converge after {total} iterations (n={n})"
                )
            if its and its % 10 == 0:
                # exceptional shift
                shift += x
                a[np.arange(nn + 1), np.arange(nn + 1)] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while True:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= eps * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                cols = slice(k, nn + 1)
                if k != nn - 1:
                    pv = a[k, cols] + q * a[k + 1, cols] + r * a[k + 2, cols]
                    a[k + 2, cols] -= pv * z
                else:
                    pv = a[k, cols] + q * a[k + 1, cols]
                a[k + 1, cols] -= pv * y
                a[k, cols] -= pv * x
                rows = slice(l, min(nn, k + 3) + 1)
                if k != nn - 1:
                    pv = x * a[rows, k] + y * a[rows, k + 1] + z * a[rows, k + 2]
                    a[rows, k + 2] -= pv * r
                else:
                    pv = x * a[rows, k] + y * a[rows, k + 1]
                a[rows, k + 1] -= pv * q
                a[rows, k] -= pv
    return wr + 1j * wi


def _components(a: np.ndarray) -> list[np.ndarray]:
    n_comp, labels = connected_components(a != 0, directed=True, connection="strong")
    return [np.flatnonzero(labels == c) for c in range(n_comp)]


def eigvals(a, tol: float = 1e-10, max_iter: int | None = None) -> np.ndarray:
    """Eigenvalues of a square real matrix, in no particular order."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > MAX_N:
        raise ValueError(f"matrix too large ({n} > {MAX_N})")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    out = []
    for idx in _components(a):
        block = a[np.ix_(idx, idx)]
        if len(idx) == 1:
            out.append(complex(block[0, 0]))
            continue
        cap = max_iter if max_iter is not None else 100 * len(idx)
        out.extend(hqr(hessenberg(balance(block)), tol=tol, max_iter=cap))
    return np.array(out, dtype=complex)


def eigen_moduli(t, tol: float = 1e-10) -> list[float]:
    """Moduli of all eigenvalues, sorted in descending order."""
    return sorted((float(abs(z)) for z in eigvals(t, tol=tol)), reverse=True)
