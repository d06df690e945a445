"""Rational arithmetic for exact matrix identities.

Every double is a dyadic rational, so converting float matrices to
``Fraction`` entries loses nothing.  ``snap_to_affine`` moves an approximate
solution of ``V @ T.T = U`` onto the exact solution set while keeping the
non-pivot coordinates of the approximation unchanged.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def to_fractions(A):
    A = np.asarray(A)
    out = np.empty(A.shape, dtype=object)
    flat_in, flat_out = A.reshape(-1), out.reshape(-1)
    for i, a in enumerate(flat_in):
        flat_out[i] = a if isinstance(a, (Fraction, int)) else Fraction(float(a))
        if isinstance(a, int):
            flat_out[i] = Fraction(a)
    return out


def to_float(A):
    A = np.asarray(A)
    if A.dtype != object:
        return np.array(A, dtype=float)
    return np.vectorize(float, otypes=[float])(A) if A.size else np.zeros(A.shape)


def frac_matmul(A, B):
    A, B = to_fractions(A), to_fractions(B)
    n, k = A.shape
    k2, m = B.shape
    if k != k2:
        raise ValueError(f"shape mismatch {A.shape} @ {B.shape}")
    out = np.empty((n, m), dtype=object)
    for i in range(n):
        for j in range(m):
            out[i, j] = sum((A[i, t] * B[t, j] for t in range(k)), Fraction(0))
    return out


def exact_equal(A, B):
    A, B = to_fractions(A), to_fractions(B)
    return A.shape == B.shape and all(a == b for a, b in zip(A.reshape(-1), B.reshape(-1)))


def _rref_pivots(T):
    """Pivot columns of T (column choice by largest magnitude, exact elimination)."""
    M = [list(row) for row in to_fractions(T)]
    rows, cols = len(M), len(M[0]) if M else 0
    pivots, r = [], 0
    for c in range(cols):
        if r == rows:
            break
        best = max(range(r, rows), key=lambda i: abs(M[i][c]))
        if M[best][c] == 0:
            continue
        M[r], M[best] = M[best], M[r]
        for i in range(rows):
            if i != r and M[i][c] != 0:
                f = M[i][c] / M[r][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    return pivots


def _solve_square(A, b):
    """Exact solve of a nonsingular square system by Gauss-Jordan."""
    n = len(A)
    M = [list(A[i]) + [b[i]] for i in range(n)]
    for c in range(n):
        p = next(i for i in range(c, n) if M[i][c] != 0)
        M[c], M[p] = M[p], M[c]
        piv = M[c][c]
        M[c] = [a / piv for a in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * x for a, x in zip(M[i], M[c])]
    return [M[i][n] for i in range(n)]


class NotInRange(ValueError):
    pass


def snap_to_affine(V, T, U):
    """Rational V' close to V with V' @ T.T == U exactly.

    T is e_out x e_in, U is r x e_out, V is r x e_in.  Coordinates outside a
    pivot set of T keep their float values; pivot coordinates are solved.
    """
    Tf = to_fractions(T)
    Uf = to_fractions(U)
    Vf = to_fractions(V)
    piv_cols = _rref_pivots(Tf)
    rank = len(piv_cols)
    # pick rank independent rows of T to form a square system
    piv_rows = _rref_pivots(Tf.T)
    non = [j for j in range(Tf.shape[1]) if j not in piv_cols]
    A = [[Tf[i, j] for j in piv_cols] for i in piv_rows]
    out = Vf.copy()
    for r in range(Uf.shape[0]):
        rhs = [Uf[r, i] - sum((Tf[i, j] * Vf[r, j] for j in non), Fraction(0)) for i in piv_rows]
        sol = _solve_square(A, rhs) if rank else []
        for j, x in zip(piv_cols, sol):
            out[r, j] = x
        # rows of T outside piv_rows must be satisfied automatically
        for i in range(Tf.shape[0]):
            if i in piv_rows:
                continue
            lhs = sum((Tf[i, j] * out[r, j] for j in range(Tf.shape[1])), Fraction(0))
            if lhs != Uf[r, i]:
                raise NotInRange("target is not exactly in the range of the map")
    return out
