"""Exact rational linear algebra: null spaces and LP feasibility.

Everything here works on lists of :class:`fractions.Fraction`; no floating
point is involved, so results are certificates rather than estimates.
"""
from __future__ import annotations

from fractions import Fraction

Matrix = list[list[Fraction]]


def rref(A: Matrix) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and pivot columns."""
    A = [[Fraction(x) for x in row] for row in A]
    rows = len(A)
    cols = len(A[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        pr = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if pr is None:
            continue
        A[r], A[pr] = A[pr], A[r]
        piv = A[r][c]
        A[r] = [x / piv for x in A[r]]
        for i in range(rows):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return A, pivots


def null_space(A: Matrix, ncols: int | None = None) -> Matrix:
    """Basis of {x : A x = 0}, one vector per free column."""
    ncols = len(A[0]) if A else (ncols or 0)
    if not A:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    R, pivots = rref(A)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for row, pc in zip(R, pivots):
            x[pc] = -row[f]
        basis.append(x)
    return basis


def left_null_space(M: Matrix) -> Matrix:
    """Basis of {v : v^T M = 0} for an n x m matrix M."""
    n = len(M)
    m = len(M[0]) if n else 0
    if m == 0:
        return [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    MT = [[M[i][j] for i in range(n)] for j in range(m)]
    return null_space(MT, n)


def in_row_span(basis: Matrix, v) -> bool:
    """Whether ``v`` is a rational combination of the ``basis`` vectors."""
    v = [Fraction(x) for x in v]
    if not any(v):
        return True
    if not basis:
        return False
    _, p1 = rref(basis)
    _, p2 = rref(basis + [v])
    return len(p1) == len(p2)


def feasible_nonneg(A: Matrix, b: list) -> list[Fraction] | None:
    """Find u >= 0 with A u = b, or return None if none exists.

    Phase I of the simplex method with artificial variables and Bland's rule,
    in exact arithmetic, so the answer is a proof either way.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    b = [Fraction(x) for x in b]
    if m == 0:
        return []
    if n == 0:
        return [] if all(x == 0 for x in b) else None
    # flip rows so b >= 0, then append one artificial per row
    T = []
    for i in range(m):
        s = -1 if b[i] < 0 else 1
        T.append([Fraction(s * A[i][j]) for j in range(n)] + [Fraction(int(k == i)) for k in range(m)] + [s * b[i]])
    basis = [n + i for i in range(m)]
    width = n + m
    # reduced costs of the phase-I objective: minimize the sum of artificials
    cost = [Fraction(0)] * (width + 1)
    for i in range(m):
        for j in range(width + 1):
            cost[j] -= T[i][j]
    for j in range(n, width):
        cost[j] += 1

    while True:
        enter = next((j for j in range(width) if cost[j] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            if T[i][enter] > 0:
                ratio = T[i][-1] / T[i][enter]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    leave, best = i, ratio
        if leave is None:  # unbounded direction; cannot happen for phase I
            break
        _pivot(T, cost, leave, enter)
        basis[leave] = enter

    if -cost[-1] != 0:
        return None
    u = [Fraction(0)] * n
    for i, bv in enumerate(basis):
        if bv < n:
            u[bv] = T[i][-1]
    return u


def _pivot(T, cost, r, c):
    piv = T[r][c]
    T[r] = [x / piv for x in T[r]]
    for i in range(len(T)):
        if i != r and T[i][c] != 0:
            f = T[i][c]
            T[i] = [a - f * b for a, b in zip(T[i], T[r])]
    if cost[c] != 0:
        f = cost[c]
        cost[:] = [a - f * b for a, b in zip(cost, T[r])]
