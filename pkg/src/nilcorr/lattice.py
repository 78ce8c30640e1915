"""Exact integer and rational linear algebra: Smith normal form with
unimodular transforms, integer kernels, lattice saturation, RREF over Q.

Matrices are lists of rows of Python ints or Fractions.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Sequence

Matrix = list


def identity(n: int) -> Matrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if not a:
        return []
    cols = len(b[0]) if b else 0
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(cols)]
            for i in range(len(a))]


def transpose(a: Matrix, ncols: int | None = None) -> Matrix:
    if not a:
        return [[] for _ in range(ncols or 0)]
    return [list(col) for col in zip(*a)]


def smith_normal_form(a: Sequence[Sequence[int]]):
    """Return (S, U, V) with S = U @ A @ V diagonal, U and V unimodular, and
    each diagonal entry dividing the next (all nonnegative)."""
    m = len(a)
    n = len(a[0]) if m else 0
    s = [list(map(int, row)) for row in a]
    u = identity(m)
    v = identity(n)

    def swap_rows(i, j):
        s[i], s[j] = s[j], s[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in s:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(src, dst, k):  # row_dst += k*row_src
        s[dst] = [x + k * y for x, y in zip(s[dst], s[src])]
        u[dst] = [x + k * y for x, y in zip(u[dst], u[src])]

    def add_col(src, dst, k):
        for row in s:
            row[dst] += k * row[src]
        for row in v:
            row[dst] += k * row[src]

    t = 0
    while t < min(m, n):
        # pivot: smallest nonzero magnitude in the remaining block
        best = None
        for i in range(t, m):
            for j in range(t, n):
                if s[i][j] and (best is None or abs(s[i][j]) < abs(s[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        swap_rows(t, best[0])
        swap_cols(t, best[1])
        done = False
        while not done:
            done = True
            for i in range(t + 1, m):
                if s[i][t]:
                    add_row(t, i, -(s[i][t] // s[t][t]))
                    if s[i][t]:
                        swap_rows(t, i)
                        done = False
            for j in range(t + 1, n):
                if s[t][j]:
                    add_col(t, j, -(s[t][j] // s[t][t]))
                    if s[t][j]:
                        swap_cols(t, j)
                        done = False
            if done:
                # divisibility of the remaining block
                for i in range(t + 1, m):
                    for j in range(t + 1, n):
                        if s[i][j] % s[t][t]:
                            add_row(i, t, 1)
                            done = False
                            break
                    if not done:
                        break
        if s[t][t] < 0:
            s[t] = [-x for x in s[t]]
            u[t] = [-x for x in u[t]]
        t += 1
    return s, u, v


def rank_int(a: Sequence[Sequence[int]]) -> int:
    if not a or not a[0]:
        return 0
    s, _, _ = smith_normal_form(a)
    return sum(1 for i in range(min(len(s), len(s[0]))) if s[i][i])


def integer_kernel(a: Sequence[Sequence[int]], ncols: int) -> Matrix:
    """Basis (as rows) of {x in Z^ncols : A x = 0}."""
    if not a:
        return identity(ncols)
    s, _, v = smith_normal_form(a)
    r = sum(1 for i in range(min(len(s), ncols)) if s[i][i])
    return [[v[i][j] for i in range(ncols)] for j in range(r, ncols)]


def clear_denominators(row: Sequence) -> list[int]:
    fr = [Fraction(x) for x in row]
    den = lcm(*[f.denominator for f in fr]) if fr else 1
    return [int(f * den) for f in fr]


def saturate(rows: Sequence[Sequence[int]], ncols: int) -> tuple[Matrix, int]:
    """Saturation (Q-span intersected with Z^n) of the lattice spanned by
    ``rows``, and the index of the lattice inside it."""
    rows = [list(r) for r in rows if any(r)]
    if not rows:
        return [], 1
    # columns of M are the generators
    mat = transpose(rows)
    s, u, _ = smith_normal_form(mat)
    diag = [s[i][i] for i in range(min(len(s), len(s[0]))) if s[i][i]]
    uinv = inverse_unimodular(u)
    basis = [[uinv[i][j] for i in range(ncols)] for j in range(len(diag))]
    index = 1
    for d in diag:
        index *= d
    return [reduce_row(b) for b in basis], index


def reduce_row(row: list[int]) -> list[int]:
    g = 0
    for x in row:
        g = gcd(g, x)
    if g > 1:
        row = [x // g for x in row]
    return row


def inverse_unimodular(u: Matrix) -> Matrix:
    n = len(u)
    inv = rational_inverse(u)
    out = [[int(x) for x in row] for row in inv]
    assert all(Fraction(x).denominator == 1 for row in inv for x in row)
    return out[:n]


def rational_inverse(a: Matrix) -> Matrix:
    n = len(a)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(a)]
    for c in range(n):
        p = next(r for r in range(c, n) if aug[r][c])
        aug[c], aug[p] = aug[p], aug[c]
        pv = aug[c][c]
        aug[c] = [x / pv for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c]:
                f = aug[r][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    return [row[n:] for row in aug]


def rref(rows: Sequence[Sequence], ncols: int) -> tuple[tuple[Fraction, ...], ...]:
    """Reduced row echelon form over Q with zero rows dropped."""
    m = [[Fraction(x) for x in r] for r in rows]
    out: list[list[Fraction]] = []
    col = 0
    r = 0
    while r < len(m) and col < ncols:
        p = next((i for i in range(r, len(m)) if m[i][col]), None)
        if p is None:
            col += 1
            continue
        m[r], m[p] = m[p], m[r]
        pv = m[r][col]
        m[r] = [x / pv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col]:
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        r += 1
        col += 1
    out = [row for row in m[:r] if any(row)]
    return tuple(tuple(row) for row in out)


def rational_kernel(rows: Sequence[Sequence], ncols: int) -> Matrix:
    """Basis (rows, rational) of {x : rows . x = 0}."""
    red = rref(rows, ncols)
    pivots = []
    for row in red:
        pivots.append(next(j for j, x in enumerate(row) if x))
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for f in free:
        vec = [Fraction(0)] * ncols
        vec[f] = Fraction(1)
        for row, p in zip(red, pivots):
            vec[p] = -row[f]
        basis.append(vec)
    return basis


def in_span(vec: Sequence, span_rref: Sequence[Sequence[Fraction]], ncols: int) -> bool:
    return len(rref(list(span_rref) + [list(vec)], ncols)) == len(span_rref)


def lattice_points_basis(span_rows: Sequence[Sequence], ncols: int) -> Matrix:
    """Integer basis of (Q-span of rows) intersected with Z^n."""
    ints = [clear_denominators(r) for r in span_rows]
    basis, _ = saturate(ints, ncols)
    return basis
