"""Exact linear algebra over the rationals.

Matrices are lists of rows, rows are lists of ``fractions.Fraction``.
Everything here is small and dense (dimensions <= 10 in practice), so plain
Gaussian elimination is both fast enough and exact.
"""

from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


def frac(x) -> Fraction:
    """Coerce ints, strings like '1/2' and Fractions to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("refusing to coerce float to Fraction; pass a string or int")
    return Fraction(x)


def vec(xs):
    return [frac(x) for x in xs]


def zeros(n):
    return [ZERO] * n


def eye(n):
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def vec_add(u, v):
    return [a + b for a, b in zip(u, v, strict=True)]


def vec_sub(u, v):
    return [a - b for a, b in zip(u, v, strict=True)]


def vec_scale(c, u):
    c = frac(c)
    return [c * a for a in u]


def vec_dot(u, v):
    return sum((a * b for a, b in zip(u, v, strict=True)), ZERO)


def is_zero_vec(u):
    return all(a == 0 for a in u)


def mat_vec(A, v):
    return [vec_dot(row, v) for row in A]


def mat_mul(A, B):
    n = len(B)
    m = len(B[0]) if n else 0
    return [[sum((row[k] * B[k][j] for k in range(n)), ZERO) for j in range(m)]
            for row in A]


def transpose(A):
    return [list(col) for col in zip(*A)]


def rref(A):
    """Reduced row echelon form.  Returns (R, pivot_columns)."""
    R = [list(row) for row in A]
    if not R:
        return R, []
    rows, cols = len(R), len(R[0])
    pivots = []
    r = 0
    for c in range(cols):
        pivot = None
        for i in range(r, rows):
            if R[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        R[r], R[pivot] = R[pivot], R[r]
        inv = ONE / R[r][c]
        R[r] = [inv * x for x in R[r]]
        for i in range(rows):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [x - f * y for x, y in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return R, pivots


def rank(A):
    return len(rref(A)[1])


def solve(A, b):
    """One exact solution of A x = b, or None if inconsistent.

    A is m x n (rows), b has length m.  Free variables are set to zero.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    aug = [list(A[i]) + [frac(b[i])] for i in range(m)]
    R, pivots = rref(aug)
    if n in pivots:
        return None
    x = zeros(n)
    for r, c in enumerate(pivots):
        x[c] = R[r][n]
    return x


def nullspace(A):
    """Basis of the kernel of A (as a list of vectors, canonical rref form)."""
    m = len(A)
    n = len(A[0]) if m else 0
    R, pivots = rref(A)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = zeros(n)
        v[f] = ONE
        for r, c in enumerate(pivots):
            v[c] = -R[r][f]
        basis.append(v)
    return basis


def inverse(A):
    n = len(A)
    aug = [list(A[i]) + eye(n)[i] for i in range(n)]
    R, pivots = rref(aug)
    if pivots != list(range(n)):
        return None
    return [row[n:] for row in R]


def span_basis(vectors):
    """Canonical (rref) basis of the span of the given vectors."""
    if not vectors:
        return []
    R, pivots = rref(vectors)
    return [R[i] for i in range(len(pivots))]


def span_contains(basis, v):
    if is_zero_vec(v):
        return True
    if not basis:
        return False
    return solve(transpose(basis), v) is not None


def span_equal(B1, B2):
    return span_basis(B1) == span_basis(B2)


def columns_solve(columns, target):
    """Solve sum_i x_i * columns[i] = target.  Returns coefficients or None."""
    if not columns:
        return [] if is_zero_vec(target) else None
    return solve(transpose(columns), target)


def frac_sqrt(q):
    """Exact square root of a nonnegative Fraction, or None if irrational."""
    q = frac(q)
    if q < 0:
        raise ValueError("negative input")
    if q == 0:
        return ZERO
    pn = _isqrt_exact(q.numerator)
    pd = _isqrt_exact(q.denominator)
    if pn is None or pd is None:
        return None
    return Fraction(pn, pd)


def _isqrt_exact(n):
    import math

    r = math.isqrt(n)
    return r if r * r == n else None
