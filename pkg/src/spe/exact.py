"""Small exact linear algebra over Fractions.

Used by the combinatorial layer (moment sums, Pfaffians, rational engine
mode) where the contracts demand exact arithmetic.  Matrices are lists of
lists of Fractions (or ints); nothing here is performance critical.
"""

from fractions import Fraction

from .errors import ShapeError, SingularMatrixError


def as_fraction_matrix(b):
    """Copy a square matrix into Fraction entries, validating shape."""
    n = len(b)
    out = []
    for row in b:
        if len(row) != n:
            raise ShapeError("matrix is not square")
        out.append([Fraction(x) for x in row])
    return out


def exact_det(b):
    """Determinant by fraction-free-ish Gaussian elimination with pivoting."""
    a = as_fraction_matrix(b)
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        piv = None
        for r in range(col, n):
            if a[r][col] != 0:
                piv = r
                break
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        inv = Fraction(1) / a[col][col]
        for r in range(col + 1, n):
            if a[r][col] == 0:
                continue
            factor = a[r][col] * inv
            for c in range(col, n):
                a[r][c] -= factor * a[col][c]
    return det


def exact_inv(b):
    """Inverse by Gauss-Jordan elimination; raises on singular input."""
    a = as_fraction_matrix(b)
    n = len(a)
    aug = [row + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(a)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if aug[r][col] != 0:
                piv = r
                break
        if piv is None:
            raise SingularMatrixError("matrix is singular over the rationals")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r == col or aug[r][col] == 0:
                continue
            factor = aug[r][col]
            aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def exact_nullspace(rows):
    """Basis of the right kernel of a rectangular rational matrix.

    Returns a list of length-n_cols Fraction vectors (one per free column
    after row reduction); empty list for injective maps.
    """
    a = [[Fraction(x) for x in row] for row in rows]
    n_rows = len(a)
    n_cols = len(a[0]) if a else 0
    pivots = []
    r = 0
    for col in range(n_cols):
        piv = None
        for rr in range(r, n_rows):
            if a[rr][col] != 0:
                piv = rr
                break
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = Fraction(1) / a[r][col]
        a[r] = [x * inv for x in a[r]]
        for rr in range(n_rows):
            if rr == r or a[rr][col] == 0:
                continue
            factor = a[rr][col]
            a[rr] = [x - factor * y for x, y in zip(a[rr], a[r])]
        pivots.append(col)
        r += 1
        if r == n_rows:
            break
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * n_cols
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -a[i][fc]
        basis.append(v)
    return basis


def is_exact_matrix(b):
    """True when every entry is an int or Fraction (no floats).

    Numeric numpy arrays never count as exact; only nested sequences (or
    object arrays) of Python ints and Fractions take the rational paths.
    """
    try:
        import numpy as np
        if isinstance(b, np.ndarray) and b.dtype != object:
            return False
    except ImportError:
        pass
    try:
        return all(isinstance(x, (int, Fraction)) for row in b for x in row)
    except TypeError:
        return False
