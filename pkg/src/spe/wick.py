"""Gaussian and Grassmann moments by summation over pairings.

The bosonic moment of x_{i_1}..x_{i_n} against exp(i(Bx,x)/2h) factorises
into the normalisation integral times (ih)^{n/2} times the pairing sum
sum_m prod (B^{-1})_{i_a i_b}; the fermionic analogue carries the sign of
the pairing and Pf(B) in place of |det B|^{-1/2}.  Everything here is
independent of the diagram machinery and serves as its oracle: exact over
Fractions when the input matrix is exact, floating point otherwise.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (DegenerateHessianError, OddDimensionError, ShapeError,
                     SingularMatrixError)
from .exact import as_fraction_matrix, exact_inv, is_exact_matrix
from .graphs import perfect_matchings

PFAFFIAN_SUM_LIMIT = 10


def _square_matrix(b):
    """Classify b as ('exact', rows) or ('float', ndarray), validated square."""
    if is_exact_matrix(b):
        return "exact", as_fraction_matrix(b)
    arr = np.asarray(b)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError("expected a square matrix, got shape %r" % (arr.shape,))
    return "float", arr.astype(complex) if np.iscomplexobj(arr) else arr.astype(float)


def signature(b, tol=1e-10):
    """Signature (#positive - #negative eigenvalues) of a symmetric matrix.

    Raises DegenerateHessianError when any eigenvalue is smaller than
    tol times the spectral radius: the stationary point is degenerate and
    the quadratic model does not determine the integral.
    """
    kind, mat = _square_matrix(b)
    arr = np.array([[float(x) for x in row] for row in mat]) if kind == "exact" else mat
    if np.iscomplexobj(arr):
        raise ShapeError("signature needs a real symmetric matrix")
    if not np.allclose(arr, arr.T, rtol=0, atol=1e-12 * max(1.0, np.abs(arr).max())):
        raise ShapeError("signature needs a symmetric matrix")
    eigs = np.linalg.eigvalsh(arr)
    radius = np.abs(eigs).max() if eigs.size else 0.0
    if radius == 0.0 or np.any(np.abs(eigs) < tol * radius):
        raise DegenerateHessianError(
            "degenerate quadratic form, eigenvalues %s" % np.array2string(eigs))
    return int(np.sum(eigs > 0) - np.sum(eigs < 0))


def _inverse(b):
    kind, mat = _square_matrix(b)
    if kind == "exact":
        return kind, exact_inv(mat)
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from None
    return kind, inv


def gaussian_moment_sum(b, indices):
    """sum over pairings of prod (B^{-1})_{i_a i_b}; 0 for odd counts.

    Exact Fraction arithmetic when b has int/Fraction entries.
    """
    n = len(indices)
    kind, inv = _inverse(b)
    dim = len(inv) if kind == "exact" else inv.shape[0]
    if any(not 0 <= i < dim for i in indices):
        raise ShapeError("moment index out of range for dimension %d" % dim)
    if n % 2:
        return Fraction(0) if kind == "exact" else 0.0
    total = Fraction(0) if kind == "exact" else 0.0
    for m in perfect_matchings(n):
        term = Fraction(1) if kind == "exact" else 1.0
        for a, bpos in m.pairs:
            term *= inv[indices[a]][indices[bpos]]
        total += term
    return total


def grassmann_moment_sum(b, indices):
    """Signed pairing sum sum_m sign(m) prod (B^{-1})_{i_a i_b}.

    The sign is the Pfaffian-convention parity of the pairing of positions,
    so repeated indices cancel automatically (B^{-1} is skew).
    """
    n = len(indices)
    kind, inv = _inverse(b)
    dim = len(inv) if kind == "exact" else inv.shape[0]
    if any(not 0 <= i < dim for i in indices):
        raise ShapeError("moment index out of range for dimension %d" % dim)
    if n % 2:
        return Fraction(0) if kind == "exact" else 0.0
    total = Fraction(0) if kind == "exact" else 0.0
    for m in perfect_matchings(n):
        term = Fraction(m.sign) if kind == "exact" else float(m.sign)
        for a, bpos in m.pairs:
            term *= inv[indices[a]][indices[bpos]]
        total += term
    return total


@dataclass
class MomentValue:
    """Oscillatory Gaussian moment, kept in factorised form.

    value(h) recomposes
        (2 pi h)^{N/2} |det B|^{-1/2} exp(i pi sign(B)/4) (ih)^{n/2} S
    with S the pairing sum; the factors are stored separately so tests can
    check the decomposition against a direct quadrature.
    """

    n_vars: int
    n_factors: int
    abs_det_inv_sqrt: float
    signature: int
    matching_sum: object

    def value(self, h=1.0):
        return ((2 * np.pi * h) ** (self.n_vars / 2)
                * self.abs_det_inv_sqrt
                * np.exp(1j * np.pi * self.signature / 4)
                * (1j * h) ** (self.n_factors / 2)
                * complex(self.matching_sum))


def gaussian_moment(b, indices, tol=1e-10):
    """Moment of prod x_{i_a} against exp(i(Bx,x)/2h), as a MomentValue."""
    sig = signature(b, tol=tol)
    kind, mat = _square_matrix(b)
    arr = (np.array([[float(x) for x in row] for row in mat])
           if kind == "exact" else mat)
    det = float(np.linalg.det(arr))
    msum = gaussian_moment_sum(b, indices) if len(indices) % 2 == 0 else (
        Fraction(0) if kind == "exact" else 0.0)
    return MomentValue(n_vars=len(arr), n_factors=len(indices),
                       abs_det_inv_sqrt=1.0 / np.sqrt(abs(det)),
                       signature=sig, matching_sum=msum)


def _pfaffian_sum(rows, zero, one):
    n = len(rows)
    total = zero
    for m in perfect_matchings(n):
        term = one * m.sign
        for a, b in m.pairs:
            term *= rows[a][b]
        total += term
    return total


def pfaffian(b, force_elimination=False):
    """Pfaffian of a skew-symmetric matrix.

    Exact inputs of dimension <= 10 go through the signed pairing sum;
    larger or floating inputs use congruence elimination into 2x2 blocks
    (row/column operations leave Pf fixed, swaps flip its sign).  Pf of the
    empty matrix is 1; odd dimension raises OddDimensionError.
    """
    kind, mat = _square_matrix(b)
    n = len(mat) if kind == "exact" else mat.shape[0]
    if n % 2:
        raise OddDimensionError("Pfaffian needs even dimension, got %d" % n)
    if kind == "exact":
        for i in range(n):
            for j in range(n):
                if mat[i][j] != -mat[j][i]:
                    raise ShapeError("matrix is not skew-symmetric")
        rows = [list(r) for r in mat]
        zero, one = Fraction(0), Fraction(1)
    else:
        scale = np.abs(mat).max() if n else 0.0
        if not np.allclose(mat, -mat.T, rtol=0, atol=1e-12 * max(1.0, scale)):
            raise ShapeError("matrix is not skew-symmetric")
        rows = [list(r) for r in mat]
        zero, one = 0.0 * mat.flat[0] if n else 0.0, 1.0
    if n == 0:
        return one if kind == "exact" else 1.0
    if kind == "exact" and n <= PFAFFIAN_SUM_LIMIT and not force_elimination:
        return _pfaffian_sum(rows, zero, one)

    sign = 1
    pf = one
    for k in range(0, n, 2):
        piv = max(range(k + 1, n), key=lambda r: abs(rows[r][k]))
        if rows[piv][k] == 0:
            return zero
        if piv != k + 1:
            rows[piv], rows[k + 1] = rows[k + 1], rows[piv]
            for r in rows:
                r[piv], r[k + 1] = r[k + 1], r[piv]
            sign = -sign
        # clear row k beyond k+1 with column k+1, then row k+1 with column k
        for r in range(k + 2, n):
            f = rows[k][r] / rows[k][k + 1]
            if f != 0:
                for c in range(n):
                    rows[c][r] -= f * rows[c][k + 1]
                for c in range(n):
                    rows[r][c] -= f * rows[k + 1][c]
        for r in range(k + 2, n):
            f = rows[k + 1][r] / rows[k + 1][k]
            if f != 0:
                for c in range(n):
                    rows[c][r] -= f * rows[c][k]
                for c in range(n):
                    rows[r][c] -= f * rows[k][c]
        pf *= rows[k][k + 1]
    return pf * sign
