"""Phase functions, stationary points, and local Taylor data.

A phase is anything with `dim`, `value`, `gradient`, `hessian` and
`derivative_tensor`.  Two concrete kinds are provided: multivariate
polynomials (with exact Fraction coefficients when given exact input) and
1-d trigonometric polynomials on the circle.  `localize` packages the
derivative tensors at a stationary point into the weights the diagram
engine consumes: the vertex weight of valency n is MINUS the raw n-th
derivative tensor, and an optional observable contributes its raw
derivatives.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .errors import ShapeError, SingularMatrixError


def _is_exact_scalar(x):
    return isinstance(x, (int, Fraction))


class PolynomialPhase:
    """Multivariate polynomial sum_e c_e x^e, exact when coefficients are.

    terms maps exponent tuples to coefficients.  Arithmetic (+, -, *,
    scalar multiples, small powers) stays exact over Fractions; evaluation
    on float arrays is vectorised.
    """

    def __init__(self, dim, terms):
        self.dim = int(dim)
        clean = {}
        for e, c in terms.items():
            e = tuple(int(k) for k in e)
            if len(e) != self.dim or any(k < 0 for k in e):
                raise ShapeError("bad exponent %r for dimension %d" % (e, self.dim))
            if c == 0:
                continue
            clean[e] = clean.get(e, 0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}

    # -- construction helpers ------------------------------------------

    @classmethod
    def zero(cls, dim):
        return cls(dim, {})

    @classmethod
    def constant(cls, dim, c):
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def coordinate(cls, dim, i):
        e = [0] * dim
        e[i] = 1
        return cls(dim, {tuple(e): 1})

    def is_exact(self):
        return all(_is_exact_scalar(c) for c in self.terms.values())

    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    # -- arithmetic ------------------------------------------------------

    def _check_dim(self, other):
        if self.dim != other.dim:
            raise ShapeError("dimension mismatch %d vs %d" % (self.dim, other.dim))

    def __add__(self, other):
        if isinstance(other, (int, float, Fraction)):
            other = PolynomialPhase.constant(self.dim, other)
        self._check_dim(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0) + c
        return PolynomialPhase(self.dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return PolynomialPhase(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-1) * other if isinstance(other, PolynomialPhase) \
            else self + (-other)

    def __rsub__(self, other):
        return (-1) * self + other

    def __mul__(self, other):
        if isinstance(other, (int, float, Fraction)):
            return PolynomialPhase(self.dim,
                                   {e: c * other for e, c in self.terms.items()})
        self._check_dim(other)
        terms = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return PolynomialPhase(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, k):
        if k < 0:
            raise ShapeError("negative polynomial power")
        out = PolynomialPhase.constant(self.dim, 1)
        for _ in range(int(k)):
            out = out * self
        return out

    def __repr__(self):
        return "PolynomialPhase(%d, %r)" % (self.dim, self.terms)

    # -- calculus --------------------------------------------------------

    def diff(self, i):
        terms = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            e2 = list(e)
            e2[i] -= 1
            terms[tuple(e2)] = terms.get(tuple(e2), 0) + c * e[i]
        return PolynomialPhase(self.dim, terms)

    def value(self, x):
        x = list(x) if not hasattr(x, "ndim") else x
        if isinstance(x, list) and all(_is_exact_scalar(v) for v in x):
            total = Fraction(0)
            for e, c in self.terms.items():
                term = Fraction(c) if _is_exact_scalar(c) else c
                for xi, k in zip(x, e):
                    term *= Fraction(xi) ** k
                total += term
            return total
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.shape[-1] != self.dim and self.dim != 0:
            raise ShapeError("point has dimension %d, expected %d"
                             % (arr.shape[-1], self.dim))
        total = np.zeros(arr.shape[:-1])
        for e, c in self.terms.items():
            term = np.full(arr.shape[:-1], float(c))
            for i, k in enumerate(e):
                if k:
                    term = term * arr[..., i] ** k
            total = total + term
        return total if total.shape else float(total)

    def gradient(self, x):
        return np.array([float(self.diff(i).value(np.asarray(x, dtype=float)))
                         for i in range(self.dim)])

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([[float(self.diff(i).diff(j).value(x))
                          for j in range(self.dim)] for i in range(self.dim)])

    def derivative_tensor(self, point, order):
        """Raw order-th derivative tensor at `point`, symmetric in all axes.

        Exact (object array of Fractions) when the coefficients and the
        point are ints or Fractions, float otherwise.
        """
        exact = self.is_exact() and all(_is_exact_scalar(v) for v in point)
        cache = {}

        def dpoly(idx):
            if idx in cache:
                return cache[idx]
            if not idx:
                p = self
            else:
                p = dpoly(idx[:-1]).diff(idx[-1])
            cache[idx] = p
            return p

        shape = (self.dim,) * order
        if exact:
            pt = [Fraction(v) for v in point]
            out = np.empty(shape, dtype=object)
            for idx in product(range(self.dim), repeat=order):
                out[idx] = dpoly(tuple(sorted(idx))).value(pt)
            return out
        pt = np.asarray(point, dtype=float)
        out = np.zeros(shape)
        for idx in product(range(self.dim), repeat=order):
            out[idx] = float(dpoly(tuple(sorted(idx))).value(pt))
        return out

    def restrict_affine(self, c, m):
        """Pull back along x = c + m s to a polynomial in the s variables."""
        m = [list(row) for row in m]
        k = len(m[0]) if m else 0
        if len(m) != self.dim or len(c) != self.dim:
            raise ShapeError("affine data does not match dimension %d" % self.dim)
        coords = [PolynomialPhase.coordinate(k, j) for j in range(k)]
        subs = []
        for i in range(self.dim):
            p = PolynomialPhase.constant(k, c[i])
            for j in range(k):
                p = p + m[i][j] * coords[j]
            subs.append(p)
        out = PolynomialPhase.zero(k)
        for e, coeff in self.terms.items():
            term = PolynomialPhase.constant(k, coeff)
            for i, n in enumerate(e):
                for _ in range(n):
                    term = term * subs[i]
            out = out + term
        return out


class FourierPhase1D:
    """Trigonometric polynomial a_0 + sum_k a_k cos(kx) + b_k sin(kx).

    Periodic with period 2 pi (integer frequencies enforced); the natural
    domain marker for the circle quadrature oracle.
    """

    dim = 1
    periodic = True
    period = 2 * math.pi

    def __init__(self, cos_terms=None, sin_terms=None, constant=0.0):
        self.cos_terms = {int(k): float(c) for k, c in (cos_terms or {}).items()
                          if c != 0}
        self.sin_terms = {int(k): float(c) for k, c in (sin_terms or {}).items()
                          if c != 0}
        if any(k <= 0 for k in self.cos_terms) or any(k <= 0 for k in self.sin_terms):
            raise ShapeError("frequencies must be positive integers")
        self.constant = float(constant)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        x1 = x[..., 0] if x.ndim and x.shape[-1:] == (1,) else x
        total = np.full(np.shape(x1), self.constant, dtype=float)
        for k, c in self.cos_terms.items():
            total = total + c * np.cos(k * x1)
        for k, c in self.sin_terms.items():
            total = total + c * np.sin(k * x1)
        return total if total.shape else float(total)

    def _derivative(self, order):
        """Coefficient tables of the order-th derivative."""
        cos_t = dict(self.cos_terms)
        sin_t = dict(self.sin_terms)
        const = self.constant if order == 0 else 0.0
        for _ in range(order):
            # d/dx: cos(kx) -> -k sin(kx), sin(kx) -> k cos(kx)
            cos_t, sin_t = ({k: k * c for k, c in sin_t.items()},
                            {k: -k * c for k, c in cos_t.items()})
        return cos_t, sin_t, const

    def deriv_value(self, x, order):
        cos_t, sin_t, const = self._derivative(order)
        x = float(np.asarray(x).reshape(-1)[0])
        total = const
        for k, c in cos_t.items():
            total += c * math.cos(k * x)
        for k, c in sin_t.items():
            total += c * math.sin(k * x)
        return total

    def gradient(self, x):
        return np.array([self.deriv_value(x, 1)])

    def hessian(self, x):
        return np.array([[self.deriv_value(x, 2)]])

    def derivative_tensor(self, point, order):
        x = float(np.asarray(point).reshape(-1)[0])
        return np.full((1,) * order, self.deriv_value(x, order))


@dataclass
class StationaryPoint:
    point: np.ndarray
    value: float
    hessian: np.ndarray
    grad_norm: float


@dataclass
class SearchResult:
    points: list
    failures: list


def find_stationary_points(phase, seeds, tol=1e-12, max_iter=80,
                           dedup_tol=1e-8):
    """Damped Newton search for grad f = 0 from each seed.

    Seeds that stall, blow up, or land on a previously found point are
    reported in `failures`/deduplicated; periodic phases are deduplicated
    modulo the period.  Returns SearchResult(points, failures).
    """
    points = []
    failures = []
    period = getattr(phase, "period", None) if getattr(phase, "periodic", False) else None
    for seed in seeds:
        x = np.atleast_1d(np.asarray(seed, dtype=float)).copy()
        ok = False
        msg = ""
        for _ in range(max_iter):
            g = phase.gradient(x)
            gn = float(np.linalg.norm(g))
            if gn < tol * max(1.0, float(np.linalg.norm(x))):
                ok = True
                break
            h = phase.hessian(x)
            try:
                step = np.linalg.solve(h, -g)
            except np.linalg.LinAlgError:
                msg = "singular Hessian at %s" % x
                break
            lam = 1.0
            xn = x + step
            while np.linalg.norm(phase.gradient(xn)) >= gn:
                lam *= 0.5
                if lam < 1e-12:
                    break
                xn = x + lam * step
            if lam < 1e-12:
                msg = "damping stalled at %s" % x
                break
            x = xn
            if np.linalg.norm(x) > 1e12:
                msg = "diverged from seed %s" % np.asarray(seed)
                break
        if not ok:
            failures.append({"seed": np.asarray(seed, dtype=float),
                             "reason": msg or "no convergence in %d iterations" % max_iter})
            continue
        if period is not None:
            x = np.mod(x, period)
        dup = False
        for sp in points:
            d = np.abs(x - sp.point)
            if period is not None:
                d = np.minimum(d, period - d)
            if np.linalg.norm(d) < dedup_tol:
                dup = True
                break
        if dup:
            continue
        points.append(StationaryPoint(point=x,
                                      value=float(phase.value(x)),
                                      hessian=phase.hessian(x),
                                      grad_norm=float(np.linalg.norm(phase.gradient(x)))))
    points.sort(key=lambda sp: tuple(sp.point))
    return SearchResult(points=points, failures=failures)


@dataclass
class LocalModel:
    """Everything the diagram engine needs at one stationary point.

    vertex_tensors[n] is minus the raw n-th derivative tensor of the phase
    (n >= 3); observable_tensors[k] is the raw k-th derivative tensor of
    the observable (k >= 0).  Fermionic blocks, when present:

    fermi_kind 'neutral': fermi_matrix is the skew bilinear form L(a) and
        fermi_vertex[(j, k)] = minus the j-th bosonic derivative of the
        antisymmetrised rank-k coupling, axes (dim^j, m^k).
    fermi_kind 'charged' or 'ghost': fermi_matrix is L(a) (c L cbar) and
        fermi_vertex[j] = the j-th bosonic derivative of L, axes
        (dim^j, k, k); charged vertices carry the phase sign (minus),
        ghost vertices enter with a plus and no factor of i anywhere.
    """

    point: object
    f_at_a: object
    hessian: object
    vertex_tensors: dict
    observable_tensors: dict = None
    fermi_kind: str = None
    fermi_matrix: object = None
    fermi_vertex: dict = field(default_factory=dict)
    exact: bool = False

    @property
    def dim(self):
        if self.hessian is None:
            return 0
        return len(self.hessian)

    @property
    def fermi_dim(self):
        if self.fermi_matrix is None:
            return 0
        return len(self.fermi_matrix)


def localize(phase, point, max_order, observable=None):
    """Taylor data of a phase (and optional observable) at a point.

    max_order is the highest h-order the engine will request: vertex
    tensors are prepared up to valency 2*max_order + 2 and observable
    tensors up to valency 2*max_order.
    """
    exact = (getattr(phase, "is_exact", lambda: False)()
             and all(_is_exact_scalar(v) for v in point))
    if observable is not None:
        if getattr(observable, "dim", None) != phase.dim:
            raise ShapeError("observable dimension differs from phase")
        exact = exact and getattr(observable, "is_exact", lambda: False)()
    pt = list(point) if exact else np.asarray(point, dtype=float)
    hess = phase.derivative_tensor(pt, 2)
    vmax = 2 * max_order + 2
    vertex = {n: -phase.derivative_tensor(pt, n) for n in range(3, vmax + 1)}
    obs = None
    if observable is not None:
        obs = {k: observable.derivative_tensor(pt, k)
               for k in range(0, 2 * max_order + 1)}
    f_a = phase.value(pt)
    return LocalModel(point=pt, f_at_a=f_a, hessian=hess,
                      vertex_tensors=vertex, observable_tensors=obs,
                      exact=exact)
