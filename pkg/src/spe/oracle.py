"""Independent oracles: Berezin integrals, quadrature, coefficient fits.

Nothing in this module knows about diagrams.  The Grassmann layer computes
fermionic integrals directly from the multiplication table of the exterior
algebra; the quadrature layer evaluates oscillatory integrals numerically
(trapezoid on the circle, windowed Gauss panels near a stationary point,
epsilon-damped global integrals); `fit_coefficients` extracts series
coefficients from sampled values.  The engine is tested against these, not
the other way around.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (FitConditioningError, OddCountError,
                     QuadratureDivergenceError, ShapeError)


# ---------------------------------------------------------------------------
# coefficient rings

class LaurentPoly:
    """Laurent polynomial in one formal variable over the rationals.

    Used to compare terminating fermionic expansions exactly: with
    z = i*h the Berezin integral of exp(i S / h) has Laurent-polynomial
    coefficients in z over Q, no floating point anywhere.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        for k, c in (terms or {}).items():
            c = Fraction(c)
            if c != 0:
                self.terms[int(k)] = c

    @classmethod
    def const(cls, c):
        return cls({0: c})

    @classmethod
    def z(cls, power=1, coeff=1):
        return cls({power: coeff})

    def _coerce(self, other):
        if isinstance(other, LaurentPoly):
            return other
        return LaurentPoly.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, Fraction(0)) + c
        return LaurentPoly(terms)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, LaurentPoly):
            return LaurentPoly({k: c * Fraction(other)
                                for k, c in self.terms.items()})
        terms = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                terms[k1 + k2] = terms.get(k1 + k2, Fraction(0)) + c1 * c2
        return LaurentPoly(terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return LaurentPoly({k: c / Fraction(other)
                            for k, c in self.terms.items()})

    def __eq__(self, other):
        if isinstance(other, LaurentPoly):
            return self.terms == other.terms
        return self.terms == LaurentPoly.const(other).terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        if not self.terms:
            return "LaurentPoly(0)"
        bits = ["%s z^%d" % (c, k) for k, c in sorted(self.terms.items())]
        return "LaurentPoly(%s)" % " + ".join(bits)

    def __call__(self, z):
        return sum(complex(c) * z ** k for k, c in self.terms.items())


# ---------------------------------------------------------------------------
# Grassmann algebra

def _merge_sign(a, b):
    """Merge two strictly increasing index tuples; (sign, merged) or None."""
    merged = []
    sign = 1
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            return None
        if a[i] < b[j]:
            merged.append(a[i])
            i += 1
        else:
            # b[j] jumps over the remaining len(a)-i generators of a
            if (len(a) - i) % 2:
                sign = -sign
            merged.append(b[j])
            j += 1
    merged.extend(a[i:])
    merged.extend(b[j:])
    return sign, tuple(merged)


class GrassmannElement:
    """Element of the exterior algebra on n anticommuting generators.

    terms maps strictly increasing generator-index tuples to coefficients;
    the coefficient ring is anything with +, -, * (complex numbers,
    Fractions, LaurentPoly).  The empty tuple is the scalar part.
    """

    def __init__(self, n, terms=None):
        self.n = int(n)
        self.terms = {}
        for mono, c in (terms or {}).items():
            mono = tuple(mono)
            if any(not 0 <= g < self.n for g in mono):
                raise ShapeError("generator index out of range in %r" % (mono,))
            if list(mono) != sorted(set(mono)):
                raise ShapeError("monomial %r not strictly increasing" % (mono,))
            if isinstance(c, (int, float)) and c == 0:
                continue
            self.terms[mono] = c

    @classmethod
    def scalar(cls, n, c):
        return cls(n, {(): c})

    @classmethod
    def generator(cls, n, i, coeff=1):
        return cls(n, {(i,): coeff})

    def _check(self, other):
        if self.n != other.n:
            raise ShapeError("mixing algebras with %d and %d generators"
                             % (self.n, other.n))

    def __add__(self, other):
        if not isinstance(other, GrassmannElement):
            other = GrassmannElement.scalar(self.n, other)
        self._check(other)
        terms = dict(self.terms)
        for mono, c in other.terms.items():
            cur = terms.get(mono)
            terms[mono] = c if cur is None else cur + c
        return GrassmannElement(self.n, {m: c for m, c in terms.items()
                                         if not _is_zero(c)})

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, GrassmannElement):
            other = GrassmannElement.scalar(self.n, other)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, GrassmannElement):
            return GrassmannElement(self.n, {m: c * other
                                             for m, c in self.terms.items()})
        self._check(other)
        terms = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                hit = _merge_sign(m1, m2)
                if hit is None:
                    continue
                sign, mono = hit
                contrib = c1 * c2 if sign == 1 else -(c1 * c2)
                cur = terms.get(mono)
                terms[mono] = contrib if cur is None else cur + contrib
        return GrassmannElement(self.n, {m: c for m, c in terms.items()
                                         if not _is_zero(c)})

    def __rmul__(self, other):
        # scalars commute with everything
        return self * other

    def scalar_part(self):
        return self.terms.get((), 0)

    def soul(self):
        """The nilpotent part (scalar removed)."""
        return GrassmannElement(self.n, {m: c for m, c in self.terms.items() if m})

    def __repr__(self):
        return "GrassmannElement(%d, %r)" % (self.n, self.terms)


def _is_zero(c):
    if isinstance(c, LaurentPoly):
        return not c
    try:
        return c == 0
    except TypeError:
        return False


def grassmann_exp(el):
    """exp of an element with no scalar part; the series terminates.

    Raises ShapeError when a scalar part is present (exponentiate it in
    the coefficient ring instead; for LaurentPoly coefficients there is no
    exp, which is the point of keeping the body separate).
    """
    if not _is_zero(el.scalar_part()):
        raise ShapeError("grassmann_exp needs a nilpotent argument")
    result = GrassmannElement.scalar(el.n, 1)
    power = GrassmannElement.scalar(el.n, 1)
    kfac = 1
    for k in range(1, el.n + 1):
        power = power * el
        if not power.terms:
            break
        kfac *= k
        result = result + power * Fraction(1, kfac)
    return result


def berezin_top(el):
    """Berezin integral: coefficient of the top monomial (0, 1, ..., n-1).

    The measure is d theta_{n-1} ... d theta_0, i.e. the integral of
    theta_0 theta_1 ... theta_{n-1} is 1.
    """
    return el.terms.get(tuple(range(el.n)), 0)


def berezin_reference(bilinear, couplings=None):
    """int exp((i/2h)(c,Bc) - (i/h)P(c)) dc by brute Grassmann expansion.

    Returns the exact LaurentPoly in z = ih; with i/h = -1/z the exponent
    is (-1/z) sum_{i<j} B_ij t_i t_j + (1/z) sum_{I inc} P_I t_I.  No
    matchings, graphs or symmetry factors anywhere, which is what makes
    this a reference for the diagrammatic route.
    """
    from itertools import combinations
    n = len(bilinear)
    zinv = LaurentPoly.z(-1)
    terms = {}
    for i in range(n):
        for j in range(i + 1, n):
            c = Fraction(bilinear[i][j])
            if c:
                terms[(i, j)] = zinv * (-c)
    for k, tens in (couplings or {}).items():
        arr = np.asarray(tens, dtype=object)
        for idx in combinations(range(n), int(k)):
            c = Fraction(arr[idx])
            if c:
                terms[idx] = terms.get(idx, LaurentPoly()) + zinv * c
    return berezin_top(grassmann_exp(GrassmannElement(n, terms)))


# ---------------------------------------------------------------------------
# quadrature

def smooth_window(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, monotone between."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    out[u >= 1] = 1.0
    mid = (u > 0) & (u < 1)
    um = u[mid]
    f = np.exp(-1.0 / um)
    g = np.exp(-1.0 / (1.0 - um))
    out[mid] = f / (f + g)
    return out


def window_profile(dist, inner, outer):
    """1 inside |dist| <= inner, 0 beyond outer, smooth between."""
    return smooth_window((outer - np.abs(dist)) / (outer - inner))


def circle_quadrature(integrand, rtol=1e-11, start=64, max_points=2 ** 20):
    """Integral over [0, 2 pi) of a smooth periodic integrand.

    Trapezoid sums converge spectrally for periodic functions; the point
    count doubles until two consecutive refinements agree to rtol.
    """
    m = start
    prev = None
    while m <= max_points:
        x = np.arange(m) * (2 * np.pi / m)
        vals = integrand(x)
        total = np.sum(vals) * (2 * np.pi / m)
        if prev is not None and abs(total - prev) <= rtol * max(1.0, abs(total)):
            return complex(total)
        prev = total
        m *= 2
    raise QuadratureDivergenceError(
        "circle quadrature did not stabilise below %d points" % max_points)


def _gauss_panels(lo, hi, n_panels, n_nodes):
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(lo, hi, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


def windowed_quadrature(integrand, center, inner, outer, rtol=1e-10,
                        start_panels=8, n_nodes=16, max_panels=4096):
    """Integral of integrand(x) * W(x) over the box prod [c_i +- outer_i].

    W is the product of per-coordinate plateau windows (1 within inner_i of
    the centre, 0 beyond outer_i).  Inserting such a window changes an
    oscillatory integral with a single interior stationary point only at
    order h^infinity, which makes this the reference evaluation for
    asymptotic series.  Panels double until two refinements agree.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d = center.size
    inner = np.broadcast_to(np.asarray(inner, dtype=float), (d,))
    outer = np.broadcast_to(np.asarray(outer, dtype=float), (d,))
    if np.any(inner <= 0) or np.any(outer <= inner):
        raise ShapeError("window needs 0 < inner < outer")

    panels = start_panels
    prev = None
    while panels <= max_panels:
        axes = [_gauss_panels(center[i] - outer[i], center[i] + outer[i],
                              panels, n_nodes) for i in range(d)]
        grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        wgt = np.ones(pts.shape[0])
        for i in range(d):
            wi = np.meshgrid(*[a[1] if j == i else np.ones_like(axes[j][1])
                               for j, a in enumerate(axes)], indexing="ij")[i].ravel()
            wgt = wgt * wi
        window = np.ones(pts.shape[0])
        for i in range(d):
            window *= window_profile(pts[:, i] - center[i], inner[i], outer[i])
        vals = integrand(pts if d > 1 else pts[:, 0])
        total = np.sum(vals * window * wgt)
        if prev is not None and abs(total - prev) <= rtol * max(1e-300, abs(total)):
            return complex(total)
        prev = total
        panels *= 2
    raise QuadratureDivergenceError(
        "windowed quadrature did not stabilise below %d panels" % max_panels)


def annulus_quadrature(integrand, r_center, inner, outer, rtol=1e-10,
                       start_panels=8, n_nodes=16, n_theta=64,
                       max_panels=8192, max_theta=8192):
    """Plane integral of integrand(pts) * W(r) over an annulus.

    The reference evaluation for phases stationary on a whole circle of
    radius r_center: the angle uses the spectrally convergent trapezoid
    rule, the radius uses Gauss panels under a plateau window (1 within
    `inner` of r_center, 0 beyond `outer`).  integrand receives (npts, 2)
    Cartesian samples; the polar Jacobian is applied here.  The angular
    bandwidth is set by the phase variation along circles, not by 1/h
    radial oscillation, so theta is settled first on the coarse radial
    grid and the radial panel count then doubles on its own until two
    refinements agree; a final angle doubling guards the settled count.
    """
    if r_center - outer <= 0:
        raise ShapeError("annulus window must stay at positive radius")
    if inner <= 0 or outer <= inner:
        raise ShapeError("window needs 0 < inner < outer")

    def evaluate(panels, m_theta):
        r, wr = _gauss_panels(r_center - outer, r_center + outer,
                              panels, n_nodes)
        wr = wr * r * window_profile(r - r_center, inner, outer)
        theta = np.arange(m_theta) * (2 * np.pi / m_theta)
        # stream over theta so refined grids stay within bounded memory
        chunk = max(1, 2_000_000 // r.size)
        total = 0.0
        for j in range(0, m_theta, chunk):
            th = theta[j:j + chunk]
            pts = np.stack([(r[:, None] * np.cos(th)[None, :]).ravel(),
                            (r[:, None] * np.sin(th)[None, :]).ravel()],
                           axis=-1)
            vals = integrand(pts).reshape(r.size, th.size)
            total = total + np.sum(vals * wr[:, None])
        return total * (2 * np.pi / m_theta)

    m_theta = n_theta
    prev = evaluate(start_panels, m_theta)
    while m_theta < max_theta:
        cur = evaluate(start_panels, 2 * m_theta)
        settled = abs(cur - prev) <= rtol * max(1e-300, abs(cur))
        prev = cur
        m_theta *= 2
        if settled:
            break
    else:
        raise QuadratureDivergenceError(
            "annulus angle rule did not stabilise below %d points" % max_theta)

    panels = 2 * start_panels
    while panels <= max_panels:
        total = evaluate(panels, m_theta)
        if abs(total - prev) <= rtol * max(1e-300, abs(total)):
            recheck = evaluate(panels, 2 * m_theta)
            if abs(recheck - total) <= 10 * rtol * max(1e-300, abs(total)):
                return complex(recheck)
            m_theta *= 2
            prev = recheck
        else:
            prev = total
        panels *= 2
    raise QuadratureDivergenceError(
        "annulus quadrature did not stabilise below %d panels" % max_panels)


def neville(xs, ys):
    """Neville extrapolation of (xs, ys) to x = 0."""
    xs = list(xs)
    p = list(ys)
    n = len(p)
    for level in range(1, n):
        for i in range(n - level):
            p[i] = ((0.0 - xs[i + level]) * p[i] + (xs[i] - 0.0) * p[i + 1]) \
                / (xs[i] - xs[i + level])
    return p[0]


def damped_quadrature(integrand, center, eps0=0.2, n_eps=8, rtol=1e-6,
                      quad_limit=2000):
    """1-d integral over the real line by Gaussian damping extrapolation.

    Computes I(eps) = int integrand(x) exp(-eps (x-c)^2) dx for a geometric
    ladder of eps and Neville-extrapolates to eps = 0.  Conditionally
    convergent oscillatory tails are exactly the case this regularisation
    is for; it is slower and less accurate than the windowed evaluation
    and serves as the independent cross-check.
    """
    from scipy.integrate import quad

    c = float(center)
    eps_list = [eps0 * 2.0 ** (-k) for k in range(n_eps)]
    vals = []
    for eps in eps_list:
        half = math.sqrt(-math.log(1e-16) / eps)

        def re_part(x):
            v = integrand(np.array([x]))[0] * math.exp(-eps * (x - c) ** 2)
            return v.real

        def im_part(x):
            v = integrand(np.array([x]))[0] * math.exp(-eps * (x - c) ** 2)
            return v.imag

        re_val, re_err = quad(re_part, c - half, c + half, limit=quad_limit)
        im_val, im_err = quad(im_part, c - half, c + half, limit=quad_limit)
        if max(re_err, im_err) > 1e-7 * max(1.0, abs(re_val) + abs(im_val)):
            raise QuadratureDivergenceError(
                "damped quadrature error estimate too large at eps=%g" % eps)
        vals.append(re_val + 1j * im_val)
    out = neville(eps_list, vals)
    check = neville(eps_list[:-1], vals[:-1])
    if abs(out - check) > max(rtol * max(1.0, abs(out)), 1e-12):
        raise QuadratureDivergenceError(
            "damping extrapolation unstable: %r vs %r" % (out, check))
    return out


# ---------------------------------------------------------------------------
# series coefficient extraction

@dataclass
class CoefficientFit:
    """Least-squares fit of sampled values to sum_p pref_p(h) sum_k c_pk (ih)^k."""

    coefficients: list
    residuals: np.ndarray
    condition: float
    slope: float


def fit_coefficients(h_values, values, prefactors, n_orders, known_c0=None,
                     cond_limit=1e10):
    """Joint complex least squares for series coefficients.

    h_values: sampled h; values: integral values there; prefactors: one
    callable per stationary point giving its full h-dependent prefactor
    (including exp(i f(a)/h)); n_orders: highest power of (ih) to fit.
    known_c0: optional list fixing the leading coefficient per point, which
    is subtracted rather than fitted.  Returns CoefficientFit with the
    fitted coefficients per point (index 0 = the fixed/fitted c_0), the
    per-sample relative residuals, the design-matrix condition number and
    the log-log slope of |residual| against h.
    """
    h_values = np.asarray(h_values, dtype=float)
    values = np.asarray(values, dtype=complex)
    npts = len(prefactors)
    k_start = 0
    rhs = values.copy()
    if known_c0 is not None:
        if len(known_c0) != npts:
            raise ShapeError("known_c0 needs one entry per stationary point")
        for p, c0 in zip(prefactors, known_c0):
            rhs = rhs - c0 * np.array([p(h) for h in h_values])
        k_start = 1
    cols = []
    for p in prefactors:
        pv = np.array([p(h) for h in h_values])
        for k in range(k_start, n_orders + 1):
            cols.append(pv * (1j * h_values) ** k)
    a = np.stack(cols, axis=-1)
    # rows are scaled by the prefactor magnitude, not the sampled value:
    # multi-point values interfere and pass near zeros, and weighting by
    # 1/|value| would blow those rows up
    scale = np.zeros(len(h_values))
    for p in prefactors:
        scale = scale + np.abs(np.array([p(h) for h in h_values]))
    scale[scale == 0] = 1.0
    aw = a / scale[:, None]
    bw = rhs / scale
    # column equilibration: the raw columns differ in norm by h^k, which
    # inflates the condition number without making the problem any harder
    col_norm = np.linalg.norm(aw, axis=0)
    col_norm[col_norm == 0] = 1.0
    sol, _, rank, sv = np.linalg.lstsq(aw / col_norm[None, :], bw,
                                       rcond=None)
    sol = sol / col_norm
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > cond_limit or rank < a.shape[1]:
        raise FitConditioningError(
            "fit condition %.3g exceeds %.3g (rank %d of %d)"
            % (cond, cond_limit, rank, a.shape[1]))
    model = a @ sol
    res = np.abs(rhs - model) / scale
    per_point = []
    kcount = n_orders + 1 - k_start
    for j in range(npts):
        coeffs = list(sol[j * kcount:(j + 1) * kcount])
        if known_c0 is not None:
            coeffs = [complex(known_c0[j])] + coeffs
        per_point.append(coeffs)
    floor = np.maximum(res, 1e-15)
    slope = float(np.polyfit(np.log(h_values), np.log(floor), 1)[0])
    return CoefficientFit(coefficients=per_point, residuals=res,
                          condition=cond, slope=slope)


def residual_slope(h_values, residuals, floor=1e-15):
    """Log-log slope of residual magnitude against h."""
    h_values = np.asarray(h_values, dtype=float)
    r = np.maximum(np.abs(np.asarray(residuals, dtype=float)), floor)
    return float(np.polyfit(np.log(h_values), np.log(r), 1)[0])


def bessel_j0(x, dps=30):
    """J_0 at high precision (independent special-function reference)."""
    import mpmath
    with mpmath.workdps(dps):
        return float(mpmath.besselj(0, mpmath.mpf(x)))
