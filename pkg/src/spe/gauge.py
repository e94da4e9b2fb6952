"""Finite-dimensional gauge fixing and the BRST complex.

A compact group of dimension n acts on R^d through polynomial vector
fields e_a = sum_i D_a^i(x) d/dx^i that preserve the phase.  Near a
stationary orbit the oscillatory integral localizes onto a linear slice
through a chosen orbit representative; the orbit volume factors out and
the transverse Jacobian det L(x) becomes a determinant insertion, which
the diagram engine evaluates as an oriented-ghost expansion.  The same
determinant has an algebraic incarnation: the odd nilpotent derivation Q
on polynomials in (x, lambda, c, cbar), implemented symbolically below
together with its divergence and the gauge-independence identity.

Conventions pinned here:
  - the local contribution of one orbit representative a is
      |G| * J * integral over the slice of exp(i f(s)/h) det L(s) ds,
    J = |det [l  Psi]| / |det(C l)| with l the generator values at a,
    Psi a basis of ker C, and C the linear gauge covector rows; J = 1
    for an orthonormal adapted frame and makes the value independent of
    the slice basis and of the gauge matrix C.
  - the ghost bilinear carries no factors of i or h (they cancel around
    every closed ghost loop), so the prefactor holds det L(a) itself and
    coefficients multiply integer powers of (i hbar) as everywhere else.
  - orbit multiplicity is the caller's business: one representative in,
    one local expansion out.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (GaugeNotTransverseError, InputError, InvarianceError,
                     LieAlgebraError, ShapeError, SingularMatrixError)
from .exact import exact_det, exact_nullspace
from .models import PolynomialPhase, LocalModel
from .engine import charged_model, expand_charged


def _as_poly(dim, p):
    if isinstance(p, PolynomialPhase):
        if p.dim != dim:
            raise ShapeError("polynomial dimension %d, expected %d"
                             % (p.dim, dim))
        return p
    return PolynomialPhase(dim, p)


@dataclass
class GaugeModel:
    """Polynomial group action data on R^dim.

    generators[a][i] is the i-th component of the vector field e_a;
    structure_constants[c][a][b] is f^c_{ab} in [e_a, e_b] = sum_c
    f^c_{ab} e_c; constraint lists the gauge functions phi^a; the group
    volume normalizes the orbit factor and is supplied, not computed.
    """

    dim: int
    group_dim: int
    generators: list
    structure_constants: object
    phase: PolynomialPhase
    constraint: list
    group_volume: float = 1.0

    def __post_init__(self):
        d, n = self.dim, self.group_dim
        if not 0 < n <= d:
            raise ShapeError("group dimension %d incompatible with %d" % (n, d))
        if len(self.generators) != n:
            raise ShapeError("expected %d generators" % n)
        self.generators = [[_as_poly(d, comp) for comp in gen]
                           for gen in self.generators]
        for gen in self.generators:
            if len(gen) != d:
                raise ShapeError("generator needs %d components" % d)
        self.phase = _as_poly(d, self.phase)
        self.constraint = [_as_poly(d, p) for p in self.constraint]
        if len(self.constraint) != n:
            raise ShapeError("expected %d constraint functions" % n)
        f = self.structure_constants
        if f is None:
            f = [[[0] * n for _ in range(n)] for _ in range(n)]
        self.structure_constants = [
            [[f[c][a][b] for b in range(n)] for a in range(n)]
            for c in range(n)]

    def vector_field_apply(self, a, g):
        """The polynomial e_a g = sum_i D_a^i dg/dx^i."""
        out = PolynomialPhase.zero(self.dim)
        for i in range(self.dim):
            out = out + self.generators[a][i] * g.diff(i)
        return out

    def fp_matrix(self):
        """L_a^b = e_a phi^b as a matrix of polynomials."""
        n = self.group_dim
        return [[self.vector_field_apply(a, self.constraint[b])
                 for b in range(n)] for a in range(n)]


def _bracket(gm, a, b):
    """[e_a, e_b] componentwise: sum_j (D_a^j d_j D_b^i - D_b^j d_j D_a^i)."""
    comps = []
    for i in range(gm.dim):
        p = PolynomialPhase.zero(gm.dim)
        for j in range(gm.dim):
            p = p + gm.generators[a][j] * gm.generators[b][i].diff(j)
            p = p - gm.generators[b][j] * gm.generators[a][i].diff(j)
        comps.append(p)
    return comps


def validate_gauge_model(gm, seeds=()):
    """Exact closure and invariance checks plus sampled transversality.

    Closure and invariance are required as identities between polynomials;
    any nonzero residual term raises.  det L is evaluated at the given
    seeds and reported (transversality proper is checked against a
    concrete slice by fp_local_model).
    """
    n = gm.group_dim
    for a in range(n):
        for b in range(a + 1, n):
            br = _bracket(gm, a, b)
            for i in range(gm.dim):
                expect = PolynomialPhase.zero(gm.dim)
                for c in range(n):
                    expect = expect + gm.structure_constants[c][a][b] \
                        * gm.generators[c][i]
                if (br[i] - expect).terms:
                    raise LieAlgebraError(
                        "closure fails for [e_%d, e_%d] component %d"
                        % (a, b, i))
    for a in range(n):
        res = gm.vector_field_apply(a, gm.phase)
        if res.terms:
            raise InvarianceError("e_%d f is not zero: %r" % (a, res.terms))
    lmat = gm.fp_matrix()
    samples = []
    for seed in seeds:
        vals = [[float(lmat[i][j].value(list(seed))) for j in range(n)]
                for i in range(n)]
        samples.append(float(np.linalg.det(np.asarray(vals))))
    return {"closure": "ok", "invariance": "ok",
            "det_l_samples": samples}


@dataclass
class FPLocalModel:
    """Gauge-fixed local data on the linear slice through one orbit point."""

    model: LocalModel
    point: object
    gauge_matrix: object
    slice_basis: object
    measure_factor: object
    reduced_phase: PolynomialPhase
    ghost_form: list

    @property
    def slice_dim(self):
        return self.reduced_phase.dim


def _is_exact_seq(xs):
    return all(isinstance(x, (int, Fraction)) for x in xs)


def _float_nullspace(c_rows):
    a = np.asarray(c_rows, dtype=float)
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > 1e-12 * (s[0] if s.size else 1.0)))
    return [vt[i] for i in range(rank, a.shape[1])]


def fp_local_model(gm, a, max_order, linear_gauge=None):
    """Reduce to the slice a + ker(C) and package the ghost-mode model.

    C defaults to the constraint Jacobian at a.  Exact input (rational
    phase, generators, point, gauge) keeps the whole reduction rational.
    Raises GaugeNotTransverseError when the slice fails to cross the
    orbit directions, InputError when a is not stationary on the slice.
    """
    d, n = gm.dim, gm.group_dim
    if n >= d:
        raise GaugeNotTransverseError(
            "no transverse slice: group dimension %d, space %d" % (n, d))
    a = list(a)
    if len(a) != d:
        raise ShapeError("point has dimension %d, expected %d" % (len(a), d))
    exact = (_is_exact_seq(a) and gm.phase.is_exact()
             and all(p.is_exact() for gen in gm.generators for p in gen))
    if linear_gauge is not None:
        c_rows = [list(row) for row in linear_gauge]
        if len(c_rows) != n or any(len(r) != d for r in c_rows):
            raise ShapeError("linear gauge must be %d x %d" % (n, d))
    else:
        c_rows = [[gm.constraint[b].diff(i).value(a) for i in range(d)]
                  for b in range(n)]
    exact = exact and all(_is_exact_seq(r) for r in c_rows)

    # generator values at a span the orbit tangent; columns of l
    lcols = [[gm.generators[g][i].value(a) for i in range(d)]
             for g in range(n)]
    cl = [[sum(c_rows[b][i] * lcols[g][i] for i in range(d))
           for g in range(n)] for b in range(n)]
    det_cl = exact_det(cl) if exact else np.linalg.det(
        np.asarray(cl, dtype=float))
    if det_cl == 0 or (not exact and abs(det_cl) < 1e-12):
        raise GaugeNotTransverseError(
            "gauge covectors do not pair with the orbit directions")

    if exact:
        psi = exact_nullspace(c_rows)
    else:
        psi = _float_nullspace(c_rows)
    if len(psi) != d - n:
        raise GaugeNotTransverseError(
            "gauge matrix does not have full rank %d" % n)

    frame = [[lcols[g][i] for g in range(n)] + [psi[k][i]
             for k in range(d - n)] for i in range(d)]
    det_frame = exact_det(frame) if exact else np.linalg.det(
        np.asarray(frame, dtype=float))
    jay = abs(det_frame) / abs(det_cl)

    basis = [[psi[k][i] for k in range(d - n)] for i in range(d)]
    f_s = gm.phase.restrict_affine(a, basis)
    grad = [f_s.diff(j).value([0] * (d - n)) for j in range(d - n)]
    scale = max((abs(float(c)) for c in gm.phase.terms.values()), default=1.0)
    if any((g != 0) if exact else (abs(g) > 1e-9 * scale) for g in grad):
        raise InputError("point is not stationary on the gauge slice")

    ghost = [[PolynomialPhase.zero(d - n) for _ in range(n)]
             for _ in range(n)]
    for g in range(n):
        for b in range(n):
            entry = PolynomialPhase.zero(d - n)
            for i in range(d):
                if c_rows[b][i] == 0:
                    continue
                entry = entry + c_rows[b][i] \
                    * gm.generators[g][i].restrict_affine(a, basis)
            ghost[g][b] = entry
    model = charged_model(f_s, ghost, [0] * (d - n), max_order,
                          exact=exact, ghost=True)
    return FPLocalModel(model=model, point=a, gauge_matrix=c_rows,
                        slice_basis=basis, measure_factor=jay,
                        reduced_phase=f_s, ghost_form=ghost)


def fp_expand(gm, a, order, linear_gauge=None, threads=1):
    """Gauge-fixed expansion at one orbit representative.

    The recomposed value carries |G|, the slice measure factor, the
    ghost determinant det L(a), and the reduced bosonic prefactor; the
    coefficients close over boson and oriented-ghost graphs and are
    independent of the admissible linear gauge.
    """
    fp = fp_local_model(gm, a, order, linear_gauge=linear_gauge)
    exp = expand_charged(fp.model, order, threads=threads)
    exp.prefactor.group_volume = float(gm.group_volume)
    exp.prefactor.measure_factor = float(fp.measure_factor)
    exp.point = a
    exp.meta["mode"] = "faddeev-popov"
    exp.meta["slice_dim"] = fp.slice_dim
    exp.meta["measure_factor"] = float(fp.measure_factor)
    return exp


def gauge_variation_residual(gm, a, eps):
    """First-order gauge dependence: |-1/2 tr(B^-1 dB) + tr(L^-1 dL)|.

    B is the bordered Hessian of f + lambda.phi at (a, 0); perturbing the
    constraint by eps shifts its off-diagonal blocks by the Jacobian of
    eps and shifts L by e_a eps^b.  The combination vanishes identically,
    which is the order-zero gauge independence of the expansion.
    """
    d, n = gm.dim, gm.group_dim
    a = [float(x) for x in a]
    eps = [_as_poly(d, p) for p in eps]
    if len(eps) != n:
        raise ShapeError("expected %d perturbation polynomials" % n)
    hess = np.array([[float(gm.phase.diff(i).diff(j).value(a))
                      for j in range(d)] for i in range(d)])
    dphi = np.array([[float(gm.constraint[b].diff(i).value(a))
                      for i in range(d)] for b in range(n)])
    big = np.zeros((d + n, d + n))
    big[:d, :d] = hess
    big[:d, d:] = dphi.T
    big[d:, :d] = dphi
    if abs(np.linalg.det(big)) < 1e-12:
        raise SingularMatrixError("bordered Hessian is singular")
    deps = np.array([[float(eps[b].diff(i).value(a)) for i in range(d)]
                     for b in range(n)])
    dbig = np.zeros((d + n, d + n))
    dbig[:d, d:] = deps.T
    dbig[d:, :d] = deps
    lmat = np.array([[float(gm.vector_field_apply(g, gm.constraint[b])
                            .value(a)) for b in range(n)]
                     for g in range(n)])
    dl = np.array([[float(gm.vector_field_apply(g, eps[b]).value(a))
                    for b in range(n)] for g in range(n)])
    term_b = -0.5 * np.trace(np.linalg.solve(big, dbig))
    term_l = np.trace(np.linalg.solve(lmat, dl))
    return abs(term_b + term_l)


# ---------------------------------------------------------------------------
# BRST algebra


def _merge_odd(left, right):
    """Concatenate sorted odd index tuples with the Koszul sign.

    Returns (merged tuple, sign) or None when an index repeats (the term
    dies).  The sign counts the transpositions needed to interleave.
    """
    if not left:
        return right, 1
    if not right:
        return left, 1
    merged = []
    sign = 1
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] == right[j]:
            return None
        if left[i] < right[j]:
            merged.append(left[i])
            i += 1
        else:
            if (len(left) - i) % 2:
                sign = -sign
            merged.append(right[j])
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return tuple(merged), sign


class SuperPolynomial:
    """Polynomial in even x, lambda and odd c, cbar generators.

    Terms map (x_exponents, lambda_exponents, odd_indices) to
    coefficients, where the odd indices are a sorted tuple over
    0..2n-1 with c^a at index a and cbar_a at index n + a.  Products
    carry Koszul signs from interleaving the odd parts.
    """

    def __init__(self, dim, group_dim, terms=None):
        self.dim = int(dim)
        self.group_dim = int(group_dim)
        clean = {}
        for key, coeff in (terms or {}).items():
            xe, le, odd = key
            key = (tuple(xe), tuple(le), tuple(odd))
            if coeff == 0:
                continue
            clean[key] = clean.get(key, 0) + coeff
        self.terms = {k: c for k, c in clean.items() if c != 0}

    # -- constructors ----------------------------------------------------

    @classmethod
    def zero(cls, dim, group_dim):
        return cls(dim, group_dim, {})

    @classmethod
    def from_even(cls, poly, group_dim):
        lz = (0,) * group_dim
        return cls(poly.dim, group_dim,
                   {(e, lz, ()): c for e, c in poly.terms.items()})

    @classmethod
    def ghost(cls, dim, group_dim, a):
        return cls(dim, group_dim,
                   {((0,) * dim, (0,) * group_dim, (a,)): 1})

    @classmethod
    def antighost(cls, dim, group_dim, a):
        return cls(dim, group_dim,
                   {((0,) * dim, (0,) * group_dim, (group_dim + a,)): 1})

    @classmethod
    def multiplier(cls, dim, group_dim, a):
        le = [0] * group_dim
        le[a] = 1
        return cls(dim, group_dim, {((0,) * dim, tuple(le), ()): 1})

    # -- structure ---------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def max_abs_coeff(self):
        return max((abs(c) for c in self.terms.values()), default=0)

    def parity(self):
        """0 even, 1 odd, None mixed."""
        ps = {len(odd) % 2 for (_, _, odd) in self.terms}
        if not ps:
            return 0
        return ps.pop() if len(ps) == 1 else None

    def even_part_degree(self, key):
        xe, le, odd = key
        return sum(xe) + sum(le) + len(odd)

    def __eq__(self, other):
        return (isinstance(other, SuperPolynomial)
                and self.terms == other.terms)

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return "SuperPolynomial(%d, %d, %r)" % (
            self.dim, self.group_dim, self.terms)

    # -- ring operations ---------------------------------------------------

    def _like(self, terms):
        return SuperPolynomial(self.dim, self.group_dim, terms)

    def __add__(self, other):
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) + c
        return self._like(terms)

    def __sub__(self, other):
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) - c
        return self._like(terms)

    def __neg__(self):
        return self._like({k: -c for k, c in self.terms.items()})

    def scale(self, s):
        return self._like({k: c * s for k, c in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, SuperPolynomial):
            return self.scale(other)
        terms = {}
        for (xe1, le1, odd1), c1 in self.terms.items():
            for (xe2, le2, odd2), c2 in other.terms.items():
                merged = _merge_odd(odd1, odd2)
                if merged is None:
                    continue
                odd, sign = merged
                xe = tuple(u + v for u, v in zip(xe1, xe2))
                le = tuple(u + v for u, v in zip(le1, le2))
                key = (xe, le, odd)
                terms[key] = terms.get(key, 0) + sign * c1 * c2
        return self._like(terms)

    __rmul__ = scale

    # -- derivations ---------------------------------------------------------

    def diff_x(self, i):
        terms = {}
        for (xe, le, odd), c in self.terms.items():
            if xe[i] == 0:
                continue
            e2 = list(xe)
            e2[i] -= 1
            key = (tuple(e2), le, odd)
            terms[key] = terms.get(key, 0) + c * xe[i]
        return self._like(terms)

    def diff_odd(self, g):
        """Left Grassmann derivative with respect to odd generator g."""
        terms = {}
        for (xe, le, odd), c in self.terms.items():
            if g not in odd:
                continue
            pos = odd.index(g)
            rest = odd[:pos] + odd[pos + 1:]
            sign = -1 if pos % 2 else 1
            key = (xe, le, rest)
            terms[key] = terms.get(key, 0) + sign * c
        return self._like(terms)


class BRSTOperator:
    """The odd derivation Q = c.e + (structure term) + lambda d/dcbar.

    Qg = sum_{a,i} c^a D_a^i dg/dx^i
         - 1/2 sum_{abc} f^a_{bc} c^b c^c dg/dc^a
         + sum_a lambda_a dg/dcbar_a,
    nilpotent exactly when the generators close with the given structure
    constants (Jacobi identity included).
    """

    def __init__(self, gm):
        self.gm = gm
        d, n = gm.dim, gm.group_dim
        self._cd = []
        for a in range(n):
            ca = SuperPolynomial.ghost(d, n, a)
            self._cd.append([
                ca * SuperPolynomial.from_even(gm.generators[a][i], n)
                for i in range(d)])
        self._cc = [[SuperPolynomial.ghost(d, n, b)
                     * SuperPolynomial.ghost(d, n, c)
                     for c in range(n)] for b in range(n)]
        self._lam = [SuperPolynomial.multiplier(d, n, a) for a in range(n)]

    def __call__(self, g):
        gm = self.gm
        d, n = gm.dim, gm.group_dim
        out = SuperPolynomial.zero(d, n)
        for i in range(d):
            dg = g.diff_x(i)
            if dg.is_zero():
                continue
            for a in range(n):
                out = out + self._cd[a][i] * dg
        for a in range(n):
            dg = g.diff_odd(a)
            if dg.is_zero():
                continue
            for b in range(n):
                for c in range(n):
                    fabc = gm.structure_constants[a][b][c]
                    if fabc == 0:
                        continue
                    half = Fraction(fabc, 2) if isinstance(fabc, int) \
                        else fabc / 2
                    out = out - (self._cc[b][c] * dg).scale(half)
        for a in range(n):
            dg = g.diff_odd(n + a)
            if not dg.is_zero():
                out = out + self._lam[a] * dg
        return out


def brst_apply(gm, g):
    """One application of the BRST derivation to a superfunction."""
    return BRSTOperator(gm)(g)


def gauge_fixed_superfunction(gm):
    """(f_FP, witness): f_FP = f + Q(witness), witness = sum phi^a cbar_a.

    Expanding Q gives f_FP = f + sum_ab c^a L_a^b cbar_b + sum_a
    lambda_a phi^a, the multiplier form of the gauge-fixed phase with
    the ghost bilinear normalized as in the diagram engine.
    """
    d, n = gm.dim, gm.group_dim
    witness = SuperPolynomial.zero(d, n)
    for a in range(n):
        witness = witness + SuperPolynomial.from_even(gm.constraint[a], n) \
            * SuperPolynomial.antighost(d, n, a)
    f_fp = SuperPolynomial.from_even(gm.phase, n) + brst_apply(gm, witness)
    return f_fp, witness


def _monomials(dim, group_dim, degree_cap):
    def expos(k, total):
        if k == 0:
            yield ()
            return
        for head in range(total + 1):
            for rest in expos(k - 1, total - head):
                yield (head,) + rest

    from itertools import combinations
    n_odd = 2 * group_dim
    for s in range(min(n_odd, degree_cap) + 1):
        for odd in combinations(range(n_odd), s):
            for xe in expos(dim, degree_cap - s):
                left = degree_cap - s - sum(xe)
                for le in expos(group_dim, left):
                    yield (xe, le, odd)


def brst_nilpotency_residual(gm, degree_cap=4):
    """Max coefficient of Q(Q(monomial)) over all monomials under the cap.

    Exactly zero when closure holds; perturbed structure constants that
    break the Jacobi identity leave a nonzero residue here.
    """
    q = BRSTOperator(gm)
    worst = 0
    for key in _monomials(gm.dim, gm.group_dim, degree_cap):
        mono = SuperPolynomial(gm.dim, gm.group_dim, {key: 1})
        r = q(q(mono)).max_abs_coeff()
        if r > worst:
            worst = r
    return worst


def q_divergence(gm):
    """Divergence of Q against the flat Berezin-Lebesgue measure.

    div Q = -sum_a (sum_i dD_a^i/dx^i) c^a + sum_{a,c} f^a_{ac} c^c;
    the first piece is the divergence of the group action on x, the
    second the adjoint trace (zero for unimodular algebras).  A zero
    divergence makes integrals of Q-exact functions vanish, which is
    what lets the gauge-fixed and reduced integrals agree.
    """
    d, n = gm.dim, gm.group_dim
    out = SuperPolynomial.zero(d, n)
    for a in range(n):
        divx = PolynomialPhase.zero(d)
        for i in range(d):
            divx = divx + gm.generators[a][i].diff(i)
        if divx.terms:
            out = out - SuperPolynomial.ghost(d, n, a) \
                * SuperPolynomial.from_even(divx, n)
    for a in range(n):
        for c in range(n):
            fac = gm.structure_constants[a][a][c]
            if fac != 0:
                out = out + SuperPolynomial.ghost(d, n, c).scale(fac)
    return out
