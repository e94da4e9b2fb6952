"""Assembly of h-expansions from diagrams.

Conventions, fixed once and used everywhere:

* The phase enters as exp(i f(x) / h); vertex weights are MINUS the raw
  Taylor derivative tensors of f at the stationary point (LocalModel
  stores them with the sign applied), observable vertices carry the raw
  derivatives of the observable, ghost vertices carry PLUS the derivative
  of the ghost form and no factor of i anywhere.
* Every edge contributes an inverse-bilinear-form entry: B^{-1} for
  bosonic edges, L^{-1} for neutral fermionic edges; oriented edges
  contribute M^{-1} entries with the position-order sign spelled out in
  `_oriented_edge_matrix`.
* All factors of i are absorbed into the grading: a graph Gamma
  contributes F(Gamma)/|Aut(Gamma)| to the coefficient of (ih)^{-chi},
  chi = |V| - |E| with the observable vertex not counted in |V|.  The
  coefficient lists returned here multiply powers of (ih), and they are
  exact Fractions whenever the model is exact.
* Normalisation prefactors (powers of 2 pi h, |det|^{-1/2}, signature
  phase, Pfaffians) live in Prefactor and never mix with the
  coefficients.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (ModelIncompleteError, ParityError, ShapeError,
                     SingularFermionFormError, SingularMatrixError)
from .exact import exact_det, exact_inv, is_exact_matrix
from .graphs import enumerate_graphs, enumerate_mixed_graphs
from .models import LocalModel, find_stationary_points, localize
from .wick import pfaffian, signature

_ENUM_CACHE = {}


# ---------------------------------------------------------------------------
# prefactors and expansion records

@dataclass
class Prefactor:
    """h-dependent normalisation in front of the coefficient series.

    value(h) = group_volume * measure_factor * (2 pi)^two_pi_power
               * h^hbar_power * abs_det_inv_sqrt * fermionic * extra_phase
               * exp(i pi signature / 4) * exp(i f_at_a / h)
    """

    two_pi_power: Fraction = Fraction(0)
    hbar_power: Fraction = Fraction(0)
    abs_det_inv_sqrt: float = 1.0
    signature: object = None
    fermionic: complex = 1.0
    group_volume: float = 1.0
    measure_factor: float = 1.0
    extra_phase: complex = 1.0
    f_at_a: float = 0.0

    def __call__(self, h):
        out = (self.group_volume * self.measure_factor
               * (2 * np.pi) ** float(self.two_pi_power)
               * h ** float(self.hbar_power)
               * self.abs_det_inv_sqrt
               * complex(self.fermionic) * complex(self.extra_phase)
               * np.exp(1j * self.f_at_a / h))
        if self.signature is not None:
            out = out * np.exp(1j * np.pi * self.signature / 4)
        return complex(out)

    def to_json_dict(self):
        return {
            "two_pi_power": str(self.two_pi_power),
            "hbar_power": str(self.hbar_power),
            "abs_det_inv_sqrt": float(self.abs_det_inv_sqrt),
            "signature": None if self.signature is None else int(self.signature),
            "fermionic": [complex(self.fermionic).real, complex(self.fermionic).imag],
            "group_volume": float(self.group_volume),
            "measure_factor": float(self.measure_factor),
            "extra_phase": [complex(self.extra_phase).real,
                            complex(self.extra_phase).imag],
            "f_at_a": float(self.f_at_a),
        }


@dataclass
class HbarExpansion:
    """Prefactor times sum_k c_k (ih)^k at one stationary point."""

    prefactor: Prefactor
    coefficients: list
    point: object = None
    meta: dict = field(default_factory=dict)

    def series(self, h, n_orders=None):
        terms = self.coefficients if n_orders is None \
            else self.coefficients[:n_orders]
        return sum(complex(c) * (1j * h) ** k for k, c in enumerate(terms))

    def value(self, h, n_orders=None):
        return self.prefactor(h) * self.series(h, n_orders)

    def to_json_dict(self):
        return {
            "point": None if self.point is None else
            [float(x) for x in np.atleast_1d(self.point)],
            "prefactor": self.prefactor.to_json_dict(),
            "coefficients": [[complex(c).real, complex(c).imag]
                             for c in self.coefficients],
            "coefficients_exact": [str(c) for c in self.coefficients]
            if all(isinstance(c, (int, Fraction)) for c in self.coefficients)
            else None,
            "meta": {k: v for k, v in self.meta.items()
                     if isinstance(v, (int, float, str, bool))},
        }


def recompose(expansions, h):
    """Sum of expansion values at a given h (one term per stationary point)."""
    if isinstance(expansions, HbarExpansion):
        expansions = [expansions]
    return sum(e.value(h) for e in expansions)


# ---------------------------------------------------------------------------
# diagram evaluation

def _as_scalar(x):
    if isinstance(x, np.ndarray):
        if x.shape != ():
            raise ShapeError("contraction left free axes %r" % (x.shape,))
        return x.item()
    return x


def _all_zero(t):
    arr = np.asarray(t)
    if arr.dtype == object:
        return all(x == 0 for x in arr.flat)
    return bool(np.all(arr == 0))


def _invert(mat, exact):
    if exact:
        return exact_inv(mat)
    arr = np.asarray(mat)
    try:
        return np.linalg.inv(arr.astype(complex) if np.iscomplexobj(arr)
                             else arr.astype(float))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from None


def _obj_array(rows):
    arr = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
    for i, row in enumerate(rows):
        for j, x in enumerate(row):
            arr[i, j] = x
    return arr


class _Propagators:
    """Edge matrices of one model, inverted once.

    All fermionic contractions come from the one Wick rule
    <Theta_I Theta_J> = -(A^{-1})_{IJ} for the weight exp((1/2)(Theta, A Theta)).
    Neutral phase fermions (A = (i/h) L) give +L^{-1} entries after the
    (ih) absorption; oriented phase fermions (A = (i/h) [[0,M],[-M^T,0]])
    give -(M^{-1})^T on (out, in) axes; ghost pairs (A = [[0,l],[-l^T,0]],
    no i or h anywhere) give +(l^{-1})^T on (out, in) axes.
    """

    def __init__(self, model):
        self.exact = model.exact
        self.bos = None
        self.fermi_inv = None
        self.oriented_sign = 1 if model.fermi_kind == "ghost" else -1
        if model.hessian is not None and model.dim > 0:
            inv = _invert(model.hessian, self.exact)
            self.bos = _obj_array(inv) if self.exact else inv
        if model.fermi_matrix is not None:
            inv = _invert(model.fermi_matrix, self.exact)
            self.fermi_inv = _obj_array(inv) if self.exact else inv

    def edge_matrix(self, a, b, kind):
        """Operand for the edge pairing slot a with slot b (a = out for cf).

        The operand axes are always (min position, max position); oriented
        edges flip sign when the cbar side comes first, which together with
        the pairing sign reproduces the Berezin integral exactly.
        """
        if kind == "bos":
            if self.bos is None:
                raise ModelIncompleteError("model has no bosonic block")
            return self.bos, (a, b) if a < b else (b, a)
        if self.fermi_inv is None:
            raise ModelIncompleteError("model has no fermionic block")
        if kind == "nf":
            return self.fermi_inv, (a, b) if a < b else (b, a)
        # oriented: out slot a (c side), in slot b (cbar side)
        if a < b:
            return self.oriented_sign * self.fermi_inv.T, (a, b)
        return -self.oriented_sign * self.fermi_inv, (b, a)


def _vertex_tensor(model, spec):
    if spec.kind == "int":
        t = model.vertex_tensors.get(spec.b)
    elif spec.kind == "obs":
        t = None if model.observable_tensors is None else \
            model.observable_tensors.get(spec.b)
    elif spec.kind == "nferm":
        t = model.fermi_vertex.get((spec.b, spec.f))
    elif spec.kind == "cferm":
        t = model.fermi_vertex.get(spec.b)
    else:
        raise ShapeError("unknown vertex kind %r" % spec.kind)
    if t is None:
        raise ModelIncompleteError("model lacks the tensor for vertex %r"
                                   % (spec,))
    return np.asarray(t) if not isinstance(t, np.ndarray) else t


def _contract(operands):
    """Contract tensors sharing axis symbols; returns the scalar value.

    operands: list of [array, list_of_symbols]; every symbol appears on
    exactly two operands (or twice on one).  Disconnected components end
    as 0-d arrays and are multiplied at the end.  np.tensordot preserves
    object (Fraction) dtypes, so the exact and float paths are identical.
    """
    ops = [[np.asarray(arr), list(syms)] for arr, syms in operands]

    def find_pair():
        where = {}
        for oi, (_, syms) in enumerate(ops):
            for pos, s in enumerate(syms):
                if s in where:
                    return s, where[s], (oi, pos)
                where[s] = (oi, pos)
        return None

    while True:
        hit = find_pair()
        if hit is None:
            break
        s, (i1, p1), (i2, p2) = hit
        if i1 == i2:
            arr, syms = ops[i1]
            tr = np.tensordot(arr, np.eye(arr.shape[p1]) if arr.dtype != object
                              else _obj_array([[Fraction(int(r == c))
                                                for c in range(arr.shape[p1])]
                                               for r in range(arr.shape[p1])]),
                              axes=([p1, p2], [0, 1]))
            ops[i1] = [tr, [x for k, x in enumerate(syms) if k not in (p1, p2)]]
            continue
        a1, s1 = ops[i1]
        a2, s2 = ops[i2]
        shared = sorted(set(s1) & set(s2), key=s1.index)
        ax1 = [s1.index(s) for s in shared]
        ax2 = [s2.index(s) for s in shared]
        merged = np.tensordot(a1, a2, axes=(ax1, ax2))
        rem = [x for k, x in enumerate(s1) if k not in ax1] + \
              [x for k, x in enumerate(s2) if k not in ax2]
        keep = min(i1, i2)
        drop = max(i1, i2)
        ops[keep] = [np.asarray(merged), rem]
        del ops[drop]

    total = None
    for arr, syms in ops:
        if syms:
            raise ShapeError("unmatched contraction symbols %r" % syms)
        v = _as_scalar(arr)
        total = v if total is None else total * v
    return total if total is not None else 1


def evaluate_diagram(graph, model, props=None):
    """F(Gamma): product of vertex weights and edge entries, contracted,
    times the fermionic pairing sign of the canonical half-edge layout.

    Returns a Fraction for exact models, complex otherwise.  The h-grading
    is NOT applied here; the caller files the value under (ih)^(order).
    """
    if props is None:
        props = _Propagators(model)
    slots, pairs = graph.half_edge_layout()

    operands = []
    cursor = 0
    for vi, spec in enumerate(graph.verts):
        t = _vertex_tensor(model, spec)
        syms = list(range(cursor, cursor + spec.valency))
        if t.ndim != spec.valency:
            raise ShapeError("tensor rank %d does not match valency %d"
                             % (t.ndim, spec.valency))
        operands.append([t, syms])
        cursor += spec.valency
    for a, b, kind in pairs:
        mat, axes = props.edge_matrix(a, b, kind)
        operands.append([mat, list(axes)])

    value = _contract(operands)
    sign = graph.fermionic_sign()
    if sign == -1:
        value = -value
    return value


# ---------------------------------------------------------------------------
# expansion drivers

def _sum_over_graphs(graphs, model, props, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(lambda g: evaluate_diagram(g, model, props),
                                 graphs))
    else:
        vals = [evaluate_diagram(g, model, props) for g in graphs]
    total = None
    for g, v in zip(graphs, vals):
        term = v / g.aut if not isinstance(v, Fraction) else v / Fraction(g.aut)
        total = term if total is None else total + term
    return total


def _zero_like(model):
    return Fraction(0) if model.exact else 0.0


def _one_like(model):
    return Fraction(1) if model.exact else 1.0


def _bos_valencies(model, order):
    vmax = 2 * order + 2
    return [n for n, t in sorted(model.vertex_tensors.items())
            if n <= vmax and not _all_zero(t)]


def _enum(key, builder):
    if key not in _ENUM_CACHE:
        _ENUM_CACHE[key] = builder()
    return _ENUM_CACHE[key]


def _bosonic_prefactor(model, extra_hbar=Fraction(0)):
    n = model.dim
    if model.exact:
        det = exact_det(model.hessian)
        absdet = 1.0 / np.sqrt(abs(float(det)))
        hess_float = [[float(x) for x in row] for row in model.hessian]
    else:
        det = np.linalg.det(np.asarray(model.hessian, dtype=float))
        absdet = 1.0 / np.sqrt(abs(det))
        hess_float = model.hessian
    if abs(float(det)) == 0.0:
        raise SingularMatrixError("Hessian determinant vanishes")
    sig = signature(hess_float)
    return Prefactor(two_pi_power=Fraction(n, 2),
                     hbar_power=Fraction(n, 2) + extra_hbar,
                     abs_det_inv_sqrt=float(absdet),
                     signature=sig,
                     f_at_a=float(model.f_at_a))


def expand_bosonic(model, order, threads=1):
    """Vacuum expansion: prefactor * (1 + sum_{n>=1} c_n (ih)^n)."""
    if model.dim == 0:
        raise ShapeError("bosonic expansion needs bosonic directions")
    props = _Propagators(model)
    pref = _bosonic_prefactor(model)
    coeffs = [_one_like(model)]
    vals = _bos_valencies(model, order)
    for n in range(1, order + 1):
        if vals:
            graphs = _enum(("bos", n, tuple(vals), False),
                           lambda n=n: enumerate_graphs(n, valencies=vals))
        else:
            graphs = []
        total = _sum_over_graphs(graphs, model, props, threads)
        coeffs.append(total if total is not None else _zero_like(model))
    return HbarExpansion(prefactor=pref, coefficients=coeffs,
                         point=model.point,
                         meta={"mode": "bosonic", "order": order})


def expand_with_observable(model, order, threads=1):
    """Expansion of the integral against an observable g.

    c_0 = g(a); higher coefficients sum graphs with exactly one observable
    vertex (valency 0..2n) next to the interaction vertices.  The leading
    coefficient is NOT normalised to 1 here.
    """
    if model.observable_tensors is None:
        raise ModelIncompleteError("model has no observable tensors")
    props = _Propagators(model)
    pref = _bosonic_prefactor(model)
    g0 = model.observable_tensors.get(0)
    g0 = _as_scalar(np.asarray(g0)) if g0 is not None else _zero_like(model)
    coeffs = [g0]
    vals = _bos_valencies(model, order)
    obs_ok = {k for k, t in model.observable_tensors.items() if not _all_zero(t)}
    for n in range(1, order + 1):
        graphs = _enum(("obs", n, tuple(vals), True),
                       lambda n=n: enumerate_graphs(n, valencies=vals or [3],
                                                    observable=True))
        graphs = [g for g in graphs
                  if all(v.kind != "obs" or v.b in obs_ok for v in g.verts)
                  and all(v.kind != "int" or v.b in vals for v in g.verts)]
        total = _sum_over_graphs(graphs, model, props, threads)
        coeffs.append(total if total is not None else _zero_like(model))
    return HbarExpansion(prefactor=pref, coefficients=coeffs,
                         point=model.point,
                         meta={"mode": "observable", "order": order})


def fermionic_model(bilinear, couplings, exact=None):
    """LocalModel for a purely fermionic integral.

    bilinear: skew matrix B of the quadratic part (i/2h)(c, Bc).
    couplings: {k: antisymmetric tensor} of the interaction P entering the
    phase as -(i/h) P(c) with P(c) = sum_k (1/k!) P_{i1..ik} c_{i1}..c_{ik};
    the diagram weight of a P vertex is +P^{(k)} (minus the phase Taylor
    tensor of -P).  Odd or rank-2 couplings are rejected.
    """
    if exact is None:
        exact = is_exact_matrix(bilinear) and all(
            np.asarray(t).dtype == object or
            all(isinstance(x, (int, Fraction)) for x in np.asarray(t).flat)
            for t in couplings.values())
    n = len(bilinear)
    fermi_vertex = {}
    for k, t in couplings.items():
        if k % 2:
            raise ParityError("fermionic coupling of odd rank %d" % k)
        if k < 4:
            raise ParityError("rank-%d coupling belongs to the bilinear part" % k)
        arr = np.asarray(t)
        if arr.shape != (n,) * k:
            raise ShapeError("coupling rank %d has shape %r" % (k, arr.shape))
        fermi_vertex[(0, k)] = arr
    if exact:
        pf = pfaffian(bilinear)
    else:
        pf = pfaffian(np.asarray(bilinear, dtype=float))
    if pf == 0:
        raise SingularFermionFormError("Pf of the fermionic bilinear vanishes")
    return LocalModel(point=None, f_at_a=0.0, hessian=None,
                      vertex_tensors={}, fermi_kind="neutral",
                      fermi_matrix=(bilinear if exact else
                                    np.asarray(bilinear, dtype=float)),
                      fermi_vertex=fermi_vertex, exact=exact), pf


def expand_fermionic(bilinear, couplings, order, threads=1):
    """Expansion of int exp((i/2h)(c,Bc) - (i/h)P(c)) dc.

    Value recomposes as h^{-n/2} Pf(iB) (1 + sum c_k (ih)^k); Pf(iB) is
    stored as the fermionic prefactor (i^{n/2} Pf(B)), and meta carries the
    exact Pf(B) when the input is rational.
    """
    model, pf = fermionic_model(bilinear, couplings)
    n = model.fermi_dim
    props = _Propagators(model)
    specs = sorted((j, k) for (j, k), t in model.fermi_vertex.items()
                   if not _all_zero(t))
    coeffs = [_one_like(model)]
    for m in range(1, order + 1):
        graphs = _enum(("ferm", m, tuple(specs)),
                       lambda m=m: enumerate_mixed_graphs(m, nf_specs=specs))
        total = _sum_over_graphs(graphs, model, props, threads)
        coeffs.append(total if total is not None else _zero_like(model))
    pref = Prefactor(hbar_power=Fraction(-n, 2),
                     fermionic=complex(1j ** (n // 2) * complex(float(pf))))
    exp = HbarExpansion(prefactor=pref, coefficients=coeffs,
                        meta={"mode": "fermionic", "order": order,
                              "n_generators": n})
    exp.meta["pf_exact"] = pf
    return exp


def super_model(phase, fermi_form, point, max_order, exact=None):
    """LocalModel with bosonic and neutral fermionic blocks.

    fermi_form: m x m matrix of PolynomialPhase entries (skew as a matrix
    of polynomials) giving the x-dependent bilinear (1/2)(c, L(x) c) inside
    the phase.  Vertex weights are -d^j L; higher fermionic couplings can
    be added to the returned model by hand.
    """
    base = localize(phase, point, max_order)
    m = len(fermi_form)
    exact = base.exact if exact is None else exact
    pt = base.point
    lmat = [[None] * m for _ in range(m)]
    for i in range(m):
        for j in range(m):
            v = fermi_form[i][j].value(pt)
            lmat[i][j] = v if exact else float(v)
    for i in range(m):
        for j in range(m):
            if (lmat[i][j] != -lmat[j][i]) if exact else \
               abs(lmat[i][j] + lmat[j][i]) > 1e-12:
                raise ShapeError("fermionic form is not skew at the point")
    dim = phase.dim
    fermi_vertex = {}
    for jorder in range(1, 2 * max_order + 1):
        tens = np.empty((dim,) * jorder + (m, m), dtype=object if exact else float)
        nonzero = False
        for a in range(m):
            for b in range(m):
                d = fermi_form[a][b].derivative_tensor(pt, jorder)
                block = -d
                tens[(Ellipsis, a, b)] = block
                if not _all_zero(block):
                    nonzero = True
        if nonzero:
            fermi_vertex[(jorder, 2)] = tens
    base.fermi_kind = "neutral"
    base.fermi_matrix = lmat if exact else np.asarray(lmat, dtype=float)
    base.fermi_vertex = fermi_vertex
    base.exact = exact
    return base


def expand_super(model, order, threads=1):
    """Mixed bosonic/fermionic expansion.

    Value recomposes as (2 pi)^{n/2} h^{(n-m)/2} |det B|^{-1/2} Pf(iL)
    exp(i f(a)/h + i pi sign(B)/4) (1 + sum c_k (ih)^k).
    """
    if model.fermi_kind != "neutral":
        raise ModelIncompleteError("super expansion needs a neutral fermionic block")
    props = _Propagators(model)
    m = model.fermi_dim
    pf = pfaffian(model.fermi_matrix)
    if pf == 0:
        raise SingularFermionFormError("Pf of the fermionic form vanishes")
    pref = _bosonic_prefactor(model, extra_hbar=Fraction(-m, 2))
    pref.fermionic = complex(1j ** (m // 2) * complex(float(pf)))
    vals = _bos_valencies(model, order)
    specs = sorted((j, k) for (j, k), t in model.fermi_vertex.items()
                   if not _all_zero(t))
    coeffs = [_one_like(model)]
    for n in range(1, order + 1):
        graphs = _enum(("super", n, tuple(vals), tuple(specs)),
                       lambda n=n: enumerate_mixed_graphs(
                           n, bos_valencies=vals, nf_specs=specs))
        total = _sum_over_graphs(graphs, model, props, threads)
        coeffs.append(total if total is not None else _zero_like(model))
    exp = HbarExpansion(prefactor=pref, coefficients=coeffs, point=model.point,
                        meta={"mode": "super", "order": order,
                              "n_fermions": m})
    exp.meta["pf_exact"] = pf
    return exp


def charged_model(phase, fermi_form, point, max_order, exact=None,
                  ghost=False):
    """LocalModel with an oriented fermionic block c L(x) cbar.

    fermi_form: k x k matrix of PolynomialPhase entries.  Charged phase
    fermions get vertex weights -d^j L (they sit inside the phase);
    ghost=True stores +d^j l for the gauge-fixing determinant form, whose
    edges and vertices carry no factors of i or h.
    """
    base = localize(phase, point, max_order)
    k = len(fermi_form)
    exact = base.exact if exact is None else exact
    pt = base.point
    lmat = [[fermi_form[i][j].value(pt) if exact else float(fermi_form[i][j].value(pt))
             for j in range(k)] for i in range(k)]
    dim = phase.dim
    sign = 1 if ghost else -1
    fermi_vertex = {}
    for jorder in range(1, 2 * max_order + 1):
        tens = np.empty((dim,) * jorder + (k, k), dtype=object if exact else float)
        nonzero = False
        for a in range(k):
            for b in range(k):
                d = fermi_form[a][b].derivative_tensor(pt, jorder)
                block = d if sign == 1 else -d
                tens[(Ellipsis, a, b)] = block
                if not _all_zero(block):
                    nonzero = True
        if nonzero:
            fermi_vertex[jorder] = tens
    base.fermi_kind = "ghost" if ghost else "charged"
    base.fermi_matrix = lmat if exact else np.asarray(lmat, dtype=float)
    base.fermi_vertex = fermi_vertex
    base.exact = exact
    return base


def expand_charged(model, order, threads=1):
    """Expansion with oriented phase fermions.

    Value recomposes as (2 pi)^{n/2} h^{(n - 2k)/2} ... det(iL) (1 + sum),
    the fermionic prefactor being det(iL(a)) = i^k det L(a) in the
    interleaved orientation c^1 cbar_1 c^2 cbar_2 ...
    """
    if model.fermi_kind not in ("charged", "ghost"):
        raise ModelIncompleteError("charged expansion needs an oriented block")
    props = _Propagators(model)
    k = model.fermi_dim
    det = exact_det(model.fermi_matrix) if model.exact else \
        np.linalg.det(np.asarray(model.fermi_matrix, dtype=float))
    if det == 0:
        raise SingularFermionFormError("det of the oriented form vanishes")
    pref = _bosonic_prefactor(model, extra_hbar=Fraction(-k, 1)
                              if model.fermi_kind == "charged" else Fraction(0))
    if model.fermi_kind == "charged":
        pref.fermionic = complex(1j ** k * complex(float(det)))
    else:
        pref.fermionic = complex(float(det))
    vals = _bos_valencies(model, order)
    specs = sorted(j for j, t in model.fermi_vertex.items() if not _all_zero(t))
    coeffs = [_one_like(model)]
    for n in range(1, order + 1):
        graphs = _enum(("charged", n, tuple(vals), tuple(specs)),
                       lambda n=n: enumerate_mixed_graphs(
                           n, bos_valencies=vals, cf_specs=specs))
        total = _sum_over_graphs(graphs, model, props, threads)
        coeffs.append(total if total is not None else _zero_like(model))
    exp = HbarExpansion(prefactor=pref, coefficients=coeffs, point=model.point,
                        meta={"mode": model.fermi_kind, "order": order,
                              "n_pairs": k})
    exp.meta["det_exact"] = det
    return exp


def full_asymptotics(phase, seeds, order, observable=None, threads=1):
    """Stationary points from seeds, one HbarExpansion per point.

    Returns (expansions, search) where search.failures lists seeds that
    did not converge.  The total integral recomposes as the sum over the
    returned expansions.
    """
    search = find_stationary_points(phase, seeds)
    out = []
    for sp in search.points:
        model = localize(phase, sp.point, order, observable=observable)
        if observable is None:
            out.append(expand_bosonic(model, order, threads=threads))
        else:
            out.append(expand_with_observable(model, order, threads=threads))
    return out, search
