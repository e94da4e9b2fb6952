"""Model files: one structured text document per integral.

TOML is the native format and JSON is accepted interchangeably; every
model carries a `kind` selecting the pipeline and the sections the
schema allows for it.  Coefficients written as strings parse as exact
rationals, plain numbers stay floats, and a model whose data is all
rational is eligible for --exact runs.  Validation failures raise
InputError carrying the offending field path.
"""

import hashlib
import json
import math
import re

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InputError
from .models import PolynomialPhase, FourierPhase1D
from .gauge import GaugeModel
from .qm import Potential1D, KernelGrid

KINDS = ("bosonic", "fermionic", "super", "charged", "gauge", "qm")

# sections each kind accepts beyond the common ones
_COMMON_KEYS = {"kind", "order", "oracle", "title"}
_KIND_KEYS = {
    "bosonic": {"phase", "seeds", "observable"},
    "fermionic": {"n", "bilinear", "couplings"},
    "super": {"phase", "m", "fermi_form", "point"},
    "charged": {"phase", "k", "fermi_form", "point"},
    "gauge": {"dim", "group_dim", "phase", "generators",
              "structure_constants", "constraint", "group_volume",
              "point", "linear_gauge", "alt_gauge"},
    "qm": {"potential", "endpoints", "grid", "semigroup"},
}

_PI_RE = re.compile(r"^\s*([0-9./]*)\s*\*?\s*pi\s*$")


def _fail(where, msg):
    raise InputError("%s: %s" % (where, msg))


def _scalar(x, where):
    """int stays int, float stays float, strings parse as Fraction."""
    if isinstance(x, bool):
        _fail(where, "booleans are not numbers")
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError):
            _fail(where, "cannot parse %r as a rational" % x)
    _fail(where, "expected a number or rational string, got %r" % type(x).__name__)


def _volume(x, where):
    """Group volumes additionally accept 'pi' and 'r*pi' strings."""
    if isinstance(x, str):
        m = _PI_RE.match(x)
        if m:
            r = Fraction(m.group(1)) if m.group(1) else Fraction(1)
            return float(r) * math.pi
    v = _scalar(x, where)
    if float(v) <= 0:
        _fail(where, "group volume must be positive")
    return float(v)


def _table(obj, where):
    if not isinstance(obj, dict):
        _fail(where, "expected a table")
    return obj


def _array(obj, where, length=None):
    if not isinstance(obj, list):
        _fail(where, "expected an array")
    if length is not None and len(obj) != length:
        _fail(where, "expected %d entries, got %d" % (length, len(obj)))
    return obj


def _int_in(obj, where, lo=None, hi=None):
    if isinstance(obj, bool) or not isinstance(obj, int):
        _fail(where, "expected an integer")
    if lo is not None and obj < lo:
        _fail(where, "must be >= %d" % lo)
    if hi is not None and obj > hi:
        _fail(where, "must be <= %d" % hi)
    return obj


def _float_of(obj, where):
    v = _scalar(obj, where)
    return float(v)


def _poly(dim, terms, where):
    """[[exponents, coeff], ...] -> PolynomialPhase."""
    out = {}
    for i, item in enumerate(_array(terms, where)):
        w = "%s[%d]" % (where, i)
        pair = _array(item, w, 2)
        exps = _array(pair[0], w + ".exponents", dim)
        key = tuple(_int_in(e, w + ".exponents", lo=0) for e in exps)
        out[key] = out.get(key, 0) + _scalar(pair[1], w + ".coeff")
    return PolynomialPhase(dim, out)


def _phase(tbl, where):
    tbl = _table(tbl, where)
    if tbl.get("fourier"):
        cos_t = {}
        for i, item in enumerate(_array(tbl.get("cos_terms", []),
                                        where + ".cos_terms")):
            pair = _array(item, "%s.cos_terms[%d]" % (where, i), 2)
            cos_t[_int_in(pair[0], where + ".cos_terms", lo=1)] = \
                _float_of(pair[1], where + ".cos_terms")
        sin_t = {}
        for i, item in enumerate(_array(tbl.get("sin_terms", []),
                                        where + ".sin_terms")):
            pair = _array(item, "%s.sin_terms[%d]" % (where, i), 2)
            sin_t[_int_in(pair[0], where + ".sin_terms", lo=1)] = \
                _float_of(pair[1], where + ".sin_terms")
        const = _float_of(tbl.get("constant", 0.0), where + ".constant")
        return FourierPhase1D(cos_terms=cos_t, sin_terms=sin_t, constant=const)
    dim = _int_in(tbl.get("dim", 0), where + ".dim", lo=1)
    if "terms" not in tbl:
        _fail(where, "missing terms")
    return _poly(dim, tbl["terms"], where + ".terms")


def _point(obj, where, dim):
    vals = [_scalar(x, "%s[%d]" % (where, i))
            for i, x in enumerate(_array(obj, where, dim))]
    return vals


def _skew_tensor(n, rank, entries, where):
    """Strictly increasing index tuples fan out antisymmetrically."""
    from itertools import permutations
    arr = np.zeros((n,) * rank, dtype=object)
    for i, item in enumerate(_array(entries, where)):
        w = "%s[%d]" % (where, i)
        pair = _array(item, w, 2)
        idx = tuple(_int_in(k, w + ".indices", lo=0, hi=n - 1)
                    for k in _array(pair[0], w + ".indices", rank))
        if any(a >= b for a, b in zip(idx, idx[1:])):
            _fail(w, "indices must be strictly increasing")
        c = _scalar(pair[1], w + ".coeff")
        for perm in permutations(range(rank)):
            sign = 1
            for a in range(rank):
                for b in range(a + 1, rank):
                    if perm[a] > perm[b]:
                        sign = -sign
            arr[tuple(idx[p] for p in perm)] += sign * c
    return arr


def parse_hbar_grid(spec, where="--hbar-grid"):
    """'a:b:k' -> geometric grid with k points from a up to b."""
    if isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) != 3:
            _fail(where, "expected a:b:k, got %r" % spec)
        try:
            a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            _fail(where, "expected a:b:k with numeric fields, got %r" % spec)
    else:
        parts = _array(spec, where, 3)
        a, b = _float_of(parts[0], where), _float_of(parts[1], where)
        k = _int_in(parts[2], where, lo=2)
    if not 0 < a < b:
        _fail(where, "need 0 < a < b")
    if k < 2:
        _fail(where, "need at least two grid points")
    return np.geomspace(a, b, k)


@dataclass
class ModelFile:
    """Parsed, schema-checked model ready to hand to a pipeline."""

    kind: str
    order: int
    path: str
    sha256: str
    raw: dict
    title: str = ""
    oracle: dict = field(default_factory=dict)
    # bosonic
    phase: object = None
    seeds: list = None
    observable: object = None
    # fermionic
    bilinear: object = None
    couplings: dict = None
    # super / charged
    fermi_form: list = None
    point: list = None
    # gauge
    gauge: GaugeModel = None
    linear_gauge: list = None
    alt_gauge: list = None
    # qm
    potential: Potential1D = None
    endpoints: dict = None
    grid: KernelGrid = None
    semigroup: dict = None

    def hbar_grid(self, override=None):
        if override is not None:
            return parse_hbar_grid(override)
        return parse_hbar_grid(self.oracle["hbar_grid"], "oracle.hbar_grid")


_ORACLE_DEFAULTS = {
    "bosonic": {"hbar_grid": "0.01:0.1:12", "tolerance": 1e-4,
                "rtol": 1e-11, "window": [2.0, 3.5],
                "fit_grid": "5e-4:4e-3:12", "fit_rtol": 1e-12},
    "fermionic": {"hbar_grid": "0.05:0.5:8", "tolerance": 1e-12},
    "super": {"hbar_grid": "0.02:0.2:10", "tolerance": 1e-3,
              "window": [2.0, 4.0], "rtol": 1e-10,
              "fit_grid": "5e-4:4e-3:12", "fit_rtol": 1e-12},
    "charged": {"hbar_grid": "0.02:0.2:10", "tolerance": 1e-3,
                "window": [2.0, 4.0], "rtol": 1e-10,
                "fit_grid": "5e-4:4e-3:12", "fit_rtol": 1e-12},
    "gauge": {"hbar_grid": "0.01:0.1:8", "fit_grid": "5e-4:1.4e-3:10",
              "tolerance": 1e-4, "window": [0.35, 0.75],
              "rtol": 1e-11, "fit_rtol": 1e-12},
    "qm": {"hbar_grid": "0.02:0.2:8", "tolerance": 1e-4},
}


def _oracle_section(tbl, kind, where):
    out = dict(_ORACLE_DEFAULTS[kind])
    tbl = _table(tbl, where) if tbl is not None else {}
    for key, val in tbl.items():
        if key not in out:
            _fail("%s.%s" % (where, key), "unknown oracle setting")
        if key in ("hbar_grid", "fit_grid"):
            parse_hbar_grid(val, "%s.%s" % (where, key))
            out[key] = val
        elif key == "window":
            w = _array(val, "%s.window" % where, 2)
            out[key] = [_float_of(w[0], where), _float_of(w[1], where)]
            if not 0 < out[key][0] < out[key][1]:
                _fail("%s.window" % where, "need 0 < inner < outer")
        else:
            out[key] = _float_of(val, "%s.%s" % (where, key))
    return out


def _fermi_matrix(tbl, count, dim, where, skew):
    """Entry list [[i, j, terms], ...] -> matrix of polynomials."""
    tbl = _table(tbl, where)
    entries = _array(tbl.get("entries"), where + ".entries")
    zero = PolynomialPhase.zero(dim)
    mat = [[zero for _ in range(count)] for _ in range(count)]
    seen = set()
    for idx, item in enumerate(entries):
        w = "%s.entries[%d]" % (where, idx)
        trip = _array(item, w, 3)
        i = _int_in(trip[0], w + ".row", lo=0, hi=count - 1)
        j = _int_in(trip[1], w + ".col", lo=0, hi=count - 1)
        if (i, j) in seen:
            _fail(w, "duplicate entry (%d, %d)" % (i, j))
        seen.add((i, j))
        p = _poly(dim, trip[2], w + ".terms")
        if skew:
            if i >= j:
                _fail(w, "skew entries are given above the diagonal (row < col)")
            mat[i][j] = p
            mat[j][i] = PolynomialPhase.zero(dim) - p
        else:
            mat[i][j] = p
    return mat


def _load_bosonic(doc, mf):
    if "phase" not in doc:
        _fail("phase", "bosonic model needs a phase")
    mf.phase = _phase(doc["phase"], "phase")
    dim = mf.phase.dim
    seeds = _table(doc.get("seeds", {"points": [[0.0] * dim]}), "seeds")
    mf.seeds = [np.array([_float_of(x, "seeds.points[%d]" % i)
                          for x in _array(p, "seeds.points[%d]" % i, dim)])
                for i, p in enumerate(_array(seeds.get("points"),
                                             "seeds.points"))]
    if "observable" in doc:
        obs = _table(doc["observable"], "observable")
        mf.observable = _poly(dim, obs.get("terms"), "observable.terms")


def _load_fermionic(doc, mf):
    n = _int_in(doc.get("n", 0), "n", lo=2)
    if n % 2:
        _fail("n", "fermion count must be even")
    bil = _table(doc.get("bilinear"), "bilinear") if "bilinear" in doc \
        else _fail("bilinear", "fermionic model needs a bilinear section")
    rows = _array(bil.get("matrix"), "bilinear.matrix", n)
    mat = [[_scalar(x, "bilinear.matrix[%d][%d]" % (i, j))
            for j, x in enumerate(_array(row, "bilinear.matrix[%d]" % i, n))]
           for i, row in enumerate(rows)]
    for i in range(n):
        for j in range(n):
            if mat[i][j] != -mat[j][i]:
                _fail("bilinear.matrix", "not skew at (%d, %d)" % (i, j))
    mf.bilinear = mat
    mf.couplings = {}
    for idx, tbl in enumerate(_array(doc.get("couplings", []), "couplings")):
        w = "couplings[%d]" % idx
        tbl = _table(tbl, w)
        rank = _int_in(tbl.get("rank", 0), w + ".rank", lo=4)
        if rank % 2:
            _fail(w + ".rank", "coupling rank must be even")
        if rank in mf.couplings:
            _fail(w + ".rank", "duplicate rank %d" % rank)
        mf.couplings[rank] = _skew_tensor(n, rank, tbl.get("entries"),
                                          w + ".entries")


def _load_super(doc, mf, count_key, skew):
    if "phase" not in doc:
        _fail("phase", "model needs a bosonic phase")
    mf.phase = _phase(doc["phase"], "phase")
    if not isinstance(mf.phase, PolynomialPhase):
        _fail("phase", "mixed models need a polynomial phase")
    dim = mf.phase.dim
    count = _int_in(doc.get(count_key, 0), count_key, lo=1)
    if skew and count % 2:
        _fail(count_key, "neutral fermion count must be even")
    if "fermi_form" not in doc:
        _fail("fermi_form", "model needs a fermionic form")
    mf.fermi_form = _fermi_matrix(doc["fermi_form"], count, dim,
                                  "fermi_form", skew)
    mf.point = _point(doc.get("point", [0] * dim), "point", dim)


def _load_gauge(doc, mf):
    dim = _int_in(doc.get("dim", 0), "dim", lo=1)
    group_dim = _int_in(doc.get("group_dim", 0), "group_dim", lo=1)
    if "phase" not in doc:
        _fail("phase", "gauge model needs a phase")
    phase = _phase(doc["phase"], "phase")
    if not isinstance(phase, PolynomialPhase) or phase.dim != dim:
        _fail("phase", "gauge phase must be polynomial in dim %d" % dim)
    gens = []
    for a, tbl in enumerate(_array(doc.get("generators"), "generators",
                                   group_dim)):
        w = "generators[%d]" % a
        comps = _array(_table(tbl, w).get("components"), w + ".components",
                       dim)
        gens.append([_poly(dim, c, "%s.components[%d]" % (w, i))
                     for i, c in enumerate(comps)])
    sc = None
    if "structure_constants" in doc:
        sc = [[[0] * group_dim for _ in range(group_dim)]
              for _ in range(group_dim)]
        entries = _table(doc["structure_constants"],
                         "structure_constants").get("entries", [])
        for i, item in enumerate(_array(entries,
                                        "structure_constants.entries")):
            w = "structure_constants.entries[%d]" % i
            quad = _array(item, w, 4)
            c = _int_in(quad[0], w, lo=0, hi=group_dim - 1)
            a = _int_in(quad[1], w, lo=0, hi=group_dim - 1)
            b = _int_in(quad[2], w, lo=0, hi=group_dim - 1)
            sc[c][a][b] = _scalar(quad[3], w + ".coeff")
    cons = [_poly(dim, p, "constraint.polys[%d]" % i)
            for i, p in enumerate(_array(_table(doc.get("constraint", {}),
                                                "constraint").get("polys"),
                                         "constraint.polys", group_dim))]
    vol = _volume(doc.get("group_volume", 1.0), "group_volume")
    mf.gauge = GaugeModel(dim=dim, group_dim=group_dim, generators=gens,
                          structure_constants=sc, phase=phase,
                          constraint=cons, group_volume=vol)
    mf.point = _point(doc.get("point"), "point", dim)
    for key in ("linear_gauge", "alt_gauge"):
        if key in doc:
            rows = _array(_table(doc[key], key).get("rows"), key + ".rows",
                          group_dim)
            parsed = [[_scalar(x, "%s.rows[%d]" % (key, i))
                       for x in _array(r, "%s.rows[%d]" % (key, i), dim)]
                      for i, r in enumerate(rows)]
            setattr(mf, key, parsed)


def _load_qm(doc, mf):
    pot = _table(doc.get("potential", {}), "potential")
    terms = {}
    for i, item in enumerate(_array(pot.get("terms", []), "potential.terms")):
        w = "potential.terms[%d]" % i
        pair = _array(item, w, 2)
        power = _int_in(pair[0], w + ".power", lo=0)
        terms[(power,)] = terms.get((power,), 0) + _scalar(pair[1], w)
    mass = _float_of(pot.get("mass", 1.0), "potential.mass")
    mf.potential = Potential1D(PolynomialPhase(1, terms), mass=mass)
    ep = _table(doc.get("endpoints", {}), "endpoints")
    mf.endpoints = {
        "q1": _float_of(ep.get("q1", 0.0), "endpoints.q1"),
        "q2": _float_of(ep.get("q2", 0.0), "endpoints.q2"),
        "t": _float_of(ep.get("t", 1.0), "endpoints.t"),
        "p0_seeds": [_float_of(x, "endpoints.p0_seeds")
                     for x in _array(ep.get("p0_seeds", []),
                                     "endpoints.p0_seeds")] or None,
    }
    if mf.endpoints["t"] <= 0:
        _fail("endpoints.t", "propagation time must be positive")
    if "grid" in doc:
        g = _table(doc["grid"], "grid")
        kwargs = {}
        for key, cast in (("q_min", float), ("q_max", float), ("n_x", int),
                          ("n_t", int), ("sigma0", float),
                          ("reflect_tol", float)):
            if key in g:
                kwargs[key] = cast(_scalar(g[key], "grid.%s" % key))
        if "q_min" not in kwargs or "q_max" not in kwargs:
            _fail("grid", "needs q_min and q_max")
        mf.grid = KernelGrid(**kwargs)
    if "semigroup" in doc:
        s = _table(doc["semigroup"], "semigroup")
        mf.semigroup = {
            "q1": _float_of(s.get("q1", mf.endpoints["q1"]), "semigroup.q1"),
            "q3": _float_of(s.get("q3", mf.endpoints["q2"]), "semigroup.q3"),
            "s": _float_of(s.get("s", mf.endpoints["t"] / 2), "semigroup.s"),
            "t": _float_of(s.get("t", mf.endpoints["t"]), "semigroup.t"),
        }
        if not 0 < mf.semigroup["s"]:
            _fail("semigroup.s", "first leg must have positive duration")


_LOADERS = {
    "bosonic": _load_bosonic,
    "fermionic": _load_fermionic,
    "super": lambda doc, mf: _load_super(doc, mf, "m", skew=True),
    "charged": lambda doc, mf: _load_super(doc, mf, "k", skew=False),
    "gauge": _load_gauge,
    "qm": _load_qm,
}


def load_model_file(path):
    """Parse and validate a model file; InputError on any schema problem."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError("cannot read %s: %s" % (path, exc))
    if str(path).endswith(".json"):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise InputError("%s: invalid JSON: %s" % (path, exc))
    else:
        try:
            doc = tomllib.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
            raise InputError("%s: invalid TOML: %s" % (path, exc))
    if not isinstance(doc, dict):
        raise InputError("%s: top level must be a table" % path)
    kind = doc.get("kind")
    if kind not in KINDS:
        _fail("kind", "expected one of %s, got %r" % ("|".join(KINDS), kind))
    allowed = _COMMON_KEYS | _KIND_KEYS[kind]
    for key in doc:
        if key not in allowed:
            _fail(key, "unknown field for kind %r" % kind)
    mf = ModelFile(kind=kind,
                   order=_int_in(doc.get("order", 1), "order", lo=0, hi=6),
                   path=str(path),
                   sha256=hashlib.sha256(data).hexdigest(),
                   raw=doc,
                   title=str(doc.get("title", "")))
    mf.oracle = _oracle_section(doc.get("oracle"), kind, "oracle")
    _LOADERS[kind](doc, mf)
    return mf
