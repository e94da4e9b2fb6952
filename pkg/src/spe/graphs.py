"""Half-edge multigraphs with exact symmetry factors.

A diagram is a multigraph whose vertices carry typed slots (half-edges):
bosonic slots, neutral fermionic slots, and oriented fermionic out/in
slots.  Edges pair compatible slots; loops and parallel edges are allowed.

Graphs are stored canonically.  The automorphism order is the size of the
stabiliser of the half-edge pairing inside the group generated by vertex
permutations and per-vertex slot permutations.  For a multiplicity table
this factorises as

    |Aut| = (vertex-level automorphisms)
            x prod_{parallel classes} mult!
            x prod_{unoriented loop classes} 2^l l!
            x prod_{oriented loop classes} l!

which is what `automorphism_order` returns.  The identity
N(Gamma) * |Aut(Gamma)| = prod_i n_i! (i!)^{n_i}, with N(Gamma) the number
of perfect matchings of labelled half-edges producing Gamma, is exercised
exhaustively in the tests rather than assumed.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement

from .errors import LimitError, OddCountError, ShapeError

EDGE_KINDS = ("bos", "nf", "cf")
_KIND_ORDER = {"int": 0, "obs": 1, "nferm": 2, "cferm": 3}

MATCHING_LIMIT = 16
ORDER_LIMIT = 4


# ---------------------------------------------------------------------------
# perfect matchings

@dataclass(frozen=True)
class Matching:
    """A perfect matching of {0..n-1} into ordered pairs, with its sign.

    Pairs are sorted with a < b inside a pair and by first element across
    pairs.  The sign is the parity of the permutation (a1 b1 a2 b2 ...),
    the convention under which Pf(B) = sum_m sign(m) prod B[a][b].
    """

    pairs: tuple
    sign: int

    @property
    def n(self):
        return 2 * len(self.pairs)


def _permutation_sign(seq):
    """Sign of the permutation given as a sequence of distinct integers."""
    inv = 0
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                inv += 1
    return -1 if inv % 2 else 1


def matching_sign(pairs):
    """Sign of a pairing of distinct labels, Pfaffian convention."""
    norm = sorted((min(a, b), max(a, b)) for a, b in pairs)
    flat = [x for p in norm for x in p]
    ranks = {v: r for r, v in enumerate(sorted(flat))}
    return _permutation_sign([ranks[x] for x in flat])


def perfect_matchings(n, limit=MATCHING_LIMIT):
    """Yield all (n-1)!! perfect matchings of {0..n-1} in lexicographic order.

    Raises OddCountError for odd n and LimitError for n > limit (the count
    grows like (n-1)!!; 16 half-edges is already 2 027 025 matchings).
    """
    if n % 2:
        raise OddCountError("perfect matchings need an even count, got %d" % n)
    if n > limit:
        raise LimitError("refusing matchings of %d > %d half-edges" % (n, limit))

    def rec(unused, acc):
        if not unused:
            yield Matching(tuple(acc), matching_sign(acc))
            return
        first = unused[0]
        rest = unused[1:]
        for k, second in enumerate(rest):
            acc.append((first, second))
            yield from rec(rest[:k] + rest[k + 1:], acc)
            acc.pop()

    yield from rec(tuple(range(n)), [])


# ---------------------------------------------------------------------------
# vertices and graphs

@dataclass(frozen=True)
class VertexSpec:
    """Slot counts of one vertex: bosonic, neutral-fermionic, out/in."""

    kind: str
    b: int = 0
    f: int = 0
    fo: int = 0
    fi: int = 0

    @property
    def valency(self):
        return self.b + self.f + self.fo + self.fi

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.b, self.f, self.fo, self.fi)


def interaction(valency):
    return VertexSpec("int", b=valency)


def observable_vertex(valency):
    return VertexSpec("obs", b=valency)


def neutral_fermi_vertex(b, f):
    return VertexSpec("nferm", b=b, f=f)


def charged_fermi_vertex(b):
    return VertexSpec("cferm", b=b, fo=1, fi=1)


def _degree_tables(verts, bos, nf, cf):
    nv = len(verts)
    db = [0] * nv
    df = [0] * nv
    do = [0] * nv
    di = [0] * nv
    for (u, v), m in bos.items():
        if u == v:
            db[u] += 2 * m
        else:
            db[u] += m
            db[v] += m
    for (u, v), m in nf.items():
        if u == v:
            df[u] += 2 * m
        else:
            df[u] += m
            df[v] += m
    for (u, v), m in cf.items():
        do[u] += m
        di[v] += m
    return db, df, do, di


def _refine_classes(verts, bos, nf, cf):
    """Partition vertices into classes stable under neighbourhood signatures."""
    nv = len(verts)
    cls = {}
    labels = [v.sort_key() for v in verts]
    while True:
        order = sorted(range(nv), key=lambda i: labels[i])
        cls = {}
        next_id = 0
        prev = None
        for i in order:
            if labels[i] != prev:
                next_id += 1
                prev = labels[i]
            cls[i] = next_id - 1
        def neighbours(table, i):
            out = []
            for (u, w), m in table.items():
                if u == i and w != i:
                    out.append((cls[w], m))
                elif w == i and u != i:
                    out.append((cls[u], m))
            return tuple(sorted(out))

        sig = []
        for i in range(nv):
            out_cf = tuple(sorted((cls[w], m) for (u, w), m in cf.items()
                                  if u == i and w != i))
            in_cf = tuple(sorted((cls[u], m) for (u, w), m in cf.items()
                                 if w == i and u != i))
            sig.append((cls[i],
                        bos.get((i, i), 0), nf.get((i, i), 0), cf.get((i, i), 0),
                        neighbours(bos, i), neighbours(nf, i),
                        out_cf, in_cf))
        if sig == labels:
            break
        labels = sig
    nclasses = max(cls.values()) + 1 if nv else 0
    groups = [[] for _ in range(nclasses)]
    for i in range(nv):
        groups[cls[i]].append(i)
    return groups


def _canonical_order(verts, bos, nf, cf):
    """Minimal vertex ordering and the count of orderings achieving it.

    Orderings respect refinement classes (blocks of equal vertices); the
    encoding grows column by column (edges from each newly placed vertex to
    the already placed prefix), pruned lexicographically.  The number of
    minimal orderings equals the vertex-level automorphism count.
    """
    groups = _refine_classes(verts, bos, nf, cf)
    nv = len(verts)
    blocks = []
    for g in groups:
        blocks.extend([g] * len(g))

    def column(v, placed, pos_of):
        code = [bos.get((v, v), 0), nf.get((v, v), 0), cf.get((v, v), 0)]
        for w in placed:
            e = (min(v, w), max(v, w))
            code.append(bos.get(e, 0))
            code.append(nf.get(e, 0))
            code.append(cf.get((v, w), 0))
            code.append(cf.get((w, v), 0))
        return tuple(code)

    best = {"code": None, "count": 0, "perm": None}

    def search(placed, used, codes):
        pos = len(placed)
        if pos == nv:
            if best["code"] is None or codes < best["code"]:
                best.update(code=list(codes), count=1, perm=list(placed))
            elif codes == best["code"]:
                best["count"] += 1
            return
        for v in blocks[pos]:
            if v in used:
                continue
            col = column(v, placed, None)
            new_codes = codes + [col]
            if best["code"] is not None:
                prefix = best["code"][:pos + 1]
                if new_codes > prefix:
                    continue
            placed.append(v)
            used.add(v)
            search(placed, used, new_codes)
            placed.pop()
            used.remove(v)

    search([], set(), [])
    return best["perm"], best["count"]


def _relabel(table, perm_inv, directed=False):
    out = {}
    for (u, v), m in table.items():
        a, b = perm_inv[u], perm_inv[v]
        if not directed and a > b:
            a, b = b, a
        out[(a, b)] = out.get((a, b), 0) + m
    return out


class FeynmanGraph:
    """A canonical multigraph with typed vertices and edges.

    Attributes:
        verts: tuple of VertexSpec in canonical order.
        bos, nf: tuples of ((u, v), mult) with u <= v; u == v means loops.
        cf: tuple of ((tail, head), mult) for oriented edges.
        aut: automorphism order (half-edge stabiliser size).
    """

    __slots__ = ("verts", "bos", "nf", "cf", "aut", "_key", "_hash")

    def __init__(self, verts, bos, nf, cf, aut):
        self.verts = verts
        self.bos = bos
        self.nf = nf
        self.cf = cf
        self.aut = aut
        self._key = (verts, bos, nf, cf)
        self._hash = hash(self._key)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return isinstance(other, FeynmanGraph) and self._key == other._key

    def __repr__(self):
        return "FeynmanGraph(verts=%r, bos=%r, nf=%r, cf=%r, aut=%d)" % (
            self.verts, self.bos, self.nf, self.cf, self.aut)

    def sort_key(self):
        return (len(self.verts), tuple(v.sort_key() for v in self.verts),
                self.bos, self.nf, self.cf)

    @property
    def n_vertices(self):
        return len(self.verts)

    @property
    def n_edges(self):
        return (sum(m for _, m in self.bos) + sum(m for _, m in self.nf)
                + sum(m for _, m in self.cf))

    @property
    def chi(self):
        return self.n_vertices - self.n_edges

    @property
    def order(self):
        """h-order |E| - |V|, the observable vertex not counted in |V|."""
        nonobs = sum(1 for v in self.verts if v.kind != "obs")
        return self.n_edges - nonobs

    def has_observable(self):
        return any(v.kind == "obs" for v in self.verts)

    def is_connected(self):
        if not self.verts:
            return True
        adj = {i: set() for i in range(len(self.verts))}
        for table in (self.bos, self.nf, self.cf):
            for (u, v), _ in table:
                adj[u].add(v)
                adj[v].add(u)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.verts)

    def connected_components(self):
        adj = {i: set() for i in range(len(self.verts))}
        for table in (self.bos, self.nf, self.cf):
            for (u, v), _ in table:
                adj[u].add(v)
                adj[v].add(u)
        seen = set()
        comps = []
        for s in range(len(self.verts)):
            if s in seen:
                continue
            comp = {s}
            stack = [s]
            seen.add(s)
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        comp.add(w)
                        stack.append(w)
            comps.append(sorted(comp))
        return comps

    def half_edge_layout(self):
        """Deterministic half-edge representative of the graph.

        Returns (slots, pairs) where slots is a list of (vertex, slot_type)
        in global order (per vertex: bos, nf, out, in) and pairs is a list
        of (slot_a, slot_b, edge_type); for "cf" edges slot_a is the out
        (c) side and slot_b the in (cbar) side.
        """
        slots = []
        base = []
        free = []
        for i, v in enumerate(self.verts):
            base.append(len(slots))
            cursor = {"bos": len(slots), "nf": len(slots) + v.b,
                      "fo": len(slots) + v.b + v.f,
                      "fi": len(slots) + v.b + v.f + v.fo}
            free.append(cursor)
            slots.extend([(i, "bos")] * v.b)
            slots.extend([(i, "nf")] * v.f)
            slots.extend([(i, "fo")] * v.fo)
            slots.extend([(i, "fi")] * v.fi)

        def take(vertex, stype):
            s = free[vertex][stype]
            free[vertex][stype] += 1
            return s

        pairs = []
        for (u, v), m in self.bos:
            for _ in range(m):
                a = take(u, "bos")
                b = take(v, "bos")
                pairs.append((a, b, "bos"))
        for (u, v), m in self.nf:
            for _ in range(m):
                a = take(u, "nf")
                b = take(v, "nf")
                pairs.append((a, b, "nf"))
        for (u, v), m in self.cf:
            for _ in range(m):
                a = take(u, "fo")
                b = take(v, "fi")
                pairs.append((a, b, "cf"))
        return slots, pairs

    def fermionic_sign(self):
        """Matching sign of the fermionic slots of the canonical layout."""
        slots, pairs = self.half_edge_layout()
        fermi = [s for s, (_, t) in enumerate(slots) if t in ("nf", "fo", "fi")]
        if not fermi:
            return 1
        fpairs = [(a, b) for a, b, t in pairs if t in ("nf", "cf")]
        return matching_sign(fpairs)

    def to_json_dict(self):
        slots, pairs = self.half_edge_layout()
        start = {}
        acc = 0
        for i, v in enumerate(self.verts):
            start[i] = acc
            acc += v.valency
        edges = []
        for a, b, t in pairs:
            va, _ = slots[a]
            vb, _ = slots[b]
            rec = [va, a - start[va], vb, b - start[vb],
                   {"bos": "bosonic", "nf": "fermionic", "cf": "charged"}[t]]
            if t == "cf":
                rec.append(1)
            edges.append(rec)
        return {
            "vertices": [{"valency": v.valency, "kind": v.kind} for v in self.verts],
            "edges": edges,
            "aut": self.aut,
            "chi": self.chi,
        }


def make_graph(verts, bos, nf=None, cf=None):
    """Canonicalise raw multiplicity tables into a FeynmanGraph.

    verts: sequence of VertexSpec; bos/nf: {(u,v): mult} with any key order
    (symmetrised here); cf: {(tail,head): mult}.  Degrees are validated
    against the slot counts.
    """
    verts = tuple(verts)
    bos = {(min(u, v), max(u, v)): m for (u, v), m in (bos or {}).items() if m}
    nf = {(min(u, v), max(u, v)): m for (u, v), m in (nf or {}).items() if m}
    cf = {k: m for k, m in (cf or {}).items() if m}
    db, df, do, di = _degree_tables(verts, bos, nf, cf)
    for i, v in enumerate(verts):
        if (db[i], df[i], do[i], di[i]) != (v.b, v.f, v.fo, v.fi):
            raise ShapeError("edge table does not fill the slots of vertex %d" % i)

    perm, vcount = _canonical_order(verts, bos, nf, cf)
    perm_inv = [0] * len(verts)
    for newpos, old in enumerate(perm):
        perm_inv[old] = newpos
    cverts = tuple(verts[old] for old in perm)
    cbos = _relabel(bos, perm_inv)
    cnf = _relabel(nf, perm_inv)
    ccf = _relabel(cf, perm_inv, directed=True)

    aut = vcount
    for (u, v), m in cbos.items():
        if u == v:
            aut *= 2 ** m * _factorial(m)
        else:
            aut *= _factorial(m)
    for (u, v), m in cnf.items():
        if u == v:
            aut *= 2 ** m * _factorial(m)
        else:
            aut *= _factorial(m)
    for (u, v), m in ccf.items():
        aut *= _factorial(m)

    return FeynmanGraph(cverts,
                        tuple(sorted(cbos.items())),
                        tuple(sorted(cnf.items())),
                        tuple(sorted(ccf.items())),
                        aut)


def _factorial(n):
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def automorphism_order(graph):
    """Order of the stabiliser of the pairing (see module docstring)."""
    return graph.aut


# ---------------------------------------------------------------------------
# matchings -> graphs

def matching_to_graph(profile, matching):
    """Build the graph of a perfect matching of a vertex profile's slots.

    profile: sequence of VertexSpec (or plain ints meaning bosonic
    interaction valencies).  Half-edges are numbered vertex by vertex,
    slots ordered (bos, nf, out, in) inside each vertex.
    """
    verts = tuple(interaction(p) if isinstance(p, int) else p for p in profile)
    owner = []
    stype = []
    for i, v in enumerate(verts):
        owner.extend([i] * v.valency)
        stype.extend(["bos"] * v.b + ["nf"] * v.f + ["fo"] * v.fo + ["fi"] * v.fi)
    if len(owner) != matching.n:
        raise ShapeError("matching covers %d half-edges, profile has %d"
                         % (matching.n, len(owner)))
    bos = {}
    nf = {}
    cf = {}
    for a, b in matching.pairs:
        ta, tb = stype[a], stype[b]
        u, v = owner[a], owner[b]
        if ta == "bos" and tb == "bos":
            key = (min(u, v), max(u, v))
            bos[key] = bos.get(key, 0) + 1
        elif ta == "nf" and tb == "nf":
            key = (min(u, v), max(u, v))
            nf[key] = nf.get(key, 0) + 1
        elif ta == "fo" and tb == "fi":
            cf[(u, v)] = cf.get((u, v), 0) + 1
        elif ta == "fi" and tb == "fo":
            cf[(v, u)] = cf.get((v, u), 0) + 1
        else:
            raise ShapeError("incompatible slot pairing %s-%s" % (ta, tb))
    return make_graph(verts, bos, nf, cf)


def graphs_from_matchings(profile, cache=None):
    """All distinct graphs of a profile with their matching counts.

    Returns {FeynmanGraph: N} where N counts the perfect matchings of the
    labelled half-edges yielding that graph.  A raw-structure cache keeps
    the canonicalisation cost down; matchings with incompatible slot types
    are skipped (they do not correspond to diagrams).
    """
    verts = tuple(interaction(p) if isinstance(p, int) else p for p in profile)
    total = sum(v.valency for v in verts)
    counts = {}
    raw_cache = {} if cache is None else cache
    for m in perfect_matchings(total):
        try:
            raw = _raw_key(verts, m)
        except ShapeError:
            continue
        g = raw_cache.get(raw)
        if g is None:
            g = matching_to_graph(verts, m)
            raw_cache[raw] = g
        counts[g] = counts.get(g, 0) + 1
    return counts


def _raw_key(verts, matching):
    owner = []
    stype = []
    for i, v in enumerate(verts):
        owner.extend([i] * v.valency)
        stype.extend(["bos"] * v.b + ["nf"] * v.f + ["fo"] * v.fo + ["fi"] * v.fi)
    bos = []
    nf = []
    cf = []
    for a, b in matching.pairs:
        ta, tb = stype[a], stype[b]
        u, v = owner[a], owner[b]
        if ta == "bos" and tb == "bos":
            bos.append((min(u, v), max(u, v)))
        elif ta == "nf" and tb == "nf":
            nf.append((min(u, v), max(u, v)))
        elif ta == "fo" and tb == "fi":
            cf.append((u, v))
        elif ta == "fi" and tb == "fo":
            cf.append((v, u))
        else:
            raise ShapeError("incompatible pairing")
    return (verts, tuple(sorted(bos)), tuple(sorted(nf)), tuple(sorted(cf)))


def profile_group_order(profile):
    """prod_i n_i! (i!)^{n_i} over the profile, split by vertex species.

    Equal vertices (same kind and slot counts) may be permuted; each vertex
    contributes slot permutations per slot type.  This is the order of the
    group whose action on matchings has the diagram's |Aut| as stabiliser.
    """
    verts = tuple(interaction(p) if isinstance(p, int) else p for p in profile)
    by_spec = {}
    for v in verts:
        by_spec[v] = by_spec.get(v, 0) + 1
    out = 1
    for spec, n in by_spec.items():
        out *= _factorial(n)
        out *= (_factorial(spec.b) * _factorial(spec.f)
                * _factorial(spec.fo) * _factorial(spec.fi)) ** n
    return out


# ---------------------------------------------------------------------------
# direct enumeration

def _valency_multisets(target, choices):
    """Multisets over `choices` with sum of (weight of choice) == target."""
    choices = sorted(set(choices))
    out = []

    def rec(i, left, acc):
        if left == 0:
            out.append(tuple(acc))
            return
        if i >= len(choices):
            return
        w = choices[i][1] if isinstance(choices[i], tuple) else choices[i]
        rec(i + 1, left, acc)
        if w <= left and w > 0:
            acc.append(choices[i])
            rec(i, left - w, acc)
            acc.pop()

    rec(0, target, [])
    return out


def _symmetric_structures(degrees):
    """Yield {(u,v): mult} (u <= v) multigraph tables with given degrees."""
    nv = len(degrees)
    rem = list(degrees)
    table = {}

    def rec(u):
        if u == nv:
            if all(r == 0 for r in rem):
                yield dict(table)
            return
        # distribute rem[u] into loops at u and edges to v > u
        def place(v):
            if v == nv:
                if rem[u] == 0:
                    yield from rec(u + 1)
                return
            cap = min(rem[u], rem[v])
            for m in range(cap, -1, -1):
                if m:
                    table[(u, v)] = m
                elif (u, v) in table:
                    del table[(u, v)]
                rem[u] -= m
                rem[v] -= m
                if rem[u] <= sum(rem[v + 1:]) or rem[u] == 0:
                    yield from place(v + 1)
                rem[u] += m
                rem[v] += m
            table.pop((u, v), None)

        for loops in range(rem[u] // 2, -1, -1):
            if loops:
                table[(u, u)] = loops
            else:
                table.pop((u, u), None)
            rem[u] -= 2 * loops
            yield from place(u + 1)
            rem[u] += 2 * loops
        table.pop((u, u), None)

    yield from rec(0)


def _permutation_structures(n):
    """Yield {(u,v): 1} tables of all bijections on n oriented-slot vertices."""
    from itertools import permutations
    for perm in permutations(range(n)):
        yield {(u, perm[u]): 1 for u in range(n)}


def enumerate_graphs(order, valencies=None, observable=False,
                     limit_order=ORDER_LIMIT):
    """All bosonic diagrams (connected or not) with |E| - |V_int| == order.

    Interaction vertices have valency >= 3 drawn from `valencies` (default
    3..2*order+2).  With observable=True every graph carries exactly one
    observable vertex of valency 0..2*order.  Duplicate-free, sorted
    deterministically.  Dense low-valency profiles at order 4 are
    combinatorially heavy; the default cap refuses order > 4.
    """
    if not 1 <= order <= limit_order:
        raise LimitError("order %d outside 1..%d" % (order, limit_order))
    if valencies is None:
        valencies = range(3, 2 * order + 3)
    valencies = sorted(set(valencies))
    if any(v < 3 for v in valencies):
        raise ShapeError("interaction valencies must be >= 3")

    found = set()
    obs_range = range(0, 2 * order + 1) if observable else (None,)
    for k in obs_range:
        target = 2 * order - (k or 0)
        if target < 0:
            continue
        weighted = [(v, v - 2) for v in valencies]
        for multiset in _valency_multisets(target, weighted):
            ivals = sorted(v for v, _ in multiset)
            verts = []
            degrees = []
            if observable:
                verts.append(observable_vertex(k))
                degrees.append(k)
            verts.extend(interaction(v) for v in ivals)
            degrees.extend(ivals)
            if sum(degrees) % 2:
                continue
            for table in _symmetric_structures(degrees):
                found.add(make_graph(verts, table))
    return sorted(found, key=lambda g: g.sort_key())


def enumerate_mixed_graphs(order, bos_valencies=(), nf_specs=(), cf_specs=(),
                           limit_order=ORDER_LIMIT):
    """Mixed diagrams with |E| - |V| == order.

    bos_valencies: allowed interaction valencies (>= 3).
    nf_specs: allowed (j, k) neutral-fermion vertex shapes, k >= 2 even,
        j + k >= 3 (the (0, 2) bilinear is the propagator, not a vertex).
    cf_specs: allowed j >= 1 for oriented-fermion vertices with one out and
        one in slot and j bosonic legs.
    """
    if not 1 <= order <= limit_order:
        raise LimitError("order %d outside 1..%d" % (order, limit_order))
    alphabet = []
    for v in sorted(set(bos_valencies)):
        if v < 3:
            raise ShapeError("interaction valencies must be >= 3")
        alphabet.append((("int", v), v - 2))
    for j, k in sorted(set(nf_specs)):
        if k < 2 or k % 2 or (j, k) == (0, 2):
            raise ShapeError("bad neutral fermion vertex shape (%d,%d)" % (j, k))
        alphabet.append((("nferm", j, k), j + k - 2))
    for j in sorted(set(cf_specs)):
        if j < 1:
            raise ShapeError("oriented fermion vertices need j >= 1")
        alphabet.append((("cferm", j), j))

    found = set()
    for multiset in _valency_multisets(2 * order, alphabet):
        specs = sorted(entry for entry, _ in multiset)
        verts = []
        for entry in specs:
            if entry[0] == "int":
                verts.append(interaction(entry[1]))
            elif entry[0] == "nferm":
                verts.append(neutral_fermi_vertex(entry[1], entry[2]))
            else:
                verts.append(charged_fermi_vertex(entry[1]))
        bdeg = [v.b for v in verts]
        fdeg = [v.f for v in verts]
        cfverts = [i for i, v in enumerate(verts) if v.kind == "cferm"]
        if sum(bdeg) % 2 or sum(fdeg) % 2:
            continue
        for btab in _symmetric_structures(bdeg):
            for ftab in _symmetric_structures(fdeg):
                if cfverts:
                    for ptab in _permutation_structures(len(cfverts)):
                        cf = {(cfverts[u], cfverts[v]): m
                              for (u, v), m in ptab.items()}
                        found.add(make_graph(verts, btab, ftab, cf))
                else:
                    found.add(make_graph(verts, btab, ftab, {}))
    return sorted(found, key=lambda g: g.sort_key())
