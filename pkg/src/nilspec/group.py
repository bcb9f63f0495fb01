"""Group arithmetic in log coordinates, lattices, and conjugacy.

Group elements of a simply connected nilpotent group are represented by
their logarithm in the structural basis.  Multiplication is the truncated
Campbell-Baker-Hausdorff series, exact for step <= 3:

    log(xy) = X + Y + (1/2)[X,Y] + (1/12)[X,[X,Y]] + (1/12)[Y,[Y,X]]

Conjugation acts on logs by exp(ad A), which for step <= 3 is the exact
three-term series X + [A,X] + (1/2)[A,[A,X]].
"""

from dataclasses import dataclass, field
from fractions import Fraction

from . import linalg as la
from .algebra import LieAlgebra, StructureError, derived_series

HALF = Fraction(1, 2)
TWELFTH = Fraction(1, 12)


class GroupElement:
    """A group point in log coordinates; immutable and hashable."""

    __slots__ = ("algebra", "log")

    def __init__(self, algebra, log):
        self.algebra = algebra
        self.log = tuple(la.frac(x) for x in log)
        if len(self.log) != algebra.dim:
            raise StructureError("log dimension mismatch")

    def __eq__(self, other):
        return (isinstance(other, GroupElement)
                and self.algebra is other.algebra and self.log == other.log)

    def __hash__(self):
        return hash(self.log)

    def is_identity(self):
        return all(x == 0 for x in self.log)

    def __repr__(self):
        labels = self.algebra.labels
        terms = [f"{x}*{labels[i]}" for i, x in enumerate(self.log) if x != 0]
        return "exp(" + (" + ".join(terms) if terms else "0") + ")"


def identity(L):
    return GroupElement(L, la.zeros(L.dim))


def exp_vec(L, v):
    return GroupElement(L, v)


def _check_step(L):
    if L.declared_step > 3:
        raise StructureError("truncated group law is exact only for step <= 3")


def _bch_log(L, X, Y):
    b = L.bracket(X, Y)
    out = la.vec_add(la.vec_add(list(X), list(Y)), la.vec_scale(HALF, b))
    out = la.vec_add(out, la.vec_scale(TWELFTH, L.bracket(X, b)))
    nb = la.vec_scale(-1, b)  # [Y, X] = -[X, Y]
    out = la.vec_add(out, la.vec_scale(TWELFTH, L.bracket(Y, nb)))
    return out


def bch_product(x: GroupElement, y: GroupElement) -> GroupElement:
    if x.algebra is not y.algebra:
        raise StructureError("elements of different algebras")
    _check_step(x.algebra)
    return GroupElement(x.algebra, _bch_log(x.algebra, x.log, y.log))


def inverse(x: GroupElement) -> GroupElement:
    return GroupElement(x.algebra, [-c for c in x.log])


def exp_ad(L, A, X):
    """exp(ad A) applied to X, exact for step <= 3."""
    b = L.bracket(A, X)
    return la.vec_add(la.vec_add(list(X), b), la.vec_scale(HALF, L.bracket(A, b)))


def conjugate(a: GroupElement, x: GroupElement) -> GroupElement:
    """a x a^{-1}; fixes central x."""
    if a.algebra is not x.algebra:
        raise StructureError("elements of different algebras")
    _check_step(a.algebra)
    return GroupElement(x.algebra, exp_ad(x.algebra, a.log, x.log))


def group_commutator(a: GroupElement, x: GroupElement) -> GroupElement:
    """a x a^{-1} x^{-1}."""
    return bch_product(conjugate(a, x), inverse(x))


def is_conjugate_in_G(x: GroupElement, y: GroupElement):
    """Exact conjugacy over the full group; returns a witness or None.

    exp(ad A) log x = log y reduces, for step <= 3, to the single linear
    system [A, (X+Y)/2] = Y - X together with the layer-0 compatibility
    X = Y mod the derived ideal.  The returned witness a satisfies
    conjugate(a, x) == y exactly.
    """
    L = x.algebra
    if L is not y.algebra:
        raise StructureError("elements of different algebras")
    _check_step(L)
    X, Y = list(x.log), list(y.log)
    T = la.vec_sub(Y, X)
    if la.is_zero_vec(T):
        return identity(L)
    filt = derived_series(L)
    g1 = filt.derived[0] if filt.derived else []
    if not la.span_contains(g1, T):
        return None
    mid = la.vec_scale(HALF, la.vec_add(X, Y))
    cols = [L.bracket(L.basis_vector(a), mid) for a in range(L.dim)]
    sol = la.columns_solve(cols, T)
    if sol is None:
        return None
    a = GroupElement(L, sol)
    assert conjugate(a, x) == y
    return a


@dataclass
class ConjugacyClass:
    representative: tuple      # canonical word exponents (lex-least in window)
    size_in_window: int
    lattice: "Lattice" = field(repr=False)
    tag: str = ""


class LatticeError(ValueError):
    pass


class Lattice:
    """Cocompact lattice given by an ordered generator list with rational logs.

    The generator order is the canonical order: every element is the ordered
    product g_1^{e_1} ... g_r^{e_r}.  Generators must be sorted by the depth
    of their log in the derived filtration, with each depth block's logs
    linearly independent; this is what makes the exponent solve triangular.
    """

    def __init__(self, algebra, generators, name="", congruence=None):
        self.algebra = algebra
        self.name = name
        self.generators = [g if isinstance(g, GroupElement) else GroupElement(algebra, g)
                           for g in generators]
        self.congruence = congruence  # optional closed-form conjugacy test
        self._filt = derived_series(algebra)
        layers = [[algebra.basis_vector(i) for i in range(algebra.dim)]] + list(self._filt.derived)
        # depth of a vector = largest k with v in layers[k]
        def depth(v):
            d = 0
            for k in range(1, len(layers)):
                if la.span_contains(layers[k], v):
                    d = k
                else:
                    break
            return d

        self._depths = [depth(list(g.log)) for g in self.generators]
        if self._depths != sorted(self._depths):
            raise LatticeError("generators must be ordered by filtration depth")
        self._levels = []
        start = 0
        for d in sorted(set(self._depths)):
            idx = [i for i, dd in enumerate(self._depths) if dd == d]
            self._levels.append((d, idx))
            start += len(idx)
        # per-level quotient solve data: project log to layers[d]/layers[d+1]
        self._level_proj = []
        for d, idx in self._levels:
            sub = layers[d]
            nxt = layers[d + 1] if d + 1 < len(layers) else []
            proj = _LayerProjection(sub, nxt)
            cols = [proj.apply(list(self.generators[i].log)) for i in idx]
            if la.rank(la.transpose(cols)) != len(idx):
                raise LatticeError("level logs are linearly dependent")
            self._level_proj.append(proj)
        if not self._spans_algebra():
            raise LatticeError("generator logs (with brackets) do not span the algebra")
        self._conj_mats = None
        self._slice_cache = {}

    @property
    def rank(self):
        return len(self.generators)

    def level0_count(self):
        d0, idx = self._levels[0]
        return len(idx) if d0 == 0 else 0

    def _spans_algebra(self):
        vecs = [list(g.log) for g in self.generators]
        grown = list(vecs)
        for _ in range(3):
            new = []
            for u in grown:
                for v in vecs:
                    w = self.algebra.bracket(u, v)
                    if not la.is_zero_vec(w):
                        new.append(w)
            grown = la.span_basis(grown + new)
        return len(grown) == self.algebra.dim

    def word_to_element(self, exponents) -> GroupElement:
        exponents = tuple(exponents)
        if len(exponents) != self.rank:
            raise LatticeError("exponent tuple length mismatch")
        out = identity(self.algebra)
        for g, e in zip(self.generators, exponents):
            if e:
                out = bch_product(out, GroupElement(self.algebra, la.vec_scale(e, list(g.log))))
        return out

    def canonical_exponents(self, x: GroupElement, integral=True):
        """Word exponents of x in canonical order, or None if x is not in
        the lattice (with integral=False, solves over the rationals)."""
        rest = x
        exps = [la.ZERO] * self.rank
        for (d, idx), proj in zip(self._levels, self._level_proj):
            target = proj.apply(list(rest.log))
            cols = [proj.apply(list(self.generators[i].log)) for i in idx]
            sol = la.columns_solve(cols, target)
            if sol is None:
                return None
            for i, e in zip(idx, sol):
                if integral and e.denominator != 1:
                    return None
                exps[i] = e
            block = identity(self.algebra)
            for i in idx:
                if exps[i]:
                    block = bch_product(block, GroupElement(
                        self.algebra, la.vec_scale(exps[i], list(self.generators[i].log))))
            rest = bch_product(inverse(block), rest)
        if not rest.is_identity():
            return None
        return tuple(int(e) if integral else e for e in exps)

    def contains(self, x: GroupElement):
        return self.canonical_exponents(x) is not None

    def conjugation_matrices(self):
        """Exact matrices of exp(ad log g^{+-1}) for each generator."""
        if self._conj_mats is None:
            mats = []
            L = self.algebra
            for gi, g in enumerate(self.generators):
                for sign in (1, -1):
                    A = la.vec_scale(sign, list(g.log))
                    cols = [exp_ad(L, A, L.basis_vector(j)) for j in range(L.dim)]
                    mats.append(((gi, sign), la.transpose(cols)))
            self._conj_mats = mats
        return self._conj_mats

    # -- slice machinery -------------------------------------------------
    # Conjugation preserves the level-0 exponents, so conjugacy questions
    # decompose into slices with fixed leading exponents.  Within a slice the
    # exponent action of each generator is an affine map over Z, compiled
    # once and self-checked against the generic path.

    def slice_engine(self, leading):
        leading = tuple(int(e) for e in leading)
        if leading not in self._slice_cache:
            self._slice_cache[leading] = _SliceEngine(self, leading)
        return self._slice_cache[leading]


class _LayerProjection:
    """Coordinates in span(sub)/span(next); exact solve per application."""

    def __init__(self, sub_basis, next_basis):
        self.cols = [list(b) for b in sub_basis
                     if not la.span_contains(next_basis, b)]
        self.next = [list(b) for b in next_basis]

    def apply(self, v):
        if not self.cols:
            return []
        sol = la.columns_solve(self.cols + self.next, v)
        if sol is None:
            raise LatticeError("vector outside the layer span")
        return sol[:len(self.cols)]


class _SliceEngine:
    """Affine conjugation action on tail exponents for a fixed leading block."""

    def __init__(self, lat: Lattice, leading):
        self.lat = lat
        self.leading = leading
        self.n_lead = lat.level0_count()
        self.n_tail = lat.rank - self.n_lead
        if len(leading) != self.n_lead:
            raise LatticeError("leading exponent length mismatch")
        L = lat.algebra
        # embedding tail exponents -> log coordinates must be affine; this
        # holds when tail generators commute pairwise (true when their logs
        # bracket to zero, which we verify here).
        tail_logs = [list(lat.generators[self.n_lead + i].log) for i in range(self.n_tail)]
        for i in range(self.n_tail):
            for j in range(i + 1, self.n_tail):
                if not la.is_zero_vec(L.bracket(tail_logs[i], tail_logs[j])):
                    raise LatticeError("tail generators do not commute; slice "
                                       "compilation unsupported")
        base = lat.word_to_element(leading + (0,) * self.n_tail)
        self.offset_log = list(base.log)
        cols = []
        for i in range(self.n_tail):
            exps = [0] * self.n_tail
            exps[i] = 1
            el = lat.word_to_element(leading + tuple(exps))
            cols.append(la.vec_sub(list(el.log), self.offset_log))
        self.embed_cols = cols
        # verify affineness on a sample
        probe = tuple(range(1, self.n_tail + 1))
        lhs = list(lat.word_to_element(leading + probe).log)
        rhs = list(self.offset_log)
        for c, e in zip(cols, probe):
            rhs = la.vec_add(rhs, la.vec_scale(e, c))
        if lhs != rhs:
            raise LatticeError("tail embedding is not affine")
        # tail solve: log -> tail exponents (affine inverse on the slice)
        self._tail_maps = {}

    def log_of(self, tail):
        out = list(self.offset_log)
        for c, e in zip(self.embed_cols, tail):
            if e:
                out = la.vec_add(out, la.vec_scale(e, c))
        return out

    def tail_of_log(self, log):
        sol = la.columns_solve(self.embed_cols, la.vec_sub(log, self.offset_log))
        if sol is None:
            return None
        return sol

    def conj_map(self, gen_index, sign):
        """Affine map on tail exponents from conjugation by g^{sign}."""
        key = (gen_index, sign)
        if key not in self._tail_maps:
            L = self.lat.algebra
            A = la.vec_scale(sign, list(self.lat.generators[gen_index].log))
            zero_img = self.tail_of_log(exp_ad(L, A, self.log_of((0,) * self.n_tail)))
            cols = []
            for i in range(self.n_tail):
                t = [0] * self.n_tail
                t[i] = 1
                img = self.tail_of_log(exp_ad(L, A, self.log_of(tuple(t))))
                if img is None or zero_img is None:
                    raise LatticeError("conjugation leaves the slice")
                cols.append(la.vec_sub(img, zero_img))
            self._tail_maps[key] = (cols, zero_img)
        cols, off = self._tail_maps[key]

        def apply(tail):
            out = list(off)
            for c, e in zip(cols, tail):
                if e:
                    out = la.vec_add(out, la.vec_scale(e, c))
            for x in out:
                if x.denominator != 1:
                    raise LatticeError("conjugation produced non-integral exponents")
            return tuple(int(x) for x in out)

        return apply

    def conjugators(self):
        return [(i, s) for i in range(self.lat.rank) for s in (1, -1)]


def expand_box(box, factor):
    out = []
    for lo, hi in box:
        mid_lo = lo * factor if lo <= 0 else lo
        mid_hi = hi * factor if hi >= 0 else hi
        out.append((mid_lo, mid_hi))
    return tuple(out)


def _iter_box(box):
    if not box:
        yield ()
        return
    (lo, hi), rest = box[0], box[1:]
    for v in range(lo, hi + 1):
        for tail in _iter_box(rest):
            yield (v,) + tail


def _partition_slice(engine: _SliceEngine, tails, search_box):
    """Union-find partition of tail tuples under generator conjugation,
    allowing paths through the enlarged search box."""
    maps = [engine.conj_map(i, s) for i, s in engine.conjugators()]
    inside = set(_iter_box(search_box))
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    work = sorted(inside)
    for t in work:
        parent.setdefault(t, t)
    for t in work:
        for mp in maps:
            u = mp(t)
            if u in parent:
                union(t, u)
    groups = {}
    for t in tails:
        groups.setdefault(find(t), []).append(t)
    return groups


@dataclass
class ClassEnumeration:
    classes: list
    stable: bool
    window: tuple


def enumerate_classes(lat: Lattice, window, predicate=None, expand=2,
                      stability_check=True, tag="") -> ClassEnumeration:
    """Partition the window of word exponents into lattice conjugacy classes.

    window is an inclusive (lo, hi) box per generator.  Conjugacy orbits are
    explored inside the box enlarged by ``expand``; the count is flagged
    stable when doubling the enlargement does not change the partition.
    """
    window = tuple(tuple(b) for b in window)
    if len(window) != lat.rank:
        raise LatticeError("window must bound every generator exponent")
    n_lead = lat.level0_count()
    lead_box, tail_box = window[:n_lead], window[n_lead:]

    def classes_for(expansion):
        out = []
        for lead in _iter_box(lead_box):
            tails = [t for t in _iter_box(tail_box)
                     if predicate is None or predicate(lead + t)]
            if not tails:
                continue
            engine = lat.slice_engine(lead)
            groups = _partition_slice(engine, tails, expand_box(tail_box, expansion))
            for root in sorted(groups):
                members = sorted(groups[root])
                out.append((lead + members[0], len(members)))
        return out

    base = classes_for(expand)
    stable = True
    if stability_check:
        doubled = classes_for(expand * 2)
        stable = [c[0] for c in base] == [c[0] for c in doubled]
    classes = [ConjugacyClass(rep, size, lat, tag) for rep, size in base]
    return ClassEnumeration(classes, stable, window)


@dataclass
class LatticeConjugacyResult:
    witness: GroupElement = None
    conjugate: bool = False
    certified: bool = False


def is_conjugate_in_lattice(gamma: GroupElement, gamma2: GroupElement,
                            lat: Lattice, window=None) -> LatticeConjugacyResult:
    """Decide lattice conjugacy by bounded orbit search with a closed-form
    cross-check when the lattice ships one.

    A positive answer carries an exact witness.  A negative answer is
    certified when doubling the search box does not change it.  Disagreement
    between the search and the registered closed form raises RuntimeError.
    """
    e1 = lat.canonical_exponents(gamma)
    e2 = lat.canonical_exponents(gamma2)
    if e1 is None or e2 is None:
        raise LatticeError("both elements must lie in the lattice")
    n_lead = lat.level0_count()
    closed = lat.congruence(e1, e2) if lat.congruence else None
    if e1[:n_lead] != e2[:n_lead]:
        if closed is True:
            raise RuntimeError("closed-form congruence disagrees with leading invariants")
        return LatticeConjugacyResult(None, False, True)
    engine = lat.slice_engine(e1[:n_lead])
    t1, t2 = e1[n_lead:], e2[n_lead:]
    if window is None:
        m = max([abs(v) for v in t1 + t2] + [1])
        window = tuple((-4 * m, 4 * m) for _ in t1)

    def search(expansion):
        box = expand_box(window, expansion)
        maps = {(i, s): engine.conj_map(i, s) for i, s in engine.conjugators()}
        seen = {t1: None}
        frontier = [t1]
        while frontier:
            nxt = []
            for t in frontier:
                for key, mp in maps.items():
                    u = mp(t)
                    if u in seen or not _in_box(u, box):
                        continue
                    seen[u] = (t, key)
                    nxt.append(u)
            frontier = nxt
        if t2 not in seen:
            return None
        # reconstruct the witness: chained conjugations compose as
        # conj_{g_k}(...conj_{g_1}(x)) = (g_k ... g_1) x (g_k ... g_1)^{-1},
        # and walking back from t2 yields g_k first.
        word = []
        cur = t2
        while seen[cur] is not None:
            prev, (gi, s) = seen[cur]
            word.append((gi, s))
            cur = prev
        a = identity(lat.algebra)
        for gi, s in word:
            g = lat.generators[gi]
            a = bch_product(a, g if s == 1 else inverse(g))
        return a

    found = search(1)
    certified = True
    if found is None:
        certified = search(2) is None
        if closed is True:
            raise RuntimeError("closed-form congruence says conjugate; search "
                               "disagrees within the doubled window")
        return LatticeConjugacyResult(None, False, certified)
    assert conjugate(found, gamma) == gamma2
    if closed is False:
        raise RuntimeError("closed-form congruence says non-conjugate; search "
                           "found a witness")
    return LatticeConjugacyResult(found, True, True)


def _in_box(t, box):
    return all(lo <= v <= hi for v, (lo, hi) in zip(t, box))
