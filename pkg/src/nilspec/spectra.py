"""Length-spectrum machinery.

Periods of closed geodesics on a compact quotient of a strictly nonsingular
three-step group transfer exactly to the two-step central quotient for
noncentral classes, so everything here reasons about a two-step algebra
with a left-invariant metric.

For an element exp(V* + Z*) of a two-step group (V* in the orthocomplement
of the center, Z* central, Z** the part of Z* orthogonal to [V*, n]):

  * every period lies in [|V*|, sqrt(|V*|^2 + |Z**|^2)];
  * |V*| is a period iff Z** = 0;
  * sqrt(|V*|^2 + |Z**|^2) is always a period.

Two completeness upgrades close the gap between those bounds:

  * below the resonance threshold 2*pi / ||j||, every translated geodesic is
    conjugate to a one-parameter subgroup, so the period set intersected
    with [0, threshold) is exactly {sqrt(|V*|^2 + |Z**|^2)};
  * when the quotient splits as (3-dim Heisenberg) x R^d isometrically, the
    central Heisenberg classes carry the classical closed-form length list
    and the period sets of all classes are known in full.

Everything rational is exact; lengths are compared through their squares as
polynomials in pi.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from . import linalg as la
from .algebra import adapted_frame, derived_series
from .group import GroupElement, enumerate_classes, exp_vec, is_conjugate_in_G
from .lengths import Length, PiExpr

FOUR_PI_SQ = PiExpr([0, 0, 4])


class SpectrumError(ValueError):
    pass


class QuotientBundle:
    """Exact period oracle for a two-step (or abelian) quotient."""

    def __init__(self, qdata):
        self.data = qdata
        self.algebra = qdata.algebra
        self.metric = qdata.metric
        self.filt = derived_series(self.algebra)
        if self.filt.step > 2:
            raise SpectrumError("quotient must be abelian or two-step")
        fr = adapted_frame(self.algebra, self.metric, self.filt)
        self.vectors = fr.X + fr.Z        # orthonormal rational frame
        n = len(self.vectors)
        center = self.filt.center
        self.center_idx = [i for i, v in enumerate(self.vectors)
                           if la.span_contains(center, v)]
        if len(self.center_idx) != len(center):
            raise SpectrumError("metric frame is not aligned with the center")
        self.v_idx = [i for i in range(n) if i not in self.center_idx]
        derived = self.filt.derived[0] if self.filt.derived else []
        self.derived_pos = [p for p, i in enumerate(self.center_idx)
                            if la.span_contains(derived, self.vectors[i])]
        if derived and len(self.derived_pos) != len(derived):
            raise SpectrumError("metric frame is not aligned with the derived ideal")
        # bracket tensor in center coordinates: j[k][a][b] = <zeta_k, [v_a, v_b]>
        self.j = [[[self.metric.inner(self.vectors[k],
                                      self.algebra.bracket(self.vectors[a],
                                                           self.vectors[b]))
                    for b in self.v_idx] for a in self.v_idx]
                  for k in self.center_idx]
        self._resonance = self._resonance_bound()
        self._heis = self._detect_heisenberg_factor()

    # -- structure ---------------------------------------------------------

    def _resonance_bound(self):
        """Gershgorin bound B with ||j(zeta)||^2 <= B for unit central zeta.

        Any geodesic translated with period w whose velocity has a rotating
        component needs w * ||j(Z0)|| >= 2*pi, so periods with
        w^2 * B < 4*pi^2 come only from conjugated one-parameter subgroups.
        """
        K = len(self.center_idx)
        if K == 0 or not self.v_idx:
            return None
        M = [[sum((self.j[k][a][b] * self.j[h][a][b]
                   for a in range(len(self.v_idx))
                   for b in range(len(self.v_idx))), la.ZERO)
              for h in range(K)] for k in range(K)]
        B = max(sum(abs(x) for x in row) for row in M)
        return B if B > 0 else None

    def _detect_heisenberg_factor(self):
        """Recognize an exact isometric splitting (h1 factor) x (flat R^d)."""
        if len(self.derived_pos) != 1 or not self.v_idx:
            return None
        d0 = self.derived_pos[0]
        Jm = self.j[d0]
        nv = len(self.v_idx)
        sq = la.mat_mul(Jm, Jm)
        for a in range(nv):
            for b in range(nv):
                expected = la.frac(-1) if a == b else la.ZERO
                if sq[a][b] != expected:
                    return None
        # other central directions must not see any bracket
        for k in range(len(self.center_idx)):
            if k == d0:
                continue
            if any(x != 0 for row in self.j[k] for x in row):
                return None
        return {"derived_pos": d0}

    @property
    def has_heisenberg_factor(self):
        return self._heis is not None

    def resonance_complete_sq(self):
        """Largest certified squared length below which period sets are
        complete, as a PiExpr, or None when no bound is available."""
        if self._resonance is None:
            return None
        return PiExpr([0, 0, Fraction(4) / self._resonance])

    def below_resonance(self, t: PiExpr):
        if self._resonance is None:
            return False
        return (t * PiExpr.const(self._resonance) - FOUR_PI_SQ).sign() < 0

    # -- element data -------------------------------------------------------

    def frame_coords(self, u):
        return [self.metric.inner(f, u) for f in self.vectors]

    def split(self, u):
        """TwoStepPeriodData for the quotient element with log u."""
        coords = self.frame_coords(u)
        vc = [coords[i] for i in self.v_idx]
        zc = [coords[i] for i in self.center_idx]
        if all(c == 0 for c in vc) and all(c == 0 for c in zc):
            raise SpectrumError("identity element has no period data")
        # center coordinates of [V*, n]
        vstar = la.zeros(self.algebra.dim)
        for c, i in zip(vc, self.v_idx):
            vstar = la.vec_add(vstar, la.vec_scale(c, self.vectors[i]))
        rows = []
        for b in range(self.algebra.dim):
            br = self.algebra.bracket(vstar, self.algebra.basis_vector(b))
            if not la.is_zero_vec(br):
                rows.append([self.metric.inner(self.vectors[i], br)
                             for i in self.center_idx])
        image = la.span_basis(rows)
        zss = list(zc)
        if image:
            coeffs = la.solve([[la.vec_dot(r1, r2) for r2 in image] for r1 in image],
                              [la.vec_dot(r, zc) for r in image])
            for cf, r in zip(coeffs, image):
                zss = la.vec_sub(zss, la.vec_scale(cf, r))
        v_sq = sum((c * c for c in vc), la.ZERO)
        z_sq = sum((c * c for c in zc), la.ZERO)
        zss_sq = sum((c * c for c in zss), la.ZERO)
        return TwoStepPeriodData(vc, zc, zss, v_sq, z_sq, zss_sq,
                                 is_quotient_central=(v_sq == 0), bundle=self)


@dataclass
class TwoStepPeriodData:
    """Exact invariants of a quotient class driving its period set."""

    v_coords: list
    z_coords: list
    zss_coords: list
    v_sq: Fraction
    z_sq: Fraction
    zss_sq: Fraction
    is_quotient_central: bool
    bundle: QuotientBundle = field(repr=False)

    @property
    def definite_sq(self):
        return PiExpr.const(self.v_sq + self.zss_sq)

    def definite_periods(self):
        """Periods guaranteed by the two extremes (always nonempty)."""
        out = [Length(self.definite_sq)]
        if self.zss_sq == 0 and self.v_sq != 0:
            pass  # same value as the definite period
        return out

    def lower_bound_sq(self):
        return PiExpr.const(self.v_sq)


def two_step_periods(gamma_bar, bundle: QuotientBundle) -> TwoStepPeriodData:
    """Split log of a quotient element into V* + Z*, with Z** and bounds."""
    if isinstance(gamma_bar, GroupElement):
        u = list(gamma_bar.log)
    else:
        u = [la.frac(c) for c in gamma_bar]
    return bundle.split(u)


def heisenberg_central_lengths(c) -> list:
    """Closed-form length list of a central element exp(c Z) of the
    3-dimensional Heisenberg group with its standard metric:
    {|c|} plus sqrt(4*pi*k*(|c| - pi*k)) for integers 1 <= k < |c|/(2*pi)."""
    c = abs(la.frac(c))
    if c == 0:
        raise SpectrumError("central element must be nontrivial")
    out = [Length(PiExpr.const(c * c))]
    k = 1
    while (PiExpr.const(c) - PiExpr([0, 2 * k])).sign() > 0:  # k < c/(2 pi)
        out.append(Length(PiExpr([0, 4 * k * c, -4 * k * k])))
        k += 1
    return sorted(out)


YES = "yes"
NO = "no"
UNKNOWN = "unknown"


def class_period_squares(data: TwoStepPeriodData):
    """(definite squared periods, complete) for a quotient class.

    complete=True means the returned list is the entire period set; otherwise
    it is exact below the resonance threshold and a lower bound above it.
    """
    b = data.bundle
    if b.has_heisenberg_factor:
        return _heisenberg_period_squares(data), True
    if data.zss_sq == 0:
        # bounds pinch the period set to a single value
        return [data.definite_sq], True
    return [data.definite_sq], False


def _heisenberg_period_squares(data: TwoStepPeriodData):
    d0 = data.bundle._heis["derived_pos"]
    c = data.z_coords[d0]
    flat_sq = sum((x * x for i, x in enumerate(data.z_coords) if i != d0),
                  la.ZERO)
    if data.v_sq != 0:
        return [data.definite_sq]
    if c == 0:
        return [PiExpr.const(flat_sq)]
    mus = heisenberg_central_lengths(c)
    return [m.sq + PiExpr.const(flat_sq) for m in mus]


def period_decision(data: TwoStepPeriodData, length: Length):
    """Exact tri-state decision: is the length a period of the class?"""
    t = length.sq
    b = data.bundle
    if b.has_heisenberg_factor:
        sqs = _heisenberg_period_squares(data)
        return (YES, "heisenberg-complete") if t in sqs else (NO, "heisenberg-complete")
    lower = data.lower_bound_sq()
    upper = data.definite_sq
    if (t - lower).sign() < 0:
        return NO, "below-lower-bound"
    if (t - upper).sign() > 0:
        return NO, "above-upper-bound"
    if t == upper:
        return YES, "definite-period"
    if data.zss_sq == 0:
        return NO, "pinned-single-period"
    if t == lower:
        return NO, "lower-extreme-requires-zero-orthogonal-part"
    if b.below_resonance(t):
        return NO, "below-resonance-complete"
    return UNKNOWN, "resonance-regime"


# ---------------------------------------------------------------------------
# lattice-level multiplicities


class SpectrumEngine:
    """Binds an ambient lattice to its quotient period oracle."""

    def __init__(self, lattice, qdata, ambient_metric):
        self.lattice = lattice
        self.algebra = lattice.algebra
        self.metric = ambient_metric
        self.qdata = qdata
        self.bundle = QuotientBundle(qdata)
        self.filt = derived_series(self.algebra)
        self._gen_q_norm_sq = [
            self.bundle.metric.norm_sq(qdata.project_vec(list(g.log)))
            for g in lattice.generators]

    def project_log(self, gamma: GroupElement):
        return self.qdata.project_vec(list(gamma.log))

    def is_central(self, gamma: GroupElement):
        return la.span_contains(self.filt.center, list(gamma.log))

    def class_data(self, gamma: GroupElement) -> TwoStepPeriodData:
        return self.bundle.split(self.project_log(gamma))

    def transfer_decision(self, gamma: GroupElement, length: Length):
        """Period decision for a noncentral ambient class via the quotient."""
        if self.is_central(gamma):
            raise SpectrumError("transfer applies to noncentral classes only")
        return period_decision(self.class_data(gamma), length)


def transfer_period(gamma: GroupElement, length: Length, engine: SpectrumEngine):
    return engine.transfer_decision(gamma, length)


def central_period_witness(gamma: GroupElement, engine: SpectrumEngine) -> Length:
    """Fiber-geodesic period of a central lattice element: its metric norm."""
    if gamma.is_identity():
        raise SpectrumError("identity has no period")
    if not engine.is_central(gamma):
        raise SpectrumError("element is not central")
    return Length(PiExpr.const(engine.metric.norm_sq(list(gamma.log))))


@dataclass
class SpectrumEntry:
    length: Length
    m_prime: int
    m_dprime: int
    witnesses: list
    completeness: str            # complete_for_structured_cases | provisional
    stable: bool

    @property
    def total(self):
        return self.m_prime + self.m_dprime


COMPLETE = "complete_for_structured_cases"
PROVISIONAL = "provisional"


def _leading_caps(engine: SpectrumEngine, length: Length):
    lam = float(length) + 1e-9
    caps = []
    n_lead = engine.lattice.level0_count()
    for i in range(n_lead):
        nsq = engine._gen_q_norm_sq[i]
        caps.append(int(lam / float(nsq) ** 0.5) + 1 if nsq > 0 else 0)
    return caps

def _default_tail_caps(engine: SpectrumEngine, length: Length, scale=1):
    lam = float(length)
    zeta_cap = (int(lam) + 2) * scale
    w_cap = 2 * zeta_cap
    caps = []
    n_lead = engine.lattice.level0_count()
    for i in range(n_lead, engine.lattice.rank):
        nsq = engine._gen_q_norm_sq[i]
        caps.append(zeta_cap if nsq > 0 else w_cap)
    return caps


def _iter_leading(caps):
    if not caps:
        yield ()
        return
    c, rest = caps[0], caps[1:]
    for v in range(-c, c + 1):
        for tail in _iter_leading(rest):
            yield (v,) + tail


def multiplicity_at(length: Length, engine: SpectrumEngine, window_scale=1,
                    stability_check=True) -> SpectrumEntry:
    """Count free homotopy classes containing a closed geodesic of the given
    length, split into noncentral (via the quotient transfer) and central
    (fiber-witness based) parts.

    Counts are certified stable by re-running on doubled exponent windows.
    The completeness flag drops to provisional when any candidate class falls
    in the undecided resonance regime.
    """

    def compute(scale):
        m_prime = 0
        witnesses = []
        any_unknown = False
        lead_caps = [c + (scale - 1) for c in _leading_caps(engine, length)]
        tail_caps = _default_tail_caps(engine, length, scale)
        n_lead = engine.lattice.level0_count()
        t = length.sq
        for lead in _iter_leading(lead_caps):
            if not _slice_feasible(engine, lead, t):
                continue
            box = tuple((-c, c) for c in tail_caps)
            window = tuple((e, e) for e in lead) + box
            enum = enumerate_classes(engine.lattice, window,
                                     stability_check=False)
            for cls in enum.classes:
                gamma = engine.lattice.word_to_element(cls.representative)
                if gamma.is_identity() or engine.is_central(gamma):
                    continue
                code, reason = engine.transfer_decision(gamma, length)
                if code == YES:
                    m_prime += 1
                    witnesses.append(cls.representative)
                elif code == UNKNOWN:
                    any_unknown = True
        return m_prime, sorted(witnesses), any_unknown

    m_prime, witnesses, any_unknown = compute(window_scale)
    stable = True
    if stability_check:
        m2, w2, _ = compute(window_scale * 2)
        stable = (m2 == m_prime)
    m_dprime, central_wit = _central_multiplicity(length, engine)
    completeness = PROVISIONAL if (any_unknown or not stable) else COMPLETE
    return SpectrumEntry(length, m_prime, m_dprime, witnesses + central_wit,
                         completeness, stable)


def _slice_feasible(engine: SpectrumEngine, lead, t: PiExpr):
    """Can any class with these leading exponents contain the length?

    Checks the V* bound and the exact-route bookkeeping (rational residue for
    the pinched/definite route, pi-coefficient matching for the Heisenberg
    route); tails are enumerated only for feasible slices.
    """
    lat = engine.lattice
    b = engine.bundle
    n_lead = lat.level0_count()
    u = la.zeros(b.algebra.dim)
    for e, i in zip(lead, range(n_lead)):
        if e:
            u = la.vec_add(u, la.vec_scale(
                e, engine.qdata.project_vec(list(lat.generators[i].log))))
    coords = b.frame_coords(u)
    v_sq = sum((coords[i] ** 2 for i in b.v_idx), la.ZERO)
    rest = t - PiExpr.const(v_sq)
    if rest.sign() < 0:
        return False
    if not b.has_heisenberg_factor:
        return rest.is_rational()
    # Heisenberg quotient: V* != 0 classes are pinned (rational residue);
    # central classes may also reach pi-valued lengths via the spiral list.
    if v_sq != 0:
        return rest.is_rational()
    d0 = b._heis["derived_pos"]
    flat_sq = sum((coords[b.center_idx[p]] ** 2
                   for p in range(len(b.center_idx)) if p != d0), la.ZERO)
    mu_sq = t - PiExpr.const(flat_sq)
    if mu_sq.sign() < 0:
        return False
    if mu_sq.is_rational():
        return True
    cs = mu_sq.coeffs
    if len(cs) != 3 or cs[0] != 0:
        return False
    ksq = -cs[2] / 4
    k = la.frac_sqrt(ksq) if ksq > 0 else None
    if k is None or k.denominator != 1:
        return False
    c = cs[1] / (4 * k)
    # spiral condition k < c / (2 pi)
    return (PiExpr.const(c) - PiExpr([0, 2 * k])).sign() > 0


def _central_lattice_elements(engine: SpectrumEngine, cap=None):
    """Exponent tuples of the central generators (assumes the W-level block
    generates the central lattice, which holds for the built-in examples)."""
    lat = engine.lattice
    idx = [i for i, g in enumerate(lat.generators)
           if engine.is_central(g)]
    return idx


def _central_multiplicity(length: Length, engine: SpectrumEngine):
    """Witness-based central count: classes exp(j * w0) whose fiber length
    matches.  Periods of central classes beyond the fiber witness are not
    claimed (existence-only accounting)."""
    idx = _central_lattice_elements(engine)
    if len(idx) != 1:
        raise SpectrumError("central multiplicity implemented for a cyclic "
                            "central lattice only")
    g0 = engine.lattice.generators[idx[0]]
    w_sq = engine.metric.norm_sq(list(g0.log))
    if not length.sq.is_rational():
        return 0, []
    ratio = length.sq.rational_value() / w_sq
    j = la.frac_sqrt(ratio)
    if j is None or j.denominator != 1 or j == 0:
        return 0, []
    wit = []
    for sign in (1, -1):
        exps = [0] * engine.lattice.rank
        exps[idx[0]] = sign * int(j)
        wit.append(tuple(exps))
    return 2, wit


def occurring_lengths(engine: SpectrumEngine, window, cap: Length):
    """All definite periods of classes in the window, up to the cap.

    The returned set is exhaustive below the resonance threshold; above it,
    undecided intermediate periods may be missing (flagged by callers).
    """
    out = set()
    enum = enumerate_classes(engine.lattice, window, stability_check=False)
    for cls in enum.classes:
        gamma = engine.lattice.word_to_element(cls.representative)
        if gamma.is_identity():
            continue
        if engine.is_central(gamma):
            lam = central_period_witness(gamma, engine)
            if lam <= cap:
                out.add(lam)
            continue
        data = engine.class_data(gamma)
        sqs, _complete = class_period_squares(data)
        for sq in sqs:
            lam = Length(sq)
            if not lam.is_zero() and lam <= cap:
                out.add(lam)
    return out


@dataclass
class ComparisonRow:
    length: Length
    m1_prime: int
    m1_dprime: int
    m2_prime: int
    m2_dprime: int
    completeness: str

    @property
    def differs(self):
        return (self.m1_prime != self.m2_prime
                or self.m1_dprime != self.m2_dprime)


@dataclass
class ComparisonReport:
    rows: list
    lengths_match: bool
    same_spectrum: bool


def compare_length_spectra(engine1: SpectrumEngine, engine2: SpectrumEngine,
                           lengths, window_scale=1) -> ComparisonReport:
    """Per-length multiplicity table for a lattice pair in one ambient group."""
    rows = []
    for lam in sorted(lengths):
        e1 = multiplicity_at(lam, engine1, window_scale)
        e2 = multiplicity_at(lam, engine2, window_scale)
        comp = COMPLETE if (e1.completeness == COMPLETE
                            and e2.completeness == COMPLETE) else PROVISIONAL
        rows.append(ComparisonRow(lam, e1.m_prime, e1.m_dprime,
                                  e2.m_prime, e2.m_dprime, comp))
    same = all(not r.differs for r in rows)
    return ComparisonReport(rows, lengths_match=True, same_spectrum=same)


def count_classes_in_group_class(x: GroupElement, lat, window) -> int:
    """Number of lattice conjugacy classes inside the full-group conjugacy
    class of x, within the exponent window (brute force, exact)."""
    exps_any = lat.canonical_exponents(x, integral=False)
    if exps_any is None:
        return 0
    n_lead = lat.level0_count()
    lead = exps_any[:n_lead]
    if any(e.denominator != 1 for e in lead):
        return 0
    lead = tuple(int(e) for e in lead)
    tail_box = window[n_lead:]
    window_full = tuple((e, e) for e in lead) + tuple(tail_box)
    enum = enumerate_classes(lat, window_full, stability_check=False)
    count = 0
    for cls in enum.classes:
        gamma = lat.word_to_element(cls.representative)
        if is_conjugate_in_G(gamma, x) is not None:
            count += 1
    return count
