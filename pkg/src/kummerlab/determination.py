"""End-to-end determination machinery over the character model.

The pieces mirror the shape of the argument they mechanize: pick a chain
height r from the ambient degree, build certified root-chains over the
given quadratic (or cyclotomic) base so inert primes land in high-degree
places, compare two isobaric sums place by place below the tail threshold,
descend a top-level equality step by step with fresh-prime twist
elimination, and close over the base field by the split-in-the-compositum
transport.  Verdicts are exact -- the character model decides equality --
and slope measurements corroborate them numerically.

Two honest limitations are surfaced rather than papered over.  For p = 2 a
quadratic step above a field containing i can never stay inert at primes
whose Frobenius acts like complex conjugation, so the root-of-unity chain
over Q(i) (and the mirrored fork over an imaginary quadratic base) covers
only part of the inert primes; the cover report lists exactly which
residue classes fail.  Over a real quadratic field the forked cover is
complete: one fork is certified prime by prime by residue traces, the
other by a sum-of-two-squares (Hilbert symbol) window certificate that
licenses the cyclic continuation above the compositum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import sympy

from .automorphic import (
    IsobaricRep,
    NormCharacter,
    base_change,
    central_char_and_t,
    character_of_order,
    components_match,
    digest,
    field_bad_primes,
    make_isobaric,
    place_norms,
    satake,
    twist_eliminate,
    twist_equivalent,
)
from .cyclotomic import (
    CycloField,
    Datum,
    PPSubfieldLattice,
    cyclo_primes_above,
    pp_lattice,
)
from .lseries import PrimeSelector, pole_book, slope_experiment, tail_threshold
from .splitting import (
    inert_chain_certificate,
    inert_prime_subfield,
    inert_splits_in_top,
    quartic_tower_exponents,
    trace_prime,
)
from .tower import (
    KummerTower,
    NestednessCertificate,
    fresh_prime_plan,
    modify_datum,
    verify_nested,
)

__all__ = [
    "TowerHeight", "choose_tower_height",
    "hilbert_symbol", "hilbert_obstructions",
    "WindowCertificate", "quadratic_window_certificate",
    "cyclotomic_window_certificate",
    "ChainPlan", "TowerPlan", "build_L",
    "CoverEntry", "CoverReport", "verify_high_degree_cover",
    "AgreementRow", "AgreementHypothesis", "check_agreement",
    "DeterminationReport", "determination_experiment",
    "DescentStep", "DescentCertificate", "descend_chain",
    "TransportRow", "FinalDescentReport", "final_descent",
    "PipelineStage", "PipelineReport", "run_pipeline",
    "EXIT_CODES",
]


def _ilog(N: int, q: int) -> int:
    """Exact f with q^f = N."""
    f = 0
    x = 1
    while x < N:
        x *= q
        f += 1
    if x != N:
        raise ValueError(f"{N} is not a power of {q}")
    return f


# ---------------------------------------------------------------------------
# chain height

@dataclass(frozen=True)
class TowerHeight:
    n: int
    p: int
    r: int
    direct: bool    # p alone beats the bound: no chain needed above K


def choose_tower_height(n: int, p: int) -> TowerHeight:
    """Least r >= 1 with p^r at least the tail threshold for degree n.

    In the direct case (r = 1) inert places of the degree-p extension are
    already too deep to matter, so no chain is built at all.
    """
    if n < 1:
        raise ValueError("ambient degree must be >= 1")
    if not sympy.isprime(p):
        raise ValueError(f"p = {p} is not prime")
    need = tail_threshold(n)
    r = 1
    while p ** r < need:
        r += 1
    return TowerHeight(n, p, r, direct=(r == 1))


# ---------------------------------------------------------------------------
# rational Hilbert symbols and the quartic window criterion

def _squarefree_kernel(x) -> int:
    """Signed squarefree representative of the square class of x."""
    x = Fraction(x)
    if x == 0:
        raise ValueError("zero has no square class")
    n = x.numerator * x.denominator
    k = -1 if n < 0 else 1
    for q, e in sympy.factorint(abs(n)).items():
        if e % 2:
            k *= q
    return k


def _legendre(u: int, q: int) -> int:
    r = pow(u % q, (q - 1) // 2, q)
    return 1 if r == 1 else -1


def _eps(u: int) -> int:
    return ((u - 1) // 2) % 2


def _omega(u: int) -> int:
    return ((u * u - 1) // 8) % 2


def hilbert_symbol(a, b, place: int) -> int:
    """(a, b) at a rational place: a prime, or 0 for the real place."""
    a = _squarefree_kernel(a)
    b = _squarefree_kernel(b)
    if place == 0:
        return -1 if (a < 0 and b < 0) else 1
    q = place
    if not sympy.isprime(q):
        raise ValueError(f"place {q} is neither 0 nor a prime")
    alpha, u = (1, a // q) if a % q == 0 else (0, a)
    beta, w = (1, b // q) if b % q == 0 else (0, b)
    if q != 2:
        s = 1
        if beta:
            s *= _legendre(u, q)
        if alpha:
            s *= _legendre(w, q)
        if alpha and beta and ((q - 1) // 2) % 2:
            s = -s
        return s
    e = (_eps(u) * _eps(w) + alpha * _omega(w) + beta * _omega(u)) % 2
    return -1 if e else 1


def hilbert_obstructions(a, b) -> tuple[int, ...]:
    """Places where (a, b) = -1; 0 stands for the real place."""
    cand = {0, 2}
    cand.update(sympy.primefactors(abs(_squarefree_kernel(a))))
    cand.update(sympy.primefactors(abs(_squarefree_kernel(b))))
    out = tuple(v for v in sorted(cand) if hilbert_symbol(a, b, v) == -1)
    assert len(out) % 2 == 0, "product formula violated"
    return out


def _quadratic_local_note(d: int, place: int) -> tuple[bool, str]:
    """(nonsplit?, reason) for a rational place in Q(sqrt d)."""
    if place == 0:
        return (d < 0, "complex" if d < 0 else "real")
    q = place
    if q == 2:
        if d % 4 != 1:
            return (True, "ramified")
        return (True, "inert") if d % 8 == 5 else (False, "split")
    if d % q == 0:
        return (True, "ramified")
    return (True, "inert") if _legendre(d, q) == -1 else (False, "split")


@dataclass(frozen=True)
class WindowCertificate:
    """Whether the first double-step of a chain embeds in a cyclic layer.

    route "contains-i": the base already holds mu_4, nothing to check.
    route "two-squares": alpha must be a sum of two squares in Q(sqrt d) --
    equivalently, every rational place obstructing the symbol (alpha, -1)
    must stay nonsplit there.  route "cyclotomic": the window is a slice
    of a root-of-unity field and cyclicity is read off unit groups.
    """

    base: str
    route: str
    alpha: int | None
    obstructions: tuple[int, ...]
    notes: tuple[str, ...]
    cyclic: bool


def quadratic_window_certificate(d, alpha) -> WindowCertificate:
    d = _squarefree_kernel(d)
    a = _squarefree_kernel(alpha)
    base = f"Q(sqrt {d})"
    if d == -1:
        return WindowCertificate(base, "contains-i", a, (), (), True)
    obs = hilbert_obstructions(a, -1)
    notes = []
    ok = True
    for v in obs:
        nonsplit, why = _quadratic_local_note(d, v)
        notes.append(f"{'oo' if v == 0 else v}: {why}")
        ok = ok and nonsplit
    return WindowCertificate(base, "two-squares", a, obs, tuple(notes), ok)


def cyclotomic_window_certificate(p: int) -> WindowCertificate:
    """First window of the root-of-unity chain over its ground field."""
    c = 1 if p == 2 else p
    mod = p ** 3
    group = [a for a in range(1, mod)
             if math.gcd(a, mod) == 1 and a % c == 1 % c]
    size = len(group)
    exponent = max(sympy.n_order(a, mod) for a in group)
    base = "Q" if c == 1 else f"Q(zeta_{c})"
    return WindowCertificate(
        base, "cyclotomic", None, (),
        (f"window group order {size}, exponent {exponent}",),
        cyclic=(exponent == size))


# ---------------------------------------------------------------------------
# tower plans

@dataclass(frozen=True)
class ChainPlan:
    """One fork: the index-p subfield it serves and how its cover is argued.

    `tower` is the residue-traceable chain model when one exists (the fork
    through the field containing i); the complementary fork carries no
    faithful rational chain -- its modified continuation exists whenever
    the window certificate is cyclic, and that certificate plus the
    classifier's residue checks carry the whole per-prime burden.
    """

    label: int
    subfield_kernel: int | None
    subfield_datum: Datum | None
    alpha: int | None
    candidates: tuple[int, ...]
    window: WindowCertificate
    tower: KummerTower | None
    nestedness: NestednessCertificate | None


@dataclass(frozen=True)
class TowerPlan:
    kind: str                    # "direct" | "single" | "forked"
    K_desc: object
    k_conductor: int
    p: int
    n: int
    height: TowerHeight
    D: int | None                # squarefree kernel for quadratic K
    lattice: PPSubfieldLattice | None
    e_tower: KummerTower | None
    chains: tuple[ChainPlan, ...]

    @property
    def required_degree(self) -> int:
        return self.p ** self.height.r

    def chain_for(self, label: int) -> ChainPlan | None:
        for ch in self.chains:
            if ch.label == label:
                return ch
        return None


def _field_profile(K_desc):
    """(p, class, payload) for the supported base field descriptions.

    Classes: "quadratic" (payload = squarefree D), "root-step"
    (K = k(mu_{p^2}) over k = Q(zeta_p)), "kummer-step" (odd-p Kummer step
    over Q(zeta_m) with mu_p present; only the direct case is buildable).
    """
    if isinstance(K_desc, int):
        if int(sympy.totient(K_desc)) != 2:
            raise ValueError(f"unsupported base field class: conductor "
                             f"{K_desc} is not a quadratic field")
        return (2, "quadratic", -1 if K_desc == 4 else -3)
    if not isinstance(K_desc, KummerTower):
        raise ValueError(f"unsupported base field class: {K_desc!r}")
    t = K_desc
    if t.pre_steps or t.base_is_step or t.r != 1:
        raise ValueError("unsupported base field class: need a single "
                         "Kummer step description")
    one = t.datum.cyc.field.one()
    if t.m == 1:
        if t.p != 2:
            raise ValueError("unsupported base field class: odd-degree step "
                             "over Q lacks the needed roots of unity")
        D = _squarefree_kernel(t.datum.rat)
        if D == 1:
            raise ValueError("unsupported base field class: trivial "
                             "quadratic datum")
        return (2, "quadratic", D)
    if t.m == t.p and t.datum.rat in (Fraction(1), Fraction(-1)):
        z = t.datum.cyc
        if z != one and z ** t.p == one:
            return (t.p, "root-step", None)
    if t.m % t.p == 0:
        return (t.p, "kummer-step", None)
    raise ValueError(f"unsupported base field class: {K_desc!r}")


def build_L(K_desc, n: int) -> TowerPlan:
    """Tower plan for determining degree-n objects over the given base.

    Direct case: no chain.  K holding mu_{p^2} over the ground field (Q(i),
    or k(zeta_{p^2}) for odd p): one root-of-unity chain.  Other quadratic
    K: two forks over the index-2 subfields of the compositum with Q(i),
    each carrying its own cover argument.
    """
    p, cls, D = _field_profile(K_desc)
    ht = choose_tower_height(n, p)
    if ht.direct:
        return TowerPlan("direct", K_desc, 1 if cls == "quadratic" else p,
                         p, n, ht, D, None, None, ())
    if cls == "kummer-step":
        raise ValueError("unsupported base field class: only the direct "
                         "case is available for this step description")
    if cls == "root-step" or D == -1:
        m2 = p * p
        chain = KummerTower(m2, p, ht.r - 1,
                            Datum(CycloField(m2).zeta()), base_is_step=True)
        plan_chain = ChainPlan(0, None, None, None, (),
                               cyclotomic_window_certificate(p), chain, None)
        return TowerPlan("single", K_desc, 1 if p == 2 else p, p, n, ht,
                         -1 if p == 2 else None, None, None, (plan_chain,))
    # forked quadratic case
    lattice = pp_lattice(1, 2, Datum.of(D), Datum.of(-1))
    e_tower = KummerTower(4, 2, 1, Datum.of(D, m=4))
    chains = []
    for tag in lattice.subfields:
        if tag.label == 0:
            continue
        kernel = _squarefree_kernel(tag.datum.rat)
        if kernel == -1:
            tower = KummerTower(4, 2, ht.r + 1, Datum.of(D, m=4))
            chains.append(ChainPlan(
                tag.label, kernel, tag.datum, D, (D,),
                quadratic_window_certificate(-1, D),
                tower, verify_nested(tower)))
            continue
        candidates = tuple(dict.fromkeys(
            _squarefree_kernel(D * kernel ** j) for j in range(2)))
        chosen = None
        window = None
        for a in candidates:
            window = quadratic_window_certificate(kernel, a)
            if window.cyclic:
                chosen = a
                break
        if chosen is None:
            # no candidate clears the criterion: keep the first, flag it
            window = quadratic_window_certificate(kernel, candidates[0])
            chosen = candidates[0]
        chains.append(ChainPlan(tag.label, kernel, tag.datum, chosen,
                                candidates, window, None, None))
    return TowerPlan("forked", K_desc, 1, p, n, ht, D, lattice, e_tower,
                     tuple(chains))


# ---------------------------------------------------------------------------
# high-degree cover verification

@dataclass(frozen=True)
class CoverEntry:
    q: int
    label: int
    route: str            # "direct" | "trace" | "window"
    covered: bool
    degree_bound: int
    detail: str


@dataclass(frozen=True)
class CoverReport:
    kind: str
    X: int
    required_degree: int
    inert_count: int
    certified: int
    entries: tuple[CoverEntry, ...]

    @property
    def full(self) -> bool:
        return self.certified == self.inert_count

    def failures(self) -> tuple[CoverEntry, ...]:
        return tuple(e for e in self.entries if not e.covered)


def _inert_rational_primes(plan: TowerPlan, X: int) -> list[int]:
    """Rational primes q <= X whose places of k are inert in K.

    2 and the divisors of D ramify somewhere in the construction and stay
    excluded, matching the unramified-only scope of every claim here.
    """
    if plan.D is not None:
        skip = {2} | set(sympy.primefactors(abs(plan.D)))
        return [q for q in sympy.primerange(3, X + 1)
                if q not in skip and _legendre(plan.D, q) == -1]
    if plan.kind == "direct":
        return []
    p = plan.p       # odd root-step: k = Q(zeta_p), K = k(mu_{p^2})
    return [q for q in sympy.primerange(2, X + 1)
            if q != p and sympy.n_order(q, p * p) == p * sympy.n_order(q, p)]


def verify_high_degree_cover(plan: TowerPlan, X: int) -> CoverReport:
    """Certify, prime by prime, that inert places force deep chain places.

    Unramified places that are *not* inert in K already lie over degree-1
    places of the ground field, so only the inert list matters.  Forked
    plans route each prime through its classifier fork; nothing is
    assumed, and a corrupted plan fails loudly here.
    """
    if X < 2:
        raise ValueError("X must be >= 2")
    need = plan.required_degree
    entries = []
    if plan.kind == "direct":
        for q in _inert_rational_primes(plan, X):
            entries.append(CoverEntry(q, 0, "direct", True, plan.p,
                                      "inert place of K is already deep"))
    elif plan.kind == "single":
        chain = plan.chains[0].tower
        for q in _inert_rational_primes(plan, X):
            P = cyclo_primes_above(chain.m, q)[0]
            tops = trace_prime(chain, P).norms(chain.r)
            f_min = min(_ilog(Nv, q) for Nv in tops)
            ok = f_min >= need
            entries.append(CoverEntry(
                q, 0, "trace", ok, f_min,
                "all top places deep" if ok else
                f"top degree {f_min} < {need}: Frobenius acts like "
                f"complex conjugation"))
    else:
        for q in _inert_rational_primes(plan, X):
            try:
                clf = inert_prime_subfield(plan.lattice, q)
            except (ValueError, AssertionError) as e:
                entries.append(CoverEntry(q, -1, "window", False, 0,
                                          f"classification failed: {e}"))
                continue
            ch = plan.chain_for(clf.label)
            if ch is None or ch.subfield_datum != clf.datum:
                entries.append(CoverEntry(
                    q, clf.label, "window", False, 0,
                    "label mismatch: plan fork does not serve the "
                    "subfield where q splits"))
                continue
            if ch.tower is not None:
                try:
                    cert = inert_chain_certificate(ch.tower, q)
                except ValueError as e:
                    entries.append(CoverEntry(q, clf.label, "trace", False,
                                              0, str(e)))
                    continue
                f_top = _ilog(cert.norms[-1], q)
                entries.append(CoverEntry(
                    q, clf.label, "trace", f_top >= need, f_top,
                    "inert chain certificate"))
            else:
                ok = ch.window.cyclic
                bound = plan.p ** (plan.height.r + 1) if ok else 0
                entries.append(CoverEntry(
                    q, clf.label, "window", ok, bound,
                    "split in the fork subfield, inert into the compositum,"
                    " cyclic window continues the chain" if ok else
                    "no cyclic window above this fork: " +
                    "; ".join(ch.window.notes)))
    certified = sum(1 for e in entries if e.covered)
    return CoverReport(plan.kind, X, need, len(entries), certified,
                       tuple(entries))


# ---------------------------------------------------------------------------
# agreement hypotheses

@dataclass(frozen=True)
class AgreementRow:
    q: int
    norm: int
    degree: int
    agree: bool


@dataclass(frozen=True)
class AgreementHypothesis:
    """Computed (never assumed) place-by-place agreement below a cutoff."""

    field_doc: str
    X: int
    degrees: tuple[int, ...]
    rows: tuple[AgreementRow, ...]
    exceptions: tuple[tuple[int, str], ...]

    def holds(self) -> bool:
        return all(r.agree for r in self.rows)

    def witness(self) -> int | None:
        for r in self.rows:
            if not r.agree:
                return r.q
        return None

    def rows_for(self, degree: int) -> tuple[AgreementRow, ...]:
        return tuple(r for r in self.rows if r.degree == degree)

    def complete_for(self, degrees) -> bool:
        present = {r.degree for r in self.rows}
        return all(d in present for d in degrees)

    def summary(self) -> dict:
        return {"field": self.field_doc, "X": self.X,
                "degrees": list(self.degrees), "rows": len(self.rows),
                "holds": self.holds(), "witness": self.witness(),
                "exceptions": len(self.exceptions)}


def _field_doc(field_desc) -> str:
    return str(field_desc) if isinstance(field_desc, int) else repr(field_desc)


def _place_degree_profile(field_desc, q: int):
    """Distinct (norm, degree) of places above q, cheaply when possible."""
    if field_desc == 1:
        return ((q, 1),)
    if isinstance(field_desc, int):
        f = sympy.n_order(q, field_desc)
        return ((q ** f, f),)
    t: KummerTower = field_desc
    one = t.datum.cyc.field.one()
    if (t.m == 1 and t.r == 1 and not t.pre_steps and not t.base_is_step
            and t.p == 2 and t.datum.cyc == one):
        D = _squarefree_kernel(t.datum.rat)
        inert = (D % 8 == 5) if q == 2 else \
            (D % q != 0 and _legendre(D, q) == -1)
        f = 2 if inert else 1
        return ((q ** f, f),)
    if (t.base_is_step and t.m == t.p ** 2 and t.datum.rat == 1
            and t.datum.cyc == t.datum.cyc.field.zeta()):
        # pure root-of-unity chain: the top level is cyclotomic
        f = sympy.n_order(q, t.p ** (t.r + 3))
        return ((q ** f, f),)
    if (t.p == 2 and t.m == 4 and not t.pre_steps and not t.base_is_step
            and t.datum.cyc == one):
        return tuple((q ** f, f) for f, _ in
                     quartic_tower_exponents(t.datum.rat, t.r, q))
    out = {}
    for Nv in place_norms(field_desc, q):
        out[Nv] = _ilog(Nv, q)
    return tuple(sorted(out.items()))


def check_agreement(pi: IsobaricRep, pi2: IsobaricRep, X: int,
                    degrees=(1,), exclude=(),
                    stop_on_disagreement: bool = False) -> AgreementHypothesis:
    """Compare Satake classes at every place of degree in `degrees` up to X.

    Ramified places (for either side's components, or for the field
    description itself) land in the exception list: agreement statements
    are about all but finitely many places, and the exceptions name the
    finite set left out.
    """
    if pi.field != pi2.field:
        raise ValueError("the pair must live over one field")
    degrees = tuple(sorted({int(d) for d in degrees}))
    if not degrees or degrees[0] < 1:
        raise ValueError("degrees must be positive")
    field = pi.field
    bad = field_bad_primes(field) | set(exclude)
    ram = set()
    for rep in (pi, pi2):
        for chi, _ in rep.components:
            ram.update(sympy.primefactors(chi.modulus))
    rows = []
    exceptions = []
    for q in sympy.primerange(2, X + 1):
        if q in bad:
            exceptions.append((q, "field"))
            continue
        if q in ram:
            exceptions.append((q, "ramified"))
            continue
        for Nv, f in _place_degree_profile(field, q):
            if f not in degrees or Nv > X:
                continue
            agree = satake(pi, Nv) == satake(pi2, Nv)
            rows.append(AgreementRow(q, Nv, f, agree))
            if not agree and stop_on_disagreement:
                return AgreementHypothesis(_field_doc(field), X, degrees,
                                           tuple(rows), tuple(exceptions))
    return AgreementHypothesis(_field_doc(field), X, degrees, tuple(rows),
                               tuple(exceptions))


# ---------------------------------------------------------------------------
# the comparison experiment

@dataclass(frozen=True)
class DeterminationReport:
    verdict: str                       # "ISOMORPHIC" | "NOT-HYPOTHESIS"
    witness: int | None
    peeled: tuple[tuple, ...]          # component keys in peel order
    residual: tuple[tuple, ...]        # leftover (key, mult) per side
    pole_prediction: int
    slope: object | None
    slope_consistent: bool | None


def _realizable_degrees(field_desc) -> set[int] | None:
    """Residue degrees the field can produce, or None when unknown."""
    if field_desc == 1:
        return {1}
    if isinstance(field_desc, int):
        m = field_desc
        return {int(sympy.n_order(a, m)) for a in range(1, m)
                if math.gcd(a, m) == 1}
    t: KummerTower = field_desc
    one = t.datum.cyc.field.one()
    if (t.m == 1 and t.r == 1 and not t.pre_steps and not t.base_is_step
            and t.p == 2 and t.datum.cyc == one):
        return {1, 2}
    if (t.base_is_step and t.m == t.p ** 2 and t.datum.rat == 1
            and t.datum.cyc == t.datum.cyc.field.zeta()):
        return _realizable_degrees(t.p ** (t.r + 3))
    return None


def _peel(pi: IsobaricRep, pi2: IsobaricRep):
    """Peel matched components one copy at a time, in canonical key order."""
    left = {chi: m for chi, m in pi.components}
    right = {c2: m for c2, m in pi2.components}
    peeled = []
    progress = True
    while progress:
        progress = False
        for chi in sorted(left, key=lambda c: c.key()):
            partner = next((c2 for c2 in right if c2 == chi), None)
            if partner is None:
                continue
            peeled.append(chi.key())
            for table, k in ((left, chi), (right, partner)):
                table[k] -= 1
                if not table[k]:
                    del table[k]
            progress = True
            break
    res_l = tuple(sorted((c.key(), m) for c, m in left.items()))
    res_r = tuple(sorted((c.key(), m) for c, m in right.items()))
    return tuple(peeled), (res_l, res_r)


def determination_experiment(pi: IsobaricRep, pi2: IsobaricRep,
                             hypothesis: AgreementHypothesis,
                             grid=None, slope_cutoff: int | None = None
                             ) -> DeterminationReport:
    """Exact verdict for the pair, with optional numerical corroboration.

    The model's strong multiplicity one decides isomorphism outright; the
    hypothesis tables supply the witness when the pair disagrees; when a
    cutoff is given, the measured slope of the pair's log-ratio series is
    compared against the pole book's prediction.
    """
    if not (pi.is_unitary and pi2.is_unitary):
        raise ValueError("the experiment needs the unitary model (t = 0)")
    if pi.n != pi2.n:
        raise ValueError("the pair must have equal ambient degree")
    need = tuple(range(1, tail_threshold(pi.n)))
    present = {r.degree for r in hypothesis.rows}
    realizable = _realizable_degrees(pi.field)
    for d in need:
        if d in present:
            continue
        if realizable is not None and d not in realizable:
            continue     # the field has no places of this degree at all
        raise ValueError(
            f"hypothesis tables incomplete: degree {d} of {need} required, "
            f"rows cover {sorted(present)}")
    matched = components_match(pi, pi2)
    peeled, residual = _peel(pi, pi2)
    book = pole_book(pi, pi2)
    slope = None
    consistent = None
    if slope_cutoff is not None:
        ram = set()
        for rep in (pi, pi2):
            for chi, _ in rep.components:
                ram.update(sympy.primefactors(chi.modulus))
        selector = PrimeSelector(pi.field, slope_cutoff,
                                 exclude=frozenset(ram))
        kwargs = {} if grid is None else {"grid": tuple(grid)}
        slope = slope_experiment(pi, pi2, selector, **kwargs)
        tol = max(0.2 * book.neg_ord, 0.2)
        consistent = (abs(slope.completed_slope - book.neg_ord) <= tol
                      or abs(slope.compensated_slope - book.neg_ord) <= tol)
    return DeterminationReport(
        verdict="ISOMORPHIC" if matched else "NOT-HYPOTHESIS",
        witness=hypothesis.witness(),
        peeled=peeled,
        residual=residual,
        pole_prediction=book.neg_ord,
        slope=slope,
        slope_consistent=consistent)


# ---------------------------------------------------------------------------
# chain descent

@dataclass(frozen=True)
class DescentStep:
    level: int
    fresh_prime: int
    multiplier_power: int         # planned datum multiplier is l^this
    delta_key: tuple
    pairs: tuple[tuple[tuple, tuple], ...]
    exponents: tuple[int, ...]


@dataclass(frozen=True)
class DescentCertificate:
    """Replayable record of the fresh-prime eliminations down a chain.

    check() re-runs every elimination from the recorded data alone.  The
    fresh primes strictly increase and avoid every conductor on both
    sides -- that support disjointness is what forces the exponents to 0.
    """

    steps: tuple[DescentStep, ...]
    used: tuple[int, ...]
    modified_datum: str | None
    conclusion: str

    def fresh_primes(self) -> tuple[int, ...]:
        return tuple(s.fresh_prime for s in self.steps)

    def check(self, pi: IsobaricRep, pi2: IsobaricRep) -> bool:
        last = 0
        for step in self.steps:
            if step.fresh_prime <= last or step.fresh_prime in self.used:
                return False
            last = step.fresh_prime
            delta = character_of_order(step.fresh_prime, step.delta_key[1],
                                       pi.field)
            if delta.key() != step.delta_key:
                return False
            for (k1, k2), j in zip(step.pairs, step.exponents):
                eta = _component_by_key(pi, k1)
                eta2 = _component_by_key(pi2, k2)
                if eta is None or eta2 is None:
                    return False
                if twist_eliminate(eta, eta2, delta, step.fresh_prime) != j:
                    return False
        return True


def _component_by_key(pi: IsobaricRep, key) -> NormCharacter | None:
    for chi, _ in pi.components:
        if chi.key() == key:
            return chi
    return None


def descend_chain(pi: IsobaricRep, pi2: IsobaricRep,
                  plan: TowerPlan, verify_upto: int = 60
                  ) -> DescentCertificate:
    """Walk the chain top-down, eliminating twists with fresh primes.

    Premise: the pair base-changes to equal objects at the chain top.  The
    planned fresh primes scale the chain datum (recorded in the
    certificate), so each scaled step's character ramifies at a prime
    where neither side does -- per matched pair the twist exponent must
    come out 0, one level at a time.  A direct plan, or an explicit
    height-0 chain, passes the input equality through unchanged.
    """
    if pi.field != pi2.field:
        raise ValueError("the pair must live over one field")
    r = 0 if plan.height.direct else plan.height.r
    if r == 0 or not plan.chains:
        if not components_match(pi, pi2):
            raise ValueError("descent premise fails: the pair is not equal")
        return DescentCertificate((), (), None,
                                  "passthrough: input equality")
    top = next((ch.tower for ch in plan.chains if ch.tower is not None), None)
    if top is not None:
        pi_L = base_change(pi, top, verify_upto=verify_upto)
        pi2_L = base_change(pi2, top, verify_upto=verify_upto)
        if not components_match(pi_L, pi2_L):
            raise ValueError("descent premise fails: base changes to the "
                             "chain top are not equal")
    # pair matching components over K first; cross-pair any leftovers in
    # canonical key order
    rest = [c2 for c2, _ in pi2.components]
    pairing = []
    leftovers = []
    for chi, _ in pi.components:
        partner = next((c2 for c2 in rest if c2 == chi), None)
        if partner is None:
            leftovers.append(chi)
            continue
        pairing.append((chi.key(), partner.key()))
        rest.remove(partner)
    for chi, c2 in zip(sorted(leftovers, key=lambda c: c.key()),
                       sorted(rest, key=lambda c: c.key())):
        pairing.append((chi.key(), c2.key()))
    used = {plan.p}
    for rep in (pi, pi2):
        for chi, _ in rep.components:
            used.update(sympy.primefactors(chi.conductor()))
    if plan.lattice is not None:
        used |= plan.lattice.bad_primes()
    for ch in plan.chains:
        if ch.tower is not None:
            used |= field_bad_primes(ch.tower)
    fresh = fresh_prime_plan(used, plan.p, r)
    modified = None
    if top is not None:
        modified = repr(modify_datum(top.datum, fresh))
    steps = []
    for i, (ell, power) in enumerate(fresh):
        delta = character_of_order(ell, plan.p, pi.field)
        exps = []
        for k1, k2 in pairing:
            eta = _component_by_key(pi, k1)
            eta2 = _component_by_key(pi2, k2)
            exps.append(twist_eliminate(eta, eta2, delta, ell))
        steps.append(DescentStep(level=r - i, fresh_prime=ell,
                                 multiplier_power=power,
                                 delta_key=delta.key(),
                                 pairs=tuple(pairing),
                                 exponents=tuple(exps)))
    conclusion = ("equality descends to the compositum level"
                  if plan.kind == "forked"
                  else "equality descends to K")
    return DescentCertificate(tuple(steps), tuple(sorted(used)), modified,
                              conclusion)


# ---------------------------------------------------------------------------
# final descent over K

@dataclass(frozen=True)
class TransportRow:
    q: int
    norm: int
    primes_in_top: int
    relative_degree: int
    agree: bool


@dataclass(frozen=True)
class FinalDescentReport:
    kind: str
    verdict: str         # "EQUAL" | "NOT-HYPOTHESIS" | "INCONCLUSIVE"
    witness: int | None
    rows: tuple[TransportRow, ...]
    note: str


def final_descent(plan: TowerPlan, pi: IsobaricRep, pi2: IsobaricRep,
                  hypothesis: AgreementHypothesis, X: int
                  ) -> FinalDescentReport:
    """Close over K: inert places agree because they split in the compositum.

    For forked plans every inert prime up to X gets a transport row backed
    by a split certificate (the inert place splits into relative-degree-1
    places of the compositum, where agreement is inherited); combined with
    the degree-1 hypothesis this yields the model equality.  When K
    already holds mu_{p^2} the chain bottom *is* K and the step passes
    through.
    """
    matched = components_match(pi, pi2)
    if plan.kind != "forked":
        if hypothesis.holds() and matched:
            verdict, witness = "EQUAL", None
        elif not hypothesis.holds():
            verdict, witness = "NOT-HYPOTHESIS", hypothesis.witness()
        else:
            verdict, witness = "INCONCLUSIVE", None
        return FinalDescentReport(plan.kind, verdict, witness, (),
                                  "K holds mu_{p^2}: nothing to transport")
    ram = set()
    for rep in (pi, pi2):
        for chi, _ in rep.components:
            ram.update(sympy.primefactors(chi.modulus))
    rows = []
    sigma_witness = None
    for q in _inert_rational_primes(plan, X):
        if q in ram:
            continue
        try:
            cert = inert_splits_in_top(plan.lattice, q)
        except (ValueError, AssertionError):
            continue
        agree = satake(pi, (q, plan.p)) == satake(pi2, (q, plan.p))
        rows.append(TransportRow(q, q ** plan.p, cert.primes_in_top,
                                 cert.relative_degree, agree))
        if not agree and sigma_witness is None:
            sigma_witness = q
    if not hypothesis.holds():
        return FinalDescentReport(plan.kind, "NOT-HYPOTHESIS",
                                  hypothesis.witness(), tuple(rows),
                                  "degree-1 agreement fails")
    if sigma_witness is not None:
        return FinalDescentReport(plan.kind, "NOT-HYPOTHESIS", sigma_witness,
                                  tuple(rows),
                                  "inert-place agreement fails")
    if matched:
        return FinalDescentReport(plan.kind, "EQUAL", None, tuple(rows),
                                  "degree-1 and inert agreement combine")
    return FinalDescentReport(plan.kind, "INCONCLUSIVE", None, tuple(rows),
                              "agreement holds below X yet the model "
                              "objects differ: raise X")


# ---------------------------------------------------------------------------
# the pipeline

EXIT_CODES = {"EQUAL": 0, "TWIST-EQUIVALENT": 0, "NOT-HYPOTHESIS": 2,
              "INCONCLUSIVE": 3}


@dataclass(frozen=True)
class PipelineStage:
    name: str
    inputs: str
    verdict: str
    certificate: object

    def to_json(self) -> dict:
        return {"name": self.name, "inputs": self.inputs,
                "verdict": self.verdict,
                "certificate": _jsonable(self.certificate)}


@dataclass(frozen=True)
class PipelineReport:
    K_doc: str
    n: int
    p: int
    verdict: str
    exit_code: int
    corollary: str | None
    stages: tuple[PipelineStage, ...]

    def to_json(self) -> dict:
        return {"schema": 1, "kind": "pipeline-report", "K": self.K_doc,
                "n": self.n, "p": self.p, "verdict": self.verdict,
                "exit_code": self.exit_code, "corollary": self.corollary,
                "stages": [s.to_json() for s in self.stages]}


def _jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [_jsonable(x) for x in obj]
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if hasattr(obj, "__dataclass_fields__"):
        return {f: _jsonable(getattr(obj, f))
                for f in obj.__dataclass_fields__}
    return repr(obj)


def run_pipeline(K_desc, pi: IsobaricRep, pi2: IsobaricRep, X: int = 10 ** 4,
                 compare_X: int | None = None, final_X: int | None = None,
                 slope_cutoff: int | None = None) -> PipelineReport:
    """Normalize, plan, compare, descend, and classify the pair over K.

    Verdicts: EQUAL / TWIST-EQUIVALENT (exit 0), NOT-HYPOTHESIS with a
    witness prime (exit 2), INCONCLUSIVE (exit 3).  Every executed stage
    leaves an immutable certificate in the report; a failed hypothesis
    truncates the stage list at the comparison.
    """
    if pi.field != K_desc or pi2.field != K_desc:
        raise ValueError("the pair must be tagged with the given field")
    compare_X = min(X, 3000) if compare_X is None else compare_X
    final_X = min(X, 2000) if final_X is None else final_X
    stages = []

    def emit(name, inputs, verdict, certificate):
        stages.append(PipelineStage(name, digest(_jsonable(inputs)),
                                    verdict, _jsonable(certificate)))

    def report(verdict, corollary=None):
        return PipelineReport(_field_doc(K_desc), pi.n, plan.p,
                              verdict, EXIT_CODES[verdict], corollary,
                              tuple(stages))

    docs = [pi.to_json(), pi2.to_json()]
    omega, t = central_char_and_t(pi)
    omega2, t2 = central_char_and_t(pi2)
    if t != 0 or t2 != 0:
        pi = make_isobaric(pi.components, 0, pi.field)
        pi2 = make_isobaric(pi2.components, 0, pi2.field)
    emit("normalize", docs, "ok",
         {"t": [str(t), str(t2)], "omega_equal": omega == omega2,
          "shifted": t != 0 or t2 != 0})

    p, cls, _D = _field_profile(K_desc)
    emit("reduce", _field_doc(K_desc), "ok",
         {"p": p, "class": cls,
          "mu_p_in_k": True if p == 2 else f"zeta_{p} adjoined"})

    ht = choose_tower_height(pi.n, p)
    emit("height", [pi.n, p], "direct" if ht.direct else f"r={ht.r}",
         {"n": ht.n, "p": ht.p, "r": ht.r, "direct": ht.direct})

    plan = build_L(K_desc, pi.n)
    emit("build", _field_doc(K_desc), plan.kind,
         {"kind": plan.kind, "required_degree": plan.required_degree,
          "chains": [{"label": c.label, "alpha": c.alpha,
                      "window_route": c.window.route,
                      "window_cyclic": c.window.cyclic,
                      "tower": None if c.tower is None else repr(c.tower)}
                     for c in plan.chains]})

    top = next((c.tower for c in plan.chains if c.tower is not None), None)
    if top is None:
        pi_L, pi2_L = pi, pi2
        emit("base-change", _field_doc(K_desc), "identity",
             {"note": "direct plan: no chain to climb"})
    else:
        pi_L = base_change(pi, top, verify_upto=60)
        pi2_L = base_change(pi2, top, verify_upto=60)
        emit("base-change", repr(top), "ok",
             {"pi_L": digest(pi_L.to_json()),
              "pi2_L": digest(pi2_L.to_json())})

    hyp = check_agreement(pi, pi2, X, degrees=(1,))
    if not hyp.holds():
        emit("low-degree-compare", hyp.summary(), "NOT-HYPOTHESIS",
             {"hypothesis": hyp.summary(), "witness": hyp.witness()})
        return report("NOT-HYPOTHESIS")
    need = tuple(range(1, tail_threshold(pi.n)))
    hyp_L = check_agreement(pi_L, pi2_L, compare_X, degrees=need)
    try:
        exp = determination_experiment(pi_L, pi2_L, hyp_L,
                                       slope_cutoff=slope_cutoff)
    except ValueError as e:
        if "incomplete" not in str(e):
            raise
        # the compare window is too small to populate a required degree
        emit("low-degree-compare", hyp.summary(), "INCONCLUSIVE",
             {"hypothesis": hyp.summary(), "over_L": hyp_L.summary(),
              "error": str(e)})
        return report("INCONCLUSIVE")
    emit("low-degree-compare", hyp.summary(), exp.verdict,
         {"hypothesis": hyp.summary(), "over_L": hyp_L.summary(),
          "experiment": exp})
    if exp.verdict != "ISOMORPHIC":
        return report("NOT-HYPOTHESIS" if exp.witness is not None
                      else "INCONCLUSIVE")

    cert = descend_chain(pi, pi2, plan)
    emit("chain-descent", [pi.to_json(), pi2.to_json()],
         "passthrough" if not cert.steps else f"{len(cert.steps)} steps",
         cert)

    fin = final_descent(plan, pi, pi2, hyp, final_X)
    emit("base-descent", hyp.summary(), fin.verdict, fin)
    if fin.verdict != "EQUAL":
        return report(fin.verdict)

    chi = twist_equivalent(pi, pi2)
    if chi is None:
        emit("twist-class", None, "INCONCLUSIVE",
             {"note": "no twisting character found below the bound"})
        return report("INCONCLUSIVE")
    corollary = None
    if chi.is_trivial:
        verdict = "EQUAL"
        if p == 2:
            corollary = ("p = 2: the twist class over K collapses, "
                         "equality holds on the nose")
    else:
        verdict = "TWIST-EQUIVALENT"
    emit("twist-class", None, verdict,
         {"chi": {"modulus": chi.modulus, "order": chi.order,
                  "trivial": chi.is_trivial}})
    return report(verdict, corollary)
