"""Isobaric sums of norm-composed Dirichlet characters, exactly.

The GL(1) desk model: a "representation" over a field K is a formal sum of
Dirichlet characters evaluated through the norm, chi(Nv), with integer
multiplicities and a rational unitarity shift t.  All character values are
exact roots of unity stored as exponents; complex floats never appear here.

Two distinct Dirichlet characters can induce the same character of K: chi
and chi' agree on all place norms iff chi/chi' kills the subgroup of (Z/N)^*
generated by those norms.  Equality, normalization and twist searches are
therefore always taken relative to the field tag, through norm_subgroup.

A field tag is 1 (the rationals), a conductor m (the m-th cyclotomic field),
or a single-datum Kummer step; place norms for each come from the splitting
machinery.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import sympy

from .cyclotomic import cyclo_primes_above
from .splitting import (DegreeClass, classify_rational, norm_subgroup,
                        place_profile, trace_prime)
from .tower import KummerTower

TWIST_SEARCH_BOUND = 10 ** 4


# ---------------------------------------------------------------------------
# the unit group of Z/N, as explicit cyclic factors

@lru_cache(maxsize=None)
def unit_group_structure(N: int) -> tuple[tuple[int, int], ...]:
    """Generators of (Z/N)^* as (g, order) pairs, g lifted mod N via CRT.

    Odd prime powers are cyclic on the least primitive root; 2^k for k >= 3
    splits as <-1> x <5>.
    """
    if N <= 0:
        raise ValueError("modulus must be positive")
    if N <= 2:
        return ()
    local: list[tuple[int, int, int]] = []   # (prime power, generator, order)
    for ell, k in sympy.factorint(N).items():
        pk = ell ** k
        if ell == 2:
            if k == 1:
                continue
            if k == 2:
                local.append((4, 3, 2))
            else:
                local.append((pk, pk - 1, 2))
                local.append((pk, 5, 2 ** (k - 2)))
        else:
            g = sympy.primitive_root(pk)
            local.append((pk, int(g), pk - pk // ell))
    gens = []
    for pk, g, d in local:
        rest = N // pk
        # g at this factor, 1 at every other factor
        lift = (g * rest * pow(rest, -1, pk) + pk * pow(pk, -1, rest)) % N \
            if rest > 1 else g % N
        gens.append((lift, d))
    return tuple(gens)


@lru_cache(maxsize=None)
def _unit_logs(N: int) -> dict[int, tuple[int, ...]]:
    """Every unit of Z/N written in exponents over unit_group_structure(N)."""
    gens = unit_group_structure(N)
    logs = {1 % N: (0,) * len(gens)}
    frontier = [1 % N]
    while frontier:
        a = frontier.pop()
        ea = logs[a]
        for i, (g, d) in enumerate(gens):
            b = (a * g) % N
            if b not in logs:
                eb = list(ea)
                eb[i] = (eb[i] + 1) % d
                logs[b] = tuple(eb)
                frontier.append(b)
    return logs


def _units(N: int) -> tuple[int, ...]:
    return tuple(sorted(_unit_logs(N)))


# ---------------------------------------------------------------------------
# characters

class NormCharacter:
    """A Dirichlet character chi mod N, read at places v through Nv.

    Values are exact: chi(a) = zeta_ord^exps[a].  The field tag names the
    base field whose places it evaluates; it changes equality (see norm_equal)
    but never the table.
    """

    __slots__ = ("modulus", "order", "exps", "field", "_key")

    def __init__(self, modulus: int, exps: dict, field=1):
        units = _units(modulus)
        if set(exps) != set(units):
            raise ValueError("table must cover exactly the units of the modulus")
        angles = {a: Fraction(e) % 1 for a, e in exps.items()}
        order = 1
        for f in angles.values():
            order = order * f.denominator // math.gcd(order, f.denominator)
        self.modulus = modulus
        self.order = order
        self.exps = {a: int(angles[a] * order) for a in units}
        self.field = field
        self._key = None
        self._check_multiplicative()

    def _check_multiplicative(self):
        gens = unit_group_structure(self.modulus)
        logs = _unit_logs(self.modulus)
        o = self.order
        for a, ea in logs.items():
            want = sum(self.exps[g] * ea[i] for i, (g, _) in enumerate(gens))
            if (want - self.exps[a]) % o:
                raise ValueError("table is not multiplicative")
        for g, d in gens:
            if (self.exps[g] * d) % o:
                raise ValueError("generator image order does not divide "
                                 "the generator order")

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def trivial(field=1) -> "NormCharacter":
        return NormCharacter(1, {0: Fraction(0)}, field)

    @staticmethod
    def from_gen_images(modulus: int, images, field=1) -> "NormCharacter":
        """Build from one exponent fraction per generator of the unit group."""
        gens = unit_group_structure(modulus)
        if len(images) != len(gens):
            raise ValueError(f"expected {len(gens)} generator images")
        images = [Fraction(x) % 1 for x in images]
        for (g, d), x in zip(gens, images):
            if (x * d) % 1:
                raise ValueError(f"image of generator {g} must have order "
                                 f"dividing {d}")
        logs = _unit_logs(modulus)
        exps = {a: sum((x * ea[i] for i, x in enumerate(images)),
                       Fraction(0)) % 1
                for a, ea in logs.items()}
        return NormCharacter(modulus, exps, field)

    # -- values --------------------------------------------------------------

    def angle(self, a: int) -> Fraction:
        """chi(a) as a fraction of a full turn, in [0, 1)."""
        a %= self.modulus
        if self.modulus == 1:
            return Fraction(0)
        if math.gcd(a, self.modulus) != 1:
            raise ValueError(f"{a} is not a unit mod {self.modulus}")
        return Fraction(self.exps[a], self.order)

    def __call__(self, v) -> Fraction:
        return self.angle(place_norm(v))

    # -- structure -----------------------------------------------------------

    def conductor(self) -> int:
        for d in sorted(sympy.divisors(self.modulus)):
            if all(self.exps[a] == 0 for a in _units(self.modulus)
                   if a % d == 1 % d):
                return d
        raise AssertionError("unreachable: N itself always works")

    def primitive(self) -> "NormCharacter":
        """The inducing character mod the conductor."""
        c = self.conductor()
        if c == self.modulus:
            return self
        table = {}
        for a in _units(c):
            table[a] = Fraction(self.exps[_lift_unit(a, c, self.modulus)],
                                self.order)
        return NormCharacter(c, table, self.field)

    def lift_to(self, M: int) -> "NormCharacter":
        if M % self.modulus:
            raise ValueError("can only lift to a multiple of the modulus")
        table = {a: self.angle(a) for a in _units(M)}
        return NormCharacter(M, table, self.field)

    def key(self):
        """Canonical identity as a Dirichlet character (field-independent)."""
        if self._key is None:
            prim = self.primitive()
            self._key = (prim.modulus, prim.order,
                         tuple(prim.exps[a] for a in _units(prim.modulus)))
        return self._key

    @property
    def is_trivial(self) -> bool:
        return self.order == 1

    def __mul__(self, other: "NormCharacter") -> "NormCharacter":
        if self.field != other.field:
            raise ValueError("cannot multiply characters over different fields")
        M = self.modulus * other.modulus // math.gcd(self.modulus,
                                                     other.modulus)
        table = {a: self.angle(a) + other.angle(a) for a in _units(M)}
        return NormCharacter(M, table, self.field).primitive()

    def inverse(self) -> "NormCharacter":
        table = {a: -self.angle(a) for a in _units(self.modulus)}
        return NormCharacter(self.modulus, table, self.field)

    conjugate = inverse          # finite order: conjugate = inverse

    def __pow__(self, e: int) -> "NormCharacter":
        table = {a: e * self.angle(a) for a in _units(self.modulus)}
        return NormCharacter(self.modulus, table, self.field).primitive()

    def retag(self, field) -> "NormCharacter":
        return NormCharacter(self.modulus,
                             {a: self.angle(a) for a in _units(self.modulus)},
                             field)

    def __eq__(self, other):
        return (isinstance(other, NormCharacter)
                and self.field == other.field and norm_equal(self, other))

    def __hash__(self):
        # norm-equal characters over one field must collide; hash the field
        # only (tiny buckets in practice)
        return hash(("NormCharacter", repr(self.field)))

    def __repr__(self):
        if self.is_trivial:
            return "chi(1)"
        return f"chi({self.modulus};{self.exps}/{self.order})"

    def to_json(self) -> dict:
        return {"modulus": self.modulus, "order": self.order,
                "table": {str(a): e for a, e in sorted(self.exps.items())}}

    @staticmethod
    def from_json(doc: dict, field=1) -> "NormCharacter":
        o = int(doc.get("order", 1))
        table = {int(a): Fraction(int(e), o)
                 for a, e in doc["table"].items()}
        return NormCharacter(int(doc["modulus"]), table, field)


def _lift_unit(a: int, c: int, N: int) -> int:
    """Some b = a mod c with gcd(b, N) = 1."""
    for b in range(a % c, N + c, c):
        if math.gcd(b, N) == 1:
            return b % N
    raise AssertionError("unreachable")


def dirichlet_characters(N: int, field=1) -> list[NormCharacter]:
    """All phi(N) characters mod N, trivial first, deterministic order."""
    gens = unit_group_structure(N)
    out = []
    choices = [range(d) for _, d in gens]
    for ks in itertools.product(*choices):
        out.append(NormCharacter.from_gen_images(
            N, [Fraction(k, d) for k, (_, d) in zip(ks, gens)], field))
    return out


def character_of_order(N: int, p: int, field=1) -> NormCharacter:
    """The first character mod N of exact order p, in enumeration order."""
    for chi in dirichlet_characters(N, field):
        if chi.order == p:
            return chi
    raise ValueError(f"no character of order {p} mod {N}")


# ---------------------------------------------------------------------------
# field tags and places

def field_bad_primes(field_desc) -> set[int]:
    """Rational primes excluded from place enumeration for this field."""
    if field_desc == 1:
        return set()
    if isinstance(field_desc, int):
        return set(sympy.primefactors(field_desc))
    t: KummerTower = field_desc
    bad = {t.p} | (set(sympy.primefactors(t.m)) if t.m > 1 else set())
    for d in (t.datum, *t.pre_steps):
        bad |= d.core_support()
        bad |= set(sympy.primefactors(abs(d.rat.numerator)))
        bad |= set(sympy.primefactors(d.rat.denominator))
    return bad


def place_norms(field_desc, q: int) -> tuple[int, ...]:
    """Norms of the places above the rational prime q, with multiplicity."""
    if q in field_bad_primes(field_desc) or not sympy.isprime(q):
        raise ValueError(f"q = {q} is excluded or not prime")
    if field_desc == 1:
        return (q,)
    if isinstance(field_desc, int):
        f = sympy.n_order(q, field_desc)
        return (q ** f,) * (int(sympy.totient(field_desc)) // f)
    t: KummerTower = field_desc
    out = []
    for f, count in place_profile(t, q):
        out.extend([q ** f] * count)
    return tuple(out)


def place_norm(v) -> int:
    """Nv for a place given as an int norm, a (q, f) pair, or a base prime."""
    if isinstance(v, int):
        return v
    if isinstance(v, tuple):
        q, f = v
        return q ** f
    return v.norm          # CycloPrime


_H_CACHE: dict = {}


def _norm_classes(field_desc, M: int):
    key = (repr(field_desc), M)
    if key not in _H_CACHE:
        _H_CACHE[key] = norm_subgroup(field_desc, M, bound=max(500, 4 * M))
    return _H_CACHE[key]


def norm_equal(chi: NormCharacter, psi: NormCharacter) -> bool:
    """Equality as characters of the tagged field (almost all places)."""
    if chi.field != psi.field:
        return False
    xi = chi * psi.inverse()
    if xi.is_trivial:
        return True
    if chi.field == 1:
        return False
    M = xi.modulus
    return all(xi.exps[h % M] == 0 for h in _norm_classes(chi.field, M))


# ---------------------------------------------------------------------------
# isobaric sums

@dataclass(frozen=True)
class IsobaricRep:
    """Normalized multiset of (character, multiplicity) with a |.|^t shift."""

    components: tuple           # ((NormCharacter, int), ...) canonical order
    t: Fraction
    field: object = 1

    @property
    def n(self) -> int:
        return sum(m for _, m in self.components)

    @property
    def is_unitary(self) -> bool:
        return self.t == 0

    def conjugate(self) -> "IsobaricRep":
        return make_isobaric([(chi.inverse(), m) for chi, m in
                              self.components], -self.t, self.field)

    def twist(self, chi: NormCharacter) -> "IsobaricRep":
        return make_isobaric([(c * chi.retag(self.field), m)
                              for c, m in self.components], self.t, self.field)

    def component_multiset(self):
        """Representative keys with multiplicities (serialization order)."""
        return tuple(sorted((chi.key(), m) for chi, m in self.components))

    def __eq__(self, other):
        # normalized reps have pairwise non-equal components, so matching
        # each component to a norm-equal partner of equal multiplicity is
        # exact equality over the tagged field
        if not (isinstance(other, IsobaricRep) and self.field == other.field
                and self.t == other.t
                and len(self.components) == len(other.components)):
            return False
        for chi, m in self.components:
            if not any(m == m2 and norm_equal(chi, chi2)
                       for chi2, m2 in other.components):
                return False
        return True

    def __hash__(self):
        # equality is norm-relative, so hash only what it preserves
        return hash((repr(self.field), self.t, self.n, len(self.components)))

    def to_json(self) -> dict:
        f = self.field
        field_doc = f if isinstance(f, int) else repr(f)
        return {"field": field_doc,
                "components": [dict(ch.to_json(), multiplicity=m)
                               for ch, m in self.components],
                "t": str(self.t)}

    @staticmethod
    def from_json(doc: dict, field=None) -> "IsobaricRep":
        f = doc.get("field", 1) if field is None else field
        comps = [(NormCharacter.from_json(c, f), int(c.get("multiplicity", 1)))
                 for c in doc["components"]]
        return make_isobaric(comps, Fraction(doc.get("t", 0)), f)


def make_isobaric(components, t=0, field=None) -> IsobaricRep:
    """Normalize: group field-equal characters, add multiplicities, sort.

    The grouping is relative to the field tag, so 1 boxplus chi collapses to
    the double of the trivial character whenever chi kills the norms.
    """
    comps = list(components)
    if not comps:
        raise ValueError("an isobaric sum needs at least one component")
    if field is None:
        field = comps[0][0].field
    merged: list[list] = []
    for chi, m in comps:
        if m < 1:
            raise ValueError("multiplicities must be >= 1")
        chi = chi if chi.field == field else chi.retag(field)
        chi = chi.primitive()
        for slot in merged:
            if norm_equal(slot[0], chi):
                slot[1] += m
                if chi.key() < slot[0].key():
                    slot[0] = chi          # keep the least representative
                break
        else:
            merged.append([chi, m])
    merged.sort(key=lambda s: s[0].key())
    return IsobaricRep(tuple((c, m) for c, m in merged), Fraction(t), field)


# ---------------------------------------------------------------------------
# Satake data

@dataclass(frozen=True)
class SatakeClass:
    """Unordered eigenvalues at one place: (turn angle, power of Nv) pairs."""

    norm: int
    eigenvalues: tuple          # sorted ((Fraction angle, Fraction tpow), ...)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def trace(self) -> complex:
        return sum(self.norm ** float(tp) *
                   complex(math.cos(2 * math.pi * a), math.sin(2 * math.pi * a))
                   for a, tp in self.eigenvalues)

    def conjugate(self) -> "SatakeClass":
        return SatakeClass(self.norm, tuple(sorted(
            ((-a) % 1, tp) for a, tp in self.eigenvalues)))

    def power(self, r: int) -> "SatakeClass":
        """Eigenvalue-wise r-th power (the class at a degree-r extension)."""
        return SatakeClass(self.norm ** r, tuple(sorted(
            ((a * r) % 1, tp) for a, tp in self.eigenvalues)))


def satake(pi: IsobaricRep, v) -> SatakeClass:
    """The class at an unramified place; v as in place_norm."""
    Nv = place_norm(v)
    q = sympy.primefactors(Nv)[0]
    eig = []
    for chi, m in pi.components:
        if chi.modulus % q == 0:
            raise ValueError(f"place above {q} is ramified for a component")
        eig.extend([(chi.angle(Nv), pi.t)] * m)
    return SatakeClass(Nv, tuple(sorted(eig)))


# ---------------------------------------------------------------------------
# base change

def _is_power_of(Nw: int, Nv: int) -> int:
    """The integer f with Nv^f = Nw, or 0."""
    f = 0
    x = 1
    while x < Nw:
        x *= Nv
        f += 1
    return f if x == Nw else 0


def base_change(pi: IsobaricRep, M, verify_upto: int = 100) -> IsobaricRep:
    """pi over M: same norm-composed characters, re-normalized over M.

    The Satake rule (eigenvalues to the f-th power at a degree-f place) holds
    by norm transitivity; it is still verified pointwise at unramified primes
    up to the bound, so a wrong field description fails loudly.
    """
    F = pi.field
    supported = (F == 1
                 or (isinstance(F, int) and isinstance(M, int) and M % F == 0)
                 or (isinstance(F, int) and isinstance(M, KummerTower))
                 or (isinstance(F, KummerTower)
                     and isinstance(M, KummerTower)))
    if not supported and F != M:
        raise ValueError("unsupported extension description")
    out = make_isobaric([(chi, m) for chi, m in pi.components], pi.t, M)
    bad = field_bad_primes(M) | field_bad_primes(F) | {
        ell for chi, _ in pi.components for ell in
        sympy.primefactors(chi.modulus)}
    for q in sympy.primerange(2, verify_upto + 1):
        if q in bad:
            continue
        below = place_norms(F, q)
        for Nw in place_norms(M, q):
            ok = False
            for Nv in below:
                f = _is_power_of(Nw, Nv)
                if f and satake(pi, Nv).power(f).eigenvalues == \
                        satake(out, Nw).eigenvalues:
                    ok = True
                    break
            if not ok:
                raise AssertionError(
                    f"base change incoherent above q = {q}: {Nw} vs {below}")
    return out


# ---------------------------------------------------------------------------
# invariants and comparisons

def central_char_and_t(pi: IsobaricRep):
    """(omega, t): the determinant character and the unitarity shift."""
    omega = NormCharacter.trivial(pi.field)
    for chi, m in pi.components:
        omega = omega * chi ** m
    return omega, pi.t


def lrs_check(A: SatakeClass, n: int, q_v: int) -> bool:
    """Strict bound |alpha| < q_v^(1/2 - 1/(n^2+1)), decided exactly.

    |alpha| = q_v^tpow for our classes, so the comparison is between
    rational exponents.  n = 1 makes the bound vacuous-false for unitary
    characters; the ambient degree must be >= 2.
    """
    if n < 2:
        raise ValueError("the bound needs the ambient degree n >= 2")
    if q_v < 2:
        raise ValueError("q_v must be a prime power > 1")
    cap = Fraction(1, 2) - Fraction(1, n * n + 1)
    return all(tp < cap for _, tp in A.eigenvalues)


def twist_equivalent(pi: IsobaricRep, pi2: IsobaricRep,
                     extra_bound: int = 1):
    """A character chi with pi2 = pi (x) chi, or None.

    Searched over characters of modulus dividing the lcm of all conductors
    times extra_bound; a model completeness cutoff, not a theorem statement.
    """
    if pi.n != pi2.n:
        raise ValueError("twist equivalence needs equal degrees")
    L = 1
    for rep in (pi, pi2):
        for chi, _ in rep.components:
            c = chi.conductor()
            L = L * c // math.gcd(L, c)
    L *= extra_bound
    if L > TWIST_SEARCH_BOUND:
        raise ValueError("twist search modulus exceeds the configured bound")
    for chi in dirichlet_characters(L, pi.field):
        if pi.twist(chi) == pi2:
            return chi.primitive()
    return None


def twist_eliminate(eta: NormCharacter, eta2: NormCharacter,
                    delta: NormCharacter, fresh: int) -> int:
    """The exponent j with eta2 = eta * delta^j; conductor support forces 0.

    delta must have prime order p and conductor divisible by fresh, while
    neither eta nor eta2 may ramify at fresh: any j != 0 would then leave
    eta * delta^j ramified at fresh, so only j = 0 can hold.
    """
    p = delta.order
    if not sympy.isprime(p):
        raise ValueError("delta must have prime order")
    if delta.conductor() % fresh:
        raise ValueError("fresh prime must divide the conductor of delta")
    if eta.conductor() % fresh == 0 or eta2.conductor() % fresh == 0:
        raise ValueError(f"inconsistent premise: a side is ramified "
                         f"at the fresh prime {fresh}")
    for j in range(p):
        if norm_equal(eta * delta ** j, eta2):
            if j != 0:
                raise ValueError("delta is norm-trivial at the fresh prime; "
                                 "pick a fresh prime split in the field")
            return j
    raise ValueError("no twist exponent matches: premise inconsistent")


def components_match(pi: IsobaricRep, pi2: IsobaricRep) -> bool:
    """Model strong multiplicity one: multiset equality over the field tag."""
    return pi == pi2


def digest(obj) -> str:
    """Stable sha256 over a JSON-serializable description."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
