"""Residue traces of primes up Kummer chains, and splitting classifiers.

Decisions ride on multiplicative orders, not ideal arithmetic: with mu_p in
the residue field, a degree-p Kummer step is split at an unramified prime
exactly when the datum's image is a p-th power, i.e. when the p-valuation of
its order is below that of the residue group.  Splitting keeps the residue
field (all p roots are rational over it); an inert step is modelled as the
relative extension F[t]/(t^p - a), which makes the adjoined root available
with no embedding work.  Once a step is inert with the p-part of the residue
group of size >= p^2 (automatic for p odd), every later step stays inert, so
deep chains cost one valuation check.

Wild primes (q = p) are refused: the residue criterion does not apply.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import sympy

from .cyclotomic import (
    CycloPrime,
    Datum,
    InconclusiveError,
    PPSubfieldLattice,
    cyclo_primes_above,
)
from .finitefield import FFElement, pth_roots
from .tower import KummerTower

DEFAULT_NORM_BOUND = 500


class DegreeClass(enum.Enum):
    DEGREE1 = "DEGREE1"
    DEGREEP = "DEGREEP"
    RAMIFIED = "RAMIFIED"


def kummer_step(m: int, p: int, datum: Datum,
                pre_steps: tuple = ()) -> KummerTower:
    """A single degree-p step as a height-1 tower."""
    return KummerTower(m, p, 1, datum, pre_steps=tuple(pre_steps))


# ---------------------------------------------------------------------------
# relative extensions for inert growth

class RelField:
    """parent[t]/(t^p - a) for a not a p-th power in the parent.

    Elements are length-p vectors of parent elements; reduction is the single
    relation t^p = a, so no modulus search and no embedding problem: the
    parent sits inside as constant vectors and the root of the datum is the
    class of t.
    """

    __slots__ = ("parent", "a", "p", "size", "char")

    def __init__(self, parent, a, p):
        if group_p_valuation(a, p) < _sylow_valuation(parent.size - 1, p):
            raise ValueError("adjoined datum is a p-th power already")
        self.parent = parent
        self.a = a
        self.p = p
        self.size = parent.size ** p
        self.char = getattr(parent, "char", None) or parent.q

    def zero(self):
        return RElement(self, (self.parent.zero(),) * self.p)

    def one(self):
        return RElement(self, (self.parent.one(),)
                        + (self.parent.zero(),) * (self.p - 1))

    def gen(self):
        """The adjoined p-th root of a."""
        z, o = self.parent.zero(), self.parent.one()
        return RElement(self, (z, o) + (z,) * (self.p - 2))

    def embed(self, x):
        return RElement(self, (x,) + (self.parent.zero(),) * (self.p - 1))

    def __eq__(self, other):
        return (isinstance(other, RelField) and self.p == other.p
                and self.parent == other.parent and self.a == other.a)

    def __hash__(self):
        return hash((self.parent, self.a.key() if hasattr(self.a, "key")
                     else self.a, self.p))

    def __repr__(self):
        return f"RelField({self.parent!r}, p={self.p})"


class RElement:
    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        self.field = field
        self.coeffs = coeffs

    def key(self):
        return tuple(c.key() for c in self.coeffs)

    def is_zero(self):
        return all(c.is_zero() for c in self.coeffs)

    def __add__(self, other):
        return RElement(self.field, tuple(a + b for a, b in
                                          zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        return RElement(self.field, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        f = self.field
        p = f.p
        conv = [f.parent.zero() for _ in range(2 * p - 1)]
        for i, ai in enumerate(self.coeffs):
            if not ai.is_zero():
                for j, bj in enumerate(other.coeffs):
                    if not bj.is_zero():
                        conv[i + j] = conv[i + j] + ai * bj
        out = conv[:p]
        for j in range(p, 2 * p - 1):
            if not conv[j].is_zero():
                out[j - p] = out[j - p] + conv[j] * f.a
        return RElement(f, tuple(out))

    def __pow__(self, e):
        f = self.field
        if e < 0:
            raise ValueError("negative powers not supported")
        if self.is_zero():
            return f.one() if e == 0 else f.zero()
        e %= f.size - 1
        out = f.one()
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def __eq__(self, other):
        return (isinstance(other, RElement) and self.field == other.field
                and all(a == b for a, b in zip(self.coeffs, other.coeffs)))

    def __hash__(self):
        return hash((self.field, self.key()))

    def __repr__(self):
        return f"RElement({self.key()})"


def _sylow_valuation(n: int, p: int) -> int:
    s = 0
    while n % p == 0:
        n //= p
        s += 1
    return s


def group_p_valuation(x, p: int) -> int:
    """v_p of the multiplicative order; no factoring of the group order."""
    if x.is_zero():
        raise ValueError("zero input")
    n = x.field.size - 1
    s = _sylow_valuation(n, p)
    z = x ** (n // p ** s)
    one = x.field.one()
    v = 0
    while z != one:
        z = z ** p
        v += 1
        if v > s:
            raise AssertionError("order valuation exceeded Sylow size")
    return v


def element_pth_roots(x, p: int) -> list:
    """All p-th roots in x's own field; FFElement or RElement alike."""
    if isinstance(x, FFElement):
        return pth_roots(x, p)
    field = x.field
    if x.is_zero():
        return [field.zero()]
    n = field.size - 1
    s = _sylow_valuation(n, p)
    if s == 0:
        return [x ** pow(p, -1, n)]
    if group_p_valuation(x, p) >= s:
        return []
    m = n // p ** s
    seed = None
    cand = field.gen()
    one = field.one()
    for _ in range(64):
        if not cand.is_zero() and group_p_valuation(cand, p) == s:
            seed = cand
            break
        cand = cand + one
    if seed is None:
        raise InconclusiveError("no p-Sylow seed found near the generator")
    g = seed ** m
    zeta = g ** (p ** (s - 1))
    zeta_pows = {}
    w = one
    for j in range(p):
        zeta_pows[w.key()] = j
        w = w * zeta
    k = 0
    xm = x ** m
    for i in range(s):
        probe = (xm * g ** (-k % n)) ** (p ** (s - 1 - i))
        k += zeta_pows[probe.key()] * p ** i
    if k % p != 0:
        raise AssertionError("dlog not divisible by p for a p-th power")
    u = pow(p, -1, m) if m > 1 else 0
    w_ = (p * u - 1) // m
    y = (x ** u) * g ** ((-(k // p) * w_) % n)
    roots = []
    for _ in range(p):
        roots.append(y)
        y = y * zeta
    return sorted(roots, key=lambda r: r.key())


# ---------------------------------------------------------------------------
# traces

@dataclass(frozen=True)
class BranchNode:
    """One prime (possibly with collapsed multiplicity) at some level."""

    exp: int                 # residue field F_{q^exp}
    image: object | None     # chain-root image; None once on an inert tail
    count: int = 1
    tail_from: int | None = None


@dataclass(frozen=True)
class PrimeTrace:
    tower: KummerTower
    prime: CycloPrime
    ramified: bool
    branches: tuple[tuple[BranchNode, ...], ...]  # per level 0..r

    def places(self, level: int) -> tuple[tuple[int, int], ...]:
        """Sorted (norm-exponent, count) pairs at a level."""
        agg: dict[int, int] = {}
        for b in self.branches[level]:
            agg[b.exp] = agg.get(b.exp, 0) + b.count
        return tuple(sorted(agg.items()))

    def norms(self, level: int) -> tuple[int, ...]:
        out = []
        for e, c in self.places(level):
            out.extend([self.prime.q ** e] * c)
        return tuple(out)

    def image_keys(self, level: int) -> tuple:
        return tuple(sorted(b.image.key() for b in self.branches[level]
                            if b.image is not None))


def _rich_enough(field_size: int, p: int) -> bool:
    # inert persistence: for p = 2 the group needs a mu_4 above the step
    return p != 2 or (field_size - 1) % 4 == 0


def _step_branch(node: BranchNode, p: int, level: int) -> list[BranchNode]:
    if node.image is None:
        return [BranchNode(node.exp * p, None, node.count, node.tail_from)]
    img = node.image
    s = _sylow_valuation(img.field.size - 1, p)
    if s == 0:
        raise ValueError("mu_p missing from the residue field; "
                         "wild or malformed step")
    if group_p_valuation(img, p) < s:
        roots = element_pth_roots(img, p)
        assert len(roots) == p
        return [BranchNode(node.exp, rt, node.count) for rt in roots]
    if _rich_enough(img.field.size, p):
        return [BranchNode(node.exp * p, None, node.count, level)]
    nxt = RelField(img.field, img, p)
    return [BranchNode(node.exp * p, nxt.gen(), node.count)]


def trace_prime(tower: KummerTower, prime: CycloPrime) -> PrimeTrace:
    """Follow one base prime through every level; exact place data per level."""
    p, q = tower.p, prime.q
    if q == p:
        raise ValueError(f"q = {p} is wild here; trace undefined")
    if prime.m != tower.m:
        raise ValueError("prime lives over a different conductor")
    if tower.datum.v_q(q) % p != 0 or any(
            d.v_q(q) % p != 0 for d in tower.pre_steps):
        return PrimeTrace(tower, prime, True, ())
    a0 = tower.datum.unit_part_image(prime)
    field = a0.field
    count = 1
    growth: list[RelField] = []
    # pre-steps: a split multiplies the prime count (images of later data are
    # the same on every branch), an inert step grows the field
    for pre in tower.pre_steps:
        c = pre.unit_part_image(prime)
        for g in growth:
            c = g.embed(c)
        s = _sylow_valuation(field.size - 1, p)
        if s == 0:
            raise ValueError("mu_p missing from the residue field")
        if group_p_valuation(c, p) < s:
            count *= p
        else:
            field = RelField(field, c, p)
            growth.append(field)
            a0 = field.embed(a0)
    start = BranchNode(exp=_field_exp(field, prime), image=a0, count=count)
    levels = []
    nodes = [start]
    n_steps = tower.r + (1 if tower.base_is_step else 0)
    if not tower.base_is_step:
        levels.append(tuple(nodes))
    for step_i in range(n_steps):
        level_idx = step_i if tower.base_is_step else step_i + 1
        nxt = []
        for node in nodes:
            nxt.extend(_step_branch(node, p, level_idx))
        nodes = nxt
        levels.append(tuple(nodes))
    trace = PrimeTrace(tower, prime, False, tuple(levels))
    for j in range(tower.r + 1):
        total = sum(e * c for e, c in trace.places(j))
        assert total == prime.f * tower.level_degree(j), "degree sum mismatch"
    return trace


def _field_exp(field, prime: CycloPrime) -> int:
    e = prime.f
    f = field
    while isinstance(f, RelField):
        e *= f.p
        f = f.parent
    return e


# ---------------------------------------------------------------------------
# classification and densities

def classify_prime(step: KummerTower, prime: CycloPrime) -> DegreeClass:
    """Class of a base prime in the first datum step of `step`."""
    p, q = step.p, prime.q
    if q == p:
        raise ValueError("q = p: the residue criterion does not apply")
    if step.pre_steps:
        raise ValueError("classification is for bare steps; trace instead")
    if step.datum.v_q(q) % p != 0:
        return DegreeClass.RAMIFIED
    img = step.datum.unit_part_image(prime)
    s = _sylow_valuation(img.field.size - 1, p)
    if s == 0:
        raise ValueError("mu_p missing from the residue field")
    if group_p_valuation(img, p) < s:
        return DegreeClass.DEGREE1
    return DegreeClass.DEGREEP


def classify_rational(step: KummerTower, q: int):
    """(prime, class) for every base prime above q."""
    return tuple((P, classify_prime(step, P))
                 for P in cyclo_primes_above(step.m, q))


def _int_phi_roots(m: int, q: int) -> list[int]:
    """Roots of Phi_m mod q as ints, for q = 1 mod m (split case), sorted."""
    if m == 1:
        return [1]
    if m == 2:
        return [q - 1]
    for y in range(2, q):
        z = pow(y, (q - 1) // m, q)
        if all(pow(z, m // ell, q) != 1 for ell in sympy.primefactors(m)):
            return sorted(pow(z, a, q) for a in range(1, m)
                          if math.gcd(a, m) == 1)
    raise AssertionError("no element of full order found")


def _int_image(datum: Datum, q: int, zbar: int) -> int:
    acc = 0
    for c in reversed(datum.cyc.coeffs):
        acc = (acc * zbar + c.numerator * pow(c.denominator, -1, q)) % q
    acc = (acc * datum.rat.numerator * pow(datum.rat.denominator, -1, q)) % q
    return acc


@dataclass(frozen=True)
class DensityReport:
    degree1: int
    total: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.degree1, self.total) if self.total else Fraction(0)


def degree1_density(step: KummerTower, X: int) -> DensityReport:
    """Count unramified degree-1 places vs all unramified places, norm <= X.

    Degree-1 means residue degree 1 over the rationals: the base prime has
    f = 1 and the step splits.  Finitely many primes (q = p, conductor and
    datum support) are excluded.
    """
    p, m = step.p, step.m
    if step.pre_steps:
        raise ValueError("density is for bare steps")
    skip = step.datum.core_support() | {p}
    skip.update(sympy.primefactors(abs(step.datum.rat.numerator)))
    skip.update(sympy.primefactors(step.datum.rat.denominator))
    deg1 = total = 0
    for q in sympy.primerange(2, X + 1):
        if q in skip or (m > 1 and m % q == 0):
            continue
        f = sympy.n_order(q, m) if m > 1 else 1
        if q ** f > X:
            continue
        if f == 1:
            for zbar in _int_phi_roots(m, q):
                img = _int_image(step.datum, q, zbar)
                if pow(img, (q - 1) // p, q) == 1:
                    if q <= X:
                        deg1 += p
                        total += p
                elif q ** p <= X:
                    total += 1
        else:
            for P in cyclo_primes_above(m, q):
                cls = classify_prime(step, P)
                if cls is DegreeClass.DEGREE1 and q ** f <= X:
                    total += p
                elif cls is DegreeClass.DEGREEP and q ** (f * p) <= X:
                    total += 1
    return DensityReport(deg1, total)


def places_upto(m: int, X: int):
    """Unramified places of Q(zeta_m) with norm <= X as (q, f, count)."""
    out = []
    phi = int(sympy.totient(m))
    for q in sympy.primerange(2, X + 1):
        if m > 1 and m % q == 0:
            continue
        f = sympy.n_order(q, m) if m > 1 else 1
        if q ** f <= X:
            out.append((q, f, phi // f))
    return out


def quartic_tower_exponents(rat: Fraction, r: int, q: int):
    """Residue degrees over Q at level r of the tower Q(i, rat^(1/2^r)).

    Pure integer bookkeeping, no residue fields: above Q(i) every level sits
    in a cyclic residue group of 2-part 2^(s+k) after k inert steps (the
    base field contains i, so s >= 2 and each doubling adds exactly one to
    the 2-part).  A branch is tracked as (k, u) with u the 2-valuation of
    the order of the datum's image: u < s+k splits into two branches at
    u+1 (u=0 splits into u=0 and u=1), u = s+k goes inert for good.
    Returns sorted (degree, count) pairs; count is places above q.
    """
    rat = Fraction(rat)
    if q == 2 or rat.numerator % q == 0 or rat.denominator % q == 0:
        raise ValueError(f"q={q} meets the tower's ramification")
    f4 = 1 if q % 4 == 1 else 2
    d = rat.numerator * pow(rat.denominator, -1, q) % q
    s = _sylow_valuation(q ** f4 - 1, 2)
    branches = {(0, _sylow_valuation(int(sympy.n_order(d, q)), 2)): 1}
    for _ in range(r):
        nxt = {}

        def bump(k, u, c):
            nxt[(k, u)] = nxt.get((k, u), 0) + c

        for (k, u), c in branches.items():
            if u == 0:
                bump(k, 0, c)
                bump(k, 1, c)
            elif u < s + k:
                bump(k, u + 1, 2 * c)
            else:
                bump(k + 1, u + 1, c)
        branches = nxt
    out = {}
    for (k, _), c in branches.items():
        f = f4 << k
        out[f] = out.get(f, 0) + c
    return tuple(sorted(out.items()))


def place_profile(tower: KummerTower, q: int):
    """All residue degrees over Q above q, as sorted (degree, count) pairs.

    Pure-integer paths where the tower shape allows them -- a bare rational
    quadratic, a root-of-unity chain (whose top is cyclotomic), a rational
    quartic tower -- and the level-by-level residue trace otherwise.
    """
    one = tower.datum.cyc.field.one()
    rational = tower.datum.cyc == one and not tower.pre_steps
    if (rational and tower.m == 1 and tower.r == 1 and tower.p == 2
            and not tower.base_is_step and q != 2):
        num = tower.datum.rat.numerator * tower.datum.rat.denominator
        if num % q == 0:
            raise ValueError(f"q={q} meets the tower's ramification")
        return ((2, 1),) if sympy.jacobi_symbol(num, q) == -1 else ((1, 2),)
    if (tower.base_is_step and tower.m == tower.p ** 2
            and tower.datum.rat == 1 and q != tower.p
            and tower.datum.cyc == tower.datum.cyc.field.zeta()):
        modulus = tower.p ** (tower.r + 3)
        f = int(sympy.n_order(q, modulus))
        return ((f, int(sympy.totient(modulus)) // f),)
    if rational and tower.m == 4 and tower.p == 2 and not tower.base_is_step:
        mult = 2 if q % 4 == 1 else 1
        return tuple((f, c * mult) for f, c in
                     quartic_tower_exponents(tower.datum.rat, tower.r, q))
    agg: dict[int, int] = {}
    for P in cyclo_primes_above(tower.m, q):
        for e, c in trace_prime(tower, P).places(tower.r):
            agg[e] = agg.get(e, 0) + c
    return tuple(sorted(agg.items()))


def norm_subgroup(field_desc, N: int, bound: int = DEFAULT_NORM_BOUND) -> frozenset:
    """Subgroup of (Z/N)^* generated by place norms up to `bound`.

    `field_desc` is a conductor (cyclotomic field) or a single-step tower.
    The cutoff is operational: generators are collected from primes <= bound.
    """
    gens = set()
    if isinstance(field_desc, int):
        m = field_desc
        for q in sympy.primerange(2, bound + 1):
            if N % q == 0 or (m > 1 and m % q == 0):
                continue
            f = sympy.n_order(q, m) if m > 1 else 1
            gens.add(pow(q, f, N))
    else:
        step = field_desc
        one = step.datum.cyc.field.one()
        zeta_chain = (step.base_is_step and step.m == step.p ** 2
                      and step.datum.rat == 1
                      and step.datum.cyc == step.datum.cyc.field.zeta())
        quartic = (step.p == 2 and step.m == 4 and not step.pre_steps
                   and not step.base_is_step and step.datum.cyc == one)
        skip = step.datum.core_support() | {step.p}
        skip.update(sympy.primefactors(abs(step.datum.rat.numerator)))
        skip.update(sympy.primefactors(step.datum.rat.denominator))
        for pre in step.pre_steps:
            skip |= pre.core_support()
            skip.update(sympy.primefactors(abs(pre.rat.numerator)))
            skip.update(sympy.primefactors(pre.rat.denominator))
        for q in sympy.primerange(2, bound + 1):
            if N % q == 0 or q in skip or (step.m > 1 and step.m % q == 0):
                continue
            if zeta_chain:
                # every level is cyclotomic: one order computation
                f = sympy.n_order(q, step.p ** (step.r + 3))
                gens.add(pow(q, f, N))
            elif quartic:
                for f, _ in quartic_tower_exponents(step.datum.rat,
                                                    step.r, q):
                    gens.add(pow(q, f, N))
            elif step.pre_steps or step.base_is_step or step.r != 1:
                for P in cyclo_primes_above(step.m, q):
                    for norm in trace_prime(step, P).norms(step.r):
                        gens.add(norm % N)
            else:
                for P, cls in classify_rational(step, q):
                    if cls is DegreeClass.DEGREE1:
                        gens.add(pow(q, P.f, N))
                    elif cls is DegreeClass.DEGREEP:
                        gens.add(pow(q, P.f * step.p, N))
    group = {1 % N}
    frontier = [1 % N]
    while frontier:
        x = frontier.pop()
        for g in gens:
            y = (x * g) % N
            if y not in group:
                group.add(y)
                frontier.append(y)
    return frozenset(group)


# ---------------------------------------------------------------------------
# chain certificates

@dataclass(frozen=True)
class InertChainCertificate:
    """One prime staying inert at every level, with doubling norms.

    order_valuation = sylow_valuation certifies the level-0 step is inert;
    persistence up the chain follows from the p-part richness recorded here.
    """

    tower: KummerTower
    prime: CycloPrime
    norms: tuple[int, ...]
    order_valuation: int
    sylow_valuation: int
    branch_count: int

    @property
    def unique_lift(self) -> bool:
        return self.branch_count == 1


def _inert_cert_at(tower: KummerTower, P: CycloPrime) -> InertChainCertificate:
    p, q = tower.p, P.q
    if q == p:
        raise ValueError("wild prime")
    if tower.datum.v_q(q) % p != 0:
        raise ValueError("ramified in the datum")
    count = 1
    for pre in tower.pre_steps:
        img = pre.unit_part_image(P)
        s0 = _sylow_valuation(img.field.size - 1, p)
        if group_p_valuation(img, p) >= s0:
            raise ValueError("inert pre-step forces a split higher up")
        count *= p
    a0 = tower.datum.unit_part_image(P)
    v = group_p_valuation(a0, p)
    s = _sylow_valuation(a0.field.size - 1, p)
    if s == 0:
        raise ValueError("mu_p missing from the residue field")
    if v < s:
        raise ValueError(f"datum image is a {p}-th power at this prime")
    if tower.stacked_steps >= 2 and not _rich_enough(a0.field.size, p):
        raise ValueError("p-part of the residue group too small to persist")
    Q = P.norm
    norms = tuple(Q ** tower.root_exponent(j) for j in range(tower.r + 1))
    return InertChainCertificate(tower, P, norms, v, s, count)


def inert_chain_certificate(tower: KummerTower, at) -> InertChainCertificate:
    """Certify an inert chain at `at` (a base prime or a rational prime)."""
    if isinstance(at, CycloPrime):
        return _inert_cert_at(tower, at)
    reasons = []
    for P in cyclo_primes_above(tower.m, at):
        try:
            return _inert_cert_at(tower, P)
        except ValueError as e:
            reasons.append(f"zbar={P.zbar}: {e}")
    raise ValueError(f"no prime above {at} certifies an inert chain: "
                     + "; ".join(reasons))


def fold_degree_multisets(A, B):
    """Residue degrees of a compositum place set from two unramified sets.

    Entries are (degree, count); F_{q^a} (x) F_{q^b} is gcd(a, b) copies of
    F_{q^lcm(a, b)}.
    """
    agg: dict[int, int] = {}
    for a, ca in A:
        for b, cb in B:
            g = math.gcd(a, b)
            d = a * b // g
            agg[d] = agg.get(d, 0) + ca * cb * g
    return tuple(sorted(agg.items()))


@dataclass(frozen=True)
class CompositumBound:
    certificate: InertChainCertificate
    min_norm: int
    folded: tuple | None


def compositum_min_norm(tower: KummerTower, q: int,
                        other_degrees=None) -> CompositumBound:
    """Lower bound for norms above q in the top level joined with anything.

    Any place of a compositum has degree divisible by the inert chain's top
    degree, so the chain's final norm bounds the compositum's from below;
    with a second degree multiset given, the exact fold is returned too.
    """
    cert = inert_chain_certificate(tower, q)
    top_exp = cert.prime.f * tower.root_exponent(tower.r)
    folded = None
    if other_degrees is not None:
        folded = fold_degree_multisets(((top_exp, cert.branch_count),),
                                       tuple(other_degrees))
        assert all(d % top_exp == 0 for d, _ in folded)
    return CompositumBound(cert, cert.norms[-1], folded)


# ---------------------------------------------------------------------------
# lattice classification

@dataclass(frozen=True)
class SubfieldClassification:
    q: int
    coords: tuple[int, int]
    label: int
    datum: Datum


def inert_prime_subfield(lattice: PPSubfieldLattice, q: int) -> SubfieldClassification:
    """For q inert in K: the unique lattice subfield where q splits."""
    if q in lattice.bad_primes():
        raise ValueError(f"q = {q} is excluded for this lattice")
    primes = cyclo_primes_above(lattice.m, q)
    coords = [lattice.frobenius_coordinates(P) for P in primes]
    x, y = coords[0]
    p = lattice.p
    for cx, cy in coords[1:]:
        # conjugate primes give proportional coordinates
        if {((a * x) % p, (a * y) % p) for a in range(1, p)} != \
           {((a * cx) % p, (a * cy) % p) for a in range(1, p)}:
            raise AssertionError("conjugate primes disagree")
    if x == 0 and y == 0:
        raise ValueError(f"q = {q} splits completely in the compositum")
    if x == 0:
        raise ValueError(f"q = {q} splits in K; inert hypothesis fails")
    hit = None
    for tag in lattice.subfields:
        if (x, y) in tag.subgroup:
            hit = tag
            break
    assert hit is not None and hit.label >= 1
    # cross-check by direct residue tests
    P = primes[0]
    assert lattice.kummer_exponent(hit.datum, P) == 0
    assert lattice.kummer_exponent(lattice.K_datum, P) != 0
    return SubfieldClassification(q, (x, y), hit.label, hit.datum)


@dataclass(frozen=True)
class TopSplitCertificate:
    q: int
    coords: tuple[int, int]
    k_class: DegreeClass
    primes_in_top: int
    relative_degree: int


def inert_splits_in_top(lattice: PPSubfieldLattice, q: int) -> TopSplitCertificate:
    """A prime inert in K splits into p primes of the full compositum.

    The Galois group of the compositum has exponent p, so no Frobenius has
    order p^2; an order check confirms the K-datum image cannot stay a
    non-power over the degree-p residue extension's base.
    """
    if q in lattice.bad_primes():
        raise ValueError(f"q = {q} is excluded for this lattice")
    p = lattice.p
    P = cyclo_primes_above(lattice.m, q)[0]
    x, y = lattice.frobenius_coordinates(P)
    if x == 0:
        raise ValueError(f"q = {q} is not inert in K")
    # over F_{Q^p} the group's p-part strictly grows, so the F-datum image
    # (order unchanged under embedding) must become a p-th power
    imgF = lattice.F_datum.unit_part_image(P)
    vF = group_p_valuation(imgF, p)
    sF = _sylow_valuation(P.norm - 1, p)
    s_up = _sylow_valuation(P.norm ** p - 1, p)
    assert vF <= sF < s_up
    return TopSplitCertificate(q, (x, y), DegreeClass.DEGREEP, p, 1)
