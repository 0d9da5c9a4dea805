"""Nested chains of degree-p Kummer steps over a cyclotomic base.

A tower is described by a base conductor m, an odd-or-even prime p, a height
r, and a single datum alpha: level j adjoins alpha^(1/p^j) (or 1/p^(j+1)
when the base itself is already counted as the first step).  Optional
pre-steps adjoin p-th roots of auxiliary constants before the chain starts,
which is how bases like Q(i) or k(mu_{p^2}) are reached from a smaller
conductor.

Certification is by witnesses, never by assumption: a chain is nested (each
step degree p, consecutive double-steps cyclic of degree p^2) exactly when
mu_{p^2} sits below the stacked part and the datum stays out of the p-th
powers of the base, and the latter is certified by a residue witness prime
or an exact factorisation, with InconclusiveError when neither lands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import sympy

from .cyclotomic import (
    DEFAULT_WITNESS_BOUND,
    CycloPrime,
    Datum,
    InconclusiveError,
    PowerCertificate,
    require_not_pth_power,
)

__all__ = [
    "KummerTower", "ChainLevel", "NestednessCertificate", "RamificationProfile",
    "build_nested_chain", "verify_nested", "modify_datum",
    "ramification_profile", "fresh_prime_plan",
]


@dataclass(frozen=True)
class KummerTower:
    """Chain data: levels j = 0..r over Q(zeta_m) with pre-adjoined roots."""

    m: int
    p: int
    r: int
    datum: Datum
    base_is_step: bool = False
    pre_steps: tuple[Datum, ...] = ()

    def __post_init__(self):
        if not sympy.isprime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        if self.r < 0:
            raise ValueError("height must be >= 0")
        if self.datum.m != self.m:
            raise ValueError("datum conductor differs from base conductor")
        if self.datum.is_zero():
            raise ValueError("zero datum")
        for d in self.pre_steps:
            if d.m != self.m or d.is_zero():
                raise ValueError("bad pre-step datum")

    @property
    def stacked_steps(self) -> int:
        """Number of datum-root steps piled on top of each other."""
        return self.r + (1 if self.base_is_step else 0)

    def root_exponent(self, j: int) -> int:
        """P_j with level j = base field joined with datum^(1/P_j)."""
        if not 0 <= j <= self.r:
            raise ValueError(f"level {j} outside 0..{self.r}")
        return self.p ** (j + 1) if self.base_is_step else self.p ** j

    def level_degree(self, j: int) -> int:
        """Degree of level j over Q(zeta_m)."""
        return self.p ** len(self.pre_steps) * self.root_exponent(j)


@dataclass(frozen=True)
class ChainLevel:
    index: int
    root_exponent: int
    rel_degree: int  # over Q(zeta_m)


def build_nested_chain(tower: KummerTower) -> tuple[ChainLevel, ...]:
    return tuple(ChainLevel(j, tower.root_exponent(j), tower.level_degree(j))
                 for j in range(tower.r + 1))


def _pre_step_gives_mu(d: Datum, p: int) -> bool:
    """Does adjoining d^(1/p) supply mu_{p^2} over the base?"""
    val = d.value()
    if p == 2:
        # need sqrt(-1): value = -(square) up to rational squares
        if not val.is_rational():
            return False
        neg = -val.as_fraction()
        if neg <= 0:
            return False
        for part in (neg.numerator, neg.denominator):
            root = sympy.integer_nthroot(part, 2)[0]
            if root * root != part:
                return False
        return True
    # p odd: need zeta_{p^2} = (primitive p-th root)^{1/p}
    f = d.cyc.field
    if d.rat not in (Fraction(1), Fraction(-1)):
        return False
    if f.m % p != 0:
        return False
    z_p = f.zeta() ** (f.m // p)
    probe = val
    for _ in range(1, p):
        probe = probe * z_p
        if probe == f.one():
            return True
    return val == f.one() and False


def _mu_p2_source(tower: KummerTower) -> str:
    p, m = tower.p, tower.m
    if tower.stacked_steps < 2:
        return "not-needed"
    if p == 2:
        if m % 4 == 0:
            return "conductor"
    elif m % (p * p) == 0:
        return "conductor"
    if any(_pre_step_gives_mu(d, p) for d in tower.pre_steps):
        return "pre-step"
    raise ValueError(
        f"chain not cyclic at step 2: mu_{p * p} unavailable over the base "
        f"(conductor {m}, no suitable pre-step)")


def _kummer_lines(tower: KummerTower):
    """One datum per line of the Kummer subgroup spanned by datum and pre-steps.

    Each must avoid the p-th powers of Q(zeta_m) for the composite chain to
    have full degree; the line through the datum alone (index 0) certifies
    irreducibility of the main chain over the enlarged base.
    """
    p = tower.p
    gens = (tower.datum,) + tower.pre_steps
    k = len(gens)
    lines = []
    seen = set()
    for idx in range(1, p ** k):
        vec = []
        t = idx
        for _ in range(k):
            vec.append(t % p)
            t //= p
        lead = next(v for v in vec if v)
        inv = pow(lead, -1, p)
        canon = tuple((v * inv) % p for v in vec)
        if canon in seen:
            continue
        seen.add(canon)
        cyc = gens[0].cyc.field.one()
        rat = Fraction(1)
        for g, e in zip(gens, canon):
            if e:
                cyc = cyc * g.cyc ** e
                rat *= g.rat ** e
        lines.append((canon, Datum(cyc, rat)))
    return lines


@dataclass(frozen=True)
class NestednessCertificate:
    tower: KummerTower
    chain: tuple[ChainLevel, ...]
    mu_source: str
    witness_q: int | None
    witness_prime: CycloPrime | None
    line_witnesses: tuple[tuple[tuple[int, ...], int | None], ...] = field(
        default=())

    @property
    def chain_degrees(self) -> tuple[int, ...]:
        return tuple(level.rel_degree for level in self.chain)


def verify_nested(tower: KummerTower,
                  bound: int = DEFAULT_WITNESS_BOUND) -> NestednessCertificate:
    """Certify the chain is nested with full degree, or fail loudly.

    Raises ValueError for structural failures (missing mu_{p^2}, a datum or
    datum/pre-step combination that is a p-th power) and InconclusiveError
    when a certificate search exhausts its bound.  With mu_4 in the base the
    p = 2 quartic caveat is vacuous (-4 is already a fourth power there).
    """
    mu_source = _mu_p2_source(tower)
    main_cert: PowerCertificate | None = None
    line_log = []
    for canon, d in _kummer_lines(tower):
        cert = require_not_pth_power(d, tower.p, bound)
        line_log.append((canon, cert.witness_q))
        if canon == (1,) + (0,) * len(tower.pre_steps):
            main_cert = cert
    assert main_cert is not None
    return NestednessCertificate(
        tower=tower,
        chain=build_nested_chain(tower),
        mu_source=mu_source,
        witness_q=main_cert.witness_q,
        witness_prime=main_cert.witness_prime,
        line_witnesses=tuple(line_log),
    )


def modify_datum(datum: Datum, multipliers) -> Datum:
    """Scale the datum by prod(l^e) for (l, e) pairs, keeping the core."""
    out = datum
    for ell, e in multipliers:
        if not sympy.isprime(ell):
            raise ValueError(f"multiplier base {ell} is not prime")
        if e < 1:
            raise ValueError("multiplier exponents must be >= 1")
        out = out.scale(Fraction(ell) ** e)
    return out


def fresh_prime_plan(used: set[int], p: int, r: int,
                     split_modulus: int | None = None):
    """Multipliers ((l_1, p^1), ..., (l_r, p^r)) with fresh least primes.

    Each l_i is the least prime avoiding `used`, p, and earlier choices;
    with split_modulus set, candidates are restricted to l = 1 mod it (used
    to keep the auxiliary primes split in a designated cyclotomic layer).
    """
    taken = set(used) | {p}
    plan = []
    for i in range(1, r + 1):
        ell = None
        q = 1
        while ell is None:
            q = sympy.nextprime(q)
            if q in taken:
                continue
            if split_modulus is not None and q % split_modulus != 1:
                continue
            ell = q
        taken.add(ell)
        plan.append((ell, p ** i))
    return tuple(plan)


@dataclass(frozen=True)
class RamificationProfile:
    """Tame ramification of q along the chain, read from the datum valuation."""

    q: int
    t: int                      # v_q(datum)
    entries: tuple[int, ...]    # e at levels 0..r
    wild: bool                  # q = p: tame formula not trusted
    pre_ramified: bool          # q meets a pre-step datum

    def first_ramified_level(self) -> int | None:
        for j, e in enumerate(self.entries):
            if e > 1:
                return j
        return None


def ramification_profile(tower: KummerTower, q: int) -> RamificationProfile:
    if not sympy.isprime(q):
        raise ValueError(f"q = {q} is not prime")
    t = tower.datum.v_q(q)  # raises on core-support primes
    entries = tuple(
        tower.root_exponent(j) // math.gcd(tower.root_exponent(j), abs(t))
        for j in range(tower.r + 1))
    pre_hit = False
    for d in tower.pre_steps:
        if q in d.core_support():
            pre_hit = True
            continue
        if d.v_q(q) % tower.p != 0:
            pre_hit = True
    return RamificationProfile(q=q, t=t, entries=entries,
                               wild=(q == tower.p), pre_ramified=pre_hit)
