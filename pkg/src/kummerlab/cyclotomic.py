"""Exact arithmetic in Q(zeta_m) and its residue data at unramified primes.

Elements are Fraction vectors of length phi(m) reduced mod the m-th
cyclotomic polynomial.  Primes above an unramified rational q are represented
by residue data only: the pair (q, zbar) with zbar a root of Phi_m in
F_{q^f}, f = ord(q mod m).  One prime per Frobenius orbit of roots, orbit
representative and ordering fixed by the canonical element order of the
residue field.  No ideal arithmetic anywhere.

A Datum is a cyclotomic element times a rational scalar, kept separate so
that q-adic valuations of planner-modified data can be read off the rational
part exactly (the cyclotomic core is checked to be a q-unit via its norm).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import sympy

from .finitefield import FFElement, is_pth_power, make_ext_field

DEFAULT_WITNESS_BOUND = 10 ** 4
NORM_FACTOR_BOUND = 10 ** 12


class InconclusiveError(RuntimeError):
    """A certificate search exhausted its bound without a verdict."""


@lru_cache(maxsize=None)
def cyclotomic_poly_coeffs(m: int) -> tuple[int, ...]:
    """Coefficients of Phi_m, low degree first."""
    poly = sympy.cyclotomic_poly(m, sympy.Symbol("x"))
    cs = sympy.Poly(poly, sympy.Symbol("x")).all_coeffs()
    return tuple(int(c) for c in reversed(cs))


@lru_cache(maxsize=None)
def CycloField(m: int) -> "_CycloField":
    if m < 1:
        raise ValueError("conductor must be >= 1")
    if m % 2 == 0 and m % 4 != 0 and m > 2:
        # Q(zeta_2k) = Q(zeta_k) for odd k; insist on the canonical conductor
        raise ValueError(f"conductor {m} is not canonical (use {m // 2})")
    return _CycloField(m)


class _CycloField:
    """Q(zeta_m).  Obtain through the cached CycloField(m) constructor."""

    def __init__(self, m):
        self.m = m
        phi = cyclotomic_poly_coeffs(m)
        self.degree = len(phi) - 1
        self._phi = phi
        # t^j mod Phi_m for j = 0..m (covers Galois exponent folding)
        rows = []
        cur = [Fraction(1)] + [Fraction(0)] * (self.degree - 1)
        for _ in range(max(m + 1, 2 * self.degree)):
            rows.append(tuple(cur))
            cur = self._shift(cur)
        self._power_rows = rows

    def _shift(self, vec):
        # multiply by t, reduce by the monic Phi_m
        out = [Fraction(0)] + list(vec[:-1])
        top = vec[-1]
        if top:
            for i in range(self.degree):
                out[i] -= top * self._phi[i]
        return out

    def element(self, coeffs) -> "CycloElement":
        if isinstance(coeffs, (int, Fraction)):
            coeffs = (coeffs,)
        vec = [Fraction(0)] * self.degree
        for j, c in enumerate(coeffs):
            c = Fraction(c)
            if c:
                row = self._power_rows[j % self.m] if j >= self.degree else None
                if row is None:
                    vec[j] += c
                else:
                    for i, r in enumerate(row):
                        vec[i] += c * r
        return CycloElement(self, tuple(vec))

    def zero(self):
        return self.element(())

    def one(self):
        return self.element((1,))

    def zeta(self):
        return self.element((0, 1)) if self.degree > 1 else self.element(
            (1,) if self.m == 1 else (-1,))

    def galois(self, x: "CycloElement", a: int) -> "CycloElement":
        """sigma_a: zeta -> zeta^a for gcd(a, m) = 1."""
        if sympy.gcd(a, self.m) != 1:
            raise ValueError(f"{a} not a unit mod {self.m}")
        vec = [Fraction(0)] * self.degree
        for j, c in enumerate(x.coeffs):
            if c:
                row = self._power_rows[(a * j) % self.m]
                for i, r in enumerate(row):
                    vec[i] += c * r
        return CycloElement(self, tuple(vec))

    def units(self):
        return [a for a in range(1, self.m + 1) if sympy.gcd(a, self.m) == 1] \
            if self.m > 1 else [1]

    def __repr__(self):
        return f"CycloField({self.m})"


class CycloElement:
    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        self.field = field
        self.coeffs = coeffs

    def __add__(self, other):
        other = self._coerce(other)
        return CycloElement(self.field, tuple(a + b for a, b in
                                              zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        other = self._coerce(other)
        return CycloElement(self.field, tuple(a - b for a, b in
                                              zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        return CycloElement(self.field, tuple(-a for a in self.coeffs))

    def __mul__(self, other):
        other = self._coerce(other)
        f = self.field
        deg = f.degree
        conv = [Fraction(0)] * (2 * deg - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        conv[i + j] += a * b
        vec = list(conv[:deg])
        for j in range(deg, 2 * deg - 1):
            c = conv[j]
            if c:
                row = f._power_rows[j]
                for i, r in enumerate(row):
                    vec[i] += c * r
        return CycloElement(f, tuple(vec))

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative powers not supported on elements")
        out = self.field.one()
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def _coerce(self, other):
        if isinstance(other, CycloElement):
            if other.field is not self.field:
                raise ValueError("elements of different cyclotomic fields")
            return other
        if isinstance(other, (int, Fraction)):
            return self.field.element((other,))
        return NotImplemented

    __radd__ = __add__
    __rmul__ = __mul__

    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def is_rational(self):
        return all(c == 0 for c in self.coeffs[1:])

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("not rational")
        return self.coeffs[0]

    def conjugate(self):
        return self.field.galois(self, -1 % self.field.m if self.field.m > 1 else 1)

    def norm(self) -> Fraction:
        """Product of all Galois conjugates (absolute norm to Q)."""
        out = self.field.one()
        for a in self.field.units():
            out = out * self.field.galois(self, a)
        return out.as_fraction()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.field.element((other,))
        return (isinstance(other, CycloElement) and self.field is other.field
                and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.field.m, self.coeffs))

    def __repr__(self):
        out = ""
        for i, c in enumerate(self.coeffs):
            if not c:
                continue
            sign = "-" if c < 0 else ("+" if out else "")
            mag = abs(c)
            if i == 0:
                body = str(mag)
            else:
                z = "z" if i == 1 else f"z^{i}"
                body = z if mag == 1 else f"{mag}*{z}"
            out += f"{sign} {body} " if out else f"{sign}{body} "
        return out.strip() if out else "0"


def frobenius(m: int, q: int) -> int:
    """Frobenius at q as the residue q mod m acting by zeta -> zeta^q."""
    if m > 1 and m % q == 0:
        raise ValueError(f"q = {q} ramifies in conductor {m}")
    return q % m if m > 1 else 1


@lru_cache(maxsize=None)
def cyclo_primes_above(m: int, q: int) -> tuple["CycloPrime", ...]:
    """Primes above unramified q, one per Frobenius orbit of Phi_m roots."""
    if not sympy.isprime(q):
        raise ValueError(f"q = {q} is not prime")
    if m > 1 and m % q == 0:
        raise ValueError(f"q = {q} ramifies in conductor {m}")
    if m <= 2:
        field = make_ext_field(q, 1)
        zbar = field.one() if m == 1 else -field.one()
        return (CycloPrime(m, q, 1, zbar),)
    f = sympy.n_order(q, m)
    field = make_ext_field(q, f)
    n_ = field.size - 1
    assert n_ % m == 0
    # first element (subfield elements last: they are never generators for
    # f > 1) whose (n/m)-th power has exact order m
    root = None
    pf = sympy.primefactors(m)
    start = q ** (f - 1) if f > 1 else 1
    for idx in itertools.chain(range(start, field.size), range(1, start)):
        y = field.from_index(idx) ** (n_ // m)
        if all(y ** (m // ell) != field.one() for ell in pf):
            root = y
            break
    assert root is not None
    prim = {}
    for a in range(1, m):
        if sympy.gcd(a, m) == 1:
            z = root ** a
            prim[z.coeffs] = z
    orbits = []
    seen = set()
    for key in sorted(prim, key=lambda c: prim[c].key()):
        if key in seen:
            continue
        z = prim[key]
        orbit = []
        w = z
        while w.coeffs not in seen:
            seen.add(w.coeffs)
            orbit.append(w)
            w = w ** q
        orbits.append(min(orbit, key=lambda e: e.key()))
    orbits.sort(key=lambda e: e.key())
    assert len(orbits) * f == len(prim)
    return tuple(CycloPrime(m, q, f, z) for z in orbits)


@dataclass(frozen=True)
class CycloPrime:
    """A prime of Q(zeta_m) above q as residue data (q, zbar)."""

    m: int
    q: int
    f: int
    zbar: FFElement

    @property
    def norm(self) -> int:
        return self.q ** self.f

    def residue_field(self):
        return self.zbar.field

    def reduce(self, x: CycloElement) -> FFElement:
        """Image of x in the residue field; error if q divides a denominator."""
        if x.field.m != self.m:
            raise ValueError("conductor mismatch")
        field = self.zbar.field
        acc = field.zero()
        zpow = field.one()
        for c in x.coeffs:
            if c:
                if c.denominator % self.q == 0:
                    raise ValueError(f"denominator divisible by q = {self.q}")
                num = c.numerator % self.q
                den_inv = pow(c.denominator % self.q, -1, self.q)
                acc = acc + zpow * ((num * den_inv) % self.q)
            zpow = zpow * self.zbar
        return acc

    def __repr__(self):
        return f"CycloPrime(m={self.m}, q={self.q}, f={self.f}, zbar={self.zbar})"


# ---------------------------------------------------------------------------
# Kummer data and p-th-power certificates

@dataclass(frozen=True)
class Datum:
    """alpha = rat * cyc with the rational scalar kept separate.

    The cyclotomic core is treated as a unit away from its norm's support;
    valuations of planner multipliers live in `rat` and are exact.
    """

    cyc: CycloElement
    rat: Fraction = Fraction(1)

    @staticmethod
    def of(value, m: int = 1, rat=Fraction(1)) -> "Datum":
        field = CycloField(m)
        if isinstance(value, CycloElement):
            return Datum(value, Fraction(rat))
        return Datum(field.one(), Fraction(value) * Fraction(rat))

    @property
    def m(self) -> int:
        return self.cyc.field.m

    def value(self) -> CycloElement:
        return self.cyc * self.rat

    def is_zero(self):
        return self.rat == 0 or self.cyc.is_zero()

    def scale(self, r) -> "Datum":
        return Datum(self.cyc, self.rat * Fraction(r))

    def core_support(self) -> set[int]:
        """Primes where valuations cannot be read off the rational part."""
        bad = set()
        n = self.cyc.norm()
        for v in (n.numerator, n.denominator):
            bad.update(sympy.primefactors(abs(v)))
        for c in self.cyc.coeffs:
            bad.update(sympy.primefactors(c.denominator))
        return bad

    def v_q(self, q: int) -> int:
        """q-adic valuation, defined only away from the core support."""
        if q in self.core_support():
            raise ValueError(f"valuation at q = {q} not readable from the rational part")
        v = 0
        num, den = self.rat.numerator, self.rat.denominator
        while num % q == 0:
            num //= q
            v += 1
        while den % q == 0:
            den //= q
            v -= 1
        return v

    def unit_part_image(self, prime: CycloPrime) -> FFElement:
        """Image of alpha / q^{v_q(alpha)} in the residue field at `prime`."""
        q = prime.q
        v = self.v_q(q)
        rat = self.rat / Fraction(q) ** v
        img = prime.reduce(self.cyc)
        num = rat.numerator % q
        den_inv = pow(rat.denominator % q, -1, q)
        scaled = img * ((num * den_inv) % q)
        if scaled.is_zero():
            raise ValueError(f"zero image at q = {q}")
        return scaled

    def __repr__(self):
        if self.rat == 1:
            return f"Datum({self.cyc!r})"
        return f"Datum({self.rat} * ({self.cyc!r}))"


def _fraction_is_pth_power(r: Fraction, p: int) -> bool:
    if r == 0:
        return True
    if p % 2 == 0 and r < 0:
        return False
    for part in (abs(r.numerator), r.denominator):
        root = sympy.integer_nthroot(part, p)[0]
        if root ** p != part:
            return False
    return True


def exact_pth_power_in_rationals(d: Datum, p: int):
    """Exact decision for rational data, norm-based partial decision otherwise.

    Returns True / False / None (None = exact route inconclusive).
    """
    val = d.value()
    if val.is_rational():
        return _fraction_is_pth_power(val.as_fraction(), p)
    n = val.norm()
    if max(abs(n.numerator), n.denominator) > NORM_FACTOR_BOUND:
        return None
    if not _fraction_is_pth_power(abs(n), p):
        return False  # norm of a p-th power is a p-th power
    return None


def exact_root_in_extension(d: Datum, p: int):
    """Factor x^p - d over Q(zeta_m); True/False when feasible, else None."""
    m = d.m
    deg = d.cyc.field.degree
    if deg * p > 30:
        return None
    x = sympy.Symbol("x")
    z = sympy.exp(2 * sympy.pi * sympy.I / m)
    expr = sympy.Integer(0)
    for i, c in enumerate(d.value().coeffs):
        if c:
            expr += sympy.Rational(c.numerator, c.denominator) * z ** i
    try:
        ext = [z] if m > 2 else []
        poly = sympy.Poly(x ** p - sympy.expand(expr), x, extension=ext or None,
                          domain=None if ext else "QQ")
        factors = poly.factor_list()[1]
    except Exception:
        return None
    return any(f.degree() == 1 for f, _ in factors)


@dataclass(frozen=True)
class PowerCertificate:
    """Outcome of a non-p-th-power search for a datum."""

    datum: Datum
    p: int
    witness_q: int | None        # prime with a non-p-th-power reduction
    witness_prime: CycloPrime | None
    is_pth_power: bool           # True when detected to be a p-th power

    @property
    def certified_not_power(self):
        return self.witness_q is not None


def datum_power_certificate(d: Datum, p: int,
                            bound: int = DEFAULT_WITNESS_BOUND) -> PowerCertificate:
    """Certify that d is not a p-th power by a residue witness <= bound.

    Raises InconclusiveError when no witness is found and the exact route
    cannot settle the question either.  Never defaults.
    """
    if d.is_zero():
        raise ValueError("zero datum")
    exact = exact_pth_power_in_rationals(d, p)
    if exact is True:
        return PowerCertificate(d, p, None, None, True)
    skip = d.core_support() | {p}
    skip.update(sympy.primefactors(abs(d.rat.numerator)))
    skip.update(sympy.primefactors(d.rat.denominator))
    m = d.m
    for q in sympy.primerange(2, bound + 1):
        if q in skip or (m > 1 and m % q == 0):
            continue
        rat_mod = (d.rat.numerator * pow(d.rat.denominator, -1, q)) % q
        for prime in cyclo_primes_above(m, q):
            img = prime.reduce(d.cyc) * rat_mod
            if not is_pth_power(img, p):
                return PowerCertificate(d, p, q, prime, False)
    if exact is False:
        raise InconclusiveError(
            f"datum is certainly not a {p}-th power (norm test) "
            f"but no witness prime <= {bound} was found")
    if exact_root_in_extension(d, p) is True:
        return PowerCertificate(d, p, None, None, True)
    raise InconclusiveError(
        f"no certifying prime below {bound}; datum may be a {p}-th power")


def require_not_pth_power(d: Datum, p: int,
                          bound: int = DEFAULT_WITNESS_BOUND) -> PowerCertificate:
    """Like datum_power_certificate but a detected p-th power is an error."""
    cert = datum_power_certificate(d, p, bound)
    if cert.is_pth_power:
        raise ValueError(f"datum {d!r} is a {p}-th power")
    return cert


# ---------------------------------------------------------------------------
# (p, p)-subfield lattice

@dataclass(frozen=True)
class SubfieldTag:
    """One index-p subfield of the compositum, as Kummer data over the base."""

    label: int
    datum: Datum
    subgroup: tuple[tuple[int, int], ...]  # the H_i it is fixed by


class PPSubfieldLattice:
    """E = k(a_K^{1/p}, a_F^{1/p}) with its p+1 index-p subfields.

    Galois coordinates: g = (x, y) acts by g(a_K^{1/p}) = zeta^x a_K^{1/p},
    g(a_F^{1/p}) = zeta^y a_F^{1/p}.  Subgroups of order p are labelled by
    their least non-identity element in lexicographic coordinate order;
    label 0 is the stabiliser coordinate direction fixing K, so F^(0) = K.
    """

    def __init__(self, m: int, p: int, K_datum: Datum, F_datum: Datum,
                 bound: int = DEFAULT_WITNESS_BOUND):
        if p != 2 and (m % p != 0):
            raise ValueError(f"mu_{p} not contained in Q(zeta_{m})")
        if K_datum.m != m or F_datum.m != m:
            raise ValueError("data must live over the base conductor")
        require_not_pth_power(K_datum, p, bound)
        require_not_pth_power(F_datum, p, bound)
        for j in range(1, p):
            # K = F would force a_K * a_F^{p-j} to be a p-th power for some j
            mixed = Datum(K_datum.cyc * F_datum.cyc ** (p - j),
                          K_datum.rat * F_datum.rat ** (p - j))
            try:
                require_not_pth_power(mixed, p, bound)
            except (ValueError, InconclusiveError) as e:
                raise ValueError(f"K and F coincide or are indistinguishable "
                                 f"below the bound: {e}") from e
        self.m = m
        self.p = p
        self.K_datum = K_datum
        self.F_datum = F_datum
        subs = [tuple((0, b) for b in range(1, p))]  # fixes K
        for j in range(p):
            subs.append(tuple(((a, (a * j) % p) for a in range(1, p))))
        fields = [SubfieldTag(0, K_datum, subs[0])]
        for i, j in enumerate(range(p), start=1):
            # fixed field of <(1, j)>: datum from the orthogonal line <(p-j, 1)>
            if j == 0:
                d = F_datum
            else:
                d = Datum(K_datum.cyc ** (p - j) * F_datum.cyc,
                          K_datum.rat ** (p - j) * F_datum.rat)
            fields.append(SubfieldTag(i, d, subs[i]))
        self.subfields = tuple(fields)

    def kummer_exponent(self, d: Datum, prime: CycloPrime) -> int:
        """e with image^{(Q-1)/p} = zbar_p^e; 0 iff a p-th power."""
        img = d.unit_part_image(prime)
        field = img.field
        n_ = field.size - 1
        if n_ % self.p != 0:
            raise ValueError("residue field lacks mu_p (wild or ramified q)")
        probe = img ** (n_ // self.p)
        zeta_p = self._zeta_p_image(prime)
        acc = field.one()
        for e in range(self.p):
            if probe == acc:
                return e
            acc = acc * zeta_p
        raise AssertionError("p-power character value outside mu_p")

    def _zeta_p_image(self, prime: CycloPrime):
        if self.p == 2:
            return -prime.residue_field().one()
        return prime.zbar ** (self.m // self.p)

    def frobenius_coordinates(self, prime: CycloPrime) -> tuple[int, int]:
        return (self.kummer_exponent(self.K_datum, prime),
                self.kummer_exponent(self.F_datum, prime))

    def bad_primes(self) -> set[int]:
        bad = {self.p}
        if self.m > 1:
            bad |= set(sympy.primefactors(self.m))
        for d in (self.K_datum, self.F_datum):
            bad |= d.core_support()
            bad |= set(sympy.primefactors(abs(d.rat.numerator)))
            bad |= set(sympy.primefactors(d.rat.denominator))
        return bad

    def all_nonidentity_covered_once(self) -> bool:
        """Every non-identity group element lies in exactly one H_i."""
        count = {}
        for tag in self.subfields:
            for g in tag.subgroup:
                count[g] = count.get(g, 0) + 1
        nontrivial = [(a, b) for a in range(self.p) for b in range(self.p)
                      if (a, b) != (0, 0)]
        return all(count.get(g, 0) == 1 for g in nontrivial)


def pp_lattice(k_conductor: int, p: int, K_datum: Datum,
               F_datum: Datum) -> PPSubfieldLattice:
    return PPSubfieldLattice(k_conductor, p, K_datum, F_datum)
