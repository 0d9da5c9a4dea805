"""Canonical finite field extensions F_{q^d} with deterministic arithmetic.

Fields are built as F_q[t]/(modulus) where the modulus is the
lexicographically least monic irreducible polynomial of degree d: candidates
t^d + c_{d-1} t^{d-1} + ... + c_0 are ordered by the tuple
(c_{d-1}, ..., c_0).  No table lookups (Conway or otherwise): the search runs
from scratch, so the same (q, d) always yields bit-identical moduli.

Elements are coefficient vectors (c_0, ..., c_{d-1}).  The canonical order on
elements compares the integer key sum(c_i * q^i), which is the same as
comparing (c_{d-1}, ..., c_0) lexicographically.  "Least root", "least
generator" and sorted root lists all refer to this order.

Exponents are arbitrary-precision throughout; p-th root extraction uses
exhaustion for field size <= 2^20 and a deterministic Adleman-Manders-Miller
otherwise, seeded by the least non-p-th-power.
"""

from __future__ import annotations

from functools import lru_cache

import sympy

EXHAUSTION_BOUND = 2 ** 20


def _poly_trim(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mul(a, b, q):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
    return _poly_trim([c % q for c in out])


def _poly_rem(a, f, q):
    # f monic
    a = list(a)
    df = len(f) - 1
    while len(a) - 1 >= df:
        lead = a[-1]
        if lead:
            shift = len(a) - 1 - df
            for i in range(df):
                a[shift + i] = (a[shift + i] - lead * f[i]) % q
        a.pop()
    return _poly_trim(a)


def _poly_mulmod(a, b, f, q):
    return _poly_rem(_poly_mul(a, b, q), f, q)


def _poly_powmod(a, e, f, q):
    result = [1]
    base = _poly_rem(a, f, q)
    while e:
        if e & 1:
            result = _poly_mulmod(result, base, f, q)
        base = _poly_mulmod(base, base, f, q)
        e >>= 1
    return result


def _poly_gcd(a, b, q):
    a, b = list(a), list(b)
    while b:
        inv = pow(b[-1], -1, q)
        b = [(c * inv) % q for c in b]
        a, b = b, _poly_rem(a, b, q)
    return a


def _poly_sub(a, b, q):
    n = max(len(a), len(b))
    out = [((a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0)) % q
           for i in range(n)]
    return _poly_trim(out)


def _is_irreducible(f, q):
    """Monic f over F_q: Rabin's test via Frobenius iterates."""
    d = len(f) - 1
    if d == 1:
        return True
    x = [0, 1]
    frob = [x]
    h = x
    for _ in range(d):
        h = _poly_powmod(h, q, f, q)
        frob.append(h)
    if frob[d] != x:
        return False
    for e in sympy.primefactors(d):
        g = _poly_sub(frob[d // e], x, q)
        if len(_poly_gcd(f, g, q)) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def make_ext_field(q: int, d: int) -> "ExtField":
    """The canonical F_{q^d}.  Cached; (q, d) -> identical object."""
    if not sympy.isprime(q):
        raise ValueError(f"q = {q} is not prime")
    if d < 1:
        raise ValueError(f"d = {d} must be >= 1")
    for n in range(q ** d):
        # digits of n, most significant first, are (c_{d-1}, ..., c_0)
        digits = []
        m = n
        for _ in range(d):
            digits.append(m % q)
            m //= q
        f = digits + [1]  # low-first: (c_0, ..., c_{d-1}, 1)
        if _is_irreducible(f, q):
            return ExtField(q, d, tuple(f))
    raise AssertionError("no irreducible polynomial found")


class ExtField:
    """F_{q^d} under the canonical modulus.  Build via make_ext_field."""

    __slots__ = ("q", "d", "modulus", "size", "_order_fact", "_nonres")

    def __init__(self, q, d, modulus):
        self.q = q
        self.d = d
        self.modulus = modulus
        self.size = q ** d
        self._order_fact = None
        self._nonres = {}

    def element(self, coeffs) -> "FFElement":
        if isinstance(coeffs, int):
            coeffs = (coeffs,)
        c = [x % self.q for x in coeffs]
        if len(c) > self.d:
            c = _poly_rem(c, list(self.modulus), self.q)
        c = tuple(c) + (0,) * (self.d - len(c))
        return FFElement(self, c)

    def zero(self):
        return self.element(())

    def one(self):
        return self.element((1,))

    def gen(self):
        """Class of t (for d = 1 this is 0, the root of the modulus t)."""
        if self.d == 1:
            return self.element((-self.modulus[0],))
        return self.element((0, 1))

    def from_index(self, n: int) -> "FFElement":
        coeffs = []
        for _ in range(self.d):
            coeffs.append(n % self.q)
            n //= self.q
        return FFElement(self, tuple(coeffs))

    def elements(self):
        for n in range(self.size):
            yield self.from_index(n)

    def group_order_factor(self):
        if self._order_fact is None:
            self._order_fact = dict(sympy.factorint(self.size - 1))
        return self._order_fact

    def least_nonresidue(self, p: int) -> "FFElement":
        """Least element (canonical order) that is not a p-th power."""
        if p not in self._nonres:
            for n in range(1, self.size):
                x = self.from_index(n)
                if not is_pth_power(x, p):
                    self._nonres[p] = x
                    break
            else:
                raise ValueError(f"every element of F_{self.size} is a {p}-th power")
        return self._nonres[p]

    def least_generator(self) -> "FFElement":
        """Least multiplicative generator in canonical order."""
        fact = self.group_order_factor()
        n_ = self.size - 1
        for n in range(1, self.size):
            x = self.from_index(n)
            if all(x ** (n_ // ell) != self.one() for ell in fact):
                return x
        raise AssertionError("no generator found")

    def __eq__(self, other):
        return (isinstance(other, ExtField)
                and (self.q, self.d, self.modulus) == (other.q, other.d, other.modulus))

    def __hash__(self):
        return hash((self.q, self.d, self.modulus))

    def __repr__(self):
        return f"ExtField(q={self.q}, d={self.d})"


class FFElement:
    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        self.field = field
        self.coeffs = coeffs

    def key(self) -> int:
        """Canonical integer key; comparing keys = canonical element order."""
        k = 0
        for c in reversed(self.coeffs):
            k = k * self.field.q + c
        return k

    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def __add__(self, other):
        other = self._coerce(other)
        q = self.field.q
        return FFElement(self.field, tuple((a + b) % q
                                           for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        other = self._coerce(other)
        q = self.field.q
        return FFElement(self.field, tuple((a - b) % q
                                           for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        q = self.field.q
        return FFElement(self.field, tuple((-a) % q for a in self.coeffs))

    def __mul__(self, other):
        other = self._coerce(other)
        f = self.field
        prod = _poly_mulmod(list(self.coeffs), list(other.coeffs),
                            list(f.modulus), f.q)
        return f.element(tuple(prod))

    def __pow__(self, e):
        f = self.field
        if e < 0:
            return self.inverse() ** (-e)
        if self.is_zero():
            return f.one() if e == 0 else f.zero()
        e %= f.size - 1
        if e == 0:
            return f.one()
        out = _poly_powmod(list(self.coeffs), e, list(f.modulus), f.q)
        return f.element(tuple(out))

    def inverse(self):
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return self ** (self.field.size - 2)

    def __truediv__(self, other):
        other = self._coerce(other)
        return self * other.inverse()

    def _coerce(self, other):
        if isinstance(other, FFElement):
            if other.field != self.field:
                raise ValueError("elements of different fields")
            return other
        if isinstance(other, int):
            return self.field.element((other,))
        return NotImplemented

    __radd__ = __add__
    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int):
            other = self.field.element((other,))
        return (isinstance(other, FFElement) and self.field == other.field
                and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.field, self.coeffs))

    def __repr__(self):
        q, terms = self.field.q, []
        for i, c in enumerate(self.coeffs):
            if c:
                terms.append(str(c) if i == 0 else
                             (f"t^{i}" if c == 1 else f"{c}*t^{i}").replace("t^1", "t"))
        return " + ".join(terms) if terms else "0"


def pth_power_status(x: FFElement, p: int) -> tuple[bool, bool]:
    """(is a p-th power, zero-input flag).  0 is every p-th power (0 = 0^p)."""
    if x.is_zero():
        return True, True
    n_ = x.field.size - 1
    if n_ % p != 0:
        return True, False  # p-power map is a bijection
    return x ** (n_ // p) == x.field.one(), False


def is_pth_power(x: FFElement, p: int) -> bool:
    return pth_power_status(x, p)[0]


def mult_order(x: FFElement) -> int:
    """Multiplicative order; error on zero."""
    if x.is_zero():
        raise ValueError("multiplicative order of zero")
    e = x.field.size - 1
    for ell, k in x.field.group_order_factor().items():
        for _ in range(k):
            if x ** (e // ell) == x.field.one():
                e //= ell
            else:
                break
    return e


def order_p_valuation(x: FFElement, p: int) -> int:
    """v_p(mult_order(x)) without factoring the group order."""
    if x.is_zero():
        raise ValueError("zero input")
    n_ = x.field.size - 1
    s = 0
    while n_ % p == 0:
        n_ //= p
        s += 1
    z = x ** n_
    v = 0
    one = x.field.one()
    while z != one:
        z = z ** p
        v += 1
    if v > s:
        raise AssertionError("order valuation exceeded Sylow size")
    return v


def pth_roots(x: FFElement, p: int) -> list[FFElement]:
    """All y with y^p = x, sorted canonically.  Length 0, 1 or p."""
    field = x.field
    if x.is_zero():
        return [field.zero()]
    n_ = field.size - 1
    if n_ % p != 0:
        return [x ** pow(p, -1, n_)]
    if not is_pth_power(x, p):
        return []
    if field.size <= EXHAUSTION_BOUND:
        roots = [y for y in field.elements() if y ** p == x]
    else:
        roots = _amm_roots(x, p, field.least_nonresidue(p))
    return sorted(roots, key=lambda r: r.key())


def _amm_roots(x, p, z):
    """Adleman-Manders-Miller: x a known p-th power, z a non-p-th-power."""
    field = x.field
    n_ = field.size - 1
    s, m = 0, n_
    while m % p == 0:
        m //= p
        s += 1
    g = z ** m                     # generates the p-Sylow subgroup
    zeta = g ** (p ** (s - 1))     # order p
    # digits of dlog_g(x^m) base p
    zeta_pows = {}
    w_ = field.one()
    for j in range(p):
        zeta_pows[w_.coeffs] = j
        w_ = w_ * zeta
    k = 0
    xm = x ** m
    for i in range(s):
        probe = (xm * g ** (-k % n_)) ** (p ** (s - 1 - i))
        d_i = zeta_pows[probe.coeffs]
        k += d_i * p ** i
    if k % p != 0:
        raise AssertionError("dlog not divisible by p for a p-th power")
    u = pow(p, -1, m) if m > 1 else 0
    w = (p * u - 1) // m
    y0 = (x ** u) * g ** ((-(k // p) * w) % n_)
    roots, y = [], y0
    for _ in range(p):
        roots.append(y)
        y = y * zeta
    return roots


def find_roots_by_exhaustion(coeffs, field) -> list[FFElement]:
    """Roots in `field` of the integer polynomial sum(coeffs[i] X^i), sorted.

    Exhaustive; the caller guards field size (embedding uses <= 2^20).
    """
    if field.size > EXHAUSTION_BOUND:
        raise ValueError("field too large for exhaustive root search")
    cs = [field.element((c,)) for c in coeffs]
    roots = []
    for x in field.elements():
        acc = field.zero()
        for c in reversed(cs):
            acc = acc * x + c
        if acc.is_zero():
            roots.append(x)
    return sorted(roots, key=lambda r: r.key())
