"""Trace engine: classification, inert chains, lattices, densities."""

from fractions import Fraction

import pytest
import sympy

from kummerlab.cyclotomic import CycloField, Datum, cyclo_primes_above, pp_lattice
from kummerlab.splitting import (
    DegreeClass,
    RelField,
    classify_prime,
    classify_rational,
    compositum_min_norm,
    degree1_density,
    element_pth_roots,
    fold_degree_multisets,
    group_p_valuation,
    inert_chain_certificate,
    inert_prime_subfield,
    inert_splits_in_top,
    kummer_step,
    norm_subgroup,
    place_profile,
    places_upto,
    trace_prime,
)
from kummerlab.finitefield import make_ext_field, mult_order
from kummerlab.tower import KummerTower


def _gauss_step():
    F4 = CycloField(4)
    return kummer_step(4, 2, Datum(F4.element((1, 1))))


def test_classify_frozen_13():
    cls = classify_rational(_gauss_step(), 13)
    assert [(P.zbar.coeffs, c) for P, c in cls] == \
        [((5,), DegreeClass.DEGREEP), ((8,), DegreeClass.DEGREE1)]


def test_trace_split_roots_frozen():
    P8 = cyclo_primes_above(4, 13)[1]
    tr = trace_prime(_gauss_step(), P8)
    assert tr.image_keys(1) == (3, 10)       # the two square roots of 9
    assert tr.places(1) == ((1, 2),)
    assert tr.norms(1) == (13, 13)


def test_classify_ramified_and_wild():
    step = kummer_step(1, 2, Datum.of(-1))
    (P,) = cyclo_primes_above(1, 3)
    assert classify_prime(step, P) is DegreeClass.DEGREEP
    (P5,) = cyclo_primes_above(1, 5)
    assert classify_prime(step, P5) is DegreeClass.DEGREE1
    with pytest.raises(ValueError, match="wild|q = p"):
        classify_prime(step, cyclo_primes_above(1, 2)[0])
    step6 = kummer_step(1, 2, Datum.of(6))
    (P3,) = cyclo_primes_above(1, 3)
    assert classify_prime(step6, P3) is DegreeClass.RAMIFIED


def test_inert_chain_certificate_frozen():
    F4 = CycloField(4)
    tower = KummerTower(4, 2, 2, Datum(F4.element((1, 1))))
    cert = inert_chain_certificate(tower, 3)
    assert cert.norms == (9, 81, 6561)
    assert cert.order_valuation == cert.sylow_valuation == 3
    assert cert.unique_lift


def test_inert_chain_picks_certifiable_prime():
    F4 = CycloField(4)
    tower = KummerTower(4, 2, 2, Datum(F4.element((1, 1)), Fraction(3)))
    cert = inert_chain_certificate(tower, 5)
    assert cert.prime.zbar.coeffs == (3,)    # zbar = 2 sees a square image
    assert cert.norms == (5, 25, 625)
    cert13 = inert_chain_certificate(tower, 13)
    assert cert13.prime.zbar.coeffs == (5,)  # 3(1+z) = 1 at the other prime
    assert cert13.norms == (13, 169, 28561)


def test_inert_chain_rejects_wild_and_square():
    F4 = CycloField(4)
    tower = KummerTower(4, 2, 2, Datum(F4.element((1, 1))))
    with pytest.raises(ValueError):
        inert_chain_certificate(tower, 2)
    square = KummerTower(1, 2, 2, Datum.of(9))
    with pytest.raises(ValueError, match="no prime above"):
        inert_chain_certificate(square, 7)


def test_trace_agreement_with_certificate():
    F4 = CycloField(4)
    tower = KummerTower(4, 2, 2, Datum(F4.element((1, 1))))
    P = cyclo_primes_above(4, 3)[0]
    tr = trace_prime(tower, P)
    cert = inert_chain_certificate(tower, P)
    for j in range(3):
        assert tr.norms(j) == (cert.norms[j],)


def test_trace_ramified_flag():
    step = kummer_step(1, 2, Datum.of(6))
    (P3,) = cyclo_primes_above(1, 3)
    assert trace_prime(step, P3).ramified


def test_compositum_fold_bound():
    F4 = CycloField(4)
    tower = KummerTower(4, 2, 2, Datum(F4.element((1, 1)), Fraction(3)))
    cb = compositum_min_norm(tower, 5, other_degrees=((1, 2), (3, 1)))
    assert cb.min_norm == 625
    assert cb.folded == ((4, 2), (12, 1))
    assert all(d % 4 == 0 for d, _ in cb.folded)


def test_fold_degree_multisets_preserves_total():
    A = ((1, 2), (2, 3))
    B = ((2, 1), (3, 2))
    folded = fold_degree_multisets(A, B)
    total = sum(d * c for d, c in folded)
    assert total == sum(d * c for d, c in A) * sum(d * c for d, c in B)
    assert folded == tuple(sorted(folded))


# ---------------------------------------------------------------------------
# lattice classification

@pytest.fixture(scope="module")
def quad_lattice():
    return pp_lattice(1, 2, Datum.of(3), Datum.of(-1))


def test_inert_prime_subfield_frozen(quad_lattice):
    assert inert_prime_subfield(quad_lattice, 5).label == 1    # splits in Q(i)
    assert inert_prime_subfield(quad_lattice, 7).label == 2    # in Q(sqrt -3)
    with pytest.raises(ValueError, match="splits in K"):
        inert_prime_subfield(quad_lattice, 11)
    with pytest.raises(ValueError, match="excluded"):
        inert_prime_subfield(quad_lattice, 3)


def test_inert_prime_subfield_matches_direct_test(quad_lattice):
    for q in (5, 7, 17, 19, 29, 31):
        try:
            res = inert_prime_subfield(quad_lattice, q)
        except ValueError:
            assert sympy.jacobi_symbol(3, q) == 1
            continue
        datum = res.datum.value().as_fraction()
        assert sympy.jacobi_symbol(3, q) == -1
        assert sympy.jacobi_symbol(int(datum), q) == 1


def test_inert_splits_in_top(quad_lattice):
    cert = inert_splits_in_top(quad_lattice, 7)
    assert cert.primes_in_top == 2 and cert.relative_degree == 1
    assert cert.k_class is DegreeClass.DEGREEP
    cert5 = inert_splits_in_top(quad_lattice, 5)
    assert cert5.primes_in_top == 2
    with pytest.raises(ValueError, match="not inert"):
        inert_splits_in_top(quad_lattice, 11)


def test_inert_splits_in_top_p3():
    lat = pp_lattice(3, 3, Datum.of(2, m=3), Datum.of(5, m=3))
    hits = 0
    for q in (7, 13, 19, 31, 37):
        try:
            cert = inert_splits_in_top(lat, q)
        except ValueError:
            continue
        hits += 1
        assert cert.primes_in_top == 3 and cert.relative_degree == 1
    assert hits >= 2


# ---------------------------------------------------------------------------
# densities and places

def test_degree1_density_frozen():
    rep = degree1_density(kummer_step(1, 2, Datum.of(-1)), 100)
    assert (rep.degree1, rep.total) == (22, 24)
    assert rep.ratio == Fraction(11, 12)


def test_degree1_density_int_path_matches_object_path():
    # the f = 1 integer fast path must agree with full classification
    step = _gauss_step()
    rep = degree1_density(step, 300)
    deg1 = total = 0
    for q in sympy.primerange(3, 301):
        f = sympy.n_order(q, 4)
        if q ** f > 300:
            continue
        for P, cls in classify_rational(step, q):
            if cls is DegreeClass.DEGREE1:
                total += 2
                if f == 1:
                    deg1 += 2
            elif cls is DegreeClass.DEGREEP and q ** (2 * f) <= 300:
                total += 1
    assert (rep.degree1, rep.total) == (deg1, total)


def test_places_upto_small():
    places = places_upto(4, 50)
    assert (2, 1, 1) not in places           # ramified dropped
    assert (3, 2, 1) in places and (7, 2, 1) in places
    assert (5, 1, 2) in places and (13, 1, 2) in places
    assert all(q ** f <= 50 for q, f, _ in places)
    # norm count agrees with a direct count of zeta_4 places
    total = sum(c for _, _, c in places)
    assert total == 2 + sum(2 for q in (5, 13, 17, 29, 37, 41))


def test_norm_subgroup_gaussian():
    assert norm_subgroup(4, 8) == frozenset({1, 5})
    assert norm_subgroup(kummer_step(1, 2, Datum.of(-1)), 8) == frozenset({1, 5})
    assert norm_subgroup(1, 8) == frozenset({1, 3, 5, 7})
    assert norm_subgroup(3, 9) == frozenset({1, 4, 7})  # Q(zeta_3) in Q(zeta_9)


# ---------------------------------------------------------------------------
# relative extensions

def test_rel_field_roots_round_trip():
    F5 = make_ext_field(5, 1)
    R = RelField(F5, F5.element(2), 2)       # 2 is not a square mod 5
    four = R.embed(F5.element(4))
    roots = element_pth_roots(four, 2)
    assert len(roots) == 2
    assert all(r ** 2 == four for r in roots)
    assert (R.gen() ** 2) == R.embed(F5.element(2))


def test_rel_field_rejects_power():
    F5 = make_ext_field(5, 1)
    with pytest.raises(ValueError):
        RelField(F5, F5.element(4), 2)       # 4 = 2^2


def test_mixed_pre_step_trace_matches_cyclotomic():
    # Q < Q(i) < Q(zeta_8): places above 3 are (f=2, two of them)
    tower = KummerTower(1, 2, 1, Datum.of(2), pre_steps=(Datum.of(-1),))
    (P3,) = cyclo_primes_above(1, 3)
    tr = trace_prime(tower, P3)
    assert tr.places(0) == ((2, 1),)
    assert tr.places(1) == ((2, 2),)
    (P7,) = cyclo_primes_above(1, 7)         # 7 = -1 mod 8: f = 2 as well
    tr7 = trace_prime(tower, P7)
    assert tr7.places(1) == ((2, 2),)
    (P17,) = cyclo_primes_above(1, 17)       # 17 = 1 mod 8: full split
    tr17 = trace_prime(tower, P17)
    assert tr17.places(1) == ((1, 4),)


def test_relative_amm_odd_p():
    # pre-step 5 inert at 7, datum 2 must then split in the cubic extension
    F3 = CycloField(3)
    tower = KummerTower(3, 3, 1, Datum.of(2, m=3), pre_steps=(Datum.of(5, m=3),))
    for P in cyclo_primes_above(3, 7):
        tr = trace_prime(tower, P)
        assert tr.places(0) == ((3, 1),)
        assert tr.places(1) == ((3, 3),)
        for b in tr.branches[1]:
            assert (b.image ** 3) == b.image.field.embed(
                tower.datum.unit_part_image(P))


@pytest.mark.parametrize("m,p,mm0", [
    (4, 2, 8),
    (9, 3, 27),
])
def test_cyclotomic_chain_oracle(m, p, mm0):
    """Root-of-unity towers are cyclotomic: places must match order counts."""
    F = CycloField(m)
    tower = KummerTower(m, p, 2, Datum(F.zeta()), base_is_step=True)
    for q in (2, 5, 7, 11, 13, 19):
        if q == p or m % q == 0:
            continue
        base_primes = cyclo_primes_above(m, q)
        for P in base_primes:
            tr = trace_prime(tower, P)
            for j in range(3):
                mm = mm0 * p ** j
                f = sympy.n_order(q, mm)
                count = (sympy.totient(mm) // f) // len(base_primes)
                assert tr.places(j) == ((f, count),)


def test_group_p_valuation_matches_mult_order():
    F = make_ext_field(13, 2)
    for idx in (2, 7, 30, 100, 44):
        x = F.from_index(idx)
        n = mult_order(x)
        for p in (2, 3, 7):
            v = 0
            nn = n
            while nn % p == 0:
                nn //= p
                v += 1
            assert group_p_valuation(x, p) == v


@pytest.mark.parametrize("tower", [
    KummerTower(1, 2, 1, Datum.of(3)),
    KummerTower(1, 2, 1, Datum.of(-5)),
    KummerTower(4, 2, 2, Datum(CycloField(4).zeta()), base_is_step=True),
    KummerTower(9, 3, 1, Datum(CycloField(9).zeta()), base_is_step=True),
    KummerTower(4, 2, 2, Datum.of(3, m=4)),
    KummerTower(4, 2, 2, Datum.of(-2, m=4)),
    KummerTower(4, 2, 1, Datum(CycloField(4).element((1, 1)))),
], ids=["sqrt3", "sqrt-5", "zeta-p2", "zeta-p3", "quartic3", "quartic-2",
        "gauss"])
def test_place_profile_matches_trace(tower):
    """The shortcut paths must agree with the residue trace, counts included."""
    skip = {tower.p} | tower.datum.core_support()
    skip |= set(sympy.primefactors(abs(tower.datum.rat.numerator)))
    for q in sympy.primerange(2, 40):
        if q in skip or (tower.m > 1 and tower.m % q == 0):
            continue
        agg = {}
        for P in cyclo_primes_above(tower.m, q):
            for e, c in trace_prime(tower, P).places(tower.r):
                agg[e] = agg.get(e, 0) + c
        assert place_profile(tower, q) == tuple(sorted(agg.items()))
