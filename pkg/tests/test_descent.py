from itertools import combinations_with_replacement

import pytest

from twodescent.arith import REAL, Place, squarefree_part
from twodescent.curve import INFINITY, Curve, Point, PointNotOnCurve, add_points, curve_from_twin_prime, search_points
from twodescent.descent import (
    Classification,
    DegenerateIsogeny,
    Method,
    RankBound,
    bad_places,
    class_mul,
    combined_rank,
    complete_two_descent,
    descent_image,
    isogenous_curve,
    isogeny_descent,
    isogeny_map,
    isogeny_rank_bound,
    q_s_2,
    selmer_group,
    to_source,
)
from twodescent.localsolve import Effort, QuadricPair, Status, check_pair_witness

E5 = curve_from_twin_prime(5)
E7 = curve_from_twin_prime(7)
E13 = curve_from_twin_prime(13)
E31 = curve_from_twin_prime(31)


def pt(x, y):
    return Point.affine(x, y)


@pytest.mark.parametrize("c, primes", [(E7, [2, 5, 7]), (E5, [2, 3, 5]), (E13, [2, 11, 13])])
def test_bad_places(c, primes):
    assert bad_places(c) == [REAL] + [Place(q) for q in primes]


def test_q_s_2():
    classes = q_s_2(bad_places(E7))
    assert len(classes) == 16
    assert set(classes) == {s * x for s in (1, -1) for x in (1, 2, 5, 7, 10, 14, 35, 70)}
    assert set(q_s_2([REAL, Place(2)])) == {1, -1, 2, -2}
    e5 = q_s_2(bad_places(E5))
    assert len(e5) == 16 and {3, -3, 15, -15} <= set(e5)


def test_q_s_2_is_a_group():
    classes = set(q_s_2(bad_places(E13)))
    assert all(class_mul(a, b) in classes for a in classes for b in classes)
    assert all(class_mul(a, b) == squarefree_part(a * b) for a in classes for b in classes)


def test_descent_image_examples():
    assert descent_image(E7, INFINITY) == (1, 1)
    assert descent_image(E7, pt(0, 0)) == (14, -2)
    assert descent_image(E7, pt(7, 0)) == (7, 5)
    assert descent_image(E7, pt(2, 0)) == (2, -10)
    assert descent_image(E5, pt(10, 20)) == (10, 2)
    with pytest.raises(PointNotOnCurve):
        descent_image(E7, pt(1, 1))


@pytest.mark.parametrize("c", [E5, E13])
def test_descent_image_is_a_homomorphism(c):
    pts = [INFINITY] + search_points(c, 2000)
    for P, Q in combinations_with_replacement(pts, 2):
        a, b = descent_image(c, P), descent_image(c, Q)
        s = descent_image(c, add_points(c, P, Q))
        assert s == (class_mul(a[0], b[0]), class_mul(a[1], b[1]))


@pytest.mark.parametrize("c", [E7, E31])
def test_complete_descent_rank_zero(c):
    outcomes, bound = complete_two_descent(c)
    images = {o.pair for o in outcomes if o.classification is Classification.IMAGE}
    e3 = c.roots[2]
    assert images == {(1, 1), descent_image(c, pt(0, 0)), descent_image(c, pt(2, 0)), descent_image(c, pt(e3, 0))}
    ruled = [o for o in outcomes if o.classification is Classification.LOCALLY_RULED_OUT]
    assert len(outcomes) == 256 and len(ruled) == 252
    assert (bound.lower, bound.upper, bound.exact) == (0, 0, True)
    assert bound.method is Method.COMPLETE_2_DESCENT


def test_complete_descent_e7_images():
    result = complete_two_descent(E7)
    assert set(result.image_pairs()) == {(1, 1), (14, -2), (2, -10), (7, 5)}


def test_complete_descent_e5():
    result = complete_two_descent(E5)
    assert result.bound.lower >= 1
    assert result.bound.lower <= 1 <= result.bound.upper
    assert (10, 2) in result.image_pairs()


@pytest.mark.parametrize("c", [E5, E7, E13])
def test_outcome_invariants(c):
    result = complete_two_descent(c)
    for o in result.outcomes:
        if o.classification is Classification.IMAGE:
            assert descent_image(c, o.point) == o.pair
            for verdict in o.evidence.values():
                assert verdict.status is Status.SOLVABLE
        elif o.classification is Classification.LOCALLY_RULED_OUT:
            assert o.evidence[o.place].status is Status.INSOLVABLE
    images = result.image_pairs()
    # E(Q)/2E(Q) has 2^(rank + 2) elements for an exact result
    if result.bound.exact:
        assert len(images) == 2 ** (result.bound.lower + 2)


def test_complete_descent_witness_soundness():
    result = complete_two_descent(E7)
    e = E7.roots
    for o in result.outcomes:
        for verdict in o.evidence.values():
            if verdict.solvable and not verdict.place.is_real:
                assert check_pair_witness(QuadricPair(o.pair[0], o.pair[1], *e), verdict)


def test_isogenous_curve():
    E7p = isogenous_curve(E7)
    assert (E7p.A, E7p.B, E7p.C) == (18, 25, 0)
    for p in (5, 13, 61):
        c = isogenous_curve(curve_from_twin_prime(p))
        assert (c.A, c.B) == (2 * (p + 2), (p - 2) ** 2)


def test_double_isogeny_is_isomorphic():
    E2 = isogenous_curve(isogenous_curve(E7))
    assert (E2.A, E2.B) == (4 * E7.A, 16 * E7.B)
    for P in search_points(E2, 500):
        assert E7.contains(to_source(P))


def test_degenerate_isogeny():
    # b(a^2 - 4b) = 0 is already singular, so only the model shape can fail here
    with pytest.raises(DegenerateIsogeny):
        isogenous_curve(Curve(0, 0, 1))


def test_isogeny_map_examples():
    assert isogeny_map(E7, pt(0, 0)).is_infinity
    assert isogeny_map(E7, INFINITY).is_infinity
    assert isogeny_map(E7, pt(2, 0)) == pt(0, 0)
    image = isogeny_map(E5, pt(10, 20))
    assert image == pt(4, -18)
    assert isogenous_curve(E5).contains(image)


def test_isogeny_map_is_a_homomorphism():
    E2 = isogenous_curve(E13)
    pts = search_points(E13, 1000)[:6]
    for P in pts:
        for Q in pts:
            lhs = isogeny_map(E13, add_points(E13, P, Q))
            rhs = add_points(E2, isogeny_map(E13, P), isogeny_map(E13, Q))
            assert lhs == rhs


@pytest.mark.parametrize("p", [5, 13, 61, 109])
def test_selmer_groups_five_mod_eight(p):
    c = curve_from_twin_prime(p)
    s_phi = selmer_group(c, "phi")
    s_hat = selmer_group(c, "phihat")
    assert s_phi.classes == {1, -1}
    assert s_hat.classes == {1, 2, p, 2 * p}
    for s in (s_phi, s_hat):
        assert s.is_subgroup()
        assert s.image_classes <= s.classes
        for d in s.classes:
            assert all(v.status is Status.SOLVABLE for v in s.evidence[d].values())


def test_selmer_trivial_class_witness():
    s = selmer_group(E7, "phi")
    assert 1 in s.classes
    z_chart = s.evidence[1][Place(2)].witness
    assert z_chart["z"] == 0


def test_selmer_images_lie_on_the_right_curve():
    E2 = isogenous_curve(E13)
    s_phi = selmer_group(E13, "phi")
    s_hat = selmer_group(E13, "phihat")
    for d, P in s_phi.image_points.items():
        assert E2.contains(P)
    for d, P in s_hat.image_points.items():
        assert E13.contains(P)


def test_isogeny_rank_bounds():
    b13 = isogeny_rank_bound(E13)
    assert b13.upper == 1
    b5 = isogeny_rank_bound(E5)
    assert (b5.lower, b5.upper, b5.exact) == (1, 1, True)
    b7 = isogeny_rank_bound(E7)
    assert b7.upper == 0


def test_two_torsion_correction_for_single_rational_root():
    # y^2 = x^3 - x^2 + 2x has only (0, 0) rational, so E[2] has dimension 1 and
    # E'[phihat] / phi(E[2]) has dimension 1
    c = Curve(-1, 2, 0)
    res = isogeny_descent(c)
    assert res.two_torsion_dim == 1 and res.kernel_quotient_dim == 1
    assert res.bound.lower <= res.bound.upper


@pytest.mark.parametrize("c", [E5, E7, E13, E31])
def test_bounds_bracket_each_other(c):
    full = complete_two_descent(c).bound
    iso = isogeny_rank_bound(c)
    assert max(full.lower, iso.lower) <= min(full.upper, iso.upper)


def test_combined_rank():
    assert combined_rank(E7) == RankBound(0, 0, True, Method.COMBINED, 0)
    r5 = combined_rank(E5)
    assert (r5.lower, r5.upper, r5.exact) == (1, 1, True)
    r13 = combined_rank(E13)
    assert r13.upper == 1 and r13.method is Method.COMBINED
    assert r13.sha_slack == r13.upper - r13.lower


def test_rank_bound_invariant():
    with pytest.raises(Exception):
        RankBound(2, 1, False, Method.COMBINED, 0)


def test_undecided_degrades_bound_without_crashing():
    tiny = Effort(precision_2=2, precision_odd=1, search_height=10, witness_bound=5)
    result = complete_two_descent(E7, tiny)
    assert result.bound.lower == 0
    assert result.bound.upper >= 0
    assert len(result.outcomes) == 256
