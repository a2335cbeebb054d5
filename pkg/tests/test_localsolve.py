from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from twodescent.arith import REAL, Place, squarefree_part
from twodescent.curve import curve_from_twin_prime, multiply, Point
from twodescent.localsolve import (
    DEFAULT_EFFORT,
    Effort,
    NotApplicableCurve,
    QuadricPair,
    QuarticSpace,
    Status,
    all_table_note_rules,
    check_pair_witness,
    check_quartic_witness,
    global_pair_witness,
    pair_witness_point,
    table_note_rules,
    quadric_pair_solvable,
    quartic_solvable,
)

SQUAREFREE = [d for d in range(-40, 41) if d and squarefree_part(d) == d]


def pair7(b1, b2):
    return QuadricPair(b1, b2, 0, 2, 7)


def places(p):
    return [REAL, Place(2), Place(p - 2), Place(p)]


def twin_space(p, d):
    return QuarticSpace(d, -(p + 2), 2 * p)


def test_validation():
    with pytest.raises(ValueError):
        QuadricPair(4, 1, 0, 2, 7)
    with pytest.raises(ValueError):
        QuadricPair(1, 1, 0, 0, 7)
    with pytest.raises(ValueError):
        QuarticSpace(0, 1, 1)
    with pytest.raises(ValueError):
        QuarticSpace(1, 2, 1)


@pytest.mark.parametrize("e", [(0, 2, 7), (-3, 1, 4), (Fraction(1, 2), 5, 9)])
def test_negative_b1_positive_b2_has_no_real_points(e):
    assert quadric_pair_solvable(QuadricPair(-1, 1, *e), REAL).status is Status.INSOLVABLE
    assert quadric_pair_solvable(QuadricPair(-1, -1, *e), REAL).status is Status.INSOLVABLE


def test_pair_examples():
    assert quadric_pair_solvable(pair7(1, 2), Place(2)).status is Status.INSOLVABLE
    v = quadric_pair_solvable(pair7(7, 1), Place(7))
    assert v.status is Status.INSOLVABLE
    assert v.certificate and "7" in v.certificate
    for place in places(7):
        v = quadric_pair_solvable(pair7(7, 5), place)
        assert v.status is Status.SOLVABLE
        assert check_pair_witness(pair7(7, 5), v)


def test_insolvable_verdict_records_search_parameters():
    v = quadric_pair_solvable(pair7(1, 2), Place(2))
    assert v.precision is not None and v.certificate


def test_only_torsion_images_survive_for_e7():
    survivors = []
    for b1, b2 in product([1, -1, 2, -2, 5, -5, 7, -7, 10, -10, 14, -14, 35, -35, 70, -70], repeat=2):
        pair = pair7(b1, b2)
        if all(quadric_pair_solvable(pair, v).status is Status.SOLVABLE for v in places(7)):
            survivors.append((b1, b2))
    assert sorted(survivors) == sorted([(1, 1), (14, -2), (2, -10), (7, 5)])


@pytest.mark.parametrize("p", [5, 13, 61])
def test_twin_quartic_local_obstructions(p):
    assert quartic_solvable(twin_space(p, p), Place(p)).status is Status.INSOLVABLE
    assert quartic_solvable(twin_space(p, 2), Place(2)).status is Status.INSOLVABLE
    assert quartic_solvable(twin_space(p, -(p - 2)), Place(2)).status is Status.INSOLVABLE
    for v in (Place(2), Place(p), Place(p - 2), REAL):
        verdict = quartic_solvable(twin_space(p, -1), v)
        assert verdict.status is Status.SOLVABLE
        assert check_quartic_witness(twin_space(p, -1), verdict)


def test_trivial_class_everywhere():
    space = QuarticSpace(1, -9, 14)
    for v in (REAL, Place(2), Place(3), Place(5), Place(7)):
        verdict = quartic_solvable(space, v)
        assert verdict.status is Status.SOLVABLE
        if not v.is_real:
            assert verdict.witness["z"] == 0


_GEOM = np.geomspace(1e-4, 1e3, 200_001)
_Z = np.concatenate([np.linspace(-1e3, 1e3, 2_000_001), _GEOM, -_GEOM])


def _real_by_sampling(space):
    d, a, c = float(space.d), float(space.a), float(space.c)
    z2 = _Z * _Z
    values = d * d - 2 * a * d * z2 + c * z2 * z2
    # z -> infinity is the t = 0 point of the other chart
    return bool(np.any(values * d >= 0)) or c * d >= 0


@given(st.sampled_from(SQUAREFREE), st.integers(-30, 30), st.integers(-30, 30))
def test_real_quartic_matches_sampling(d, a, b):
    assume(b * (a * a - 4 * b) != 0)
    space = QuarticSpace(d, a, b)
    solver = quartic_solvable(space, REAL).status is Status.SOLVABLE
    assert solver == _real_by_sampling(space)


@given(
    st.sampled_from(SQUAREFREE),
    st.integers(-20, 20),
    st.sampled_from([2, 3, 5, 7]),
    st.integers(1, 3),
    st.integers(1, 9),
    st.integers(-9, 9),
)
def test_t_chart_finds_points_at_large_z(d, a, p, k, m, w):
    # force a point with v_p(z) = -k by solving for the constant coefficient
    assume(m % p)
    z = Fraction(m, p**k)
    c = (d * w * w - d * d + 2 * a * d * z * z) / z**4
    b = (a * a - c) / 4
    assume(b != 0 and c != 0)
    space = QuarticSpace(d, a, b)
    assert space.quartic(z) == d * w * w
    verdict = quartic_solvable(space, Place(p))
    assert verdict.status is Status.SOLVABLE
    assert check_quartic_witness(space, verdict)


@given(st.sampled_from(SQUAREFREE), st.sampled_from(SQUAREFREE), st.sampled_from([2, 3, 5, 7, 11]))
def test_pair_witness_soundness(b1, b2, p):
    pair = QuadricPair(b1, b2, 0, 2, 7)
    verdict = quadric_pair_solvable(pair, Place(p))
    assert verdict.status is not Status.UNDECIDED
    if verdict.solvable:
        assert check_pair_witness(pair, verdict)


@given(st.sampled_from(SQUAREFREE), st.integers(-20, 20), st.integers(-20, 20), st.sampled_from([2, 3, 5]))
def test_quartic_witness_soundness(d, a, b, p):
    assume(b * (a * a - 4 * b) != 0)
    space = QuarticSpace(d, a, b)
    verdict = quartic_solvable(space, Place(p))
    assert verdict.status is not Status.UNDECIDED
    if verdict.solvable:
        assert check_quartic_witness(space, verdict)


def test_table_rules_examples():
    assert table_note_rules(pair7(7, 1), 7) == (Place(7), 5)
    # the printed table lists b2 down the rows; read that way these cells are
    assert table_note_rules(pair7(1, 2), 7) == (Place(2), 4)
    assert table_note_rules(pair7(2, 1), 7) == (Place(2), 3)
    assert table_note_rules(pair7(1, -1), 7) == (Place(7), 14)
    assert table_note_rules(pair7(-1, 1), 7) == (REAL, 1)
    assert table_note_rules(pair7(7, 5), 7) is None


def test_transposed_cell_is_really_solvable_at_p():
    # the row -1 / column 1 cell cites Q_p; only (1, -1) is obstructed there
    assert quadric_pair_solvable(pair7(1, -1), Place(7)).status is Status.INSOLVABLE
    assert quadric_pair_solvable(pair7(-1, 1), Place(7)).status is Status.SOLVABLE


def test_table_rules_preconditions():
    with pytest.raises(NotApplicableCurve):
        table_note_rules(QuadricPair(1, 2, 0, 2, 5), 5)
    with pytest.raises(NotApplicableCurve):
        table_note_rules(QuadricPair(1, 2, 0, 3, 7), 7)


def test_rules_agree_with_solver_p7():
    classes = [1, -1, 2, -2, 5, -5, 7, -7, 10, -10, 14, -14, 35, -35, 70, -70]
    for b1, b2 in product(classes, repeat=2):
        for place, note in all_table_note_rules(pair7(b1, b2), 7):
            assert quadric_pair_solvable(pair7(b1, b2), place).status is Status.INSOLVABLE, (b1, b2, note)


def test_global_pair_witness_torsion_image():
    pair = pair7(7, 5)
    z = global_pair_witness(pair, 20)
    assert z is not None
    x, y = pair_witness_point(pair, z)
    assert curve_from_twin_prime(7).contains(Point(x, y))
    assert all(r == 0 for r in pair.residuals(*z))


def test_global_pair_witness_trivial_class_from_double():
    E5 = curve_from_twin_prime(5)
    pair = QuadricPair(1, 1, 0, 2, 5)
    z = global_pair_witness(pair, DEFAULT_EFFORT.witness_bound)
    assert z is not None
    x, y = pair_witness_point(pair, z)
    assert E5.contains(Point(x, y))
    # (1, 1) classes come from 2E(Q): x, x-2, x-5 are all squares
    assert all(squarefree_part(x - e) == 1 for e in (0, 2, 5))
    doubled = multiply(E5, 2, Point.affine(10, 20))
    assert all(squarefree_part(doubled.x - e) == 1 for e in (0, 2, 5))


def test_global_witness_absent_when_real_obstruction():
    assert global_pair_witness(pair7(-1, 1), 30) is None


def test_global_witness_implies_everywhere_locally_solvable():
    for b1, b2 in [(1, -1), (2, 6), (5, 3), (10, 2)]:
        pair = QuadricPair(b1, b2, 0, 2, 5)
        assert global_pair_witness(pair, DEFAULT_EFFORT.witness_bound) is not None
        for v in (REAL, Place(2), Place(3), Place(5)):
            assert quadric_pair_solvable(pair, v).status is Status.SOLVABLE


def test_effort_cap_reports_undecided():
    tiny = Effort(precision_2=1, precision_odd=1)
    verdict = quadric_pair_solvable(pair7(1, 2), Place(2), tiny)
    assert verdict.status in (Status.UNDECIDED, Status.INSOLVABLE)
    assert verdict.status is not Status.SOLVABLE or check_pair_witness(pair7(1, 2), verdict)
