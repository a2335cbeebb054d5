"""Complete 2-descent and descent via 2-isogeny for curves with rational 2-torsion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import Iterable, Optional, Sequence

from .arith import REAL, Place, prime_support, squarefree_part
from .curve import (
    INFINITY,
    Curve,
    CurveError,
    Point,
    PointNotOnCurve,
    _add,
    discriminant,
    search_points,
    two_torsion,
)
from .localsolve import (
    DEFAULT_EFFORT,
    Effort,
    LocalVerdict,
    QuadricPair,
    QuarticSpace,
    Status,
    global_pair_witness,
    global_quartic_point,
    pair_witness_point,
    quadric_pair_solvable,
    quartic_point_to_curve,
    quartic_solvable,
)

SquareClass = int


class DegenerateIsogeny(CurveError):
    pass


class DescentContradiction(RuntimeError):
    """A known image was rejected by a local filter; indicates a solver bug."""


class UndecidedSelmer(RuntimeError):
    def __init__(self, selmer: "SelmerSet"):
        super().__init__(
            f"{len(selmer.undecided)} class(es) undecided at the effort cap: {sorted(selmer.undecided)}"
        )
        self.selmer = selmer


class Method(str, Enum):
    COMPLETE_2_DESCENT = "COMPLETE_2_DESCENT"
    ISOGENY_DESCENT = "ISOGENY_DESCENT"
    COMBINED = "COMBINED"


class Classification(str, Enum):
    IMAGE = "IMAGE"
    LOCALLY_RULED_OUT = "LOCALLY_RULED_OUT"
    LOCALLY_OK_NO_WITNESS = "LOCALLY_OK_NO_WITNESS"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class RankBound:
    lower: int
    upper: int
    exact: bool
    method: Method
    sha_slack: int
    undecided: int = 0

    def __post_init__(self):
        if self.lower > self.upper:
            raise DescentContradiction(f"lower bound {self.lower} exceeds upper bound {self.upper}")


def _bound(lower: int, upper: int, method: Method, undecided: int = 0) -> RankBound:
    lower = max(lower, 0)
    return RankBound(lower, upper, lower == upper, method, upper - lower, undecided)


def class_mul(a: SquareClass, b: SquareClass) -> SquareClass:
    g = math.gcd(a, b)
    return (a // g) * (b // g)


def pair_mul(u: tuple[int, int], w: tuple[int, int]) -> tuple[int, int]:
    return class_mul(u[0], w[0]), class_mul(u[1], w[1])


# --- S and Q(S, 2) ---------------------------------------------------------------


def bad_places(c: Curve) -> list[Place]:
    """Real place, 2, and every prime dividing the discriminant, in filter order."""
    primes = set(prime_support(discriminant(c))) | {2}
    return [REAL] + [Place(q) for q in sorted(primes)]


def q_s_2(S: Iterable[Place]) -> list[SquareClass]:
    """All signed squarefree products of -1 and the finite primes of S."""
    primes = sorted({v.prime for v in S if not v.is_real})
    classes = [1]
    for q in primes:
        classes += [x * q for x in classes]
    classes += [-x for x in classes]
    return sorted(classes, key=lambda x: (abs(x), x < 0))


def _log2_exact(n: int) -> int:
    k = n.bit_length() - 1
    if 1 << k != n:
        raise ValueError(f"{n} is not a power of two")
    return k


def _log2_ceil(n: int) -> int:
    return (n - 1).bit_length()


# --- the complete 2-descent map -------------------------------------------------


def _roots(c: Curve) -> tuple[Fraction, Fraction, Fraction]:
    if c.roots is None:
        raise CurveError("complete 2-descent needs the 2-torsion roots (e1, e2, e3)")
    return c.roots


def descent_image(c: Curve, P: Point) -> tuple[SquareClass, SquareClass]:
    if not c.contains(P):
        raise PointNotOnCurve(f"{P} is not on {c}")
    if P.is_infinity:
        return 1, 1
    e1, e2, e3 = _roots(c)
    x = P.x
    if x == e1:
        return squarefree_part((e1 - e3) / (e1 - e2)), squarefree_part(e1 - e2)
    if x == e2:
        return squarefree_part(e2 - e1), squarefree_part((e2 - e3) / (e2 - e1))
    return squarefree_part(x - e1), squarefree_part(x - e2)


@dataclass
class DescentPairOutcome:
    pair: tuple[SquareClass, SquareClass]
    classification: Classification
    point: Optional[Point] = None
    place: Optional[Place] = None
    evidence: dict = field(default_factory=dict)


@dataclass
class CompleteDescentResult:
    curve: Curve
    places: list[Place]
    outcomes: list[DescentPairOutcome]
    bound: RankBound
    effort: Effort
    points: list[Point]

    def __iter__(self):
        # unpacks as (outcomes, bound)
        return iter((self.outcomes, self.bound))

    def by_pair(self) -> dict[tuple[int, int], DescentPairOutcome]:
        return {o.pair: o for o in self.outcomes}

    def image_pairs(self) -> list[tuple[int, int]]:
        return [o.pair for o in self.outcomes if o.classification is Classification.IMAGE]


def _close_images(c: Curve, images: dict, new: Sequence[tuple[tuple[int, int], Point]]) -> None:
    """Grow ``images`` (pair -> point) to the subgroup generated by the new pairs."""
    for pair, point in new:
        if pair in images:
            continue
        for old_pair, old_point in list(images.items()):
            images[pair_mul(old_pair, pair)] = _add(c, old_point, point)


def complete_two_descent(
    c: Curve, effort: Effort = DEFAULT_EFFORT, points: Optional[Sequence[Point]] = None
) -> CompleteDescentResult:
    """Classify every pair of Q(S,2) x Q(S,2) and bound the rank."""
    e1, e2, e3 = _roots(c)
    S = bad_places(c)
    classes = q_s_2(S)
    if points is None:
        points = search_points(c, effort.search_height)
    known = two_torsion(c) + [P for P in points if P.y != 0]
    images: dict[tuple[int, int], Point] = {(1, 1): INFINITY}
    _close_images(c, images, [(descent_image(c, P), P) for P in known])

    pairs = list(product(classes, classes))
    ruled: dict[tuple[int, int], tuple[Place, LocalVerdict]] = {}
    evidence: dict[tuple[int, int], dict] = {}
    undecided: set[tuple[int, int]] = set()

    def filter_pair(pair):
        qp = QuadricPair(pair[0], pair[1], e1, e2, e3)
        order = list(S)
        # a coset-mate already ruled out at v is ruled out at v too; try v first
        for img in images:
            mate = ruled.get(pair_mul(pair, img))
            if mate is not None:
                order.remove(mate[0])
                order.insert(0, mate[0])
                break
        ev = {}
        for v in order:
            verdict = quadric_pair_solvable(qp, v, effort)
            ev[v] = verdict
            if verdict.status is Status.INSOLVABLE:
                ruled[pair] = (v, verdict)
                break
        evidence[pair] = ev
        if pair not in ruled and any(vd.status is Status.UNDECIDED for vd in ev.values()):
            undecided.add(pair)

    # image pairs go through the filters too, as a consistency check
    for pair in pairs:
        filter_pair(pair)

    # survivors: look for global solutions, which enlarge the image group
    bound = effort.witness_bound
    changed = True
    tried: set[tuple[int, int]] = set()
    while changed:
        changed = False
        for pair in pairs:
            if pair in images or pair in ruled or pair in undecided or pair in tried:
                continue
            tried.add(pair)
            z = global_pair_witness(QuadricPair(pair[0], pair[1], e1, e2, e3), bound)
            if z is not None:
                x, y = pair_witness_point(QuadricPair(pair[0], pair[1], e1, e2, e3), z)
                _close_images(c, images, [(pair, Point(x, y))])
                changed = True
                break

    outcomes = []
    for pair in pairs:
        if pair in images:
            if pair in ruled:
                raise DescentContradiction(f"image pair {pair} was ruled out at {ruled[pair][0]}")
            outcomes.append(
                DescentPairOutcome(pair, Classification.IMAGE, point=images[pair], evidence=evidence.get(pair, {}))
            )
        elif pair in ruled:
            v, _ = ruled[pair]
            outcomes.append(DescentPairOutcome(pair, Classification.LOCALLY_RULED_OUT, place=v, evidence=evidence[pair]))
        elif pair in undecided:
            outcomes.append(DescentPairOutcome(pair, Classification.UNDECIDED, evidence=evidence[pair]))
        else:
            outcomes.append(
                DescentPairOutcome(pair, Classification.LOCALLY_OK_NO_WITNESS, evidence=evidence[pair])
            )

    n_image = len(images)
    n_alive = len(pairs) - len(ruled)
    lower = _log2_exact(n_image) - 2
    upper = _log2_ceil(n_alive) - 2
    rb = _bound(lower, upper, Method.COMPLETE_2_DESCENT, len(undecided))
    return CompleteDescentResult(c, S, outcomes, rb, effort, list(points))


# --- descent via 2-isogeny -------------------------------------------------------


def _ab(c: Curve) -> tuple[Fraction, Fraction]:
    if c.C != 0:
        raise DegenerateIsogeny("isogeny descent needs a model y^2 = x^3 + ax^2 + bx")
    a, b = c.A, c.B
    if b * (a * a - 4 * b) == 0:
        raise DegenerateIsogeny("b(a^2 - 4b) = 0")
    return a, b


def isogenous_curve(c: Curve) -> Curve:
    """E': Y^2 = X^3 - 2a X^2 + (a^2 - 4b) X."""
    a, b = _ab(c)
    a2, b2 = -2 * a, a * a - 4 * b
    curve = Curve(a2, b2, 0)
    roots = [x for x in (P.x for P in two_torsion(curve)[1:])]
    if len(roots) == 3:
        # (0, 0) first, matching the source family's root order
        roots.sort(key=lambda x: (x != 0, x))
        return Curve(a2, b2, 0, tuple(roots))
    return curve


def isogeny_map(c: Curve, P: Point) -> Point:
    """phi(x, y) = (y^2/x^2, y(b - x^2)/x^2), kernel {O, (0, 0)}."""
    a, b = _ab(c)
    if not c.contains(P):
        raise PointNotOnCurve(f"{P} is not on {c}")
    if P.is_infinity or P.x == 0:
        return INFINITY
    x, y = P.x, P.y
    return Point(y * y / (x * x), y * (b - x * x) / (x * x))


def to_source(P: Point) -> Point:
    """E'' = (4a, 16b) back to E = (a, b) via (X, Y) -> (X/4, Y/8)."""
    return P if P.is_infinity else Point(P.x / 4, P.y / 8)


@dataclass
class SelmerSet:
    curve: Curve
    direction: str  # "phi" or "phihat"
    space_coeffs: tuple[Fraction, Fraction]
    places: list[Place]
    classes: set[SquareClass]
    evidence: dict[SquareClass, dict[Place, LocalVerdict]]
    image_points: dict[SquareClass, Point]
    undecided: set[SquareClass] = field(default_factory=set)
    ruled_out: dict[SquareClass, Place] = field(default_factory=dict)

    @property
    def image_classes(self) -> set[SquareClass]:
        return set(self.image_points)

    def is_subgroup(self) -> bool:
        return 1 in self.classes and all(class_mul(x, y) in self.classes for x in self.classes for y in self.classes)

    def sorted_classes(self) -> list[int]:
        return sorted(self.classes, key=lambda x: (abs(x), x < 0))


def _class_of_x(P: Point, zero_class: int) -> int:
    return 1 if P.is_infinity else (zero_class if P.x == 0 else squarefree_part(P.x))


def _close_classes(images: dict[int, Point], curve: Curve, new: Sequence[tuple[int, Point]]) -> None:
    for d, P in new:
        if d in images:
            continue
        for old_d, old_P in list(images.items()):
            images[class_mul(old_d, d)] = _add(curve, old_P, P)


def selmer_group(
    c: Curve,
    direction: str = "phi",
    effort: Effort = DEFAULT_EFFORT,
    strict: bool = True,
    points: Optional[Sequence[Point]] = None,
) -> SelmerSet:
    """The phi- or phihat-Selmer group as the classes d whose C_d is locally solvable on S.

    For ``phi`` the homogeneous spaces use the coefficients of ``c`` and the
    known images come from points of the isogenous curve; for ``phihat`` the
    roles swap.  ``points`` are extra known points on the curve whose
    x-coordinates give images (E' for phi, ``c`` for phihat).
    """
    a, b = _ab(c)
    E2 = isogenous_curve(c)
    if direction == "phi":
        sa, sb = a, b
        target = E2  # images are X-coordinates of points on E'
        back = lambda P: P  # noqa: E731
    elif direction == "phihat":
        sa, sb = E2.A, E2.B
        target = c  # images are x-coordinates on E, via E'' ~ E
        back = to_source
    else:
        raise ValueError("direction must be 'phi' or 'phihat'")
    zero_class = squarefree_part(sa * sa - 4 * sb)
    places = [REAL] + [Place(q) for q in sorted(set(prime_support(2 * sb * (sa * sa - 4 * sb))) | {2})]
    classes = q_s_2(places)

    if points is None:
        points = search_points(target, effort.search_height)
    known = list(two_torsion(target)) + list(points)
    images: dict[int, Point] = {1: INFINITY}
    _close_classes(images, target, [(_class_of_x(P, zero_class), P) for P in known])

    evidence: dict[int, dict[Place, LocalVerdict]] = {}
    members: set[int] = set()
    undecided: set[int] = set()
    ruled: dict[int, Place] = {}
    for d in classes:
        space = QuarticSpace(d, sa, sb)
        order = list(places)
        for img in images:
            mate = ruled.get(class_mul(d, img))
            if mate is not None:
                order.remove(mate)
                order.insert(0, mate)
                break
        ev: dict[Place, LocalVerdict] = {}
        for v in order:
            verdict = quartic_solvable(space, v, effort)
            ev[v] = verdict
            if verdict.status is Status.INSOLVABLE:
                ruled[d] = v
                break
        evidence[d] = ev
        if d in ruled:
            if d in images:
                raise DescentContradiction(f"image class {d} ruled out at {ruled[d]}")
            continue
        if any(vd.status is Status.UNDECIDED for vd in ev.values()):
            undecided.add(d)
        else:
            members.add(d)

    # rational points on C_d for members not yet known to be images
    changed = True
    while changed:
        changed = False
        for d in sorted(members - set(images), key=lambda x: (abs(x), x < 0)):
            space = QuarticSpace(d, sa, sb)
            found = global_quartic_point(space, effort.witness_bound)
            if found is None:
                continue
            X, Y = quartic_point_to_curve(space, *found)
            P = INFINITY if X is None else back(Point(X, Y))
            _close_classes(images, target, [(d, P)])
            changed = True
            break

    result = SelmerSet(
        curve=c,
        direction=direction,
        space_coeffs=(sa, sb),
        places=places,
        classes=members,
        evidence=evidence,
        image_points={d: P for d, P in images.items()},
        undecided=undecided,
        ruled_out=ruled,
    )
    if strict and undecided:
        raise UndecidedSelmer(result)
    return result


@dataclass
class IsogenyDescentResult:
    curve: Curve
    selmer_phi: SelmerSet
    selmer_phihat: SelmerSet
    bound: RankBound
    two_torsion_dim: int
    kernel_quotient_dim: int


def isogeny_descent(
    c: Curve,
    effort: Effort = DEFAULT_EFFORT,
    points_E: Optional[Sequence[Point]] = None,
    points_E2: Optional[Sequence[Point]] = None,
) -> IsogenyDescentResult:
    E2 = isogenous_curve(c)
    if points_E is None:
        points_E = search_points(c, effort.search_height)
    if points_E2 is None:
        points_E2 = search_points(E2, effort.search_height)
    # points of E map into E' under phi; their images are in phi(E) and add nothing,
    # but points of E' found on C_d for phi feed the phi side
    s_phi = selmer_group(c, "phi", effort, strict=False, points=points_E2)
    s_hat = selmer_group(c, "phihat", effort, strict=False, points=points_E)
    tors = two_torsion(c)
    t_dim = _log2_exact(len(tors))
    phi_tors = {isogeny_map(c, P) for P in tors}
    # E'(Q)[phihat] = {O, (0, 0)} always
    q_dim = 1 - _log2_exact(len(phi_tors))
    offset = t_dim + q_dim

    def dim(sel: SelmerSet, pessimistic: bool) -> int:
        n = len(sel.classes) + (len(sel.undecided) if pessimistic else 0)
        return _log2_ceil(n)

    upper = dim(s_phi, True) + dim(s_hat, True) - offset
    lower = _log2_exact(len(s_phi.image_points)) + _log2_exact(len(s_hat.image_points)) - offset
    undecided = len(s_phi.undecided) + len(s_hat.undecided)
    rb = _bound(lower, upper, Method.ISOGENY_DESCENT, undecided)
    return IsogenyDescentResult(c, s_phi, s_hat, rb, t_dim, q_dim)


def isogeny_rank_bound(c: Curve, effort: Effort = DEFAULT_EFFORT) -> RankBound:
    return isogeny_descent(c, effort).bound


def combine(bounds: Sequence[RankBound]) -> RankBound:
    if not bounds:
        raise ValueError("no rank bounds to combine")
    lower = max(rb.lower for rb in bounds)
    upper = min(rb.upper for rb in bounds)
    return _bound(lower, upper, Method.COMBINED, sum(rb.undecided for rb in bounds))


def combined_rank(c: Curve, effort: Effort = DEFAULT_EFFORT) -> RankBound:
    """Best bounds over every method that applies to ``c``."""
    bounds = []
    if c.roots is not None:
        bounds.append(complete_two_descent(c, effort).bound)
    if c.C == 0:
        bounds.append(isogeny_rank_bound(c, effort))
    return combine(bounds)
