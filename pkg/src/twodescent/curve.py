"""Weierstrass cubics y^2 = x^3 + A x^2 + B x + C over Q and their rational points."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .arith import (
    RationalLike,
    as_fraction,
    factorize,
    is_prime,
    is_twin_upper,
    primes_up_to,
)


class CurveError(ValueError):
    pass


class SingularCurve(CurveError):
    pass


class NotTwinPrime(CurveError):
    pass


class PointNotOnCurve(CurveError):
    pass


class BadReduction(CurveError):
    pass


INFINITE = math.inf


@dataclass(frozen=True)
class Point:
    """Affine point, or the point at infinity when ``x`` is None."""

    x: Optional[Fraction] = None
    y: Optional[Fraction] = None

    @classmethod
    def affine(cls, x: RationalLike, y: RationalLike) -> "Point":
        return cls(as_fraction(x), as_fraction(y))

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def __neg__(self) -> "Point":
        return self if self.x is None else Point(self.x, -self.y)

    def __str__(self) -> str:
        return "O" if self.x is None else f"({self.x}, {self.y})"

    def as_strings(self) -> Optional[list[str]]:
        return None if self.x is None else [str(self.x), str(self.y)]

    def sort_key(self):
        return (0, 0, 0) if self.x is None else (1, self.x, self.y)


INFINITY = Point()


@dataclass(frozen=True)
class Curve:
    """y^2 = x^3 + A x^2 + B x + C, optionally with its rational 2-torsion roots."""

    A: Fraction
    B: Fraction
    C: Fraction
    roots: Optional[tuple[Fraction, Fraction, Fraction]] = None

    def __post_init__(self):
        for name in ("A", "B", "C"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.roots is not None:
            roots = tuple(as_fraction(e) for e in self.roots)
            object.__setattr__(self, "roots", roots)
            e1, e2, e3 = roots
            if len({e1, e2, e3}) != 3:
                raise SingularCurve("roots must be pairwise distinct")
            if (-(e1 + e2 + e3), e1 * e2 + e1 * e3 + e2 * e3, -e1 * e2 * e3) != (
                self.A,
                self.B,
                self.C,
            ):
                raise CurveError("roots do not match the coefficients")
        if self.cubic_discriminant() == 0:
            raise SingularCurve(f"singular cubic: {self}")

    @classmethod
    def from_roots(cls, e1: RationalLike, e2: RationalLike, e3: RationalLike) -> "Curve":
        e1, e2, e3 = map(as_fraction, (e1, e2, e3))
        return cls(
            -(e1 + e2 + e3), e1 * e2 + e1 * e3 + e2 * e3, -e1 * e2 * e3, (e1, e2, e3)
        )

    def cubic_discriminant(self) -> Fraction:
        A, B, C = self.A, self.B, self.C
        return A * A * B * B - 4 * B**3 - 4 * A**3 * C - 27 * C * C + 18 * A * B * C

    def rhs(self, x: RationalLike) -> Fraction:
        return ((x + self.A) * x + self.B) * x + self.C

    def contains(self, P: Point) -> bool:
        return P.is_infinity or P.y * P.y == self.rhs(P.x)

    def __str__(self) -> str:
        return f"y^2 = x^3 + ({self.A})x^2 + ({self.B})x + ({self.C})"


def curve_from_twin_prime(p: int) -> Curve:
    """E_p : y^2 = x(x - p)(x - 2), with roots ordered (0, 2, p)."""
    if not is_twin_upper(p):
        raise NotTwinPrime(f"{p} and {p - 2} are not both prime")
    return Curve.from_roots(0, 2, p)


def discriminant(c: Curve) -> Fraction:
    """16 times the discriminant of the cubic."""
    d = 16 * c.cubic_discriminant()
    if d == 0:
        raise SingularCurve("discriminant is zero")
    return d


def _require(c: Curve, *points: Point) -> None:
    for P in points:
        if not c.contains(P):
            raise PointNotOnCurve(f"{P} is not on {c}")


def _add(c: Curve, P: Point, Q: Point) -> Point:
    if P.is_infinity:
        return Q
    if Q.is_infinity:
        return P
    if P.x == Q.x:
        if P.y == -Q.y:
            return INFINITY
        lam = (3 * P.x * P.x + 2 * c.A * P.x + c.B) / (2 * P.y)
    else:
        lam = (Q.y - P.y) / (Q.x - P.x)
    x3 = lam * lam - c.A - P.x - Q.x
    return Point(x3, lam * (P.x - x3) - P.y)


def add_points(c: Curve, P: Point, Q: Point) -> Point:
    _require(c, P, Q)
    return _add(c, P, Q)


def negate(c: Curve, P: Point) -> Point:
    _require(c, P)
    return -P


def multiply(c: Curve, n: int, P: Point) -> Point:
    _require(c, P)
    if n < 0:
        return -multiply(c, -n, P)
    result, base = INFINITY, P
    while n:
        if n & 1:
            result = _add(c, result, base)
        base = _add(c, base, base)
        n >>= 1
    return result


# --- integral models and integer roots ---------------------------------------


def integral_scale(c: Curve) -> int:
    """Smallest u > 0 making (u^2 A, u^4 B, u^6 C) integral."""
    u = 1
    for coeff, k in ((c.A, 2), (c.B, 4), (c.C, 6)):
        for q, e in factorize(coeff.denominator).factors:
            need = -(-e // k)
            have = 0
            t = u
            while t % q == 0:
                t //= q
                have += 1
            if have < need:
                u *= q ** (need - have)
    return u


def integral_model(c: Curve) -> tuple[tuple[int, int, int], int]:
    u = integral_scale(c)
    a, b, cc = c.A * u**2, c.B * u**4, c.C * u**6
    return (int(a), int(b), int(cc)), u


def _floor_critical(a: int, D: int, sign: int, bound: int) -> int:
    """floor((-a + sign*sqrt(D))/3) by bisection on an exact predicate."""

    def le(n: int) -> bool:  # n <= (-a + sign sqrt D)/3
        t = 3 * n + a
        if sign > 0:
            return t <= 0 or t * t <= D
        return t <= 0 and t * t >= D

    lo, hi = -bound, bound
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if le(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def integer_roots_monic_cubic(a: int, b: int, c: int) -> list[int]:
    """All integer roots of x^3 + a x^2 + b x + c, exactly."""

    def f(x: int) -> int:
        return ((x + a) * x + b) * x + c

    bound = 2 + max(abs(a), abs(b), abs(c))
    D = a * a - 3 * b
    if D > 0:
        k1 = _floor_critical(a, D, -1, bound)
        k2 = _floor_critical(a, D, 1, bound)
        segments = [(-bound, k1, 1), (k1 + 1, k2, -1), (k2 + 1, bound, 1)]
    else:
        segments = [(-bound, bound, 1)]
    roots = set()
    for lo, hi, direction in segments:
        if lo > hi:
            continue
        # direction-monotone on [lo, hi]: find x with f(x) = 0 by bisection
        while lo < hi:
            mid = (lo + hi) // 2
            if direction * f(mid) < 0:
                lo = mid + 1
            else:
                hi = mid
        if f(lo) == 0:
            roots.add(lo)
    return sorted(roots)


def two_torsion(c: Curve) -> list[Point]:
    """O together with every (e, 0) for e a rational root of the cubic."""
    if c.roots is not None:
        xs = sorted(c.roots)
    else:
        (a, b, cc), u = integral_model(c)
        xs = [Fraction(r, u * u) for r in integer_roots_monic_cubic(a, b, cc)]
    return [INFINITY] + [Point(x, Fraction(0)) for x in xs]


# --- reduction mod q -----------------------------------------------------------


@lru_cache(maxsize=256)
def _square_table(q: int) -> np.ndarray:
    table = np.zeros(q, dtype=bool)
    table[(np.arange(q, dtype=np.int64) ** 2) % q] = True
    return table


def is_good_prime(c: Curve, q: int) -> bool:
    disc = discriminant(c)
    return all(
        x.denominator % q for x in (c.A, c.B, c.C)
    ) and disc.numerator % q != 0


def count_points_mod(c: Curve, q: int) -> int:
    """#E(F_q) by direct enumeration over x."""
    if q == 2 or not is_prime(q):
        raise BadReduction(f"{q} is not an odd prime")
    if not is_good_prime(c, q):
        raise BadReduction(f"{c} has bad reduction at {q}")
    A, B, C = (int(x.numerator * pow(x.denominator, -1, q)) % q for x in (c.A, c.B, c.C))
    xs = np.arange(q, dtype=np.int64)
    vals = ((((xs + A) % q) * xs % q + B) % q * xs % q + C) % q
    nonzero = vals != 0
    squares = _square_table(q)[vals] & nonzero
    # 1 (infinity) + one point per root + two per nonzero square
    return int(1 + np.count_nonzero(~nonzero) + 2 * np.count_nonzero(squares))


def good_odd_primes(c: Curve, count: int) -> list[int]:
    out = []
    limit = 64
    while len(out) < count:
        out = [q for q in primes_up_to(limit) if q > 2 and is_good_prime(c, q)][:count]
        limit *= 2
    return out


# --- torsion ---------------------------------------------------------------------


@dataclass(frozen=True)
class TorsionResult:
    structure: str
    invariants: tuple[int, ...]
    points: tuple[Point, ...]
    order: int


def torsion_bound(c: Curve, nprimes: int = 3) -> int:
    g = 0
    for q in good_odd_primes(c, nprimes):
        g = math.gcd(g, count_points_mod(c, q))
    return g


def _is_integral(P: Point) -> bool:
    return P.is_infinity or (P.x.denominator == 1 and P.y.denominator == 1)


def _order_on_integral_model(model: Curve, P: Point, bound: int):
    if P.is_infinity:
        return 1
    Q = P
    for n in range(1, bound + 1):
        if Q.is_infinity:
            return n
        if not _is_integral(Q):
            return INFINITE
        Q = _add(model, Q, P)
    return INFINITE


def point_order(c: Curve, P: Point, bound: Optional[int] = None):
    """Order of P, or ``INFINITE`` (math.inf) when P is not torsion."""
    _require(c, P)
    if P.is_infinity:
        return 1
    (a, b, cc), u = integral_model(c)
    model = Curve(a, b, cc)
    PP = Point(P.x * u * u, P.y * u**3)
    if bound is None:
        bound = torsion_bound(c)
    return _order_on_integral_model(model, PP, bound)


def _divisors_with_square_dividing(D: int) -> list[int]:
    """Positive y with y^2 | D."""
    ys = [1]
    for q, e in factorize(D).factors:
        ys = [y * q**k for y in ys for k in range(e // 2 + 1)]
    return sorted(ys)


def torsion_subgroup(c: Curve) -> TorsionResult:
    """Exact torsion subgroup: gcd bound over good primes, Lutz-Nagell candidates, order checks."""
    (a, b, cc), u = integral_model(c)
    model = Curve(a, b, cc)
    bound = torsion_bound(c)
    D = int(model.cubic_discriminant())
    candidates = [INFINITY]
    for x in integer_roots_monic_cubic(a, b, cc):
        candidates.append(Point(Fraction(x), Fraction(0)))
    for y in _divisors_with_square_dividing(abs(D)):
        for x in integer_roots_monic_cubic(a, b, cc - y * y):
            candidates += [Point(Fraction(x), Fraction(y)), Point(Fraction(x), Fraction(-y))]
    torsion = []
    for P in candidates:
        n = _order_on_integral_model(model, P, bound)
        if n != INFINITE:
            torsion.append((n, P))
    points = tuple(
        sorted(
            (INFINITY if P.is_infinity else Point(P.x / u**2, P.y / u**3) for _, P in torsion),
            key=Point.sort_key,
        )
    )
    order = len(points)
    n_two = sum(1 for n, _ in torsion if n <= 2)
    if order == 1:
        invariants: tuple[int, ...] = ()
    elif n_two == 4:
        invariants = (order // 2, 2)
    else:
        invariants = (order,)
    structure = " x ".join(f"Z/{n}" for n in invariants) or "trivial"
    return TorsionResult(structure, invariants, points, order)


# --- naive point search --------------------------------------------------------

_SIEVE_MODULI = (64, 63, 65, 11, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def search_points(c: Curve, height_bound: int) -> list[Point]:
    """Affine rational points with naive height of x at most ``height_bound``.

    On the integral model x = m/d^2 with gcd(m, d) = 1, |m| <= H and d^2 <= H.
    Points are mapped back to ``c``; both signs of y are returned.
    """
    if height_bound < 1:
        raise ValueError("height_bound must be positive")
    (a, b, cc), u = integral_model(c)
    H = height_bound
    ms = np.arange(-H, H + 1, dtype=np.int64)
    found: set[Point] = set()
    for d in range(1, math.isqrt(H) + 1):
        d2 = d * d
        mask = np.gcd(ms, d) == 1
        for q in _SIEVE_MODULI:
            vals = np.array(
                [(x**3 + a * x * x * d2 + b * x * d2 * d2 + cc * d2**3) % q for x in range(q)],
                dtype=np.int64,
            )
            mask &= _square_table(q)[vals][ms % q]
        for m in ms[mask].tolist():
            val = m**3 + a * m * m * d2 + b * m * d2 * d2 + cc * d2**3
            if val < 0:
                continue
            s = math.isqrt(val)
            if s * s != val:
                continue
            x = Fraction(m, d2)
            y = Fraction(s, d2 * d)
            found.add(Point(x / u**2, y / u**3))
            found.add(Point(x / u**2, -y / u**3))
    return sorted(found, key=lambda P: (_naive_height(P.x), P.x, P.y))


def _naive_height(x: Fraction) -> int:
    return max(abs(x.numerator), x.denominator)


def closure_check(c: Curve, points: Iterable[Point]) -> bool:
    return all(c.contains(P) for P in points)
