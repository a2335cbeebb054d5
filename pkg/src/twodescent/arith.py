"""Exact integer and rational arithmetic used by the descent code.

Rationals are :class:`fractions.Fraction`; square classes are signed
squarefree integers.  Nothing here touches floating point.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

Rational = Fraction
RationalLike = Union[int, Fraction]

TRIAL_DIVISION_LIMIT = 10**6
RHO_ITERATION_CAP = 2_000_000
_DETERMINISTIC_MR_LIMIT = 341_550_071_728_321
_DETERMINISTIC_MR_BASES = (2, 3, 5, 7, 11, 13, 17)
_RANDOM_MR_ROUNDS = 64


class ArithmeticError_(ValueError):
    """Base class for errors raised by this module."""


class FactorizationLimitExceeded(ArithmeticError_):
    pass


class ZeroValuation(ArithmeticError_):
    """Raised when asked for the valuation of zero."""


class HenselCriterionFailed(ArithmeticError_):
    pass


@dataclass(frozen=True, order=True)
class Place:
    """A place of Q: ``Place()`` is the real place, ``Place(p)`` is p-adic."""

    prime: Optional[int] = None

    @property
    def is_real(self) -> bool:
        return self.prime is None

    def __str__(self) -> str:
        return "real" if self.prime is None else str(self.prime)

    @classmethod
    def parse(cls, text: str) -> "Place":
        text = text.strip().lower()
        if text in ("real", "inf", "infinity", "r", "oo"):
            return REAL
        p = int(text)
        if p < 2 or not is_prime(p):
            raise ValueError(f"{text!r} is not a prime")
        return cls(p)

    def sort_key(self) -> tuple[int, int]:
        # real first, then 2, then odd primes ascending
        return (0, 0) if self.prime is None else (1, self.prime)


REAL = Place()


@dataclass(frozen=True)
class Factorization:
    sign: int
    factors: tuple[tuple[int, int], ...]

    @property
    def value(self) -> int:
        n = self.sign
        for q, e in self.factors:
            n *= q**e
        return n

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.factors)


def as_fraction(q: RationalLike) -> Fraction:
    return q if isinstance(q, Fraction) else Fraction(q)


# --- primality and factoring -------------------------------------------------


def _mr_witness(n: int, d: int, s: int, a: int) -> bool:
    """True if ``a`` proves ``n`` composite."""
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return False
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return False
    return True


def is_prime(n: int) -> bool:
    """Miller-Rabin; deterministic below 3.4e14, 64 random rounds above."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < _DETERMINISTIC_MR_LIMIT:
        bases: Sequence[int] = _DETERMINISTIC_MR_BASES
    else:
        rng = random.Random(n)
        bases = [rng.randrange(2, n - 1) for _ in range(_RANDOM_MR_ROUNDS)]
    return not any(_mr_witness(n, d, s, a) for a in bases)


def _pollard_brent(n: int, cap: int) -> Optional[int]:
    rng = random.Random(n ^ 0x5DEECE66D)
    spent = 0
    while spent < cap:
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
        g, r, q = 1, 1, 1
        x = ys = y
        while g == 1 and spent < cap:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            spent += r
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if 1 < g < n:
            return g
    return None


def _split(n: int, out: dict[int, int], cap: int) -> None:
    if n == 1:
        return
    if is_prime(n):
        out[n] = out.get(n, 0) + 1
        return
    r = math.isqrt(n)
    if r * r == n:
        _split(r, out, cap)
        _split(r, out, cap)
        return
    d = _pollard_brent(n, cap)
    if d is None:
        raise FactorizationLimitExceeded(f"could not split cofactor {n}")
    _split(d, out, cap)
    _split(n // d, out, cap)


def factorize(n: int, rho_cap: int = RHO_ITERATION_CAP) -> Factorization:
    """Complete factorization: trial division to 10^6, then Pollard rho."""
    if n == 0:
        raise ValueError("cannot factor 0")
    sign = 1 if n > 0 else -1
    n = abs(n)
    found: dict[int, int] = {}
    for q in (2, 3, 5):
        while n % q == 0:
            found[q] = found.get(q, 0) + 1
            n //= q
    # wheel over residues coprime to 30
    q, steps, i = 7, (4, 2, 4, 2, 4, 6, 2, 6), 0
    while q * q <= n and q <= TRIAL_DIVISION_LIMIT:
        while n % q == 0:
            found[q] = found.get(q, 0) + 1
            n //= q
        q += steps[i]
        i = (i + 1) % 8
    if n > 1:
        if q * q > n:
            found[n] = found.get(n, 0) + 1
        else:
            _split(n, found, rho_cap)
    return Factorization(sign, tuple(sorted(found.items())))


def prime_support(q: RationalLike) -> list[int]:
    q = as_fraction(q)
    primes = set(factorize(q.numerator).primes) | set(factorize(q.denominator).primes)
    return sorted(primes)


# --- valuations and square classes -------------------------------------------


def int_valuation(n: int, p: int) -> int:
    if n == 0:
        raise ZeroValuation("valuation of 0 is undefined")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def valuation(q: RationalLike, p: int) -> int:
    """Exponent of ``p`` in the nonzero rational ``q``."""
    q = as_fraction(q)
    if q == 0:
        raise ZeroValuation("valuation of 0 is undefined")
    return int_valuation(q.numerator, p) - int_valuation(q.denominator, p)


def squarefree_part(q: RationalLike) -> int:
    """Canonical square-class representative: the signed squarefree s with q/s a square."""
    q = as_fraction(q)
    if q == 0:
        raise ZeroValuation("zero has no square class")
    # q = n/d ~ n*d mod squares
    m = q.numerator * q.denominator
    s = 1 if m > 0 else -1
    for prime, e in factorize(m).factors:
        if e % 2:
            s *= prime
    return s


def square_class_product(a: int, b: int) -> int:
    """Product in Q*/Q*^2 of two squarefree representatives."""
    g = math.gcd(a, b)
    return (a // g) * (b // g)


def rational_sqrt(q: RationalLike) -> Optional[Fraction]:
    """Exact nonnegative square root of a rational, or None."""
    q = as_fraction(q)
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


# --- quadratic residues ------------------------------------------------------


def jacobi(a: int, n: int) -> int:
    if n <= 0 or n % 2 == 0:
        raise ValueError("n must be an odd positive integer")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def sqrt_mod(a: int, p: int) -> Optional[int]:
    """Tonelli-Shanks.  Returns a root in [0, p), 0 for a = 0 mod p, None for non-residues."""
    a %= p
    if a == 0:
        return 0
    if jacobi(a, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while jacobi(z, p) != -1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t, r = t * c % p, r * b % p
    return r


def local_square_class(q: RationalLike, p: int) -> tuple[int, int]:
    """Class of q in Q_p*/Q_p*^2 as (valuation mod 2, unit invariant).

    The unit invariant is the Legendre symbol for odd p and the unit part
    mod 8 for p = 2.
    """
    q = as_fraction(q)
    v = valuation(q, p)
    num = q.numerator // p ** max(v, 0)
    den = q.denominator // p ** max(-v, 0)
    if p == 2:
        return v % 2, (num * den) % 8
    return v % 2, jacobi(num % p, p) * jacobi(den % p, p)


def is_square_in_local_field(q: RationalLike, v: Place) -> bool:
    q = as_fraction(q)
    if q == 0:
        raise ZeroValuation("zero is not in Q_v*")
    if v.is_real:
        return q > 0
    parity, unit = local_square_class(q, v.prime)
    return parity == 0 and unit == 1


# --- polynomials and Hensel lifting -------------------------------------------
# Polynomials are coefficient lists, lowest degree first.


def poly_eval(coeffs: Sequence[RationalLike], x: RationalLike):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def poly_derivative(coeffs: Sequence[int]) -> list[int]:
    return [i * c for i, c in enumerate(coeffs)][1:]


def _val_or_inf(n: int, p: int) -> float:
    return math.inf if n == 0 else int_valuation(n, p)


def hensel_lift_root(f: Sequence[int], x0: int, p: int, target_precision: int) -> int:
    """Lift an approximate root of the integer polynomial ``f`` to ``p^target_precision``.

    Requires v(f(x0)) > 2 v(f'(x0)).  The result x satisfies
    f(x) = 0 mod p^target_precision and x = x0 mod p^(v(f'(x0)) + 1).
    """
    df = poly_derivative(f)
    fx, dfx = poly_eval(f, x0), poly_eval(df, x0)
    vf, vd = _val_or_inf(fx, p), _val_or_inf(dfx, p)
    if not vf > 2 * vd:
        raise HenselCriterionFailed(f"v(f(x0))={vf} is not > 2*v(f'(x0))={2 * vd}")
    e = int(vd)
    modulus = p ** (target_precision + e + 1)
    x = x0
    while fx % p**target_precision != 0:
        # f(x)/f'(x) is p-integral; compute it mod p^(target+1)
        unit = (dfx // p**e) % modulus
        step = (fx // p**e) * pow(unit, -1, modulus)
        x = (x - step) % modulus
        fx, dfx = poly_eval(f, x), poly_eval(df, x)
    return x


# --- primes ------------------------------------------------------------------


def primes_up_to(bound: int) -> list[int]:
    if bound < 2:
        return []
    sieve = bytearray([1]) * (bound + 1)
    sieve[0] = sieve[1] = 0
    for i in range(2, math.isqrt(bound) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(range(i * i, bound + 1, i)))
    return [i for i, flag in enumerate(sieve) if flag]


def twin_primes_up_to(bound: int) -> list[int]:
    """Upper members p of twin pairs (p - 2, p) with p <= bound."""
    if bound < 5:
        return []
    sieve = bytearray([1]) * (bound + 1)
    sieve[0] = sieve[1] = 0
    for i in range(2, math.isqrt(bound) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(range(i * i, bound + 1, i)))
    return [p for p in range(5, bound + 1) if sieve[p] and sieve[p - 2]]


def is_twin_upper(p: int) -> bool:
    return p >= 5 and is_prime(p) and is_prime(p - 2)
