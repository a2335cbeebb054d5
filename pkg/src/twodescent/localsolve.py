"""Local solvability of the two families of descent equations.

Both families reduce to a one-parameter search.  A quadric pair
``b1 z1^2 - b2 z2^2 = e2 - e1``, ``b1 z1^2 - b1 b2 z3^2 = e3 - e1`` has a
Q_v point iff some x in Q_v makes x - e1, x - e2, x - e3 lie in the square
classes of b1, b2, b1 b2 (then z_i are the square roots).  A quartic
``d w^2 = d^2 - 2 a d z^2 + (a^2 - 4b) z^4`` has a Q_v point iff some z (or
t = 1/z near infinity) makes the right-hand side lie in the class of d.

At a finite prime the parameter line is covered by p-adic balls which are
refined residue by residue until every factor has constant square class on
the ball.  A ball whose classes all match is a witness, and the remaining
coordinates are produced by Hensel lifting; a ball with a mismatching class
is discarded.  When every ball is discarded the space has no local point.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .arith import (
    REAL,
    Place,
    RationalLike,
    as_fraction,
    hensel_lift_root,
    int_valuation,
    is_twin_upper,
    local_square_class,
    rational_sqrt,
    sqrt_mod,
    squarefree_part,
    valuation,
)


class NotApplicableCurve(ValueError):
    pass


class Status(str, Enum):
    SOLVABLE = "SOLVABLE"
    INSOLVABLE = "INSOLVABLE"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class Effort:
    """Search limits shared by the local solver and the descent pipelines."""

    precision_2: int = 24
    precision_odd: int = 12
    search_height: int = 10_000
    witness_bound: int = 150

    def precision(self, p: int) -> int:
        return self.precision_2 if p == 2 else self.precision_odd

    def as_dict(self) -> dict:
        return {
            "precision_2": self.precision_2,
            "precision_odd": self.precision_odd,
            "search_height": self.search_height,
            "witness_bound": self.witness_bound,
        }


DEFAULT_EFFORT = Effort()


@dataclass(frozen=True)
class PAdicApprox:
    """A p-adic number known modulo p^precision (absolute precision)."""

    value: Fraction
    precision: int

    def __str__(self) -> str:
        return f"{self.value} + O(p^{self.precision})"


@dataclass(frozen=True)
class QuadricPair:
    b1: int
    b2: int
    e1: Fraction
    e2: Fraction
    e3: Fraction

    def __post_init__(self):
        for name in ("e1", "e2", "e3"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        for b in (self.b1, self.b2):
            if b == 0 or squarefree_part(b) != b:
                raise ValueError(f"{b} is not a nonzero squarefree integer")
        if len({self.e1, self.e2, self.e3}) != 3:
            raise ValueError("e1, e2, e3 must be distinct")

    @property
    def classes(self) -> tuple[int, int, int]:
        return self.b1, self.b2, squarefree_part(self.b1 * self.b2)

    def residuals(self, z1, z2, z3) -> tuple[Fraction, Fraction]:
        b1, b2 = self.b1, self.b2
        r1 = b1 * z1 * z1 - b2 * z2 * z2 - (self.e2 - self.e1)
        r2 = b1 * z1 * z1 - b1 * b2 * z3 * z3 - (self.e3 - self.e1)
        return r1, r2


@dataclass(frozen=True)
class QuarticSpace:
    d: int
    a: Fraction
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", as_fraction(self.a))
        object.__setattr__(self, "b", as_fraction(self.b))
        if self.d == 0 or squarefree_part(self.d) != self.d:
            raise ValueError(f"{self.d} is not a nonzero squarefree integer")
        if self.b * (self.a**2 - 4 * self.b) == 0:
            raise ValueError("b(a^2 - 4b) must be nonzero")

    @property
    def c(self) -> Fraction:
        return self.a**2 - 4 * self.b

    def quartic(self, z) -> Fraction:
        d, a = self.d, self.a
        z2 = z * z
        return d * d - 2 * a * d * z2 + self.c * z2 * z2

    def quartic_t(self, t) -> Fraction:
        """The quartic in the chart z = 1/t, w = w'/t^2."""
        d, a = self.d, self.a
        t2 = t * t
        return d * d * t2 * t2 - 2 * a * d * t2 + self.c


@dataclass(frozen=True)
class LocalVerdict:
    status: Status
    place: Place
    witness: Optional[dict] = None
    certificate: Optional[str] = None
    precision: Optional[int] = None
    window: Optional[int] = None
    hensel: tuple = ()

    @property
    def solvable(self) -> bool:
        return self.status is Status.SOLVABLE

    def summary(self) -> str:
        return f"{self.status.value} at {self.place}"


# --- ball search -----------------------------------------------------------------
# Polynomials are integer coefficient tuples, lowest degree first.


def _taylor_shift(f: Sequence[int], c: int, s: int) -> list[int]:
    """Coefficients of f(c + s*t)."""
    g = list(f)
    n = len(g)
    for i in range(n - 1):
        for j in range(n - 2, i - 1, -1):
            g[j] += c * g[j + 1]
    scale = 1
    for j in range(n):
        g[j] *= scale
        scale *= s
    return g


def _vals(n: int, p: int) -> float:
    return math.inf if n == 0 else int_valuation(n, p)


@lru_cache(maxsize=64)
def _residue_square_table(p: int) -> np.ndarray:
    table = np.zeros(p, dtype=bool)
    r = np.arange(p, dtype=np.int64)
    table[(r * r) % p] = True
    return table


@dataclass
class _SearchResult:
    status: Status
    center: Optional[int] = None
    depth: Optional[int] = None
    nodes: int = 0
    deepest: int = 0
    kills: Counter = field(default_factory=Counter)
    examples: list = field(default_factory=list)


def _class_str(cls: tuple[int, int], p: int) -> str:
    parity, unit = cls
    v = "odd" if parity else "even"
    if p == 2:
        return f"(v {v}, unit {unit} mod 8)"
    return f"(v {v}, unit {'residue' if unit == 1 else 'non-residue'})"


class _BallSearch:
    """Refine balls c + p^k Z_p of a parameter until each factor's square class is fixed."""

    def __init__(self, factors: tuple[tuple[int, ...], ...], p: int):
        self.factors = factors
        self.p = p
        self._expansions: dict[tuple[int, int], object] = {}

    # odd p: one expansion yields the classes on all p child balls at once
    def _expand_odd(self, c: int, k: int):
        key = (c, k)
        hit = self._expansions.get(key)
        if hit is not None:
            return hit
        p = self.p
        r = np.arange(p, dtype=np.int64)
        squares = _residue_square_table(p)
        info = []
        for f in self.factors:
            g = _taylor_shift(f, c, p**k)
            m = min(_vals(x, p) for x in g)
            h = [(x // p**m) % p for x in g]
            vals = np.zeros(p, dtype=np.int64)
            for coeff in reversed(h):
                vals = (vals * r + coeff) % p
            known = vals != 0
            info.append((m % 2, known, squares[vals]))
        self._expansions[key] = info
        return info

    def _classify_2(self, c: int, k: int):
        """Per factor: (bits known, parity, unit) on the ball c + 2^k Z_2."""
        key = (c, k)
        hit = self._expansions.get(key)
        if hit is not None:
            return hit
        info = []
        for f in self.factors:
            g = _taylor_shift(f, c, 2**k)
            v0 = _vals(g[0], 2)
            vhigh = min((_vals(x, 2) for x in g[1:]), default=math.inf)
            if v0 == math.inf:
                info.append((0, 0, 0))
                continue
            gap = vhigh - v0
            known = 3 if gap >= 3 else int(gap) if gap > 0 else 0
            unit = (g[0] >> int(v0)) % 8
            info.append((known, int(v0) % 2, unit))
        self._expansions[key] = info
        return info

    def run(self, targets: Sequence[tuple[int, int]], root: tuple[int, int], max_depth: int) -> _SearchResult:
        if self.p == 2:
            return self._run_2(targets, root, max_depth)
        return self._run_odd(targets, root, max_depth)

    def _run_odd(self, targets, root, max_depth) -> _SearchResult:
        p = self.p
        res = _SearchResult(Status.INSOLVABLE)
        queue = deque([root])
        undecided = False
        while queue:
            c, k = queue.popleft()
            res.nodes += 1
            res.deepest = max(res.deepest, k + 1)
            info = self._expand_odd(c, k)
            dead = np.zeros(p, dtype=bool)
            solved = np.ones(p, dtype=bool)
            for idx, ((parity, known, sq), (tpar, tunit)) in enumerate(zip(info, targets)):
                if parity == tpar:
                    match = known & (sq == (tunit == 1))
                else:
                    match = np.zeros(p, dtype=bool)
                mismatch = known & ~match & ~dead
                n_kill = int(np.count_nonzero(mismatch))
                if n_kill:
                    res.kills[idx] += n_kill
                    if len(res.examples) < 4:
                        j = int(np.flatnonzero(mismatch)[0])
                        have = (parity, 1 if sq[j] else -1)
                        res.examples.append((c + j * p**k, k + 1, idx, have, (tpar, tunit)))
                dead |= mismatch
                solved &= match
            hits = np.flatnonzero(solved)
            if hits.size:
                j = int(hits[0])
                return _SearchResult(Status.SOLVABLE, c + j * p**k, k + 1, res.nodes, res.deepest)
            open_children = np.flatnonzero(~dead)
            if open_children.size:
                if k + 1 >= max_depth:
                    undecided = True
                    continue
                for j in open_children.tolist():
                    queue.append((c + j * p**k, k + 1))
        if undecided:
            res.status = Status.UNDECIDED
        return res

    def _run_2(self, targets, root, max_depth) -> _SearchResult:
        res = _SearchResult(Status.INSOLVABLE)
        queue = deque([root])
        undecided = False
        while queue:
            c, k = queue.popleft()
            res.nodes += 1
            res.deepest = max(res.deepest, k)
            info = self._classify_2(c, k)
            dead, solved = False, True
            for idx, ((known, parity, unit), (tpar, tunit)) in enumerate(zip(info, targets)):
                if known == 0:
                    solved = False
                    continue
                mask = (1 << known) - 1
                if parity != tpar or (unit & mask) != (tunit & mask):
                    dead = True
                    res.kills[idx] += 1
                    if len(res.examples) < 4:
                        res.examples.append((c, k, idx, (parity, unit), (tpar, tunit)))
                    break
                if known < 3:
                    solved = False
            if dead:
                continue
            if solved:
                return _SearchResult(Status.SOLVABLE, c, k, res.nodes, res.deepest)
            if k >= max_depth:
                undecided = True
                continue
            queue.append((c, k + 1))
            queue.append((c + 2**k, k + 1))
        if undecided:
            res.status = Status.UNDECIDED
        return res


@lru_cache(maxsize=4096)
def _engine(factors: tuple[tuple[int, ...], ...], p: int) -> _BallSearch:
    return _BallSearch(factors, p)


def _targets(values: Sequence[RationalLike], p: int) -> tuple[tuple[int, int], ...]:
    return tuple(local_square_class(v, p) for v in values)


# --- p-adic square roots and witnesses -----------------------------------------


def padic_sqrt(q: RationalLike, p: int, precision: int) -> Fraction:
    """r with v(r^2 - q) >= precision, for q a nonzero square in Q_p."""
    q = as_fraction(q)
    v = valuation(q, p)
    if v % 2:
        raise ValueError(f"{q} is not a square in Q_{p}")
    m = v // 2
    unit = q / Fraction(p) ** v
    rel = max(precision - v, 3) + 1
    modulus = p**rel
    u = unit.numerator * pow(unit.denominator, -1, modulus) % modulus
    if p == 2:
        if u % 8 != 1:
            raise ValueError(f"{q} is not a square in Q_2")
        x0 = 1
    else:
        x0 = sqrt_mod(u, p)
        if x0 is None or x0 == 0:
            raise ValueError(f"{q} is not a square in Q_{p}")
    w = hensel_lift_root([-u, 0, 1], x0, p, rel)
    return Fraction(p) ** m * w


def _val_q(x: Fraction, p: int) -> float:
    return math.inf if x == 0 else valuation(x, p)


def _pair_witness(pair: QuadricPair, x: Fraction, p: int, precision: int) -> tuple[dict, int, tuple]:
    # z3 pairs with b1*b2 itself, not its squarefree part
    betas = (pair.b1, pair.b2, pair.b1 * pair.b2)
    es = (pair.e1, pair.e2, pair.e3)
    extra = 0
    while True:
        target = precision + extra
        zs = [padic_sqrt((x - e) / b, p, target + 2 * abs(valuation(b, p)) + 4) for e, b in zip(es, betas)]
        r1, r2 = pair.residuals(*zs)
        d1 = 2 * pair.b2 * zs[1]
        d2 = 2 * pair.b1 * pair.b2 * zs[2]
        v1, v2 = _val_q(r1, p), _val_q(r2, p)
        w1, w2 = valuation(d1, p), valuation(d2, p)
        achieved = min(v1, v2)
        if achieved >= precision and v1 > 2 * w1 and v2 > 2 * w2:
            prec = int(achieved) if math.isfinite(achieved) else target
            witness = {
                "x": x,
                "z1": PAdicApprox(zs[0], prec),
                "z2": PAdicApprox(zs[1], prec),
                "z3": PAdicApprox(zs[2], prec),
            }
            hensel = (("eq1 in z2", v1, w1), ("eq2 in z3", v2, w2))
            return witness, prec, hensel
        extra += 4


def _quartic_witness(space: QuarticSpace, chart: str, param: Fraction, p: int, precision: int):
    value = space.quartic(param) if chart == "z" else space.quartic_t(param)
    extra = 0
    while True:
        w = padic_sqrt(value / space.d, p, precision + extra + 2 * abs(valuation(space.d, p)) + 4)
        resid = space.d * w * w - value
        v_res = _val_q(resid, p)
        v_der = valuation(2 * space.d * w, p)
        if v_res >= precision and v_res > 2 * v_der:
            prec = int(v_res) if math.isfinite(v_res) else precision + extra
            witness = {"chart": chart, chart: param, "w": PAdicApprox(w, prec)}
            return witness, prec, (("quartic in w", v_res, v_der),)
        extra += 4


def _certificate(charts, p: int, cap: int) -> str:
    """Summarise an exhausted search; ``charts`` holds (parameter, result, factor names)."""
    nodes = sum(r.nodes for _, r, _ in charts)
    deepest = max(r.deepest for _, r, _ in charts)
    lines = [f"no Q_{p} point: {nodes} balls refined to depth {deepest} (cap {cap}), all obstructed"]
    for param, r, names in charts:
        for idx, n in sorted(r.kills.items()):
            lines.append(f"  [{param}] {names[idx]}: wrong square class on {n} ball(s)")
        for center, k, idx, have, want in r.examples[:2]:
            lines.append(
                f"  [{param}] e.g. {param} = {center} mod {p}^{k}: {names[idx]} has class "
                f"{_class_str(have, p)}, needs {_class_str(want, p)}"
            )
    return "\n".join(lines)


# --- quadric pairs ----------------------------------------------------------------


def _pair_real(pair: QuadricPair) -> LocalVerdict:
    betas = pair.classes
    es = sorted({pair.e1, pair.e2, pair.e3})
    samples = [es[0] - 1, (es[0] + es[1]) / 2, (es[1] + es[2]) / 2, es[2] + 1]
    seen = []
    for x in samples:
        signs = tuple(1 if x > e else -1 for e in (pair.e1, pair.e2, pair.e3))
        seen.append(signs)
        if all(s * b > 0 for s, b in zip(signs, betas)):
            return LocalVerdict(Status.SOLVABLE, REAL, witness={"x": x})
    want = tuple(1 if b > 0 else -1 for b in betas)
    cert = (
        f"no real point: need signs {want} for (x-e1, x-e2, x-e3); "
        f"the four intervals give {seen}"
    )
    return LocalVerdict(Status.INSOLVABLE, REAL, certificate=cert)


def _common_denominator(values: Sequence[Fraction]) -> int:
    D = 1
    for v in values:
        D = D * v.denominator // math.gcd(D, v.denominator)
    return D


def quadric_pair_solvable(pair: QuadricPair, v: Place, effort: Effort = DEFAULT_EFFORT) -> LocalVerdict:
    """Decide whether the pair of quadrics has a point over Q_v."""
    if v.is_real:
        return _pair_real(pair)
    p = v.prime
    cap = effort.precision(p)
    # x -> D^2 x makes the roots integral without changing any square class
    D = _common_denominator([pair.e1, pair.e2, pair.e3])
    E = [int(e * D * D) for e in (pair.e1, pair.e2, pair.e3)]
    betas = pair.classes
    x_factors = tuple((-e, 1) for e in E)
    x_targets = _targets(betas, p)
    # chart x = 1/t: classes of t(1 - e1 t), (x-e2)/(x-e1), (x-e3)/(x-e1)
    t_factors = (
        (0, 1, -E[0]),
        (1, -(E[0] + E[1]), E[0] * E[1]),
        (1, -(E[0] + E[2]), E[0] * E[2]),
    )
    t_targets = _targets((betas[0], betas[0] * betas[1], betas[0] * betas[2]), p)
    results = []
    for chart, factors, targets, root in (
        ("x", x_factors, x_targets, (0, 0)),
        ("t", t_factors, t_targets, (0, 1)),
    ):
        res = _engine(factors, p).run(targets, root, cap)
        results.append(res)
        if res.status is Status.SOLVABLE:
            X = Fraction(res.center) if chart == "x" else Fraction(1, res.center)
            x = X / (D * D)
            witness, prec, hensel = _pair_witness(pair, x, p, cap)
            witness["chart"] = chart
            return LocalVerdict(
                Status.SOLVABLE, v, witness=witness, precision=prec, window=res.depth, hensel=hensel
            )
    deepest = max(r.deepest for r in results)
    if any(r.status is Status.UNDECIDED for r in results):
        return LocalVerdict(
            Status.UNDECIDED,
            v,
            certificate=f"open balls remain at depth {cap} at {p}",
            precision=cap,
            window=deepest,
        )
    cert = _certificate(
        [
            ("x", results[0], ("x-e1", "x-e2", "x-e3")),
            ("t=1/x", results[1], ("t(1-e1 t)", "(x-e2)/(x-e1)", "(x-e3)/(x-e1)")),
        ],
        p,
        cap,
    )
    return LocalVerdict(Status.INSOLVABLE, v, certificate=cert, precision=cap, window=deepest)


# --- quartics ---------------------------------------------------------------------


def _quartic_real(space: QuarticSpace) -> LocalVerdict:
    d, a, b, c = space.d, space.a, space.b, space.c
    if d > 0:
        return LocalVerdict(Status.SOLVABLE, REAL, witness={"chart": "z", "z": Fraction(0)})
    if c < 0:
        return LocalVerdict(Status.SOLVABLE, REAL, witness={"chart": "t", "t": Fraction(0)})
    if a < 0 and b > 0:
        # the quadratic in u = z^2 is negative around its vertex a d / c > 0
        u = a * d / c
        j = 0
        while True:
            scale = 4**j
            z = Fraction(math.isqrt(u.numerator * scale // u.denominator), 2**j)
            if space.quartic(z) < 0:
                return LocalVerdict(Status.SOLVABLE, REAL, witness={"chart": "z", "z": z})
            j += 1
    cert = (
        f"no real point: d = {d} < 0 but d^2 - 2adz^2 + (a^2-4b)z^4 > 0 for all real z "
        f"(a^2-4b = {c} > 0 and not (a < 0 and b > 0))"
    )
    return LocalVerdict(Status.INSOLVABLE, REAL, certificate=cert)


def quartic_solvable(space: QuarticSpace, v: Place, effort: Effort = DEFAULT_EFFORT) -> LocalVerdict:
    """Decide whether d w^2 = d^2 - 2adz^2 + (a^2-4b)z^4 has a point over Q_v."""
    if v.is_real:
        return _quartic_real(space)
    p = v.prime
    cap = effort.precision(p)
    # (a, b) -> (u^2 a, u^4 b) with z -> z/u leaves the set of d unchanged
    u = _common_denominator([space.a, space.b])
    a, b = int(space.a * u * u), int(space.b * u**4)
    d = space.d
    c = a * a - 4 * b
    target = _targets([d], p)
    results = []
    for chart, f, root in (
        ("z", (d * d, 0, -2 * a * d, 0, c), (0, 0)),
        ("t", (c, 0, -2 * a * d, 0, d * d), (0, 1)),
    ):
        res = _engine((f,), p).run(target, root, cap)
        results.append(res)
        if res.status is Status.SOLVABLE:
            param = Fraction(res.center) * u if chart == "z" else Fraction(res.center, u)
            witness, prec, hensel = _quartic_witness(space, chart, param, p, cap)
            return LocalVerdict(
                Status.SOLVABLE, v, witness=witness, precision=prec, window=res.depth, hensel=hensel
            )
    deepest = max(r.deepest for r in results)
    if any(r.status is Status.UNDECIDED for r in results):
        return LocalVerdict(
            Status.UNDECIDED,
            v,
            certificate=f"open balls remain at depth {cap} at {p}",
            precision=cap,
            window=deepest,
        )
    cert = _certificate(
        [("z", results[0], ("quartic(z)/d",)), ("t=1/z", results[1], ("quartic_t(t)/d",))], p, cap
    )
    return LocalVerdict(Status.INSOLVABLE, v, certificate=cert, precision=cap, window=deepest)


# --- witness re-evaluation ------------------------------------------------------


def check_pair_witness(pair: QuadricPair, verdict: LocalVerdict) -> bool:
    """Re-evaluate a SOLVABLE verdict's witness against the pair equations."""
    if verdict.status is not Status.SOLVABLE or verdict.witness is None:
        return False
    if verdict.place.is_real:
        x = verdict.witness["x"]
        return all((x - e) / b > 0 for e, b in zip((pair.e1, pair.e2, pair.e3), pair.classes))
    p = verdict.place.prime
    w = verdict.witness
    z1, z2, z3 = (w[k].value for k in ("z1", "z2", "z3"))
    if 0 in (z1, z2, z3):
        return False
    r1, r2 = pair.residuals(z1, z2, z3)
    v1, v2 = _val_q(r1, p), _val_q(r2, p)
    w1 = valuation(2 * pair.b2 * z2, p)
    w2 = valuation(2 * pair.b1 * pair.b2 * z3, p)
    N = min(w[k].precision for k in ("z1", "z2", "z3"))
    return v1 >= N and v2 >= N and v1 > 2 * w1 and v2 > 2 * w2


def check_quartic_witness(space: QuarticSpace, verdict: LocalVerdict) -> bool:
    if verdict.status is not Status.SOLVABLE or verdict.witness is None:
        return False
    chart = verdict.witness["chart"]
    param = verdict.witness[chart]
    value = space.quartic(param) if chart == "z" else space.quartic_t(param)
    if verdict.place.is_real:
        return value / space.d > 0
    p = verdict.place.prime
    w = verdict.witness["w"]
    resid = space.d * w.value * w.value - value
    v_res = _val_q(resid, p)
    v_der = valuation(2 * space.d * w.value, p)
    return v_res >= w.precision and v_res > 2 * v_der


# --- the hand-derived table rules for p = 7 mod 8 -----------------------------------


def _twin_images(p: int) -> list[tuple[int, int]]:
    q = p - 2
    return [(1, 1), (2 * p, -2), (2, -2 * q), (p, q)]


def _mul_pair(u: tuple[int, int], w: tuple[int, int]) -> tuple[int, int]:
    return squarefree_part(u[0] * w[0]), squarefree_part(u[1] * w[1])


def _base_rules(b1: int, b2: int, p: int) -> list[tuple[Place, int]]:
    q = p - 2
    fired = []
    if b1 < 0 and b2 > 0:
        fired.append((REAL, 1))
    if b1 < 0 and b2 < 0:
        fired.append((REAL, 2))
    if b1 % 2 == 0 and b2 % 2 != 0:
        fired.append((Place(2), 3))
    if (b1, b2) in ((p, 1), (p * q, 1)):
        fired.append((Place(p), 5))
    if (b1, b2) == (q, 1):
        fired.append((Place(q), 7))
    if b2 % p == 0 and b1 % p != 0:
        fired.append((Place(p), 9))
    if (b1, b2) == (1, -q):
        fired.append((Place(q), 11))
    if (b1, b2) in ((p, -q), (p * q, -q)):
        fired.append((Place(p), 13))
    if (b1, b2) == (p * q, -1):
        fired.append((Place(q), 15))
    return fired


def all_table_note_rules(pair: QuadricPair, p: int) -> list[tuple[Place, int]]:
    """Every hand-derived table rule that fires for the pair, as (place, note)."""
    if not (is_twin_upper(p) and p % 8 == 7):
        raise NotApplicableCurve(f"rules need twin primes with p = 7 mod 8, got p = {p}")
    if (pair.e1, pair.e2, pair.e3) != (0, 2, p):
        raise NotApplicableCurve("rules are stated for roots (0, 2, p)")
    b1, b2 = pair.b1, pair.b2
    fired = _base_rules(b1, b2, p)
    # even-numbered notes: translate an odd-numbered rule by an image of E[2]
    for img in _twin_images(p)[1:]:
        c1, c2 = _mul_pair((b1, b2), img)
        for place, note in _base_rules(c1, c2, p):
            if note in (3, 5, 7, 9, 11, 13, 15):
                fired.append((place, note + 1))
    return sorted(set(fired), key=lambda pn: pn[1])


def table_note_rules(pair: QuadricPair, p: int) -> Optional[tuple[Place, int]]:
    fired = all_table_note_rules(pair, p)
    return fired[0] if fired else None


# --- global witnesses ---------------------------------------------------------------


def global_pair_witness(pair: QuadricPair, height_bound: int) -> Optional[tuple[Fraction, Fraction, Fraction]]:
    """Rational (z1, z2, z3) solving both equations with z1 = m/n, 0 <= m <= bound, 0 < n <= bound.

    A zero coordinate is allowed; those solutions come from 2-torsion points.
    """
    D = _common_denominator([pair.e1, pair.e2, pair.e3])
    E1, E2, E3 = (int(e * D * D) for e in (pair.e1, pair.e2, pair.e3))
    b1, b2 = pair.b1, pair.b2
    b12 = b1 * b2
    for n in range(1, height_bound + 1):
        n2 = n * n
        for m in range(0, height_bound + 1):
            if math.gcd(m, n) != 1:
                continue
            # X - E_i = (b1 m^2 + (E1 - E_i) n^2) / n^2 in scaled coordinates
            base = b1 * m * m
            s2 = b2 * (base + (E1 - E2) * n2)
            if s2 < 0:
                continue
            r2 = math.isqrt(s2)
            if r2 * r2 != s2:
                continue
            s3 = b12 * (base + (E1 - E3) * n2)
            if s3 < 0:
                continue
            r3 = math.isqrt(s3)
            if r3 * r3 != s3:
                continue
            z1 = Fraction(m, n * D)
            z2 = Fraction(r2, abs(b2) * n * D)
            z3 = Fraction(r3, abs(b12) * n * D)
            if pair.residuals(z1, z2, z3) == (0, 0):
                return z1, z2, z3
    return None


def pair_witness_point(pair: QuadricPair, z: tuple[Fraction, Fraction, Fraction]) -> tuple[Fraction, Fraction]:
    """The point (b1 z1^2 + e1, b1 b2 z1 z2 z3)."""
    z1, z2, z3 = z
    return pair.b1 * z1 * z1 + pair.e1, pair.b1 * pair.b2 * z1 * z2 * z3


def global_quartic_point(space: QuarticSpace, bound: int) -> Optional[tuple[str, Fraction, Fraction]]:
    """A rational point (chart, parameter, w) on the quartic with parameter m/n, |m|, n <= bound."""
    d, a = space.d, space.a
    c = space.c
    if rational_sqrt(c / d) is not None:
        return "t", Fraction(0), rational_sqrt(c / d)
    if d > 0 and rational_sqrt(Fraction(d)) is not None:
        return "z", Fraction(0), rational_sqrt(Fraction(d))
    u = _common_denominator([a, space.b])
    A, C = int(a * u * u), int(c * u**4)
    for n in range(1, bound + 1):
        n2 = n * n
        n4 = n2 * n2
        for m in range(1, bound + 1):
            if math.gcd(m, n) != 1:
                continue
            m2 = m * m
            # d * (n^4 * quartic(m/n)) must be a square, scaled by u
            F = d * d * n4 - 2 * A * d * m2 * n2 + C * m2 * m2
            s = d * F
            if s <= 0:
                continue
            r = math.isqrt(s)
            if r * r != s:
                continue
            z = Fraction(m * u, n)
            w = Fraction(r, abs(d) * n2)
            if d * w * w == space.quartic(z):
                return "z", z, w
    return None


def quartic_point_to_curve(space: QuarticSpace, chart: str, param: Fraction, w: Fraction) -> tuple[Optional[Fraction], Optional[Fraction]]:
    """Map a point of C_d to Y^2 = X^3 - 2aX^2 + (a^2 - 4b)X via (d/z^2, d w/z^3)."""
    d = space.d
    if chart == "t":
        t = param
        if t == 0:
            return 0, 0  # the points at infinity map to (0, 0)
        z, w = 1 / t, w / (t * t)
    else:
        z = param
    if z == 0:
        return None, None  # maps to the identity
    return d / (z * z), d * w / z**3
