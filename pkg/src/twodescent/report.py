"""Rank reports, the JSONL survey cache and the 256-pair table for E_p."""

from __future__ import annotations

import hashlib
import json
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .arith import Place, twin_primes_up_to
from .curve import Point, curve_from_twin_prime, search_points, torsion_subgroup
from .descent import (
    Classification,
    RankBound,
    combine,
    complete_two_descent,
    isogeny_descent,
    isogenous_curve,
    isogeny_map,
    to_source,
)
from .localsolve import (
    DEFAULT_EFFORT,
    Effort,
    NotApplicableCurve,
    QuadricPair,
    Status,
    all_table_note_rules,
    quadric_pair_solvable,
)

SCHEMA_VERSION = 1
METHODS = ("complete", "isogeny", "both")
UNKNOWN = "UNKNOWN"

# order of keys in every serialized report; changing it changes cache bytes
REPORT_FIELDS = (
    "schema_version",
    "p",
    "method",
    "effort_hash",
    "mod8",
    "torsion",
    "lower",
    "upper",
    "exact",
    "selmer_phi",
    "selmer_phihat",
    "image_pairs",
    "witnesses",
    "conjectured_rank",
    "agrees",
    "timing_ms",
    "effort",
)
TIMING_FIELDS = ("timing_ms",)


def effort_hash(effort: Effort) -> str:
    blob = json.dumps(effort.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def conjectured_rank(p: int) -> int:
    return {7: 0, 3: 1, 5: 1, 1: 2}[p % 8]


def agreement(bound: RankBound, p: int) -> Union[bool, str]:
    if not bound.exact:
        return UNKNOWN
    return bound.lower == conjectured_rank(p)


@dataclass
class RankReport:
    p: int
    method: str
    effort_hash: str
    mod8: int
    torsion: str
    lower: int
    upper: int
    exact: bool
    selmer_phi: list[int]
    selmer_phihat: list[int]
    image_pairs: list[list[int]]
    witnesses: list[list[str]]
    conjectured_rank: int
    agrees: Union[bool, str]
    timing_ms: int
    effort: dict
    schema_version: int = SCHEMA_VERSION
    # classes left UNDECIDED; drives the exit code, not serialized
    undecided: int = 0

    @property
    def key(self) -> tuple[int, str, str]:
        return self.p, self.method, self.effort_hash

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "RankReport":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {data.get('schema_version')!r}")
        return cls(**{name: data[name] for name in REPORT_FIELDS})

    def text(self) -> str:
        bound = f"{self.lower}" if self.exact else f"[{self.lower}, {self.upper}]"
        lines = [
            f"E_{self.p}: y^2 = x(x - {self.p})(x - 2)    p mod 8 = {self.mod8}",
            f"  method          {self.method}",
            f"  torsion         {self.torsion}",
            f"  rank            {bound}{'' if self.exact else '  (not exact)'}",
            f"  conjectured     {self.conjectured_rank}    agrees: {_fmt_agree(self.agrees)}",
        ]
        if self.selmer_phi or self.selmer_phihat:
            lines.append(f"  S^phi           {{{', '.join(map(str, self.selmer_phi))}}}")
            lines.append(f"  S^phihat        {{{', '.join(map(str, self.selmer_phihat))}}}")
        if self.image_pairs:
            lines.append("  image pairs     " + " ".join(f"({a},{b})" for a, b in self.image_pairs))
        for x, y in self.witnesses:
            lines.append(f"  witness         ({x}, {y})")
        if self.undecided:
            lines.append(f"  undecided       {self.undecided} class(es) at the effort cap")
        lines.append(f"  search height   {self.effort['search_height']}    time {self.timing_ms} ms")
        return "\n".join(lines)


def _fmt_agree(value) -> str:
    return value if isinstance(value, str) else str(value).lower()


def _witness_points(points: Iterable[Point]) -> list[list[str]]:
    seen = {}
    for P in points:
        if P.is_infinity or P.y == 0:
            continue
        P = P if P.y > 0 else -P
        seen[P] = None
    ordered = sorted(seen, key=lambda P: (max(abs(P.x.numerator), P.x.denominator), P.x))
    return [P.as_strings() for P in ordered[:8]]


def rank_report(p: int, method: str = "both", effort: Effort = DEFAULT_EFFORT) -> RankReport:
    """Run the requested pipelines on E_p and assemble a report."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    start = time.perf_counter()
    c = curve_from_twin_prime(p)
    tors = torsion_subgroup(c)
    points = search_points(c, effort.search_height)
    bounds: list[RankBound] = []
    selmer_phi: list[int] = []
    selmer_phihat: list[int] = []
    image_pairs: list[list[int]] = []
    witnesses = list(points)
    if method in ("complete", "both"):
        res = complete_two_descent(c, effort, points=points)
        bounds.append(res.bound)
        image_pairs = sorted([list(o.pair) for o in res.outcomes if o.classification is Classification.IMAGE])
        witnesses += [o.point for o in res.outcomes if o.point is not None]
    if method in ("isogeny", "both"):
        iso = isogeny_descent(c, effort, points_E=points)
        bounds.append(iso.bound)
        selmer_phi = iso.selmer_phi.sorted_classes()
        selmer_phihat = iso.selmer_phihat.sorted_classes()
        witnesses += list(iso.selmer_phihat.image_points.values())
        # phi-side points live on E'; send them to E through the dual isogeny
        E2 = isogenous_curve(c)
        witnesses += [to_source(isogeny_map(E2, P)) for P in iso.selmer_phi.image_points.values()]
    bound = bounds[0] if len(bounds) == 1 else combine(bounds)
    elapsed = int((time.perf_counter() - start) * 1000)
    return RankReport(
        p=p,
        method=method,
        effort_hash=effort_hash(effort),
        mod8=p % 8,
        torsion=tors.structure,
        lower=bound.lower,
        upper=bound.upper,
        exact=bound.exact,
        selmer_phi=selmer_phi,
        selmer_phihat=selmer_phihat,
        image_pairs=image_pairs,
        witnesses=_witness_points(witnesses),
        conjectured_rank=conjectured_rank(p),
        agrees=agreement(bound, p),
        undecided=bound.undecided,
        timing_ms=elapsed,
        effort=effort.as_dict(),
    )


# --- survey cache ------------------------------------------------------------------


class SurveyCache:
    """Append-only JSONL store of reports keyed by (p, method, effort_hash)."""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self.records: dict[tuple, RankReport] = {}
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rep = RankReport.from_dict(json.loads(line))
                except (ValueError, KeyError, TypeError):
                    # a torn final line from an interrupted run
                    continue
                self.records.setdefault(rep.key, rep)

    def get(self, key: tuple) -> Optional[RankReport]:
        return self.records.get(key)

    def __contains__(self, key) -> bool:
        return key in self.records

    def __len__(self) -> int:
        return len(self.records)

    def append(self, rep: RankReport) -> None:
        if rep.key in self.records:
            return
        self.records[rep.key] = rep
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(rep.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())


@dataclass
class SurveyResult:
    reports: list[RankReport]
    computed: int  # descent computations actually run (cache misses)
    interrupted: bool = False
    summary: dict = field(default_factory=dict)


def survey_primes(max_p: int, mod8: Optional[int] = None) -> list[int]:
    if max_p < 5:
        return []
    return [p for p in twin_primes_up_to(max_p) if mod8 is None or p % 8 == mod8]


def _report_job(args) -> RankReport:
    p, method, effort = args
    return rank_report(p, method, effort)


def summarize(reports: Iterable[RankReport]) -> dict:
    """Per residue class: counts of exact / agreeing / disagreeing / unknown rows."""
    rows: dict[int, Counter] = {}
    for rep in reports:
        ctr = rows.setdefault(rep.mod8, Counter())
        ctr["curves"] += 1
        if rep.agrees == UNKNOWN:
            ctr["unknown"] += 1
        else:
            ctr["exact"] += 1
            ctr["agree" if rep.agrees else "disagree"] += 1
    out = {}
    for r in sorted(rows):
        ctr = rows[r]
        exact = ctr["exact"]
        out[r] = {
            "curves": ctr["curves"],
            "exact": exact,
            "agree": ctr["agree"],
            "disagree": ctr["disagree"],
            "unknown": ctr["unknown"],
            "agreement_rate": (ctr["agree"] / exact) if exact else None,
        }
    return out


def run_survey(
    max_p: int,
    mod8: Optional[int] = None,
    method: str = "both",
    effort: Effort = DEFAULT_EFFORT,
    cache: Optional[SurveyCache] = None,
    jobs: int = 1,
    on_report=None,
) -> SurveyResult:
    """Reports for every twin prime p <= max_p, reusing cached records.

    New records are appended to the cache in ascending p as they arrive, so an
    interrupted run leaves a valid prefix and the file content does not depend
    on ``jobs``.
    """
    cache = cache if cache is not None else SurveyCache()
    h = effort_hash(effort)
    primes = survey_primes(max_p, mod8)
    missing = [p for p in primes if (p, method, h) not in cache]
    computed = 0
    interrupted = False
    try:
        if jobs > 1 and len(missing) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for rep in pool.map(_report_job, [(p, method, effort) for p in missing]):
                    cache.append(rep)
                    computed += 1
                    if on_report:
                        on_report(rep)
        else:
            for p in missing:
                rep = rank_report(p, method, effort)
                cache.append(rep)
                computed += 1
                if on_report:
                    on_report(rep)
    except KeyboardInterrupt:
        interrupted = True
    reports = [cache.get((p, method, h)) for p in primes]
    reports = [r for r in reports if r is not None]
    return SurveyResult(reports, computed, interrupted, summarize(reports))


def deterministic_lines(reports: Iterable[RankReport]) -> list[str]:
    """Serialized reports with timing removed, for reproducibility checks."""
    out = []
    for rep in reports:
        d = rep.to_dict()
        for k in TIMING_FIELDS:
            d.pop(k)
        out.append(json.dumps(d, separators=(",", ":")))
    return out


# --- the 16 x 16 table for p = 7 mod 8 ---------------------------------------------


@dataclass
class TableCell:
    b1: int
    b2: int
    classification: Classification
    point: Optional[Point]
    place: Optional[Place]  # where the solver ruled the pair out
    note: Optional[int]  # lowest hand-derived rule that fires
    rule_place: Optional[Place]
    rule_confirmed: Optional[bool]  # solver agrees the rule's place is obstructing

    @property
    def contradiction(self) -> bool:
        return self.rule_confirmed is False


@dataclass
class DescentTable:
    p: int
    classes: list[int]
    cells: dict[tuple[int, int], TableCell]

    def counts(self) -> Counter:
        return Counter(c.classification for c in self.cells.values())

    def contradictions(self) -> list[TableCell]:
        return [c for c in self.cells.values() if c.contradiction]

    def note_mismatches(self) -> list[TableCell]:
        """Cells ruled out by the solver only at places other than the rule's."""
        return [
            c
            for c in self.cells.values()
            if c.note is not None and c.place is not None and c.place != c.rule_place
        ]


def descent_table(p: int, effort: Effort = DEFAULT_EFFORT) -> DescentTable:
    if p % 8 != 7:
        raise NotApplicableCurve(f"the table is for p = 7 mod 8, got p = {p}")
    c = curve_from_twin_prime(p)
    result = complete_two_descent(c, effort)
    e1, e2, e3 = c.roots
    cells = {}
    for o in result.outcomes:
        pair = QuadricPair(o.pair[0], o.pair[1], e1, e2, e3)
        rule = next(iter(all_table_note_rules(pair, p)), None)
        note = rule_place = confirmed = None
        if rule is not None:
            rule_place, note = rule
            verdict = o.evidence.get(rule_place) or quadric_pair_solvable(pair, rule_place, effort)
            confirmed = verdict.status is Status.INSOLVABLE
        cells[o.pair] = TableCell(
            o.pair[0], o.pair[1], o.classification, o.point, o.place, note, rule_place, confirmed
        )
    classes = sorted({o.pair[0] for o in result.outcomes}, key=lambda x: (abs(x), x < 0))
    return DescentTable(p, classes, cells)


def _place_label(v: Optional[Place]) -> str:
    if v is None:
        return "?"
    return "R" if v.is_real else f"Q{v.prime}"


def render_table(table: DescentTable) -> str:
    """Rows are b1, columns b2. Image cells are starred and listed below."""
    width = max(7, max(len(str(x)) for x in table.classes) + 1)
    head = "b1\\b2".rjust(width) + "".join(str(x).rjust(width) for x in table.classes)
    lines = [f"E_{table.p}: 2-descent pairs (b1, b2)", head]
    images = []
    for b1 in table.classes:
        row = [str(b1).rjust(width)]
        for b2 in table.classes:
            cell = table.cells[(b1, b2)]
            if cell.classification is Classification.IMAGE:
                label = "*"
                images.append(cell)
            elif cell.classification is Classification.LOCALLY_RULED_OUT:
                label = _place_label(cell.place)
                if cell.note is not None:
                    label += f"({cell.note})"
            elif cell.classification is Classification.UNDECIDED:
                label = "?"
            else:
                label = "ok"
            if cell.contradiction:
                label = "!" + label
            row.append(label.rjust(width))
        lines.append("".join(row))
    lines.append("")
    lines.append("labels: place where the pair has no local point (note number of the hand-derived rule)")
    for cell in images:
        lines.append(f"  * ({cell.b1}, {cell.b2})  <- {cell.point}")
    counts = table.counts()
    ruled = counts[Classification.LOCALLY_RULED_OUT]
    lines.append(
        f"image {counts[Classification.IMAGE]}, ruled out {ruled}, "
        f"undecided {counts[Classification.UNDECIDED]}, "
        f"locally ok {counts[Classification.LOCALLY_OK_NO_WITNESS]}, total {len(table.cells)}"
    )
    bad = table.contradictions()
    lines.append(f"rule contradictions: {len(bad)}")
    for cell in bad:
        lines.append(f"  ! ({cell.b1}, {cell.b2}) rule {cell.note} at {_place_label(cell.rule_place)}")
    mism = table.note_mismatches()
    if mism:
        lines.append(f"solver ruled out at a different place than the rule for {len(mism)} pair(s)")
    return "\n".join(lines)
