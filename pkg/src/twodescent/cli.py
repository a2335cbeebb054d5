"""Command-line front end: ``twodescent rank|survey|local|table``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from fractions import Fraction
from typing import Optional, Sequence

from .arith import Place
from .curve import CurveError, NotTwinPrime
from .descent import DegenerateIsogeny
from .localsolve import (
    DEFAULT_EFFORT,
    Effort,
    LocalVerdict,
    NotApplicableCurve,
    QuadricPair,
    QuarticSpace,
    Status,
    quadric_pair_solvable,
    quartic_solvable,
)
from .report import (
    METHODS,
    SurveyCache,
    descent_table,
    rank_report,
    render_table,
    run_survey,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNDECIDED = 3
EXIT_INTERRUPTED = 130


class InputError(ValueError):
    pass


def _ints(text: str, n: int, what: str) -> list[Fraction]:
    parts = [s.strip() for s in text.split(",")]
    if len(parts) != n:
        raise InputError(f"{what} needs {n} comma-separated values, got {text!r}")
    try:
        return [Fraction(s) for s in parts]
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad number in {text!r}: {exc}") from None


def _squarefree_int(q: Fraction, what: str) -> int:
    if q.denominator != 1:
        raise InputError(f"{what} must be an integer, got {q}")
    return int(q)


def _effort(args) -> Effort:
    effort = DEFAULT_EFFORT
    if getattr(args, "search_height", None) is not None:
        effort = replace(effort, search_height=args.search_height)
    if getattr(args, "precision", None) is not None:
        effort = replace(effort, precision_2=args.precision, precision_odd=args.precision)
    return effort


def _fail(msg: str, code: int = EXIT_INPUT) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


# --- rank ------------------------------------------------------------------------


def cmd_rank(args) -> int:
    rep = rank_report(args.p, args.method, _effort(args))
    if args.format == "json":
        print(json.dumps(rep.to_dict(), indent=2))
    else:
        print(rep.text())
    return EXIT_UNDECIDED if rep.undecided else EXIT_OK


# --- survey ----------------------------------------------------------------------


def _survey_text(result) -> str:
    lines = [f"{'p':>6} {'mod8':>4} {'rank':>7} {'conj':>4} {'agrees':>7}  witness"]
    for r in result.reports:
        rank = str(r.lower) if r.exact else f"[{r.lower},{r.upper}]"
        agrees = r.agrees if isinstance(r.agrees, str) else str(r.agrees).lower()
        wit = f"({r.witnesses[0][0]}, {r.witnesses[0][1]})" if r.witnesses else "-"
        lines.append(f"{r.p:>6} {r.mod8:>4} {rank:>7} {r.conjectured_rank:>4} {agrees:>7}  {wit}")
    return "\n".join(lines)


def _summary_text(summary: dict) -> str:
    lines = [f"{'mod8':>4} {'curves':>6} {'exact':>5} {'agree':>5} {'disagree':>8} {'unknown':>7} {'rate':>6}"]
    for r, row in summary.items():
        rate = "-" if row["agreement_rate"] is None else f"{row['agreement_rate']:.2f}"
        lines.append(
            f"{r:>4} {row['curves']:>6} {row['exact']:>5} {row['agree']:>5} "
            f"{row['disagree']:>8} {row['unknown']:>7} {rate:>6}"
        )
    return "\n".join(lines)


def cmd_survey(args) -> int:
    cache = SurveyCache(args.out)
    result = run_survey(args.max, args.mod8, args.method, _effort(args), cache, args.jobs)
    if args.format == "jsonl":
        for r in result.reports:
            print(r.to_json())
    else:
        print(_survey_text(result))
        print()
        print(_summary_text(result.summary))
    print(
        f"{len(result.reports)} curve(s), {result.computed} computed, "
        f"{len(result.reports) - result.computed} from cache",
        file=sys.stderr,
    )
    if result.interrupted:
        print("interrupted; cache holds every finished record", file=sys.stderr)
        return EXIT_INTERRUPTED
    return EXIT_UNDECIDED if any(r.undecided for r in result.reports) else EXIT_OK


# --- local -----------------------------------------------------------------------


def _verdict_text(verdict: LocalVerdict, what: str) -> str:
    lines = [f"{what} at {verdict.place}: {verdict.status.value}"]
    if verdict.witness:
        for k, v in verdict.witness.items():
            lines.append(f"  {k} = {v}")
    if verdict.certificate:
        lines.append(f"  {verdict.certificate}")
    if verdict.hensel:
        lines.append(f"  hensel {verdict.hensel}")
    if verdict.precision is not None:
        lines.append(f"  precision {verdict.precision}")
    return "\n".join(lines)


def _verdict_json(verdict: LocalVerdict, what: str) -> dict:
    return {
        "space": what,
        "place": str(verdict.place),
        "status": verdict.status.value,
        "witness": {k: str(v) for k, v in (verdict.witness or {}).items()},
        "certificate": verdict.certificate,
        "precision": verdict.precision,
    }


def cmd_local(args) -> int:
    try:
        place = Place.parse(args.place)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    effort = _effort(args)
    try:
        if args.pair is not None:
            b1, b2, e1, e2, e3 = _ints(args.pair, 5, "--pair")
            space = QuadricPair(_squarefree_int(b1, "b1"), _squarefree_int(b2, "b2"), e1, e2, e3)
            what = f"pair b1={space.b1} b2={space.b2} e=({e1}, {e2}, {e3})"
            verdict = quadric_pair_solvable(space, place, effort)
        else:
            d, a, b = _ints(args.quartic, 3, "--quartic")
            space = QuarticSpace(_squarefree_int(d, "d"), a, b)
            what = f"quartic d={space.d} a={a} b={b}"
            verdict = quartic_solvable(space, place, effort)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.format == "json":
        print(json.dumps(_verdict_json(verdict, what), indent=2))
    else:
        print(_verdict_text(verdict, what))
    return EXIT_UNDECIDED if verdict.status is Status.UNDECIDED else EXIT_OK


# --- table -----------------------------------------------------------------------


def cmd_table(args) -> int:
    table = descent_table(args.p, _effort(args))
    print(render_table(table))
    undecided = table.counts().get("UNDECIDED", 0)
    return EXIT_UNDECIDED if undecided else EXIT_OK


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twodescent",
        description="Rank bounds for y^2 = x(x - p)(x - 2) over twin primes by 2-descent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rank = sub.add_parser("rank", help="rank report for one curve")
    rank.add_argument("--p", type=int, required=True)
    rank.add_argument("--method", choices=METHODS, default="both")
    rank.add_argument("--search-height", type=int, default=None)
    rank.add_argument("--format", choices=("text", "json"), default="text")
    rank.set_defaults(func=cmd_rank)

    survey = sub.add_parser("survey", help="reports for every twin prime up to a bound")
    survey.add_argument("--max", type=int, required=True)
    survey.add_argument("--mod8", type=int, choices=(1, 3, 5, 7), default=None)
    survey.add_argument("--out", default=None, help="JSONL cache file (appended to)")
    survey.add_argument("--jobs", type=int, default=1)
    survey.add_argument("--method", choices=METHODS, default="both")
    survey.add_argument("--search-height", type=int, default=None)
    survey.add_argument("--format", choices=("jsonl", "text"), default="jsonl")
    survey.set_defaults(func=cmd_survey)

    local = sub.add_parser("local", help="local solvability of one descent equation")
    group = local.add_mutually_exclusive_group(required=True)
    group.add_argument("--pair", metavar="b1,b2,e1,e2,e3")
    group.add_argument("--quartic", metavar="d,a,b")
    local.add_argument("--place", required=True, help="'real' or a prime")
    local.add_argument("--precision", type=int, default=None)
    local.add_argument("--format", choices=("text", "json"), default="text")
    local.set_defaults(func=cmd_local)

    table = sub.add_parser("table", help="the 256-pair descent table for p = 7 mod 8")
    table.add_argument("--p", type=int, required=True)
    table.set_defaults(func=cmd_table)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the input-error code
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, NotTwinPrime, NotApplicableCurve, DegenerateIsogeny, CurveError) as exc:
        return _fail(str(exc))
    except ValueError as exc:
        return _fail(str(exc))
    except KeyboardInterrupt:
        return _fail("interrupted", EXIT_INTERRUPTED)


if __name__ == "__main__":
    sys.exit(main())
