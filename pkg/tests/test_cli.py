import json
import subprocess
import sys

from twodescent.cli import main
from twodescent.descent import Classification
from twodescent.localsolve import DEFAULT_EFFORT, Effort
from twodescent.report import (
    REPORT_FIELDS,
    SurveyCache,
    UNKNOWN,
    conjectured_rank,
    descent_table,
    deterministic_lines,
    effort_hash,
    rank_report,
    run_survey,
    summarize,
)


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "twodescent", *args], capture_output=True, text=True, timeout=600
    )
    return proc.returncode, proc.stdout, proc.stderr


def test_rank_p7_subprocess():
    code, out, _ = run_cli("rank", "--p", "7", "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert list(rep) == list(REPORT_FIELDS)
    assert (rep["lower"], rep["upper"], rep["exact"]) == (0, 0, True)
    assert rep["torsion"] == "Z/2 x Z/2"
    assert rep["agrees"] is True
    assert rep["schema_version"] == 1


def test_rank_rejects_non_twin():
    code, _, err = run_cli("rank", "--p", "9")
    assert code == 2 and "not both prime" in err


def test_rank_p13_isogeny(capsys):
    assert main(["rank", "--p", "13", "--method", "isogeny", "--format", "json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["upper"] == 1
    assert rep["selmer_phi"] == [1, -1]
    assert rep["selmer_phihat"] == [1, 2, 13, 26]
    assert rep["agrees"] in (True, UNKNOWN)
    if rep["agrees"] is True:
        assert rep["witnesses"]


def test_rank_text(capsys):
    assert main(["rank", "--p", "5", "--search-height", "100"]) == 0
    out = capsys.readouterr().out
    assert "rank            1" in out and "(10, 20)" in out


def test_usage_errors_exit_2(capsys):
    assert main(["rank"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["local", "--quartic", "4,1,1", "--place", "2"]) == 2
    assert main(["local", "--quartic", "1,2", "--place", "2"]) == 2
    assert main(["local", "--pair", "1,1,0,2,7", "--place", "9"]) == 2
    assert main(["table", "--p", "13"]) == 2


def test_local_pair(capsys):
    assert main(["local", "--pair", "7,1,0,2,7", "--place", "7", "--format", "json"]) == 0
    v = json.loads(capsys.readouterr().out)
    assert v["status"] == "INSOLVABLE" and v["certificate"]


def test_local_quartic(capsys):
    assert main(["local", "--quartic", "1,-9,14", "--place", "2", "--format", "json"]) == 0
    v = json.loads(capsys.readouterr().out)
    assert v["status"] == "SOLVABLE"
    assert v["witness"]["z"] == "0" and v["witness"]["w"].startswith("1 ")
    assert main(["local", "--quartic=-3,-9,14", "--place", "real"]) == 0
    out = capsys.readouterr().out
    assert "SOLVABLE" in out


def test_local_undecided_exit_code(capsys):
    code = main(["local", "--pair", "1,2,0,2,7", "--place", "2", "--precision", "1"])
    assert code in (0, 3)
    out = capsys.readouterr().out
    assert ("UNDECIDED" in out) == (code == 3)


def test_table_p7(capsys):
    assert main(["table", "--p", "7"]) == 0
    out = capsys.readouterr().out
    assert "image 4, ruled out 252, undecided 0, locally ok 0, total 256" in out
    assert "rule contradictions: 0" in out


def test_table_cells():
    table = descent_table(7)
    images = {k for k, c in table.cells.items() if c.classification is Classification.IMAGE}
    assert images == {(1, 1), (14, -2), (2, -10), (7, 5)}
    assert table.cells[(1, 2)].classification is Classification.LOCALLY_RULED_OUT
    assert table.cells[(1, 2)].place.prime == 2
    assert sum(table.counts().values()) == 256
    assert not table.contradictions()


def test_survey_empty(capsys):
    assert main(["survey", "--max", "4"]) == 0
    assert capsys.readouterr().out == ""


def test_survey_mod8_rows(tmp_path):
    cache = SurveyCache(tmp_path / "s.jsonl")
    res = run_survey(200, 7, cache=cache)
    assert [r.p for r in res.reports] == [7, 31, 103, 151, 199]
    assert all(r.exact and r.lower == 0 for r in res.reports)
    res5 = run_survey(200, 5, method="isogeny", cache=cache)
    assert [r.p for r in res5.reports] == [5, 13, 61, 109, 181]
    assert all(r.upper == 1 for r in res5.reports)


def test_survey_cache_idempotent(tmp_path):
    path = tmp_path / "cache.jsonl"
    first = run_survey(100, cache=SurveyCache(path))
    assert first.computed == len(first.reports) > 0
    again = run_survey(100, cache=SurveyCache(path))
    assert again.computed == 0
    assert deterministic_lines(again.reports) == deterministic_lines(first.reports)
    lines = path.read_text().splitlines()
    assert len(lines) == len(first.reports)
    # a different effort is a different key
    other = run_survey(20, effort=Effort(search_height=500), cache=SurveyCache(path))
    assert other.computed == len(other.reports)


def test_survey_deterministic_across_jobs(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    ra = run_survey(250, cache=SurveyCache(a), jobs=1)
    rb = run_survey(250, cache=SurveyCache(b), jobs=3)
    assert deterministic_lines(ra.reports) == deterministic_lines(rb.reports)
    strip = lambda p: deterministic_lines(SurveyCache(p).records.values())  # noqa: E731
    assert strip(a) == strip(b)


def test_cache_tolerates_torn_line(tmp_path):
    path = tmp_path / "c.jsonl"
    run_survey(20, cache=SurveyCache(path))
    with path.open("a") as fh:
        fh.write('{"schema_version":1,"p":23')
    cache = SurveyCache(path)
    assert len(cache) == len(run_survey(20, cache=cache).reports)


def test_survey_subprocess_text(tmp_path):
    out_path = tmp_path / "survey.jsonl"
    code, out, err = run_cli("survey", "--max", "40", "--out", str(out_path), "--format", "text")
    assert code == 0
    assert "agreement" not in err
    assert "rate" in out
    records = [json.loads(line) for line in out_path.read_text().splitlines()]
    assert [r["p"] for r in records] == [5, 7, 13, 19, 31]
    code, _, err = run_cli("survey", "--max", "40", "--out", str(out_path))
    assert code == 0 and "0 computed" in err


def test_report_agreement_rules():
    rep = rank_report(7, "complete")
    assert rep.agrees is True and rep.conjectured_rank == 0
    assert [conjectured_rank(p) for p in (7, 11, 13, 17)] == [0, 1, 1, 2]
    rep73 = rank_report(73, "both")
    if not rep73.exact:
        assert rep73.agrees == UNKNOWN


def test_summary_counts_unknown_separately():
    reports = [rank_report(p, "isogeny") for p in (5, 7, 13)]
    s = summarize(reports)
    for row in s.values():
        assert row["exact"] + row["unknown"] == row["curves"]
        assert row["agree"] + row["disagree"] == row["exact"]


def test_effort_hash_stable():
    assert effort_hash(DEFAULT_EFFORT) == effort_hash(Effort())
    assert effort_hash(Effort(search_height=5)) != effort_hash(DEFAULT_EFFORT)
