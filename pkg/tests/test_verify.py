import json

from cdrshift.scenarios import builtin_dict
from cdrshift.verify import VERIFY_COLUMNS, check_fixture, run_verify_suite


def test_quick_suite_passes(tmp_path):
    report = run_verify_suite(quick=True)
    assert report.passed, report.format()
    path = tmp_path / "verify.csv"
    report.to_csv(path)
    assert path.read_text().splitlines()[0] == ",".join(VERIFY_COLUMNS)


def test_extra_fixture_rows():
    rows = check_fixture(builtin_dict("S5"))
    assert [r.property for r in rows] == ["construct", "cdr_set_immune_to_shift"]
    assert all(r.passed for r in rows)


def test_broken_fixture_reports_failure():
    data = json.loads(json.dumps(builtin_dict("S4")))
    data["prior"] = 1.5
    (row,) = check_fixture(data)
    assert row.property == "construct" and row.status == "FAIL"
    report = run_verify_suite([data], quick=True)
    assert not report.passed and len(report.failures()) == 1
