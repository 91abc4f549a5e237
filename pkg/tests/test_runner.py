import json
import xml.etree.ElementTree as ET

from nbtestkit.harness import CELL_ERROR, CRASH, OK, RunConfig, RunResult, TraceSet
from nbtestkit.runner import (
    ERROR,
    FAILED,
    NOT_REACHED,
    PASSED,
    RENDERERS,
    ExpectedAssertion,
    collate,
    render_json,
    render_junit,
    render_text,
    run_tests,
    scan_assertions,
)

from helpers import code_nb


def assert_ev(tid, status, msg=None):
    return {"ev": "assert", "test_id": tid, "status": status, "msg": msg}


def run_result(i, events, outcome=OK):
    return RunResult(i, 1000 + i, outcome, tuple(events), 0, "", "")


def traceset(*runs):
    return TraceSet(runs=tuple(runs), samples={})


EXPECTED = [
    ExpectedAssertion("1_0", "assert_shape", 1, 2),
    ExpectedAssertion("5_0", "assert_allclose", 5, 3),
]


class TestScan:
    def test_finds_marked_assert_lines(self):
        nb = code_nb(
            "import nbtest  # nbtest:generated",
            "df = load()\n"
            "nbtest.assert_shape(df, (3, 2), test_id='1_0')  # nbtest:generated\n"
            "nbtest.assert_df_mean(df, 1.5, atol=0.1, test_id='1_1')  # nbtest:generated",
            "acc = score()\n"
            "nbtest.assert_allclose(acc, 0.9, atol=0.05, test_id='2_0')  # nbtest:generated",
        )
        got = scan_assertions(nb)
        assert [(e.test_id, e.fn, e.cell_index, e.line) for e in got] == [
            ("1_0", "assert_shape", 1, 2),
            ("1_1", "assert_df_mean", 1, 3),
            ("2_0", "assert_allclose", 2, 2),
        ]

    def test_unmarked_nbtest_calls_ignored(self):
        nb = code_nb("nbtest.assert_true(x, test_id='0_0')")
        assert scan_assertions(nb) == []

    def test_marked_non_assert_lines_ignored(self):
        nb = code_nb("import nbtest  # nbtest:generated")
        assert scan_assertions(nb) == []


class TestCollate:
    def test_all_passing(self):
        runs = [
            run_result(i, [assert_ev("1_0", "pass"), assert_ev("5_0", "pass")])
            for i in range(3)
        ]
        report = collate("nb.ipynb", EXPECTED, traceset(*runs))
        assert [a.status for a in report.assertions] == [PASSED, PASSED]
        assert all(a.pass_rate == 1.0 for a in report.assertions)
        assert report.exit_code == 0
        assert report.all_passed

    def test_single_fail_marks_assertion_failed(self):
        runs = [
            run_result(0, [assert_ev("1_0", "pass"), assert_ev("5_0", "pass")]),
            run_result(1, [assert_ev("1_0", "pass"), assert_ev("5_0", "fail", "0.4 != 0.9")]),
            run_result(2, [assert_ev("1_0", "pass"), assert_ev("5_0", "pass")]),
        ]
        report = collate("nb.ipynb", EXPECTED, traceset(*runs))
        flaky = report.assertions[1]
        assert flaky.status == FAILED
        assert (flaky.passes, flaky.fails) == (2, 1)
        assert flaky.pass_rate == 2 / 3
        assert flaky.messages == ["0.4 != 0.9"]
        assert report.exit_code == 1

    def test_fail_outranks_error_outranks_pass(self):
        runs = [
            run_result(0, [assert_ev("1_0", "error", "boom"), assert_ev("1_0", "fail", "ne")]),
        ]
        report = collate("nb.ipynb", EXPECTED[:1], traceset(*runs))
        a = report.assertions[0]
        assert (a.fails, a.errors, a.passes) == (1, 0, 0)
        assert a.status == FAILED

    def test_repeated_events_in_one_run_count_once(self):
        runs = [run_result(0, [assert_ev("1_0", "pass"), assert_ev("1_0", "pass")])]
        report = collate("nb.ipynb", EXPECTED[:1], traceset(*runs))
        assert report.assertions[0].passes == 1

    def test_error_status(self):
        runs = [run_result(0, [assert_ev("1_0", "error", "NameError")])]
        report = collate("nb.ipynb", EXPECTED[:1], traceset(*runs))
        a = report.assertions[0]
        assert a.status == ERROR
        assert report.exit_code == 1

    def test_not_reached(self):
        runs = [run_result(i, [assert_ev("1_0", "pass")]) for i in range(4)]
        report = collate("nb.ipynb", EXPECTED, traceset(*runs))
        missing = report.assertions[1]
        assert missing.status == NOT_REACHED
        assert missing.not_reached == 4
        assert missing.evaluated == 0
        assert missing.pass_rate == 0.0
        assert report.exit_code == 1

    def test_unexpected_test_id_still_reported(self):
        runs = [run_result(0, [assert_ev("9_0", "pass")])]
        report = collate("nb.ipynb", [], traceset(*runs))
        assert [a.test_id for a in report.assertions] == ["9_0"]
        assert report.exit_code == 0

    def test_cell_error_runs_evaluate_asserts_but_fail_the_report(self):
        runs = [
            run_result(0, [assert_ev("1_0", "pass")]),
            run_result(1, [assert_ev("1_0", "pass")], outcome=CELL_ERROR),
        ]
        report = collate("nb.ipynb", EXPECTED[:1], traceset(*runs))
        assert report.assertions[0].passes == 2
        assert report.failed_runs == [(1, CELL_ERROR, "")]
        assert report.exit_code == 1

    def test_crash_runs_contribute_nothing(self):
        runs = [
            run_result(0, [assert_ev("1_0", "pass")]),
            RunResult(1, 1001, CRASH, (), 1, "", "exit code 1"),
        ]
        report = collate("nb.ipynb", EXPECTED[:1], traceset(*runs))
        a = report.assertions[0]
        assert (a.passes, a.not_reached) == (1, 0)
        assert report.exit_code == 1

    def test_no_assertions_no_failures_exits_zero(self):
        runs = [run_result(0, [])]
        report = collate("nb.ipynb", [], traceset(*runs))
        assert report.exit_code == 0

    def test_numeric_test_id_ordering(self):
        expected = [
            ExpectedAssertion("10_0", "assert_true", 10, 1),
            ExpectedAssertion("2_1", "assert_true", 2, 2),
            ExpectedAssertion("2_0", "assert_true", 2, 1),
        ]
        report = collate("nb.ipynb", expected, traceset())
        assert [a.test_id for a in report.assertions] == ["2_0", "2_1", "10_0"]


class TestRenderers:
    def sample_report(self):
        runs = [
            run_result(0, [assert_ev("1_0", "pass"), assert_ev("5_0", "fail", "0.4 != 0.9")]),
            run_result(1, [assert_ev("1_0", "pass"), assert_ev("5_0", "pass")]),
            RunResult(2, 1002, CRASH, (), 1, "", "exit code 1"),
        ]
        return collate("demo.nbtest.ipynb", EXPECTED, traceset(*runs))

    def test_text_lines(self):
        text = render_text(self.sample_report())
        assert "demo.nbtest.ipynb::nbtest_id_1_0 PASSED" in text
        assert "demo.nbtest.ipynb::nbtest_id_5_0 FAILED" in text
        assert "nbtest_id_5_0: 1 passed, 1 failed, 0 errored of 2 evaluated runs" in text
        assert "0.4 != 0.9" in text
        assert "run 2 crash: exit code 1" in text
        assert "2/3 runs completed cleanly" in text

    def test_text_not_reached_wording(self):
        report = collate("nb.ipynb", EXPECTED[:1], traceset())
        assert "nb.ipynb::nbtest_id_1_0 NOT REACHED" in render_text(report)

    def test_json_shape(self):
        data = json.loads(render_json(self.sample_report()))
        assert data["summary"] == {
            "total": 2,
            "passed": 1,
            "failed": 1,
            "error": 0,
            "not_reached": 0,
            "exit_code": 1,
        }
        assert data["assertions"][1]["pass_rate"] == 0.5
        assert data["runs"][2]["outcome"] == "crash"

    def test_junit_structure(self):
        xml = render_junit(self.sample_report())
        suite = ET.fromstring(xml)
        assert suite.tag == "testsuite"
        assert suite.attrib["tests"] == "2"
        assert suite.attrib["failures"] == "1"
        cases = {c.attrib["name"]: c for c in suite}
        assert set(cases) == {"nbtest_id_1_0", "nbtest_id_5_0"}
        failure = cases["nbtest_id_5_0"].find("failure")
        assert failure is not None
        assert failure.attrib["message"] == "0.4 != 0.9"

    def test_junit_skipped_for_not_reached(self):
        report = collate("nb.ipynb", EXPECTED[:1], traceset())
        suite = ET.fromstring(render_junit(report))
        assert suite[0].find("skipped") is not None

    def test_renderer_registry(self):
        assert set(RENDERERS) == {"text", "json", "junit"}


class TestRunTests:
    def test_end_to_end_with_stub(self, tmp_path, ok_executor):
        nb = code_nb(
            "x = 1\nnbtest.assert_true(x, test_id='0_0')  # nbtest:generated"
        )
        cfg = RunConfig(workspace=tmp_path / "w", iterations=3, asserts=False)
        report = run_tests(nb, cfg, ok_executor)
        # asserts are forced on even though cfg said off
        a = report.assertions[0]
        assert (a.test_id, a.status, a.passes) == ("0_0", PASSED, 3)
        assert report.exit_code == 0
        assert report.iterations == 3
