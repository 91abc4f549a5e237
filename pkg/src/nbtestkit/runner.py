"""Execute a generated test notebook and aggregate assertion verdicts."""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .harness import CELL_ERROR, OK, RunConfig, TraceSet, execute_runs
from .notebook import CODE, GENERATED_MARKER, Notebook

_ASSERT_LINE = re.compile(r"nbtest\.(assert_\w+)\(.*test_id='([^']+)'")

PASSED = "passed"
FAILED = "failed"
ERROR = "error"
NOT_REACHED = "not_reached"


@dataclass(frozen=True)
class ExpectedAssertion:
    test_id: str
    fn: str
    cell_index: int
    line: int


def scan_assertions(nb: Notebook) -> list[ExpectedAssertion]:
    """Find generated assertion lines in a test notebook."""
    found = []
    for cell in nb.cells:
        if cell.kind != CODE:
            continue
        for ln, line in enumerate(cell.source.split("\n"), 1):
            if GENERATED_MARKER not in line:
                continue
            m = _ASSERT_LINE.search(line)
            if m:
                found.append(ExpectedAssertion(m.group(2), m.group(1), cell.index, ln))
    return found


@dataclass
class AssertionOutcome:
    test_id: str
    fn: str = ""
    cell_index: Optional[int] = None
    passes: int = 0
    fails: int = 0
    errors: int = 0
    not_reached: int = 0
    messages: list = field(default_factory=list)

    @property
    def evaluated(self) -> int:
        return self.passes + self.fails + self.errors

    @property
    def pass_rate(self) -> float:
        return self.passes / self.evaluated if self.evaluated else 0.0

    @property
    def status(self) -> str:
        if self.fails:
            return FAILED
        if self.errors:
            return ERROR
        if self.passes:
            return PASSED
        return NOT_REACHED

    def to_dict(self) -> dict:
        return {
            "test_id": self.test_id,
            "fn": self.fn,
            "cell_index": self.cell_index,
            "status": self.status,
            "passes": self.passes,
            "fails": self.fails,
            "errors": self.errors,
            "not_reached": self.not_reached,
            "pass_rate": self.pass_rate,
            "messages": self.messages,
        }


def _sort_key(test_id: str):
    parts = test_id.split("_")
    try:
        return (0, tuple(int(x) for x in parts))
    except ValueError:
        return (1, (test_id,))


@dataclass
class RunReport:
    notebook: str
    iterations: int
    assertions: list
    run_outcomes: list  # (run_index, outcome, detail)

    @property
    def failed_runs(self) -> list:
        return [(i, o, d) for i, o, d in self.run_outcomes if o != OK]

    @property
    def all_passed(self) -> bool:
        return all(a.status == PASSED for a in self.assertions) and not self.failed_runs

    @property
    def exit_code(self) -> int:
        if not self.assertions and not self.failed_runs:
            return 0
        return 0 if self.all_passed else 1

    def to_dict(self) -> dict:
        counts = {PASSED: 0, FAILED: 0, ERROR: 0, NOT_REACHED: 0}
        for a in self.assertions:
            counts[a.status] += 1
        return {
            "notebook": self.notebook,
            "iterations": self.iterations,
            "assertions": [a.to_dict() for a in self.assertions],
            "runs": [
                {"run_index": i, "outcome": o, "detail": d} for i, o, d in self.run_outcomes
            ],
            "summary": {
                "total": len(self.assertions),
                **counts,
                "exit_code": self.exit_code,
            },
        }


def collate(
    notebook: str, expected: list[ExpectedAssertion], traces: TraceSet
) -> RunReport:
    by_id = {e.test_id: AssertionOutcome(e.test_id, e.fn, e.cell_index) for e in expected}
    per_run = traces.assert_events()
    for run_index, events in per_run.items():
        statuses: dict[str, list] = {}
        for ev in events:
            tid = ev.get("test_id")
            if tid is None:
                continue
            statuses.setdefault(tid, []).append(ev)
        for tid, evs in statuses.items():
            out = by_id.setdefault(tid, AssertionOutcome(tid))
            kinds = [e.get("status") for e in evs]
            if "fail" in kinds:
                out.fails += 1
            elif "error" in kinds:
                out.errors += 1
            else:
                out.passes += 1
            for e in evs:
                msg = e.get("msg")
                if e.get("status") in ("fail", "error") and msg and msg not in out.messages:
                    out.messages.append(msg)
        for tid, out in by_id.items():
            if tid not in statuses:
                out.not_reached += 1
    assertions = sorted(by_id.values(), key=lambda a: _sort_key(a.test_id))
    outcomes = [(r.run_index, r.outcome, r.detail) for r in traces.runs]
    return RunReport(notebook, len(traces.runs), assertions, outcomes)


def run_tests(
    nb: Notebook,
    cfg: RunConfig,
    executor: list[str],
    source_dir: Optional[Path] = None,
    notebook_name: str = "notebook.ipynb",
    file_overrides: Optional[dict] = None,
) -> RunReport:
    expected = scan_assertions(nb)
    cfg = RunConfig(
        workspace=cfg.workspace,
        iterations=cfg.iterations,
        timeout_seconds=cfg.timeout_seconds,
        parallelism=cfg.parallelism,
        base_seed=cfg.base_seed,
        asserts=True,
    )
    traces = execute_runs(
        lambda seed: nb, cfg, executor, source_dir, notebook_name, file_overrides
    )
    return collate(notebook_name, expected, traces)


def render_text(report: RunReport) -> str:
    lines = [f"collected {len(report.assertions)} assertions over {report.iterations} runs", ""]
    if not report.assertions:
        lines.append("no assertions collected")
    status_word = {PASSED: "PASSED", FAILED: "FAILED", ERROR: "ERROR", NOT_REACHED: "NOT REACHED"}
    for a in report.assertions:
        lines.append(f"{report.notebook}::nbtest_id_{a.test_id} {status_word[a.status]}")
    problems = [a for a in report.assertions if a.status in (FAILED, ERROR)]
    if problems:
        lines.append("")
        lines.append("failures:")
        for a in problems:
            lines.append(
                f"  nbtest_id_{a.test_id}: {a.passes} passed, {a.fails} failed, "
                f"{a.errors} errored of {a.evaluated} evaluated runs"
            )
            for msg in a.messages[:3]:
                lines.append(f"    {msg}")
    if report.failed_runs:
        lines.append("")
        for i, outcome, detail in report.failed_runs:
            suffix = f": {detail}" if detail else ""
            lines.append(f"run {i} {outcome}{suffix}")
    ok_runs = report.iterations - len(report.failed_runs)
    lines.append("")
    lines.append(f"{ok_runs}/{report.iterations} runs completed cleanly")
    return "\n".join(lines) + "\n"


def render_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def render_junit(report: RunReport) -> str:
    counts = {FAILED: 0, ERROR: 0}
    for a in report.assertions:
        if a.status in counts:
            counts[a.status] += 1
    suite = ET.Element(
        "testsuite",
        name=report.notebook,
        tests=str(len(report.assertions)),
        failures=str(counts[FAILED]),
        errors=str(counts[ERROR]),
    )
    for a in report.assertions:
        case = ET.SubElement(
            suite, "testcase", classname=report.notebook, name=f"nbtest_id_{a.test_id}"
        )
        if a.status == FAILED:
            el = ET.SubElement(case, "failure", message=a.messages[0] if a.messages else "")
            el.text = "\n".join(a.messages)
        elif a.status == ERROR:
            el = ET.SubElement(case, "error", message=a.messages[0] if a.messages else "")
            el.text = "\n".join(a.messages)
        elif a.status == NOT_REACHED:
            ET.SubElement(case, "skipped", message="assertion never reached")
    ET.indent(suite)
    return ET.tostring(suite, encoding="unicode", xml_declaration=True) + "\n"


RENDERERS = {"text": render_text, "json": render_json, "junit": render_junit}
