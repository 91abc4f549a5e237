"""Repeated notebook execution with event capture.

Each run gets its own workspace directory, its own seed, and a fresh
interpreter. The child process speaks newline-delimited JSON on stdout;
anything else on that stream is a protocol violation and the run counts
as crashed.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .notebook import Notebook, write_notebook

DEFAULT_ITERATIONS = 30
DEFAULT_TIMEOUT = 300.0
DEFAULT_BASE_SEED = 1000

# run outcomes
OK = "ok"
CELL_ERROR = "cell_error"
TIMEOUT = "timeout"
CRASH = "crash"


class HarnessError(Exception):
    pass


class ExecutorUnavailable(HarnessError):
    """The configured executor command could not be launched."""


class ProtocolViolation(HarnessError):
    def __init__(self, run_index: int, line: str):
        self.run_index = run_index
        self.line = line
        super().__init__(f"run {run_index}: unparseable event line: {line!r}")


@dataclass(frozen=True)
class RunConfig:
    workspace: Path
    iterations: int = DEFAULT_ITERATIONS
    timeout_seconds: float = DEFAULT_TIMEOUT
    parallelism: int = 1
    base_seed: int = DEFAULT_BASE_SEED
    asserts: bool = False  # NBTEST_ASSERTS for the child

    def seed_for(self, run_index: int) -> int:
        return self.base_seed + run_index


@dataclass(frozen=True)
class TraceSample:
    run_index: int
    kind: str  # payload variant reported by the probe
    payload: dict


@dataclass(frozen=True)
class RunResult:
    run_index: int
    seed: int
    outcome: str
    events: tuple
    returncode: Optional[int]
    stderr_tail: str = ""
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome == OK


@dataclass
class TraceSet:
    runs: tuple = ()
    samples: dict = field(default_factory=dict)  # property_id -> [TraceSample]

    @property
    def ok_runs(self) -> list[RunResult]:
        return [r for r in self.runs if r.ok]

    @property
    def failed_fraction(self) -> float:
        if not self.runs:
            return 0.0
        return sum(1 for r in self.runs if not r.ok) / len(self.runs)

    def assert_events(self) -> dict:
        """run_index -> list of assert events, evaluated runs only."""
        out = {}
        for r in self.runs:
            if r.outcome in (OK, CELL_ERROR):
                out[r.run_index] = [e for e in r.events if e.get("ev") == "assert"]
        return out


def _payload_kind(payload: dict) -> str:
    if "message" in payload:
        return "error"
    if "layers" in payload:
        return "model"
    if "column_names" in payload:
        return "table"
    if "shape" in payload:
        return "array"
    return "scalar"


def _parse_events(stdout: str, run_index: int) -> list[dict]:
    events = []
    for line in stdout.split("\n"):
        if not line.strip():
            continue
        try:
            ev = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolViolation(run_index, line)
        if not isinstance(ev, dict) or "ev" not in ev:
            raise ProtocolViolation(run_index, line)
        events.append(ev)
    return events


def _copy_sources(source_dir: Path, run_dir: Path, workspace: Path) -> None:
    ws = workspace.resolve()

    def ignore(dirname, names):
        base = Path(dirname).resolve()
        return [n for n in names if (base / n).resolve() == ws]

    shutil.copytree(source_dir, run_dir, ignore=ignore, dirs_exist_ok=True)


def _run_once(
    nb: Notebook,
    run_index: int,
    seed: int,
    cfg: RunConfig,
    executor: list[str],
    source_dir: Optional[Path],
    notebook_name: str,
    file_overrides: Optional[dict] = None,
) -> RunResult:
    run_dir = Path(cfg.workspace) / "runs" / str(run_index)
    run_dir.mkdir(parents=True, exist_ok=True)
    if source_dir is not None:
        _copy_sources(Path(source_dir), run_dir, Path(cfg.workspace))
    for rel, data in (file_overrides or {}).items():
        target = run_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    write_notebook(nb, run_dir / notebook_name)

    env = dict(os.environ)
    env["NBTEST_SEED"] = str(seed)
    env["NBTEST_ASSERTS"] = "1" if cfg.asserts else "0"
    cmd = list(executor) + [notebook_name]
    try:
        proc = subprocess.Popen(
            cmd,
            cwd=str(run_dir),
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except FileNotFoundError as exc:
        raise ExecutorUnavailable(f"executor not found: {cmd[0]}") from exc

    try:
        stdout, stderr = proc.communicate(timeout=cfg.timeout_seconds)
    except subprocess.TimeoutExpired:
        proc.kill()
        stdout, stderr = proc.communicate()
        return RunResult(
            run_index, seed, TIMEOUT, (), proc.returncode, stderr[-2000:], "timed out"
        )

    try:
        events = _parse_events(stdout, run_index)
    except ProtocolViolation as exc:
        return RunResult(
            run_index, seed, CRASH, (), proc.returncode, stderr[-2000:], str(exc)
        )

    has_done = any(e.get("ev") == "done" for e in events)
    has_cell_error = any(e.get("ev") == "cell_error" for e in events)
    if not has_done:
        outcome, detail = CRASH, "event stream ended without done"
    elif has_cell_error:
        outcome, detail = CELL_ERROR, ""
    elif proc.returncode != 0:
        outcome, detail = CRASH, f"exit code {proc.returncode} with no cell_error"
    else:
        outcome, detail = OK, ""
    return RunResult(
        run_index, seed, outcome, tuple(events), proc.returncode, stderr[-2000:], detail
    )


def execute_runs(
    notebook_for_run: Callable[[int], Notebook],
    cfg: RunConfig,
    executor: list[str],
    source_dir: Optional[Path] = None,
    notebook_name: str = "notebook.ipynb",
    file_overrides: Optional[dict] = None,
) -> TraceSet:
    """Run the notebook ``cfg.iterations`` times and collect traces.

    ``notebook_for_run`` maps a run seed to the notebook to execute, so
    generation can re-instrument per seed while test runs reuse one file.
    ``file_overrides`` replace copied source files inside each run workspace.
    Only runs that finish cleanly contribute samples.
    """

    def job(i: int) -> RunResult:
        seed = cfg.seed_for(i)
        return _run_once(
            notebook_for_run(seed), i, seed, cfg, executor, source_dir, notebook_name,
            file_overrides,
        )

    indices = range(cfg.iterations)
    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=min(cfg.parallelism, cfg.iterations)) as pool:
            results = list(pool.map(job, indices))
    else:
        results = [job(i) for i in indices]
    results.sort(key=lambda r: r.run_index)

    samples: dict[str, list[TraceSample]] = {}
    for r in results:
        if not r.ok:
            continue
        latest: dict[str, dict] = {}
        for ev in r.events:
            if ev.get("ev") == "probe" and "id" in ev:
                latest[ev["id"]] = ev
        for pid, ev in latest.items():
            payload = ev.get("payload") or {}
            samples.setdefault(pid, []).append(
                TraceSample(r.run_index, _payload_kind(payload), payload)
            )
    return TraceSet(runs=tuple(results), samples=samples)
