"""Carry generated assertions across notebook versions and grade the result.

Cell matching runs in two stages: exact on normalized code (generated lines
removed, comments and formatting folded away by round-tripping the AST),
then a structural fingerprint for cells whose bodies were edited. Both
stages pick the candidate nearest the source position.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Optional

from .astutil import iter_statements, mask_magics, parse_cell
from .notebook import CODE, GENERATED_MARKER, Notebook, insert_statements, strip_source
from .runner import RunReport, scan_assertions
from .synthesis import INJECT_PREAMBLE


def normalize_cell(source: str) -> Optional[str]:
    """Canonical text for matching, or None when the cell does not parse."""
    stripped = strip_source(source)
    try:
        tree = ast.parse(mask_magics(stripped))
    except SyntaxError:
        return None
    return ast.unparse(tree)


def _collect_names(node, out: list) -> None:
    if isinstance(node, ast.Name):
        out.append(node.id)
    elif isinstance(node, (ast.Tuple, ast.List)):
        for el in node.elts:
            _collect_names(el, out)
    elif isinstance(node, ast.Starred):
        _collect_names(node.value, out)


def fingerprint_cell(source: str) -> Optional[tuple]:
    """(sorted assignment targets, sorted call shapes); None when unusable
    or when the cell has nothing to fingerprint."""
    stripped = strip_source(source)
    tree = parse_cell(stripped)
    if tree is None:
        return None
    targets: list[str] = []
    calls: list[tuple] = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Assign):
            for t in node.targets:
                _collect_names(t, targets)
        elif isinstance(node, (ast.AnnAssign, ast.AugAssign)):
            _collect_names(node.target, targets)
        elif isinstance(node, ast.Call):
            try:
                callee = ast.unparse(node.func)
            except Exception:
                continue
            kwargs = tuple(sorted(kw.arg or "**" for kw in node.keywords))
            calls.append((callee, len(node.args), kwargs))
    if not targets and not calls:
        return None
    return (tuple(sorted(targets)), tuple(sorted(calls)))


def match_cells(src: Notebook, dst: Notebook) -> dict:
    """src cell index -> dst cell index (or None), code cells only."""
    src_code = [c for c in src.cells if c.kind == CODE]
    dst_code = [c for c in dst.cells if c.kind == CODE]
    dst_norm = [normalize_cell(c.source) for c in dst_code]
    dst_fp = [fingerprint_cell(c.source) for c in dst_code]

    mapping: dict[int, Optional[int]] = {}
    used: set[int] = set()

    def claim(i: int, candidates: list[int]) -> bool:
        free = [j for j in candidates if j not in used]
        if not free:
            return False
        j = min(free, key=lambda j: (abs(j - i), j))
        mapping[src_code[i].index] = dst_code[j].index
        used.add(j)
        return True

    pending = []
    for i, cell in enumerate(src_code):
        norm = normalize_cell(cell.source)
        if norm is not None and claim(i, [j for j, n in enumerate(dst_norm) if n == norm]):
            continue
        pending.append(i)
    for i in pending:
        fp = fingerprint_cell(src_code[i].source)
        if fp is None or not claim(i, [j for j, f in enumerate(dst_fp) if f == fp]):
            mapping[src_code[i].index] = None
    return mapping


SKIP_NO_CELL = "no-cell"
SKIP_NO_ANCHOR = "no-anchor"


@dataclass
class TransferResult:
    notebook: Notebook
    transferred: int = 0
    total: int = 0
    skipped: list = field(default_factory=list)  # (test_id, reason)

    @property
    def transfer_ratio(self) -> float:
        return self.transferred / self.total if self.total else 1.0


def _nongenerated_statements(source: str):
    tree = parse_cell(source)
    if tree is None:
        return []
    lines = source.split("\n")
    out = []
    for stmt in iter_statements(tree):
        if not any(
            GENERATED_MARKER in lines[i - 1]
            for i in range(stmt.lineno, min(stmt.end_lineno, len(lines)) + 1)
        ):
            out.append(stmt)
    return out


def transfer_assertions(src: Notebook, dst: Notebook) -> TransferResult:
    """Re-anchor the generated assertions of ``src`` onto ``dst``.

    An assertion follows the nearest user statement above it; it lands after
    the first statement of the matched destination cell whose normalized
    form is identical. Unplaceable assertions are skipped, never guessed.
    """
    mapping = match_cells(src, dst)
    result = TransferResult(notebook=dst)
    by_cell: dict[int, list] = {}
    for e in scan_assertions(src):
        by_cell.setdefault(e.cell_index, []).append(e)
    # (dst_cell, dst_anchor_line) -> rendered lines, in scan order
    planned: dict[tuple, list] = {}

    for cell in src.cells:
        if cell.kind != CODE or cell.index not in by_cell:
            continue
        lines = cell.source.split("\n")
        asserts = [(e, lines[e.line - 1]) for e in by_cell[cell.index]]
        stmts = _nongenerated_statements(cell.source)
        dst_index = mapping.get(cell.index)
        dst_stmts = None
        dst_unparsed: list = []
        if dst_index is not None:
            dst_stmts = _nongenerated_statements(dst.cells[dst_index].source)
            dst_unparsed = [ast.unparse(s) for s in dst_stmts]
        for expected, line in asserts:
            result.total += 1
            if dst_index is None:
                result.skipped.append((expected.test_id, SKIP_NO_CELL))
                continue
            anchor = None
            for s in stmts:
                if s.end_lineno < expected.line:
                    anchor = s
            if anchor is None:
                result.skipped.append((expected.test_id, SKIP_NO_ANCHOR))
                continue
            want = ast.unparse(anchor)
            hit = next(
                (dst_stmts[k] for k, u in enumerate(dst_unparsed) if u == want), None
            )
            if hit is None:
                result.skipped.append((expected.test_id, SKIP_NO_ANCHOR))
                continue
            planned.setdefault((dst_index, hit.end_lineno), []).append(line.strip())
            result.transferred += 1

    out = dst
    for (ci, anchor_line), stmts in sorted(planned.items(), key=lambda kv: -kv[0][1]):
        out = insert_statements(out, ci, anchor_line, stmts)
    if result.transferred:
        out = out.prepend_code_cell(INJECT_PREAMBLE)
    result.notebook = out
    return result


# ---------------------------------------------------------------------------
# kill metrics


def version_killed(report: RunReport) -> Optional[bool]:
    """True/False per evaluated version; None when nothing was evaluated."""
    assessed = [a for a in report.assertions if a.evaluated]
    if not assessed:
        return None
    return any(a.pass_rate < 1.0 for a in assessed)


@dataclass(frozen=True)
class KillMetrics:
    versions_total: int = 0
    versions_killed: int = 0
    notebooks_total: int = 0
    notebooks_any_killed: int = 0
    notebooks_all_killed: int = 0

    @property
    def k_v(self) -> float:
        return self.versions_killed / self.versions_total if self.versions_total else 0.0

    @property
    def k_n(self) -> float:
        return (
            self.notebooks_all_killed / self.notebooks_total if self.notebooks_total else 0.0
        )

    def to_dict(self) -> dict:
        return {
            "versions_total": self.versions_total,
            "versions_killed": self.versions_killed,
            "notebooks_total": self.notebooks_total,
            "notebooks_any_killed": self.notebooks_any_killed,
            "notebooks_all_killed": self.notebooks_all_killed,
            "k_v": self.k_v,
            "k_n": self.k_n,
        }


def kill_metrics(killed_by_notebook: dict) -> KillMetrics:
    """Aggregate {notebook: [killed flags per version]} into metrics."""
    versions = versions_killed = 0
    nb_total = nb_any = nb_all = 0
    for flags in killed_by_notebook.values():
        if not flags:
            continue
        nb_total += 1
        versions += len(flags)
        versions_killed += sum(1 for f in flags if f)
        if any(flags):
            nb_any += 1
        if all(flags):
            nb_all += 1
    return KillMetrics(versions, versions_killed, nb_total, nb_any, nb_all)


@dataclass
class VersionEvaluation:
    metrics: KillMetrics
    killed: dict  # notebook -> [bool per assessed version]
    unassessed: list  # (notebook, version index) with no evaluated assertions

    def to_dict(self) -> dict:
        return {
            "metrics": self.metrics.to_dict(),
            "killed": self.killed,
            "unassessed": [list(u) for u in self.unassessed],
        }


def evaluate_versions(reports: dict) -> VersionEvaluation:
    """reports: {notebook: [RunReport per version]}."""
    killed: dict[str, list] = {}
    unassessed: list[tuple] = []
    for name, reps in reports.items():
        flags = []
        for idx, rep in enumerate(reps):
            verdict = version_killed(rep)
            if verdict is None:
                unassessed.append((name, idx))
            else:
                flags.append(verdict)
        killed[name] = flags
    return VersionEvaluation(kill_metrics(killed), killed, unassessed)
