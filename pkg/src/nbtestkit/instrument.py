"""Probe insertion and per-run seed rewriting for generation runs.

Pure insertions carry the generated marker and vanish on strip. Lines the
rewrite had to modify (print/last-expression temp bindings, seed literals)
carry the original text in a ``:was=`` marker so strip restores them exactly.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass

from .astutil import (
    collect_aliases,
    iter_statements,
    node_span,
    node_text,
    parse_cell,
    replace_span,
    resolve_call_name,
    span_text,
)
from .catalog import ApiCatalog
from .finder import ASSIGNMENT, AnalysisReport, TrackedProperty
from .notebook import CODE, GENERATED_MARKER, Notebook, WAS_MARKER_PREFIX, _find_marks

PROBE_NAME = "__nbtest_probe"

# Seeding entry points whose first positional literal gets replaced. The
# catalog schema has no slot for these, so they live here.
GLOBAL_SEED_CALLS = (
    "random.seed",
    "numpy.random.seed",
    "numpy.random.default_rng",
    "torch.manual_seed",
    "torch.cuda.manual_seed_all",
    "tensorflow.random.set_seed",
    "tensorflow.set_random_seed",
)


class InstrumentationConflict(Exception):
    pass


@dataclass(frozen=True)
class InstrumentedNotebook:
    notebook: Notebook
    probe_index: dict  # property_id -> (cell_index, line) in the instrumented notebook
    seed_sites: tuple  # (cell_index, line) in original coordinates
    run_seed: int


def _mark(line: str) -> str:
    return f"{line}  {GENERATED_MARKER}"


def _mark_was(line: str, original_lines: list[str]) -> str:
    return f"{line}  {WAS_MARKER_PREFIX}{json.dumps(original_lines)}"


def _line_indent(line: str) -> str:
    return line[: len(line) - len(line.lstrip())]


def _probe_call(p: TrackedProperty, target: str | None = None) -> str:
    t = p.target if target is None else target
    return f'{PROBE_NAME}("{p.property_id}", "{p.kind}", {t})'


def _is_int_const(n) -> bool:
    return isinstance(n, ast.Constant) and type(n.value) is int


def _is_seed_const(n) -> bool:
    return isinstance(n, ast.Constant) and (type(n.value) is int or n.value is None)


def _seed_spans(tree, aliases, seed_parameters) -> list:
    """Single-line spans of literal seed arguments, in source order."""
    spans = []
    for node in ast.walk(tree):
        if not isinstance(node, ast.Call):
            continue
        for kw in node.keywords:
            if kw.arg and kw.arg in seed_parameters and _is_seed_const(kw.value):
                spans.append(node_span(kw.value))
        cn = resolve_call_name(node.func, aliases)
        if cn is not None and any(cn.matches(pat) for pat in GLOBAL_SEED_CALLS):
            if node.args and _is_int_const(node.args[0]):
                spans.append(node_span(node.args[0]))
    uniq = sorted(set(s for s in spans if s[0][0] == s[1][0]))
    return uniq


def _span_within(inner, outer) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def _segment_lines(lines: list[str], span) -> list[str]:
    return span_text(lines, span[0], span[1]).split("\n")


def _apply_edits(seg: list[str], seg_start, edits) -> list[str]:
    """Apply ((start, end), new_text) edits (absolute coords) to a segment."""
    l0, c0 = seg_start

    def tr(pos):
        l, c = pos
        return (l - l0 + 1, c - c0 if l == l0 else c)

    for span, new in sorted(edits, key=lambda e: e[0][0], reverse=True):
        seg = replace_span(seg, tr(span[0]), tr(span[1]), new)
    return seg


def _find_anchor(stmts, p: TrackedProperty):
    want_assign = p.context == ASSIGNMENT
    for s in stmts:
        if s.end_lineno != p.anchor_line:
            continue
        if want_assign and isinstance(s, (ast.Assign, ast.AnnAssign)):
            return s
        if not want_assign and isinstance(s, ast.Expr):
            return s
    return None


def _locate_expr(stmt, p: TrackedProperty, pristine: list[str]):
    if p.context == ASSIGNMENT:
        return None
    if isinstance(stmt, ast.Expr):
        value = stmt.value
        if isinstance(value, ast.Call) and value.args:
            for arg in value.args:
                if node_text(pristine, arg) == p.target:
                    return arg
        if node_text(pristine, value) == p.target:
            return value
    raise InstrumentationConflict(
        f"{p.property_id}: expression {p.target!r} not found at cell line {p.anchor_line}"
    )


def _has_backslash_continuation(lines: list[str], lo: int, hi: int) -> bool:
    return any(lines[i - 1].rstrip().endswith("\\") for i in range(lo, hi + 1))


class _TmpNames:
    def __init__(self):
        self.n = 0

    def __call__(self) -> str:
        name = f"__nbtest_tmp_{self.n}"
        self.n += 1
        return name


def _rewrite_block(stmt, props, pristine, inner_seeds, run_seed, tmp_names):
    """Replace a print/last-expression statement with temp bindings + probes
    and a reconstructed statement that restores exactly on strip."""
    stmt_span = node_span(stmt)
    indent = _line_indent(pristine[stmt.lineno - 1])
    block: list[str] = []
    tmp_edits = []
    for p in props:
        node = _locate_expr(stmt, p, pristine)
        espan = node_span(node)
        eseeds = [(sp, str(run_seed)) for sp in inner_seeds if _span_within(sp, espan)]
        seg = _apply_edits(_segment_lines(pristine, espan), espan[0], eseeds)
        first, *rest = seg
        tmp = tmp_names()
        block.append(_mark(f"{indent}{tmp} = {first}"))
        block.extend(_mark(l) for l in rest)
        block.append(_mark(f"{indent}{_probe_call(p, tmp)}"))
        tmp_edits.append((espan, tmp))
    outer_seeds = [
        (sp, str(run_seed))
        for sp in inner_seeds
        if not any(_span_within(sp, espan) for espan, _ in tmp_edits)
    ]
    recon = _apply_edits(
        _segment_lines(pristine, stmt_span), stmt_span[0], list(tmp_edits) + outer_seeds
    )
    recon = [indent + recon[0]] + recon[1:]
    original = pristine[stmt.lineno - 1 : stmt.end_lineno]
    block.extend(_mark(l) for l in recon[:-1])
    block.append(_mark_was(recon[-1], original))
    return block


def _instrument_cell(source, tree, props, run_seed, catalog, aliases):
    pristine = source.split("\n")
    stmts = list(iter_statements(tree))
    seed_spans = _seed_spans(tree, aliases, catalog.seed_parameters)

    groups: dict[int, tuple] = {}
    for p in props:
        stmt = _find_anchor(stmts, p)
        if stmt is None:
            raise InstrumentationConflict(
                f"{p.property_id}: no {p.context} statement ends at line {p.anchor_line}"
            )
        groups.setdefault(id(stmt), (stmt, []))[1].append(p)

    consumed: set[int] = set()
    rewrites = []
    inserts = []
    for stmt, plist in groups.values():
        if plist[0].context == ASSIGNMENT:
            inserts.append((stmt, plist))
        else:
            if _has_backslash_continuation(pristine, stmt.lineno, stmt.end_lineno):
                continue  # can't attach markers under backslash continuation
            rewrites.append((stmt, plist))
            consumed.update(range(stmt.lineno, stmt.end_lineno + 1))

    out = list(pristine)
    seed_lines: list[int] = []
    by_line: dict[int, list] = {}
    for sp in seed_spans:
        by_line.setdefault(sp[0][0], []).append(sp)
    for line_no, spans in by_line.items():
        if pristine[line_no - 1].rstrip().endswith("\\"):
            continue
        seed_lines.append(line_no)
        if line_no in consumed:
            continue  # the rewrite block applies these itself
        text = pristine[line_no - 1]
        for sp in sorted(spans, key=lambda s: s[0][1], reverse=True):
            (_, c1), (_, c2) = sp
            raw = text.encode("utf-8")
            text = (raw[:c1] + str(run_seed).encode("utf-8") + raw[c2:]).decode("utf-8")
        out[line_no - 1] = _mark_was(text, [pristine[line_no - 1]])

    tmp_names = _TmpNames()
    actions = [(stmt, plist, True) for stmt, plist in rewrites] + [
        (stmt, plist, False) for stmt, plist in inserts
    ]
    inner_by_stmt = {
        id(stmt): [sp for sp in seed_spans if stmt.lineno <= sp[0][0] <= stmt.end_lineno]
        for stmt, _, _ in actions
    }
    for stmt, plist, is_rewrite in sorted(actions, key=lambda a: a[0].lineno, reverse=True):
        if is_rewrite:
            block = _rewrite_block(
                stmt, plist, pristine, inner_by_stmt[id(stmt)], run_seed, tmp_names
            )
            out[stmt.lineno - 1 : stmt.end_lineno] = block
        else:
            indent = _line_indent(pristine[stmt.lineno - 1])
            probes = [_mark(f"{indent}{_probe_call(p)}") for p in plist]
            out[stmt.end_lineno : stmt.end_lineno] = probes
    return "\n".join(out), seed_lines


_PROBE_RE = re.compile(r'^\s*__nbtest_probe\("([^"]+)"')


def _scan_probes(nb: Notebook) -> dict:
    index = {}
    for cell in nb.cells:
        if cell.kind != CODE:
            continue
        for ln, line in enumerate(cell.source.split("\n"), 1):
            m = _PROBE_RE.match(line)
            if m:
                index[m.group(1)] = (cell.index, ln)
    return index


def preamble_source(run_seed: int) -> str:
    lines = [
        _mark("import nbtest"),
        _mark(f"from nbtest import probe as {PROBE_NAME}"),
        _mark(f"nbtest.seed_all({run_seed})"),
    ]
    return "\n".join(lines)


def instrument(
    nb: Notebook, report: AnalysisReport, run_seed: int, catalog: ApiCatalog
) -> InstrumentedNotebook:
    by_cell: dict[int, list[TrackedProperty]] = {}
    for p in report.properties:
        by_cell.setdefault(p.cell_index, []).append(p)
    for ci in by_cell:
        if ci >= len(nb.cells) or nb.cells[ci].kind != CODE:
            raise InstrumentationConflict(f"cell {ci} is not a code cell in this notebook")

    aliases: dict[str, str] = {}
    new_nb = nb
    seed_sites: list[tuple[int, int]] = []
    for cell in nb.cells:
        if cell.kind != CODE:
            continue
        if GENERATED_MARKER in cell.source and _find_marks(cell.source):
            raise InstrumentationConflict(
                f"cell {cell.index} already carries generated markers; strip first"
            )
        tree = parse_cell(cell.source)
        if tree is None:
            if by_cell.get(cell.index):
                raise InstrumentationConflict(f"cell {cell.index} no longer parses")
            continue
        collect_aliases(tree, aliases)
        new_source, sites = _instrument_cell(
            cell.source, tree, by_cell.get(cell.index, ()), run_seed, catalog, dict(aliases)
        )
        if new_source != cell.source:
            new_nb = new_nb.with_cell_source(cell.index, new_source)
        seed_sites.extend((cell.index, ln) for ln in sites)

    new_nb = new_nb.prepend_code_cell(preamble_source(run_seed))
    return InstrumentedNotebook(
        notebook=new_nb,
        probe_index=_scan_probes(new_nb),
        seed_sites=tuple(seed_sites),
        run_seed=run_seed,
    )
