"""Static detection of ML-relevant properties in notebook code cells.

Three contexts are inspected: assignments, print arguments, and a cell's last
expression. Matches against the API catalog produce Dataset / ModelArch /
ModelPerf properties; custom metrics are caught by an intra-cell def-use walk
from model-inference calls to numeric reductions.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass

from .astutil import (
    CallName,
    collect_aliases,
    iter_statements,
    node_text,
    parse_cell,
    resolve_call_name,
)
from .catalog import ApiCatalog, PROPERTY_KIND
from .notebook import CODE, Notebook

ASSIGNMENT = "Assignment"
PRINT_ARGUMENT = "PrintArgument"
LAST_EXPRESSION = "LastExpression"
CONTEXTS = (ASSIGNMENT, PRINT_ARGUMENT, LAST_EXPRESSION)

CUSTOM_METRIC_ORIGIN = "<custom-metric>"

_PREDICTISH = {"predict", "predict_proba", "fit_predict"}
_REDUCTION_ATTRS = {"mean", "sum"}
_REDUCTION_FUNCS = {
    "numpy.mean",
    "numpy.sum",
    "numpy.average",
    "numpy.nanmean",
    "numpy.nansum",
}


@dataclass(frozen=True)
class TrackedProperty:
    property_id: str
    kind: str  # Dataset | ModelArch | ModelPerf
    cell_index: int
    anchor_line: int  # 1-based last physical line of the anchor statement
    target: str  # expression that evaluates to the tracked value
    context: str
    origin: str  # catalog entry name or CUSTOM_METRIC_ORIGIN

    def to_dict(self) -> dict:
        return {
            "property_id": self.property_id,
            "kind": self.kind,
            "cell_index": self.cell_index,
            "anchor_line": self.anchor_line,
            "target": self.target,
            "context": self.context,
            "origin": self.origin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrackedProperty":
        return cls(
            property_id=d["property_id"],
            kind=d["kind"],
            cell_index=d["cell_index"],
            anchor_line=d["anchor_line"],
            target=d["target"],
            context=d["context"],
            origin=d["origin"],
        )


@dataclass(frozen=True)
class AnalysisReport:
    properties: tuple[TrackedProperty, ...]
    skipped_cells: tuple[tuple[int, str], ...] = ()

    def counts(self) -> dict[str, int]:
        out = {"Dataset": 0, "ModelArch": 0, "ModelPerf": 0}
        for p in self.properties:
            out[p.kind] = out.get(p.kind, 0) + 1
        return out

    def by_id(self, property_id: str) -> TrackedProperty:
        for p in self.properties:
            if p.property_id == property_id:
                return p
        raise KeyError(property_id)

    def to_dict(self) -> dict:
        return {
            "properties": [p.to_dict() for p in self.properties],
            "skipped_cells": [list(s) for s in self.skipped_cells],
            "counts": self.counts(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        return cls(
            properties=tuple(TrackedProperty.from_dict(p) for p in d["properties"]),
            skipped_cells=tuple((s[0], s[1]) for s in d.get("skipped_cells", [])),
        )


def _is_print(call: ast.Call, aliases: dict[str, str]) -> bool:
    return (
        isinstance(call.func, ast.Name)
        and call.func.id == "print"
        and "print" not in aliases
    )


def _match_call(expr: ast.expr, aliases, catalog: ApiCatalog):
    if not isinstance(expr, ast.Call):
        return None
    cn = resolve_call_name(expr.func, aliases)
    if cn is None:
        return None
    return catalog.match(cn)


def _mentions_predictions(expr: ast.expr, pred: set[str], aliases, catalog) -> bool:
    for node in ast.walk(expr):
        if isinstance(node, ast.Name) and node.id in pred:
            return True
        if isinstance(node, ast.Call):
            cn = resolve_call_name(node.func, aliases)
            if cn is not None and cn.last in _PREDICTISH:
                entry = catalog.match(cn)
                if entry is not None and entry.category == "TrainCall":
                    return True
    return False


def _prediction_names(eligible: list[ast.stmt], aliases, catalog) -> set[str]:
    """Variables holding values derived from model-inference calls (per cell)."""
    pred: set[str] = set()
    for stmt in eligible:
        if isinstance(stmt, (ast.Assign, ast.AnnAssign)) and stmt.value is not None:
            if _mentions_predictions(stmt.value, pred, aliases, catalog):
                targets = stmt.targets if isinstance(stmt, ast.Assign) else [stmt.target]
                for t in targets:
                    for n in ast.walk(t):
                        if isinstance(n, ast.Name):
                            pred.add(n.id)
    return pred


def _reduction_base(expr: ast.expr, aliases) -> ast.expr | None:
    if not isinstance(expr, ast.Call):
        return None
    f = expr.func
    cn = resolve_call_name(f, aliases)
    if cn is not None and cn.resolved in _REDUCTION_FUNCS and expr.args:
        return expr.args[0]
    # np.mean(x) is syntactically an attribute call too; resolve before this
    if isinstance(f, ast.Attribute) and f.attr in _REDUCTION_ATTRS:
        return f.value
    return None


def _is_custom_metric(expr: ast.expr, pred: set[str], aliases, catalog) -> bool:
    base = _reduction_base(expr, aliases)
    if base is not None and _mentions_predictions(base, pred, aliases, catalog):
        return True
    if isinstance(expr, ast.BinOp):
        return _is_custom_metric(expr.left, pred, aliases, catalog) or _is_custom_metric(
            expr.right, pred, aliases, catalog
        )
    return False


def detect_custom_metrics(tree: ast.Module, catalog: ApiCatalog, aliases=None) -> list:
    """Anchors (stmt, expr, context) of custom-metric expressions in one cell."""
    aliases = dict(aliases or {})
    collect_aliases(tree, aliases)
    eligible = list(iter_statements(tree))
    pred = _prediction_names(eligible, aliases, catalog)
    last_top = tree.body[-1] if tree.body else None
    anchors = []
    for stmt in eligible:
        if isinstance(stmt, (ast.Assign, ast.AnnAssign)) and stmt.value is not None:
            if _match_call(stmt.value, aliases, catalog) is None and _is_custom_metric(
                stmt.value, pred, aliases, catalog
            ):
                anchors.append((stmt, stmt.value, ASSIGNMENT))
        elif isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Call) and _is_print(
            stmt.value, aliases
        ):
            for arg in stmt.value.args:
                if _is_custom_metric(arg, pred, aliases, catalog):
                    anchors.append((stmt, arg, PRINT_ARGUMENT))
        elif stmt is last_top and isinstance(stmt, ast.Expr):
            if _is_custom_metric(stmt.value, pred, aliases, catalog):
                anchors.append((stmt, stmt.value, LAST_EXPRESSION))
    return anchors


def _flatten_targets(targets: list[ast.expr], lines: list[str]) -> list[str]:
    names: list[str] = []
    for t in targets:
        if isinstance(t, ast.Name):
            names.append(t.id)
        elif isinstance(t, (ast.Tuple, ast.List)):
            for el in t.elts:
                if isinstance(el, ast.Name):
                    names.append(el.id)
                elif isinstance(el, (ast.Tuple, ast.List)):
                    names.extend(_flatten_targets([el], lines))
                # starred / subscript elements are not trackable values
        elif isinstance(t, (ast.Attribute, ast.Subscript)):
            names.append(node_text(lines, t))
    return names


def _properties_for_stmt(stmt, lines, last_top, aliases, catalog, pred):
    """Yield (kind, target, context, origin) for one statement."""
    if isinstance(stmt, (ast.Assign, ast.AnnAssign)):
        value = stmt.value
        if value is None:
            return
        targets = stmt.targets if isinstance(stmt, ast.Assign) else [stmt.target]
        names = _flatten_targets(targets, lines)
        if not names:
            return
        entry = _match_call(value, aliases, catalog)
        if entry is not None and entry.category in PROPERTY_KIND:
            kind = PROPERTY_KIND[entry.category]
            for name in names:
                yield kind, name, ASSIGNMENT, entry.name
            return
        if _is_custom_metric(value, pred, aliases, catalog):
            for name in names:
                yield "ModelPerf", name, ASSIGNMENT, CUSTOM_METRIC_ORIGIN
        return

    if isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Call) and _is_print(
        stmt.value, aliases
    ):
        for arg in stmt.value.args:
            entry = _match_call(arg, aliases, catalog)
            if entry is not None and entry.category in PROPERTY_KIND:
                yield PROPERTY_KIND[entry.category], node_text(lines, arg), PRINT_ARGUMENT, entry.name
            elif _is_custom_metric(arg, pred, aliases, catalog):
                yield "ModelPerf", node_text(lines, arg), PRINT_ARGUMENT, CUSTOM_METRIC_ORIGIN
        return

    if stmt is last_top and isinstance(stmt, ast.Expr):
        e = stmt.value
        entry = _match_call(e, aliases, catalog)
        if entry is not None and entry.category in PROPERTY_KIND:
            yield PROPERTY_KIND[entry.category], node_text(lines, e), LAST_EXPRESSION, entry.name
        elif _is_custom_metric(e, pred, aliases, catalog):
            yield "ModelPerf", node_text(lines, e), LAST_EXPRESSION, CUSTOM_METRIC_ORIGIN


def find_properties(nb: Notebook, catalog: ApiCatalog) -> AnalysisReport:
    aliases: dict[str, str] = {}
    props: list[TrackedProperty] = []
    skipped: list[tuple[int, str]] = []
    seen: set[tuple[int, int, str]] = set()
    counter = 0
    for cell in nb.cells:
        if cell.kind != CODE:
            continue
        tree = parse_cell(cell.source)
        if tree is None:
            if cell.source.strip():
                skipped.append((cell.index, "syntax error"))
            continue
        collect_aliases(tree, aliases)
        lines = cell.source.split("\n")
        eligible = list(iter_statements(tree))
        pred = _prediction_names(eligible, aliases, catalog)
        last_top = tree.body[-1] if tree.body else None
        for stmt in eligible:
            for kind, target, context, origin in _properties_for_stmt(
                stmt, lines, last_top, aliases, catalog, pred
            ):
                key = (cell.index, stmt.end_lineno, target)
                if key in seen:
                    continue
                seen.add(key)
                props.append(
                    TrackedProperty(
                        property_id=f"p{counter}",
                        kind=kind,
                        cell_index=cell.index,
                        anchor_line=stmt.end_lineno,
                        target=target,
                        context=context,
                        origin=origin,
                    )
                )
                counter += 1
    return AnalysisReport(properties=tuple(props), skipped_cells=tuple(skipped))
