"""Fault injection for notebooks and the data they load.

Data operators rewrite a copy of an input file; code operators edit the
notebook source. A mutant is fully described by (operator, site, seed):
applying the same spec twice yields byte-identical output, so specs can be
stored and replayed. Generated assertion lines are never mutation targets.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .astutil import (
    collect_aliases,
    node_span,
    parse_cell,
    replace_span,
    resolve_call_name,
)
from .catalog import ApiCatalog
from .harness import OK, TraceSet
from .notebook import CODE, GENERATED_MARKER, Notebook

DATA_OPERATORS = ("AddOutliers", "RepeatData", "AddNulls", "ModifyLabels", "DataShift")
CODE_OPERATORS = (
    "RemoveZeroGrad",
    "ModifyHyperparams",
    "RemoveHyperparams",
    "SwapApis",
    "RemoveLayers",
)
ALL_OPERATORS = DATA_OPERATORS + CODE_OPERATORS

OUTLIER_ROW_FRACTION = 0.05
REPEAT_ROW_FRACTION = 0.10
NULL_COLUMN_FRACTION = 0.10
NULL_ROW_FRACTION = 0.05
LABEL_ROW_FRACTION = 0.10

_LABEL_NAMES = ("label", "target", "class", "y", "survived")
_ACTIVATION_LAYERS = {"ReLU", "Sigmoid", "Tanh", "Softmax", "LeakyReLU", "Activation", "Dropout"}
_DOUBLED_PARAMS = {
    "epochs",
    "num_epochs",
    "n_epochs",
    "max_iter",
    "n_estimators",
    "max_depth",
    "n_iter",
}
_READ_PATTERNS = ("pandas.read_csv", "pandas.read_table")


class OperatorInapplicable(Exception):
    pass


@dataclass(frozen=True)
class MutantSpec:
    mutant_id: str
    operator: str
    seed: int
    site: tuple = ()  # indices into the operator's deterministic site enumeration
    target: Optional[str] = None  # data file path for data operators
    description: str = ""

    def to_dict(self) -> dict:
        return {
            "mutant_id": self.mutant_id,
            "operator": self.operator,
            "seed": self.seed,
            "site": list(self.site),
            "target": self.target,
            "description": self.description,
        }

    @staticmethod
    def from_dict(d: dict) -> "MutantSpec":
        return MutantSpec(
            d["mutant_id"],
            d["operator"],
            d["seed"],
            tuple(d.get("site", ())),
            d.get("target"),
            d.get("description", ""),
        )


@dataclass(frozen=True)
class MutantApplication:
    spec: MutantSpec
    notebook: Notebook
    data_overrides: dict  # relative path -> bytes
    edits: tuple = ()  # human-readable edit descriptions


# ---------------------------------------------------------------------------
# notebook traversal helpers


def _cell_trees(nb: Notebook):
    """(cell, tree, aliases-so-far) for every parseable code cell."""
    aliases: dict[str, str] = {}
    out = []
    for cell in nb.cells:
        if cell.kind != CODE:
            continue
        tree = parse_cell(cell.source)
        if tree is None:
            continue
        collect_aliases(tree, aliases)
        out.append((cell, tree, dict(aliases)))
    return out


def _on_generated_line(node, lines: list[str]) -> bool:
    for i in range(node.lineno, node.end_lineno + 1):
        if i <= len(lines) and GENERATED_MARKER in lines[i - 1]:
            return True
    return False


def _calls(tree, lines):
    out = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Call) and not _on_generated_line(node, lines):
            out.append(node)
    out.sort(key=lambda n: (n.lineno, n.col_offset))
    return out


def _apply_cell_edits(nb: Notebook, edits: list) -> Notebook:
    """edits: (cell_index, (start, end), new_text); applied bottom-up."""
    by_cell: dict[int, list] = {}
    for ci, span, new in edits:
        by_cell.setdefault(ci, []).append((span, new))
    out = nb
    for ci, cell_edits in by_cell.items():
        lines = out.cells[ci].source.split("\n")
        for span, new in sorted(cell_edits, key=lambda e: e[0][0], reverse=True):
            lines = replace_span(lines, span[0], span[1], new)
        out = out.with_cell_source(ci, "\n".join(lines))
    return out


def _removal_span(items: list, idx: int):
    """Span covering items[idx] plus one adjoining comma."""
    if len(items) == 1:
        return node_span(items[0])
    if idx < len(items) - 1:
        return (node_span(items[idx])[0], node_span(items[idx + 1])[0])
    return (node_span(items[idx - 1])[1], node_span(items[idx])[1])


def _call_elements(call: ast.Call) -> list:
    """Positional and keyword argument nodes in source order."""
    items = list(call.args) + list(call.keywords)
    items.sort(key=lambda n: (n.lineno, n.col_offset))
    return items


# ---------------------------------------------------------------------------
# data operators


def data_files(nb: Notebook) -> list[str]:
    """Paths the notebook reads with pandas, in discovery order."""
    found: list[str] = []
    for cell, tree, aliases in _cell_trees(nb):
        lines = cell.source.split("\n")
        for call in _calls(tree, lines):
            cn = resolve_call_name(call.func, aliases)
            if cn is None or not any(cn.matches(p) for p in _READ_PATTERNS):
                continue
            if not call.args:
                continue
            arg = call.args[0]
            if isinstance(arg, ast.Constant) and isinstance(arg.value, str):
                path = arg.value
                if "://" not in path and path not in found:
                    found.append(path)
    return found


def _label_column(df: pd.DataFrame) -> str:
    for col in df.columns:
        if str(col).lower() in _LABEL_NAMES:
            return col
    return df.columns[-1]


def mutate_dataframe(df: pd.DataFrame, operator: str, seed: int) -> pd.DataFrame:
    """Apply a data operator; deterministic in (df, operator, seed)."""
    rng = np.random.default_rng(seed)
    df = df.copy()
    n_rows, n_cols = df.shape

    if operator == "AddOutliers":
        n = math.floor(OUTLIER_ROW_FRACTION * n_rows)
        numeric = df.select_dtypes(include="number").columns
        if n == 0 or len(numeric) == 0:
            raise OperatorInapplicable("AddOutliers needs >= 20 rows and a numeric column")
        for c in numeric:
            if pd.api.types.is_integer_dtype(df[c]):
                df[c] = df[c].astype("float64")  # scaled values won't fit int64
        pos = [df.columns.get_loc(c) for c in numeric]
        for r in rng.choice(n_rows, size=n, replace=False):
            factor = rng.uniform(10.0, 100.0)
            df.iloc[r, pos] = df.iloc[r, pos] * factor
        return df

    if operator == "RepeatData":
        n = math.floor(REPEAT_ROW_FRACTION * n_rows)
        if n == 0 or n_rows < 2:
            raise OperatorInapplicable("RepeatData needs >= 10 rows")
        for t in rng.choice(n_rows, size=n, replace=False):
            s = int(rng.integers(0, n_rows - 1))
            if s >= t:
                s += 1
            df.iloc[t] = df.iloc[s]
        return df

    if operator == "AddNulls":
        k = math.floor(NULL_COLUMN_FRACTION * n_cols)
        m = math.floor(NULL_ROW_FRACTION * n_rows)
        if k == 0:
            raise OperatorInapplicable(
                f"AddNulls selects floor({NULL_COLUMN_FRACTION} * {n_cols}) = 0 columns"
            )
        if m == 0:
            raise OperatorInapplicable("AddNulls needs >= 20 rows")
        for c in rng.choice(n_cols, size=k, replace=False):
            col = df.columns[int(c)]
            if pd.api.types.is_bool_dtype(df[col]):
                df[col] = df[col].astype(object)
            elif pd.api.types.is_integer_dtype(df[col]):
                df[col] = df[col].astype("float64")
            rows = rng.choice(n_rows, size=m, replace=False)
            df.iloc[rows, int(c)] = np.nan
        return df

    if operator == "ModifyLabels":
        col = _label_column(df)
        pos = df.columns.get_loc(col)
        labels = [l for l in df[col].unique() if not pd.isna(l)]
        n = math.floor(LABEL_ROW_FRACTION * n_rows)
        if len(labels) < 2:
            raise OperatorInapplicable(f"ModifyLabels: column {col!r} has < 2 distinct labels")
        if n == 0:
            raise OperatorInapplicable("ModifyLabels needs >= 10 rows")
        for r in rng.choice(n_rows, size=n, replace=False):
            current = df.iloc[int(r), pos]
            choices = [l for l in labels if l != current]
            if choices:
                df.iloc[int(r), pos] = choices[int(rng.integers(0, len(choices)))]
        return df

    if operator == "DataShift":
        col = _label_column(df)
        return df.sort_values(col, kind="stable", ignore_index=True)

    raise ValueError(f"unknown data operator {operator!r}")


# ---------------------------------------------------------------------------
# code operator sites


def zero_grad_sites(nb: Notebook) -> list:
    """(cell_index, stmt) for every bare ``*.zero_grad()`` statement."""
    sites = []
    for cell, tree, _ in _cell_trees(nb):
        lines = cell.source.split("\n")
        for node in ast.walk(tree):
            if not isinstance(node, ast.Expr) or _on_generated_line(node, lines):
                continue
            v = node.value
            if (
                isinstance(v, ast.Call)
                and isinstance(v.func, ast.Attribute)
                and v.func.attr == "zero_grad"
                and not v.args
            ):
                sites.append((cell.index, node))
    return sites


@dataclass(frozen=True)
class KwargSite:
    cell_index: int
    call_repr: str
    kwarg: str
    value_span: tuple
    value: object
    new_value: object
    entry_name: str
    required: bool
    seed_like: bool


def _hyperparam_edit(name: str, value, seed_parameters):
    lname = name.lower()
    if isinstance(value, bool):
        return not value
    numeric = isinstance(value, (int, float))
    if lname in ("lr", "learning_rate") and numeric:
        return value * 10
    if lname in ("dropout", "rate", "p") and numeric:
        return min(value + 0.25, 0.99)
    if lname == "activation" and isinstance(value, str):
        return {"relu": "sigmoid", "sigmoid": "relu"}.get(value)
    if lname in _DOUBLED_PARAMS and isinstance(value, int):
        return value * 2
    if lname == "test_size" and numeric:
        return min(value + 0.3, 0.9)
    if name in seed_parameters and isinstance(value, int):
        return value + 1
    if numeric:
        return value * 2
    return None


def hyperparam_sites(nb: Notebook, catalog: ApiCatalog) -> list[KwargSite]:
    """Editable literal keyword arguments on cataloged calls, source order."""
    sites = []
    for cell, tree, aliases in _cell_trees(nb):
        lines = cell.source.split("\n")
        for call in _calls(tree, lines):
            cn = resolve_call_name(call.func, aliases)
            entry = catalog.match(cn) if cn else None
            if entry is None:
                continue
            for kw in call.keywords:
                if kw.arg is None or not isinstance(kw.value, ast.Constant):
                    continue
                new = _hyperparam_edit(kw.arg, kw.value.value, catalog.seed_parameters)
                if new is None:
                    continue
                sites.append(
                    KwargSite(
                        cell_index=cell.index,
                        call_repr=entry.name,
                        kwarg=kw.arg,
                        value_span=node_span(kw.value),
                        value=kw.value.value,
                        new_value=new,
                        entry_name=entry.name,
                        required=kw.arg in entry.required_params,
                        seed_like=kw.arg in catalog.seed_parameters,
                    )
                )
    return sites


@dataclass(frozen=True)
class RemovableKwarg:
    cell_index: int
    span: tuple  # removal span including adjoining comma
    kwarg: str
    entry_name: str


def removable_kwarg_sites(nb: Notebook, catalog: ApiCatalog) -> list[RemovableKwarg]:
    sites = []
    for cell, tree, aliases in _cell_trees(nb):
        lines = cell.source.split("\n")
        for call in _calls(tree, lines):
            cn = resolve_call_name(call.func, aliases)
            entry = catalog.match(cn) if cn else None
            if entry is None:
                continue
            items = _call_elements(call)
            for kw in call.keywords:
                if kw.arg is None or kw.arg in entry.required_params:
                    continue
                span = _removal_span(items, items.index(kw))
                sites.append(RemovableKwarg(cell.index, span, kw.arg, entry.name))
    return sites


@dataclass(frozen=True)
class SwapSite:
    cell_index: int
    func_span: tuple
    attr_span: Optional[tuple]  # attribute-name span when func is dotted
    entry_name: str
    partner: str
    bare_name: bool
    needs_import: Optional[str]  # import statement to add, if any


def _attr_span(func: ast.Attribute):
    end = (func.end_lineno, func.end_col_offset)
    start = (func.end_lineno, func.end_col_offset - len(func.attr.encode("utf-8")))
    return (start, end)


def swap_sites(nb: Notebook, catalog: ApiCatalog) -> list[SwapSite]:
    sites = []
    for cell, tree, aliases in _cell_trees(nb):
        lines = cell.source.split("\n")
        for call in _calls(tree, lines):
            cn = resolve_call_name(call.func, aliases)
            entry = catalog.match(cn) if cn else None
            if entry is None:
                continue
            for partner in catalog.swap_partners(entry.name):
                partner_last = partner.split(".")[-1]
                if isinstance(call.func, ast.Attribute):
                    star = entry.name.startswith("*.") or partner.startswith("*.")
                    if not star:
                        e_mod = entry.name.rsplit(".", 1)[0]
                        p_mod = partner.rsplit(".", 1)[0]
                        if e_mod != p_mod:
                            continue  # only same-module attribute swaps are safe
                    sites.append(
                        SwapSite(
                            cell.index,
                            node_span(call.func),
                            _attr_span(call.func),
                            entry.name,
                            partner_last,
                            bare_name=False,
                            needs_import=None,
                        )
                    )
                elif isinstance(call.func, ast.Name):
                    if partner.startswith("*."):
                        continue  # no module to import the partner from
                    p_mod = partner.rsplit(".", 1)[0]
                    already = aliases.get(partner_last) == partner
                    sites.append(
                        SwapSite(
                            cell.index,
                            node_span(call.func),
                            None,
                            entry.name,
                            partner_last,
                            bare_name=True,
                            needs_import=None
                            if already
                            else f"from {p_mod} import {partner_last}",
                        )
                    )
    return sites


@dataclass(frozen=True)
class LayerSite:
    cell_index: int
    span: tuple  # removal span
    layer: str


def layer_sites(nb: Notebook) -> list[LayerSite]:
    """Removable activation/Dropout elements of Sequential constructions."""
    sites = []
    for cell, tree, aliases in _cell_trees(nb):
        lines = cell.source.split("\n")
        for call in _calls(tree, lines):
            cn = resolve_call_name(call.func, aliases)
            if cn is None or cn.last != "Sequential":
                continue
            if len(call.args) == 1 and isinstance(call.args[0], ast.List):
                items = call.args[0].elts
            else:
                items = call.args
            for i, el in enumerate(items):
                if not isinstance(el, ast.Call):
                    continue
                ecn = resolve_call_name(el.func, aliases)
                if ecn and ecn.last in _ACTIVATION_LAYERS:
                    sites.append(LayerSite(cell.index, _removal_span(items, i), ecn.last))
    return sites


# ---------------------------------------------------------------------------
# enumeration and application


def enumerate_mutants(
    nb: Notebook,
    catalog: ApiCatalog,
    seed: int = 0,
    operators=None,
    max_per_op: int = 4,
) -> list[MutantSpec]:
    """Plan mutants for a notebook. Application may still find an operator
    inapplicable (data-size fractions are only known once the file loads)."""
    chosen = list(operators) if operators else list(ALL_OPERATORS)
    unknown = [op for op in chosen if op not in ALL_OPERATORS]
    if unknown:
        raise ValueError(f"unknown operators: {', '.join(unknown)}")
    specs: list[MutantSpec] = []
    files = data_files(nb)

    for op in chosen:
        if op in DATA_OPERATORS:
            for k, path in enumerate(files[:max_per_op]):
                specs.append(
                    MutantSpec(f"{op}-{k}", op, seed, (), path, f"{op} on {path}")
                )
            continue
        if op == "RemoveZeroGrad":
            n = len(zero_grad_sites(nb))
            if n:
                specs.append(
                    MutantSpec(
                        f"{op}-0", op, seed, tuple(range(n)), None,
                        f"remove {n} zero_grad() call(s)",
                    )
                )
        elif op == "ModifyHyperparams":
            sites = hyperparam_sites(nb, catalog)
            if sites:
                rng = np.random.default_rng(seed)
                order = [int(i) for i in rng.permutation(len(sites))]
                chunks = [order[i : i + 4] for i in range(0, len(order), 4)]
                for k, chunk in enumerate(chunks[:max_per_op]):
                    names = ", ".join(sites[i].kwarg for i in sorted(chunk))
                    specs.append(
                        MutantSpec(
                            f"{op}-{k}", op, seed, tuple(sorted(chunk)), None,
                            f"perturb {names}",
                        )
                    )
        elif op == "RemoveHyperparams":
            sites = removable_kwarg_sites(nb, catalog)
            for k, i in enumerate(range(min(len(sites), max_per_op))):
                specs.append(
                    MutantSpec(
                        f"{op}-{k}", op, seed, (i,), None,
                        f"drop {sites[i].kwarg}= from {sites[i].entry_name}",
                    )
                )
        elif op == "SwapApis":
            sites = swap_sites(nb, catalog)
            for k, i in enumerate(range(min(len(sites), max_per_op))):
                specs.append(
                    MutantSpec(
                        f"{op}-{k}", op, seed, (i,), None,
                        f"swap {sites[i].entry_name} -> {sites[i].partner}",
                    )
                )
        elif op == "RemoveLayers":
            sites = layer_sites(nb)
            for k, i in enumerate(range(min(len(sites), max_per_op))):
                specs.append(
                    MutantSpec(
                        f"{op}-{k}", op, seed, (i,), None,
                        f"remove {sites[i].layer} layer",
                    )
                )
    return specs


def _delete_statements(nb: Notebook, doomed: list) -> Notebook:
    """Remove (cell_index, stmt) statements, patching in ``pass`` if a block
    would go empty."""
    by_cell: dict[int, list] = {}
    for ci, stmt in doomed:
        by_cell.setdefault(ci, []).append(stmt)
    out = nb
    for ci, stmts in by_cell.items():
        lines = out.cells[ci].source.split("\n")
        kept = list(lines)
        for stmt in sorted(stmts, key=lambda s: s.lineno, reverse=True):
            del kept[stmt.lineno - 1 : stmt.end_lineno]
        candidate = "\n".join(kept)
        if parse_cell(candidate) is None:
            kept = list(lines)
            for stmt in sorted(stmts, key=lambda s: s.lineno, reverse=True):
                indent = lines[stmt.lineno - 1][
                    : len(lines[stmt.lineno - 1]) - len(lines[stmt.lineno - 1].lstrip())
                ]
                kept[stmt.lineno - 1 : stmt.end_lineno] = [indent + "pass"]
            candidate = "\n".join(kept)
        out = out.with_cell_source(ci, candidate)
    return out


def apply_mutant(
    nb: Notebook,
    spec: MutantSpec,
    catalog: ApiCatalog,
    source_dir: Optional[Path] = None,
) -> MutantApplication:
    if spec.operator in DATA_OPERATORS:
        if spec.target is None:
            raise OperatorInapplicable(f"{spec.operator}: no data file recorded")
        if source_dir is None:
            raise OperatorInapplicable(f"{spec.operator}: no source directory to read from")
        path = Path(source_dir) / spec.target
        if not path.exists():
            raise OperatorInapplicable(f"{spec.operator}: {spec.target} not found")
        df = pd.read_csv(path)
        mutated = mutate_dataframe(df, spec.operator, spec.seed)
        payload = mutated.to_csv(index=False).encode("utf-8")
        return MutantApplication(spec, nb, {spec.target: payload}, (spec.description,))

    if spec.operator == "RemoveZeroGrad":
        sites = zero_grad_sites(nb)
        if not sites:
            raise OperatorInapplicable("no zero_grad() statements")
        doomed = [sites[i] for i in spec.site if i < len(sites)]
        return MutantApplication(
            spec, _delete_statements(nb, doomed), {},
            tuple(f"removed zero_grad() in cell {ci}" for ci, _ in doomed),
        )

    if spec.operator == "ModifyHyperparams":
        sites = hyperparam_sites(nb, catalog)
        edits, notes = [], []
        for i in spec.site:
            if i >= len(sites):
                continue
            s = sites[i]
            edits.append((s.cell_index, s.value_span, repr(s.new_value)))
            notes.append(f"{s.entry_name} {s.kwarg}: {s.value!r} -> {s.new_value!r}")
        if not edits:
            raise OperatorInapplicable("no editable hyperparameters at recorded sites")
        return MutantApplication(spec, _apply_cell_edits(nb, edits), {}, tuple(notes))

    if spec.operator == "RemoveHyperparams":
        sites = removable_kwarg_sites(nb, catalog)
        edits, notes = [], []
        for i in spec.site:
            if i >= len(sites):
                continue
            s = sites[i]
            edits.append((s.cell_index, s.span, ""))
            notes.append(f"dropped {s.kwarg}= from {s.entry_name}")
        if not edits:
            raise OperatorInapplicable("no removable keyword arguments at recorded sites")
        return MutantApplication(spec, _apply_cell_edits(nb, edits), {}, tuple(notes))

    if spec.operator == "SwapApis":
        sites = swap_sites(nb, catalog)
        edits, notes = [], []
        imports: dict[int, list] = {}
        for i in spec.site:
            if i >= len(sites):
                continue
            s = sites[i]
            span = s.func_span if s.bare_name else s.attr_span
            edits.append((s.cell_index, span, s.partner))
            if s.needs_import:
                imports.setdefault(s.cell_index, []).append(s.needs_import)
            notes.append(f"{s.entry_name} -> {s.partner}")
        if not edits:
            raise OperatorInapplicable("no swappable API calls at recorded sites")
        out = _apply_cell_edits(nb, edits)
        for ci, stmts in imports.items():
            src = out.cells[ci].source
            out = out.with_cell_source(ci, "\n".join(dict.fromkeys(stmts)) + "\n" + src)
        return MutantApplication(spec, out, {}, tuple(notes))

    if spec.operator == "RemoveLayers":
        sites = layer_sites(nb)
        edits, notes = [], []
        for i in spec.site:
            if i >= len(sites):
                continue
            s = sites[i]
            edits.append((s.cell_index, s.span, ""))
            notes.append(f"removed {s.layer} layer")
        if not edits:
            raise OperatorInapplicable("no removable layers at recorded sites")
        return MutantApplication(spec, _apply_cell_edits(nb, edits), {}, tuple(notes))

    raise ValueError(f"unknown operator {spec.operator!r}")


# ---------------------------------------------------------------------------
# scoring

KILLED = "killed"
SURVIVED = "survived"
INAPPLICABLE = "inapplicable"
NO_RUNS = "no_runs"

_FN_KIND = {
    "assert_shape": "Dataset",
    "assert_column_names": "Dataset",
    "assert_column_types": "Dataset",
    "assert_df_mean": "Dataset",
    "assert_df_var": "Dataset",
    "assert_model_layers": "ModelArch",
    "assert_allclose": "ModelPerf",
    "assert_equal": "ModelPerf",
    "assert_true": "ModelPerf",
    "assert_false": "ModelPerf",
}


@dataclass
class MutantResult:
    spec: MutantSpec
    killed_runs: int = 0
    survived_runs: int = 0
    excluded_runs: int = 0
    killed_by: dict = field(default_factory=dict)  # property kind -> runs
    note: str = ""

    @property
    def counted(self) -> int:
        return self.killed_runs + self.survived_runs

    @property
    def kill_fraction(self) -> Optional[float]:
        return self.killed_runs / self.counted if self.counted else None

    @property
    def outcome(self) -> str:
        if self.note:
            return INAPPLICABLE
        if not self.counted:
            return NO_RUNS
        return KILLED if self.killed_runs else SURVIVED

    def to_dict(self) -> dict:
        return {
            "mutant": self.spec.to_dict(),
            "outcome": self.outcome,
            "killed_runs": self.killed_runs,
            "survived_runs": self.survived_runs,
            "excluded_runs": self.excluded_runs,
            "kill_fraction": self.kill_fraction,
            "killed_by": self.killed_by,
            "note": self.note,
        }


def score_mutant(
    spec: MutantSpec, traces: TraceSet, kind_by_test_id: Optional[dict] = None
) -> MutantResult:
    """A run kills the mutant when at least one assertion fails. Runs that
    crash, time out, or error without a failing assertion say nothing about
    the assertions and stay out of the denominator."""
    res = MutantResult(spec)
    for r in traces.runs:
        fails = [
            e
            for e in r.events
            if e.get("ev") == "assert" and e.get("status") == "fail"
        ]
        if fails:
            res.killed_runs += 1
            kinds = set()
            for e in fails:
                tid = e.get("test_id")
                kinds.add((kind_by_test_id or {}).get(tid, "unknown"))
            for k in kinds:
                res.killed_by[k] = res.killed_by.get(k, 0) + 1
        elif r.outcome == OK:
            res.survived_runs += 1
        else:
            res.excluded_runs += 1
    return res


def kind_map_from_scan(expected) -> dict:
    """test_id -> property kind via the assertion function family, used when
    no generation manifest is available."""
    return {e.test_id: _FN_KIND.get(e.fn, "unknown") for e in expected}


def mutation_score(kill_fractions: list[float]) -> float:
    """Mean per-mutant kill fraction."""
    if not kill_fractions:
        return 0.0
    return sum(kill_fractions) / len(kill_fractions)
