"""Notebook container model: parse, edit, serialize with round-trip fidelity.

Cells are immutable; every edit returns a new Notebook. Outputs, metadata and
unknown keys ride along verbatim in the underlying json objects.
"""

from __future__ import annotations

import ast
import io
import json
import tokenize
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

GENERATED_MARKER = "# nbtest:generated"
# Lines the instrumenter had to modify (not just insert) carry the original
# text in the marker so strip() can restore them exactly.
WAS_MARKER_PREFIX = GENERATED_MARKER + ":was="

CODE = "code"
MARKDOWN = "markdown"
RAW = "raw"
_KINDS = (CODE, MARKDOWN, RAW)


class NotebookError(Exception):
    pass


class MalformedNotebook(NotebookError):
    pass


class UnsupportedVersion(NotebookError):
    pass


class NotACodeCell(NotebookError):
    pass


class AnchorOutOfRange(NotebookError):
    pass


def _source_lines(text: str) -> list[str]:
    # nbformat convention: source as a list of lines, newlines kept.
    return text.splitlines(keepends=True) if text else []


@dataclass(frozen=True)
class Cell:
    index: int
    kind: str
    source: str
    raw: Mapping[str, Any]

    def to_dict(self) -> dict:
        d = dict(self.raw)
        d["source"] = _source_lines(self.source)
        return d

    def __eq__(self, other):
        if not isinstance(other, Cell):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.index, self.kind, self.source))


_MINIMAL_CODE_RAW = {
    "cell_type": CODE,
    "execution_count": None,
    "metadata": {},
    "outputs": [],
    "source": [],
}


@dataclass(frozen=True)
class Notebook:
    format_version: tuple[int, int]
    cells: tuple[Cell, ...]
    raw: Mapping[str, Any]

    def to_dict(self) -> dict:
        d = dict(self.raw)
        d["cells"] = [c.to_dict() for c in self.cells]
        return d

    def __eq__(self, other):
        if not isinstance(other, Notebook):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.format_version, self.cells))

    def code_cells(self) -> Iterable[Cell]:
        return (c for c in self.cells if c.kind == CODE)

    def with_cell_source(self, cell_index: int, source: str) -> "Notebook":
        cells = list(self.cells)
        old = cells[cell_index]
        cells[cell_index] = Cell(index=old.index, kind=old.kind, source=source, raw=old.raw)
        return Notebook(self.format_version, tuple(cells), self.raw)

    def prepend_code_cell(self, source: str, cell_id: str = "nbtest-preamble") -> "Notebook":
        raw = dict(_MINIMAL_CODE_RAW)
        raw["metadata"] = {}
        if self.format_version >= (4, 5):
            raw["id"] = cell_id
        new = [Cell(index=0, kind=CODE, source=source, raw=raw)]
        for c in self.cells:
            new.append(Cell(index=c.index + 1, kind=c.kind, source=c.source, raw=c.raw))
        return Notebook(self.format_version, tuple(new), self.raw)


def parse_notebook(data: bytes | str) -> Notebook:
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedNotebook(f"not utf-8: {e}") from None
    else:
        text = data
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedNotebook(f"invalid json: {e}") from None
    if not isinstance(obj, dict):
        raise MalformedNotebook("top level is not an object")
    for key in ("cells", "nbformat"):
        if key not in obj:
            raise MalformedNotebook(f"missing required key: {key}")
    major = obj["nbformat"]
    if not isinstance(major, int) or isinstance(major, bool):
        raise MalformedNotebook("nbformat must be an integer")
    if major < 4:
        raise UnsupportedVersion(f"nbformat {major} is unsupported (need >= 4)")
    minor = obj.get("nbformat_minor", 0)
    if not isinstance(minor, int) or isinstance(minor, bool):
        raise MalformedNotebook("nbformat_minor must be an integer")
    raw_cells = obj["cells"]
    if not isinstance(raw_cells, list):
        raise MalformedNotebook("cells must be a list")

    cells = []
    for i, rc in enumerate(raw_cells):
        if not isinstance(rc, dict):
            raise MalformedNotebook(f"cell {i} is not an object")
        kind = rc.get("cell_type")
        if kind not in _KINDS:
            raise MalformedNotebook(f"cell {i}: unknown cell_type {kind!r}")
        src = rc.get("source", "")
        if isinstance(src, list):
            if not all(isinstance(s, str) for s in src):
                raise MalformedNotebook(f"cell {i}: source lines must be strings")
            src = "".join(src)
        elif not isinstance(src, str):
            raise MalformedNotebook(f"cell {i}: source must be string or list")
        cells.append(Cell(index=i, kind=kind, source=src, raw=rc))
    return Notebook(format_version=(major, minor), cells=tuple(cells), raw=obj)


def serialize_notebook(nb: Notebook) -> bytes:
    text = json.dumps(nb.to_dict(), indent=1, sort_keys=True, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def read_notebook(path: str | Path) -> Notebook:
    return parse_notebook(Path(path).read_bytes())


def write_notebook(nb: Notebook, path: str | Path) -> None:
    Path(path).write_bytes(serialize_notebook(nb))


def _split_lines(source: str) -> list[str]:
    return source.split("\n") if source else []


def _infer_indent(source: str, anchor_line: int) -> str:
    """Indentation for a statement inserted after anchor_line (1-based)."""
    if anchor_line == 0:
        return ""
    best = None
    try:
        tree = ast.parse(source)
    except SyntaxError:
        tree = None
    if tree is not None:
        for node in ast.walk(tree):
            if not isinstance(node, ast.stmt):
                continue
            end = getattr(node, "end_lineno", node.lineno)
            if node.lineno <= anchor_line <= end:
                if best is None or (node.lineno, node.col_offset) > (best.lineno, best.col_offset):
                    best = node
    if best is not None:
        return " " * best.col_offset
    lines = _split_lines(source)
    if 1 <= anchor_line <= len(lines):
        line = lines[anchor_line - 1]
        return line[: len(line) - len(line.lstrip())]
    return ""


def insert_statements(
    nb: Notebook, cell_index: int, anchor_line: int, statements: Sequence[str]
) -> Notebook:
    """Insert statements immediately after anchor_line (0 = top of cell)."""
    if not 0 <= cell_index < len(nb.cells):
        raise AnchorOutOfRange(f"cell index {cell_index} out of range")
    cell = nb.cells[cell_index]
    if cell.kind != CODE:
        raise NotACodeCell(f"cell {cell_index} is a {cell.kind} cell")
    lines = _split_lines(cell.source)
    if not 0 <= anchor_line <= len(lines):
        raise AnchorOutOfRange(
            f"anchor line {anchor_line} out of range for cell {cell_index} "
            f"({len(lines)} lines)"
        )
    indent = _infer_indent(cell.source, anchor_line)
    block = [indent + s for s in statements]
    new_lines = lines[:anchor_line] + block + lines[anchor_line:]
    return nb.with_cell_source(cell_index, "\n".join(new_lines))


def _decode_was(comment: str) -> list[str] | None:
    try:
        payload = json.loads(comment[len(WAS_MARKER_PREFIX):])
    except (json.JSONDecodeError, ValueError):
        return None
    if isinstance(payload, list) and all(isinstance(s, str) for s in payload):
        return payload
    return None


def _find_marks(source: str) -> dict[int, list[str] | None]:
    """Map 0-based line -> None (drop) or original lines (restore)."""
    marks: dict[int, list[str] | None] = {}
    try:
        tokens = list(tokenize.generate_tokens(io.StringIO(source).readline))
    except (tokenize.TokenError, IndentationError, SyntaxError):
        tokens = None
    if tokens is not None:
        for t in tokens:
            if t.type != tokenize.COMMENT:
                continue
            if t.string == GENERATED_MARKER:
                marks[t.start[0] - 1] = None
            elif t.string.startswith(WAS_MARKER_PREFIX):
                restored = _decode_was(t.string)
                if restored is not None:
                    marks[t.start[0] - 1] = restored
        return marks
    # untokenizable source (e.g. magics): line-suffix fallback
    for i, line in enumerate(_split_lines(source)):
        r = line.rstrip()
        if r.endswith(GENERATED_MARKER):
            marks[i] = None
        else:
            k = r.find(WAS_MARKER_PREFIX)
            if k >= 0:
                restored = _decode_was(r[k:])
                if restored is not None:
                    marks[i] = restored
    return marks


def strip_source(source: str) -> str:
    """Remove generated lines; restore lines the instrumenter modified."""
    if GENERATED_MARKER not in source:
        return source
    lines = _split_lines(source)
    marks = _find_marks(source)
    out: list[str] = []
    for i, line in enumerate(lines):
        if i in marks:
            restored = marks[i]
            if restored is not None:
                out.extend(restored)
        else:
            out.append(line)
    return "\n".join(out)


def strip_generated(nb: Notebook) -> Notebook:
    cells = []
    for cell in nb.cells:
        if cell.kind != CODE:
            cells.append(cell)
            continue
        stripped = strip_source(cell.source)
        if stripped == "" and cell.source != "":
            continue  # cell was entirely generated (e.g. the preamble)
        cells.append(Cell(index=cell.index, kind=cell.kind, source=stripped, raw=cell.raw))
    reindexed = tuple(
        Cell(index=i, kind=c.kind, source=c.source, raw=c.raw) for i, c in enumerate(cells)
    )
    return Notebook(nb.format_version, reindexed, nb.raw)
