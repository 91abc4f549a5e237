"""AST helpers shared by the analyzer, instrumenter and mutators."""

from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Iterable, Iterator


def mask_magics(source: str) -> str:
    """Comment out IPython magic/shell lines so the rest of the cell parses.

    Line count is preserved; the masked lines are never edited downstream.
    """
    if "%" not in source and "!" not in source:
        return source
    out = []
    for line in source.split("\n"):
        s = line.lstrip()
        if s.startswith("%") or s.startswith("!"):
            out.append("# " + line)
        else:
            out.append(line)
    return "\n".join(out)


def parse_cell(source: str) -> ast.Module | None:
    try:
        return ast.parse(mask_magics(source))
    except (SyntaxError, ValueError):
        return None


def collect_aliases(tree: ast.Module, aliases: dict[str, str]) -> None:
    """Accumulate import bindings: local name -> dotted module/object path."""
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for a in node.names:
                if a.asname:
                    aliases[a.asname] = a.name
                else:
                    head = a.name.split(".")[0]
                    aliases[head] = head
        elif isinstance(node, ast.ImportFrom):
            if node.level or not node.module:
                continue  # relative imports don't name installed packages
            for a in node.names:
                if a.name == "*":
                    continue
                aliases[a.asname or a.name] = f"{node.module}.{a.name}"


@dataclass(frozen=True)
class CallName:
    resolved: str | None  # full dotted path when the receiver resolved via imports
    last: str

    def matches(self, pattern: str) -> bool:
        if pattern.startswith("*."):
            return self.last == pattern[2:]
        if self.resolved is not None:
            return self.resolved == pattern or self.resolved.endswith("." + pattern)
        # unresolvable receiver: fall back to the final component
        return self.last == pattern.rsplit(".", 1)[-1]


def resolve_call_name(func: ast.expr, aliases: dict[str, str]) -> CallName | None:
    parts: list[str] = []
    node = func
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
        parts.reverse()
        head = parts[0]
        if head in aliases:
            rest = parts[1:]
            resolved = aliases[head] + ("." + ".".join(rest) if rest else "")
            return CallName(resolved=resolved, last=parts[-1])
        return CallName(resolved=None, last=parts[-1])
    if parts:
        parts.reverse()
        return CallName(resolved=None, last=parts[-1])
    return None


def iter_statements(tree: ast.Module) -> Iterator[ast.stmt]:
    """Statements in source order, descending into compound bodies but not
    into function/class definitions (values there live in another scope)."""

    def rec(body: Iterable[ast.stmt]) -> Iterator[ast.stmt]:
        for stmt in body:
            yield stmt
            if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
                continue
            for attr in ("body", "orelse", "finalbody"):
                sub = getattr(stmt, attr, None)
                if sub:
                    yield from rec(sub)
            for handler in getattr(stmt, "handlers", None) or []:
                yield from rec(handler.body)

    return rec(tree.body)


# ast col offsets are utf-8 byte offsets, so spans are sliced on encoded lines.


def span_text(lines: list[str], start: tuple[int, int], end: tuple[int, int]) -> str:
    l1, c1 = start
    l2, c2 = end
    if l1 == l2:
        return lines[l1 - 1].encode("utf-8")[c1:c2].decode("utf-8")
    parts = [lines[l1 - 1].encode("utf-8")[c1:].decode("utf-8")]
    parts.extend(lines[l1:l2 - 1])
    parts.append(lines[l2 - 1].encode("utf-8")[:c2].decode("utf-8"))
    return "\n".join(parts)


def replace_span(
    lines: list[str], start: tuple[int, int], end: tuple[int, int], text: str
) -> list[str]:
    l1, c1 = start
    l2, c2 = end
    head = lines[l1 - 1].encode("utf-8")[:c1].decode("utf-8")
    tail = lines[l2 - 1].encode("utf-8")[c2:].decode("utf-8")
    merged = head + text + tail
    return lines[: l1 - 1] + merged.split("\n") + lines[l2:]


def node_span(node: ast.AST) -> tuple[tuple[int, int], tuple[int, int]]:
    return (node.lineno, node.col_offset), (node.end_lineno, node.end_col_offset)


def node_text(lines: list[str], node: ast.AST) -> str:
    start, end = node_span(node)
    return span_text(lines, start, end)


def literal_token(value) -> str:
    """Render a python literal for splicing into source."""
    return repr(value)
