"""Catalog of tracked ML API calls, loadable/extendable from JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .astutil import CallName

CATEGORIES = frozenset(
    {
        "DatasetInit",
        "DatasetTransform",
        "ModelInit",
        "MetricCall",
        "TrainCall",
        "LayerInit",
        "OptimizerCall",
    }
)
VALUE_KINDS = frozenset({"table", "model", "scalar", "array"})

# Which property kind a match produces; categories absent here drive the
# mutators / custom-metric lineage instead of producing properties.
PROPERTY_KIND = {
    "DatasetInit": "Dataset",
    "DatasetTransform": "Dataset",
    "ModelInit": "ModelArch",
    "MetricCall": "ModelPerf",
}

DEFAULT_VALUE_KIND = {
    "DatasetInit": "table",
    "DatasetTransform": "array",
    "ModelInit": "model",
    "MetricCall": "scalar",
    "TrainCall": "model",
    "LayerInit": "model",
    "OptimizerCall": "model",
}

_TOP_KEYS = {"version", "entries", "swap_groups", "seed_parameters"}
_ENTRY_KEYS = {"name", "category", "value_kind", "required_params"}


class CatalogSchemaError(Exception):
    pass


@dataclass(frozen=True)
class ApiEntry:
    name: str
    category: str
    value_kind: str
    required_params: tuple[str, ...] = ()


@dataclass(frozen=True)
class ApiCatalog:
    entries: tuple[ApiEntry, ...]
    swap_groups: tuple[tuple[str, ...], ...] = ()
    seed_parameters: tuple[str, ...] = ()
    version: int = 1

    def __post_init__(self):
        names = [e.name for e in self.entries]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise CatalogSchemaError(f"duplicate entry names: {sorted(dupes)}")
        by_name = {e.name: e for e in self.entries}
        for group in self.swap_groups:
            if len(group) < 2:
                raise CatalogSchemaError(f"swap group {list(group)} needs >= 2 members")
            cats = set()
            for member in group:
                if member not in by_name:
                    raise CatalogSchemaError(f"swap group member {member!r} is not an entry")
                cats.add(by_name[member].category)
            if len(cats) != 1:
                raise CatalogSchemaError(
                    f"swap group {list(group)} mixes categories {sorted(cats)}"
                )

    def match(self, call_name: CallName) -> ApiEntry | None:
        for entry in self.entries:
            if call_name.matches(entry.name):
                return entry
        return None

    def entry(self, name: str) -> ApiEntry | None:
        for e in self.entries:
            if e.name == name:
                return e
        return None

    def swap_partners(self, entry_name: str) -> tuple[str, ...]:
        for group in self.swap_groups:
            if entry_name in group:
                return tuple(m for m in group if m != entry_name)
        return ()


def _parse_entry(obj, where: str) -> ApiEntry:
    if not isinstance(obj, dict):
        raise CatalogSchemaError(f"{where}: entry must be an object")
    unknown = set(obj) - _ENTRY_KEYS
    if unknown:
        raise CatalogSchemaError(f"{where}: unknown entry keys {sorted(unknown)}")
    name = obj.get("name")
    category = obj.get("category")
    if not isinstance(name, str) or not name:
        raise CatalogSchemaError(f"{where}: entry needs a non-empty name")
    if category not in CATEGORIES:
        raise CatalogSchemaError(f"{where}: {name}: unknown category {category!r}")
    value_kind = obj.get("value_kind", DEFAULT_VALUE_KIND[category])
    if value_kind not in VALUE_KINDS:
        raise CatalogSchemaError(f"{where}: {name}: unknown value_kind {value_kind!r}")
    req = obj.get("required_params", [])
    if not isinstance(req, list) or not all(isinstance(r, str) for r in req):
        raise CatalogSchemaError(f"{where}: {name}: required_params must be strings")
    return ApiEntry(name=name, category=category, value_kind=value_kind, required_params=tuple(req))


def _parse_file(text: str, where: str):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise CatalogSchemaError(f"{where}: invalid json: {e}") from None
    if not isinstance(obj, dict):
        raise CatalogSchemaError(f"{where}: top level must be an object")
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        raise CatalogSchemaError(f"{where}: unknown top-level keys {sorted(unknown)}")
    version = obj.get("version", 1)
    if not isinstance(version, int):
        raise CatalogSchemaError(f"{where}: version must be an integer")
    entries = [_parse_entry(e, where) for e in obj.get("entries", [])]
    names = [e.name for e in entries]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise CatalogSchemaError(f"{where}: duplicate entry names {sorted(dupes)}")
    groups = obj.get("swap_groups", [])
    if not isinstance(groups, list):
        raise CatalogSchemaError(f"{where}: swap_groups must be a list")
    swap_groups = []
    for g in groups:
        if not isinstance(g, list) or not all(isinstance(m, str) for m in g):
            raise CatalogSchemaError(f"{where}: swap group must be a list of names")
        swap_groups.append(tuple(g))
    seeds = obj.get("seed_parameters", [])
    if not isinstance(seeds, list) or not all(isinstance(s, str) for s in seeds):
        raise CatalogSchemaError(f"{where}: seed_parameters must be strings")
    return version, entries, swap_groups, list(seeds)


def load_catalog(path: str | Path | None = None) -> ApiCatalog:
    """Load the built-in catalog, merged with a user JSON file when given.

    User entries extend the default set; a user entry with a default's name
    replaces it. Swap groups are appended and seed parameters unioned.
    """
    default_text = resources.files("nbtestkit").joinpath("default_catalog.json").read_text("utf-8")
    version, entries, swap_groups, seeds = _parse_file(default_text, "default catalog")
    if path is not None:
        user_text = Path(path).read_text("utf-8")
        uversion, uentries, ugroups, useeds = _parse_file(user_text, str(path))
        version = uversion
        merged = {e.name: e for e in entries}
        for e in uentries:
            merged[e.name] = e
        entries = list(merged.values())
        swap_groups = swap_groups + ugroups
        seeds = seeds + [s for s in useeds if s not in seeds]
    return ApiCatalog(
        entries=tuple(entries),
        swap_groups=tuple(swap_groups),
        seed_parameters=tuple(seeds),
        version=version,
    )
