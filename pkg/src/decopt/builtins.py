"""Builtin signature table, loaded from the versioned data file."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .soltypes import Callable, SolType, Unknown, parse_type

NAMESPACES = ("msg", "block", "tx")


@lru_cache(maxsize=1)
def _table() -> dict:
    path = resources.files("decopt").joinpath("data/builtins.json")
    return json.loads(path.read_text())


def table_version() -> int:
    return _table()["version"]


def _parse(text: str | None) -> SolType:
    return parse_type(text) if text else Unknown()


def function_signature(name: str) -> Callable | None:
    entry = _table()["functions"].get(name)
    if entry is None:
        return None
    return Callable(tuple(_parse(p) for p in entry["params"]), _parse(entry["returns"]))


def member_type(namespace: str, field: str) -> SolType | None:
    text = _table()["members"].get(f"{namespace}.{field}")
    return parse_type(text) if text else None


def value_type(name: str) -> SolType | None:
    text = _table()["values"].get(name)
    return parse_type(text) if text else None


def instance_member_type(field: str) -> SolType | None:
    entry = _table()["instance_members"].get(field)
    return _parse(entry["returns"]) if entry else None


def instance_method_signature(name: str) -> Callable | None:
    entry = _table()["instance_methods"].get(name)
    if entry is None:
        return None
    return Callable(tuple(_parse(p) for p in entry["params"]), _parse(entry["returns"]))


def is_builtin_function(name: str) -> bool:
    return name in _table()["functions"]


def is_variadic(name: str) -> bool:
    entry = _table()["functions"].get(name)
    return bool(entry and entry.get("variadic"))


def is_namespace(name: str) -> bool:
    return name in NAMESPACES


def is_environment_name(name: str) -> bool:
    return name in NAMESPACES or name in _table()["values"]
