"""Scoring of recovered declarations against labeled ground truth.

The optimized unit itself is the prediction set: every typed
declaration predicts a variable type, every annotated storage variable
predicts an attribute label, and every function predicts a boundary
span in the canonical rendering.  Ground truth uses the same keys, so
a category scores as

* TP: truth entries whose predicted value matches exactly,
* FP: predictions that match no truth entry,
* FN: truth entries with no matching prediction,

with precision TP/(TP+FP) and recall TP/(TP+FN).  A zero denominator
renders the ratio undefined (None), never zero.  Type matching is
structural over parsed types, so alias spellings (uint for uint256,
byte for bytes1) compare equal; boundary matching requires the exact
(start, end) line pair.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, SchemaError, SchemaMismatch
from .parser import parse_unit
from .prompts import ATTRIBUTE_LABELS
from .soltypes import SolType, parse_type, render as render_type
from . import syntax as syn

CATEGORIES = ("boundary", "type", "attribute")


# ---------------------------------------------------------------------------
# ground truth


@dataclass(frozen=True)
class GroundTruth:
    unit: str
    functions: dict[str, tuple[int, int]]
    variables: dict[tuple[str, str], SolType]   # (fn or "", name) -> type
    attributes: dict[str, str]                  # storage name -> label


def load_ground_truth(source: str | Path | dict) -> GroundTruth:
    if isinstance(source, dict):
        data = source
    else:
        try:
            data = json.loads(Path(source).read_text())
        except OSError as err:
            raise SchemaError(str(source), f"cannot read ground truth: {err}")
        except json.JSONDecodeError as err:
            raise SchemaError(str(source), f"invalid json: {err.msg}")
    if not isinstance(data, dict):
        raise SchemaError("$", "ground truth must be a json object")
    unit = data.get("unit")
    if not isinstance(unit, str) or not unit:
        raise SchemaError("unit", "required non-empty string")

    functions: dict[str, tuple[int, int]] = {}
    for i, row in enumerate(_rows(data, "functions")):
        path = f"functions[{i}]"
        name = _need_str(row, path, "name")
        start = _need_int(row, path, "start")
        end = _need_int(row, path, "end")
        if start < 1 or end < 1:
            raise SchemaError(path, "line numbers are 1-based")
        if start > end:
            raise SchemaError(path, f"start {start} exceeds end {end}")
        if name in functions:
            raise SchemaError(path, f"duplicate function {name!r}")
        functions[name] = (start, end)

    variables: dict[tuple[str, str], SolType] = {}
    for i, row in enumerate(_rows(data, "variables")):
        path = f"variables[{i}]"
        fn = row.get("fn") or ""
        if not isinstance(fn, str):
            raise SchemaError(f"{path}.fn", "must be a string when present")
        name = _need_str(row, path, "name")
        text = _need_str(row, path, "type")
        try:
            t = parse_type(text)
        except (ParseError, ValueError) as err:
            raise SchemaError(f"{path}.type", f"unparseable type: {err}")
        key = (fn, name)
        if key in variables:
            raise SchemaError(path, f"duplicate variable {fn}:{name}")
        variables[key] = t

    attributes: dict[str, str] = {}
    for i, row in enumerate(_rows(data, "attributes")):
        path = f"attributes[{i}]"
        slot = _need_str(row, path, "slot")
        label = _need_str(row, path, "label")
        if label not in ATTRIBUTE_LABELS:
            raise SchemaError(f"{path}.label",
                              f"unknown attribute label {label!r}")
        if slot in attributes:
            raise SchemaError(path, f"duplicate attribute slot {slot!r}")
        attributes[slot] = label

    return GroundTruth(unit=unit, functions=functions,
                       variables=variables, attributes=attributes)


def _rows(data: dict, key: str) -> list[dict]:
    rows = data.get(key, [])
    if not isinstance(rows, list):
        raise SchemaError(key, "must be a list")
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise SchemaError(f"{key}[{i}]", "must be an object")
    return rows


def _need_str(row: dict, path: str, key: str) -> str:
    value = row.get(key)
    if not isinstance(value, str) or not value:
        raise SchemaError(f"{path}.{key}", "required non-empty string")
    return value


def _need_int(row: dict, path: str, key: str) -> int:
    value = row.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(f"{path}.{key}", "required integer")
    return value


# ---------------------------------------------------------------------------
# predictions


@dataclass(frozen=True)
class Predictions:
    unit: str
    functions: dict[str, tuple[int, int]]
    variables: dict[tuple[str, str], SolType]
    attributes: dict[str, str]


def extract_predictions(unit_name: str, unit: syn.SourceUnit) -> Predictions:
    variables: dict[tuple[str, str], SolType] = {}
    for d in unit.storage:
        if d.decl_type is not None:
            variables[("", d.name)] = d.decl_type
    for fn in unit.functions:
        for p in fn.params:
            if p.decl_type is not None:
                variables.setdefault((fn.name, p.name), p.decl_type)
        for _, stmt in syn.preorder_statements(fn):
            if isinstance(stmt, syn.VarDecl) and stmt.decl_type is not None:
                variables.setdefault((fn.name, stmt.name), stmt.decl_type)
    attributes = {d.name: d.attribute for d in unit.storage
                  if getattr(d, "attribute", None)}
    return Predictions(unit=unit_name,
                       functions=syn.canonical_spans(unit),
                       variables=variables,
                       attributes=attributes)


# ---------------------------------------------------------------------------
# metric arithmetic


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise SchemaError("counts", "counts must be non-negative")

    @property
    def precision(self) -> float | None:
        d = self.tp + self.fp
        return self.tp / d if d else None

    @property
    def recall(self) -> float | None:
        d = self.tp + self.fn
        return self.tp / d if d else None

    def precision_percent(self) -> float | None:
        return None if self.precision is None else round(self.precision * 100, 2)

    def recall_percent(self) -> float | None:
        return None if self.recall is None else round(self.recall * 100, 2)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision_percent(),
                "recall": self.recall_percent()}


def count_matches(pred: dict, truth: dict) -> Counts:
    tp = sum(1 for k, v in truth.items() if k in pred and pred[k] == v)
    return Counts(tp=tp, fp=len(pred) - tp, fn=len(truth) - tp)


@dataclass
class RecompileResult:
    status: str                # pass | fail | skipped
    detail: str = ""

    def to_dict(self) -> dict:
        out = {"status": self.status}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class MetricsTable:
    unit: str
    boundary: Counts
    type: Counts
    attribute: Counts
    recompile: RecompileResult | None = None

    def counts(self, category: str) -> Counts:
        if category not in CATEGORIES:
            raise SchemaError("category", f"unknown category {category!r}")
        return getattr(self, category)

    def to_dict(self) -> dict:
        out = {
            "unit": self.unit,
            "boundary": self.boundary.to_dict(),
            "type": self.type.to_dict(),
            "attribute": self.attribute.to_dict(),
        }
        if self.recompile is not None:
            out["recompile"] = self.recompile.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def text_table(self) -> str:
        headers = ("category", "tp", "fp", "fn", "precision", "recall")
        rows = [headers]
        for category in CATEGORIES:
            c = self.counts(category)
            rows.append((category, str(c.tp), str(c.fp), str(c.fn),
                         _pct_text(c.precision_percent()),
                         _pct_text(c.recall_percent())))
        if self.recompile is not None:
            rows.append(("recompile", "", "", "", self.recompile.status, ""))
        widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
        lines = []
        for r in rows:
            cells = [r[0].ljust(widths[0])]
            cells += [r[i].rjust(widths[i]) for i in range(1, len(headers))]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines)


def _pct_text(p: float | None) -> str:
    return "undefined" if p is None else f"{p:.2f}%"


def merge_tables(tables: list[MetricsTable],
                 unit: str = "combined") -> MetricsTable:
    def total(category: str) -> Counts:
        return Counts(tp=sum(t.counts(category).tp for t in tables),
                      fp=sum(t.counts(category).fp for t in tables),
                      fn=sum(t.counts(category).fn for t in tables))
    return MetricsTable(unit=unit, boundary=total("boundary"),
                        type=total("type"), attribute=total("attribute"))


# ---------------------------------------------------------------------------
# scoring


def score_unit(unit_name: str, unit: syn.SourceUnit,
               truth: GroundTruth) -> MetricsTable:
    if unit_name != truth.unit:
        raise SchemaMismatch(
            f"report unit {unit_name!r} does not match truth unit "
            f"{truth.unit!r}")
    pred = extract_predictions(unit_name, unit)
    rendered_vars = {k: render_type(v) for k, v in pred.variables.items()}
    truth_vars = {k: render_type(v) for k, v in truth.variables.items()}
    return MetricsTable(
        unit=unit_name,
        boundary=count_matches(pred.functions, truth.functions),
        type=count_matches(rendered_vars, truth_vars),
        attribute=count_matches(pred.attributes, truth.attributes),
    )


def score(report, truth: GroundTruth) -> MetricsTable:
    """Score a pipeline run against ground truth.

    Accepts a RunReport object or its parsed JSON dict; the optimized
    unit named by the report is read back and its declarations scored.
    """
    if isinstance(report, dict):
        unit_name = report.get("unit")
        optimized = report.get("optimized")
    else:
        unit_name = report.unit
        optimized = report.optimized_path
    if not unit_name:
        raise SchemaMismatch("report carries no unit name")
    if not optimized:
        raise SchemaMismatch(f"report for {unit_name!r} names no optimized "
                             f"output to score")
    try:
        text = Path(optimized).read_text()
    except OSError as err:
        raise SchemaMismatch(f"cannot read optimized unit: {err}")
    return score_unit(unit_name, parse_unit(text), truth)


# ---------------------------------------------------------------------------
# recompilation


def recompile_check(unit: syn.SourceUnit | str,
                    command: str | None) -> RecompileResult:
    """Run a configured compiler command template over the rendered unit.

    The template is split shell-style; every `{file}` placeholder is
    replaced by the rendered temp-file path (appended when absent).  No
    command configured means a soft skip, not a failure.
    """
    if not command:
        return RecompileResult("skipped", "no compiler command configured")
    text = unit if isinstance(unit, str) else syn.canonical(unit)
    argv = shlex.split(command)
    with tempfile.NamedTemporaryFile("w", suffix=".sol", delete=False) as fh:
        fh.write(text)
        path = fh.name
    try:
        if any("{file}" in a for a in argv):
            argv = [a.replace("{file}", path) for a in argv]
        else:
            argv = [*argv, path]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True,
                                  timeout=120)
        except OSError as err:
            return RecompileResult("fail", f"cannot run compiler: {err}")
        except subprocess.TimeoutExpired:
            return RecompileResult("fail", "compiler timed out")
        if proc.returncode == 0:
            return RecompileResult("pass")
        detail = (proc.stderr or proc.stdout or "").strip()
        return RecompileResult("fail", detail[-2000:])
    finally:
        Path(path).unlink(missing_ok=True)
