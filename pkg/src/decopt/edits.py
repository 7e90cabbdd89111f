"""Structured edits: parse them out of replies, apply them to a unit.

Reply parsing has two paths.  The strict path reads a fenced ```json
block holding a list of edit objects.  The lenient path takes a fenced
code block, parses it as pseudocode, and recovers edits by comparing it
against the original unit (changed declared types, renamed parameters,
and new functions whose bodies match a contiguous statement run inside
an existing one).  A reply neither path understands produces an empty
edit set flagged malformed; it is an outcome, never an exception.

Application always builds a fresh tree: deep-copy, transform, render
canonically, re-parse strictly.  The re-parse is the validity gate; a
result that cannot round-trip is a bug in the transform, not a
recoverable state.  Split line numbers are 1-based line positions in
the unit's canonical rendering.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field

from . import syntax as syn
from .errors import EditConflict, SchemaError
from .parser import parse_unit
from .soltypes import SolType, parse_type, render as render_type
from .syntax import canonical, canonical_spans

_FENCE = re.compile(r"```(\w*)[ \t]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class RetypeVariable:
    name: str
    new_type: SolType

    def to_dict(self) -> dict:
        return {"op": "retype", "name": self.name,
                "type": render_type(self.new_type)}


@dataclass(frozen=True)
class SetAttribute:
    name: str
    label: str

    def to_dict(self) -> dict:
        return {"op": "attribute", "name": self.name, "label": self.label}


@dataclass(frozen=True)
class SplitFunction:
    host: str
    new_name: str
    start_line: int
    end_line: int

    def to_dict(self) -> dict:
        return {"op": "split", "host": self.host, "new_name": self.new_name,
                "start_line": self.start_line, "end_line": self.end_line}


@dataclass(frozen=True)
class RenameVariable:
    old: str
    new: str

    def to_dict(self) -> dict:
        return {"op": "rename", "old": self.old, "new": self.new}


Edit = RetypeVariable | SetAttribute | SplitFunction | RenameVariable


@dataclass
class EditSet:
    edits: list[Edit] = field(default_factory=list)
    fn: str | None = None          # scope for unqualified local names
    malformed: bool = False
    note: str = ""

    def __iter__(self):
        return iter(self.edits)

    def __len__(self):
        return len(self.edits)

    def to_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.edits], indent=2)


def malformed(note: str, fn: str | None = None) -> EditSet:
    return EditSet(edits=[], fn=fn, malformed=True, note=note)


# ================================================================ parsing


def parse_edits(raw_text: str, target=None) -> EditSet:
    """Strict JSON path first, lenient code-diff path second."""
    fn = getattr(target, "fn", None)
    if target is not None and getattr(target, "kind", "") == "boundary":
        fn = getattr(target, "name", None)
    blocks = _FENCE.findall(raw_text or "")
    json_blocks = [body for lang, body in blocks if lang.lower() == "json"]
    code_blocks = [body for lang, body in blocks if lang.lower() != "json"]
    for body in json_blocks:
        try:
            return _from_json(body, fn)
        except SchemaError as err:
            return malformed(f"edit schema: {err}", fn)
        except json.JSONDecodeError as err:
            return malformed(f"unparseable json block: {err.msg}", fn)
    unit = getattr(target, "unit", None)
    if code_blocks and unit is not None:
        recovered = _from_code_block(code_blocks[0], unit)
        if recovered is not None:
            recovered.fn = fn
            return recovered
        return malformed("code block did not diff cleanly", fn)
    if code_blocks:
        return malformed("code block reply without a unit to diff against", fn)
    return malformed("no fenced block in reply", fn)


def _from_json(body: str, fn: str | None) -> EditSet:
    data = json.loads(body)
    if not isinstance(data, list):
        raise SchemaError("$", "edit list must be a json array")
    out: list[Edit] = []
    for i, item in enumerate(data):
        path = f"$[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(path, "edit must be an object")
        op = item.get("op")
        if op == "retype":
            name, type_text = _need(item, path, "name", "type")
            try:
                t = parse_type(str(type_text))
            except Exception:
                raise SchemaError(path, f"unparseable type {type_text!r}") from None
            out.append(RetypeVariable(str(name), t))
        elif op == "attribute":
            name, label = _need(item, path, "name", "label")
            out.append(SetAttribute(str(name), str(label)))
        elif op == "split":
            host, new_name = _need(item, path, "host", "new_name")
            start, end = _need(item, path, "start_line", "end_line")
            if not isinstance(start, int) or not isinstance(end, int):
                raise SchemaError(path, "split lines must be integers")
            out.append(SplitFunction(str(host), str(new_name), start, end))
        elif op == "rename":
            old, new = _need(item, path, "old", "new")
            out.append(RenameVariable(str(old), str(new)))
        else:
            raise SchemaError(path, f"unknown op {op!r}")
    return EditSet(edits=out, fn=fn)


def _need(item: dict, path: str, *keys):
    values = []
    for k in keys:
        if k not in item:
            raise SchemaError(path, f"missing field {k!r}")
        values.append(item[k])
    return values


# ---------------------------------------------------------------- lenient


def _from_code_block(body: str, unit: syn.SourceUnit) -> EditSet | None:
    try:
        reply = parse_unit(body)
    except Exception:
        return None
    if reply.skips or (not reply.functions and not reply.storage):
        return None
    out: list[Edit] = []
    out += _storage_diffs(unit, reply)
    known = {f.name for f in unit.functions}
    for rfn in reply.functions:
        ofn = unit.function(rfn.name)
        if ofn is not None:
            out += _function_diffs(ofn, rfn)
        elif rfn.name not in known:
            split = _match_split(unit, rfn)
            if split is not None:
                out.append(split)
    if not out:
        return None
    return EditSet(edits=_dedup(out))


def _dedup(edits: list[Edit]) -> list[Edit]:
    seen: set = set()
    out = []
    for e in edits:
        if e not in seen:
            seen.add(e)
            out.append(e)
    return out


def _storage_diffs(unit, reply) -> list[Edit]:
    out: list[Edit] = []
    for rdecl in reply.storage:
        odecl = next((d for d in unit.storage if d.name == rdecl.name), None)
        if odecl is None:
            continue
        if rdecl.decl_type is not None and rdecl.decl_type != odecl.decl_type:
            out.append(RetypeVariable(rdecl.name, rdecl.decl_type))
        if rdecl.attribute and rdecl.attribute != odecl.attribute:
            out.append(SetAttribute(rdecl.name, rdecl.attribute))
    return out


def _function_diffs(ofn: syn.FunctionDecl, rfn: syn.FunctionDecl) -> list[Edit]:
    out: list[Edit] = []
    for op, rp in zip(ofn.params, rfn.params):
        if rp.decl_type is not None and rp.decl_type != op.decl_type:
            out.append(RetypeVariable(op.name, rp.decl_type))
        if rp.name != op.name:
            out.append(RenameVariable(op.name, rp.name))
    odecls = {s.name: s for s in _walk(ofn.body) if isinstance(s, syn.VarDecl)}
    oassigns = {s.target.name for s in _walk(ofn.body)
                if isinstance(s, syn.Assign) and isinstance(s.target, syn.Var)}
    for s in _walk(rfn.body):
        if not isinstance(s, syn.VarDecl) or s.decl_type is None:
            continue
        old = odecls.get(s.name)
        if old is not None and old.decl_type != s.decl_type:
            out.append(RetypeVariable(s.name, s.decl_type))
        elif old is None and s.name in oassigns:
            out.append(RetypeVariable(s.name, s.decl_type))
    return out


def _walk(body: list[syn.Stmt]):
    for s in body:
        yield s
        if isinstance(s, syn.If):
            yield from _walk(s.then)
            yield from _walk(s.orelse)
        elif isinstance(s, syn.While):
            yield from _walk(s.body)


def _match_split(unit: syn.SourceUnit, rfn: syn.FunctionDecl) -> SplitFunction | None:
    """A new function whose body is a contiguous statement run of a host."""
    body = list(rfn.body)
    if body and isinstance(body[-1], syn.Return) and not body[-1].values:
        body = body[:-1]  # the hoisted copy gains a bare return; ignore it
    want = [syn.render_stmt_head(s) for s in body]
    if not want:
        return None
    text = canonical(unit)
    lines = text.splitlines()
    for host in unit.functions:
        heads = [syn.render_stmt_head(s) for s in host.body]
        n, m = len(heads), len(want)
        for i in range(n - m + 1):
            if heads[i:i + m] == want:
                start = _canonical_line_of(lines, unit, host, i)
                end = _canonical_line_of(lines, unit, host, i + m - 1)
                if start and end:
                    return SplitFunction(host.name, rfn.name, start, end)
    return None


def _canonical_line_of(lines: list[str], unit, host, stmt_i: int) -> int | None:
    spans = canonical_spans(unit)
    first, last = spans[host.name]
    head = syn.render_stmt_head(host.body[stmt_i])
    hits = [k + 1 for k in range(first - 1, last)
            if lines[k].strip() == head]
    seen = 0
    for j in range(stmt_i + 1):
        if syn.render_stmt_head(host.body[j]) == head:
            seen += 1
    return hits[seen - 1] if len(hits) >= seen >= 1 else None


# ================================================================ applying


def apply_edits(unit: syn.SourceUnit, edits: EditSet) -> syn.SourceUnit:
    """Transform a copy, render canonically, and re-parse strictly."""
    work = copy.deepcopy(unit)
    splits = [e for e in edits if isinstance(e, SplitFunction)]
    _check_split_overlap(splits)
    for e in edits:
        if isinstance(e, RetypeVariable):
            _apply_retype(work, e, edits.fn)
        elif isinstance(e, SetAttribute):
            _apply_attribute(work, e)
        elif isinstance(e, RenameVariable):
            _apply_rename(work, e, edits.fn)
    for e in splits:
        _apply_split(work, e)
    text = canonical(work)
    result = parse_unit(text, strict=True)
    if result.skips:
        raise EditConflict("edited unit no longer parses cleanly")
    return result


def _check_split_overlap(splits: list[SplitFunction]):
    spans = sorted((e.start_line, e.end_line, e.host) for e in splits)
    for (s1, e1, h1), (s2, e2, h2) in zip(spans, spans[1:]):
        if h1 == h2 and s2 <= e1:
            raise EditConflict(
                f"split ranges overlap in {h1}: [{s1},{e1}] and [{s2},{e2}]")


def _apply_retype(unit: syn.SourceUnit, e: RetypeVariable, fn: str | None):
    for decl in unit.storage:
        if decl.name == e.name:
            decl.decl_type = e.new_type
            return
    for f in _scoped_functions(unit, fn):
        for p in f.params:
            if p.name == e.name:
                p.decl_type = e.new_type
                return
        for stmts, j in _walk_lists(f.body):
            st = stmts[j]
            if isinstance(st, syn.VarDecl) and st.name == e.name:
                st.decl_type = e.new_type
                return
            if isinstance(st, syn.Assign) and st.op == "=" \
                    and isinstance(st.target, syn.Var) and st.target.name == e.name:
                stmts[j] = syn.VarDecl(decl_type=e.new_type, name=e.name,
                                       init=st.value, pos=st.pos)
                return
    raise EditConflict(f"retype names unknown variable {e.name!r}")


def _apply_attribute(unit: syn.SourceUnit, e: SetAttribute):
    for decl in unit.storage:
        if decl.name == e.name:
            decl.attribute = e.label
            return
    raise EditConflict(f"attribute names unknown state variable {e.name!r}")


def _apply_rename(unit: syn.SourceUnit, e: RenameVariable, fn: str | None):
    if any(d.name == e.old for d in unit.storage):
        if any(d.name == e.new for d in unit.storage):
            raise EditConflict(f"rename collides with {e.new!r}")
        for decl in unit.storage:
            if decl.name == e.old:
                decl.name = e.new
        for f in unit.functions:
            _rename_in_function(f, e.old, e.new)
        return
    done = False
    for f in _scoped_functions(unit, fn):
        names = {p.name for p in f.params} | {
            s.name for s in _walk(f.body) if isinstance(s, syn.VarDecl)} | {
            s.target.name for s in _walk(f.body)
            if isinstance(s, syn.Assign) and isinstance(s.target, syn.Var)}
        if e.old not in names:
            continue
        if e.new in names:
            raise EditConflict(f"rename collides with {e.new!r} in {f.name}")
        _rename_in_function(f, e.old, e.new)
        done = True
        break
    if not done:
        raise EditConflict(f"rename names unknown variable {e.old!r}")


def _rename_in_function(f: syn.FunctionDecl, old: str, new: str):
    for p in f.params:
        if p.name == old:
            p.name = new
    for stmts, j in _walk_lists(f.body):
        st = stmts[j]
        if isinstance(st, syn.VarDecl) and st.name == old:
            st.name = new
    _rename_exprs(f.body, old, new)


def _rename_exprs(body: list[syn.Stmt], old: str, new: str):
    def fix(e: syn.Expr):
        if isinstance(e, syn.Var) and e.name == old:
            e.name = new
        for child in _expr_children(e):
            fix(child)

    for stmts, j in _walk_lists(body):
        st = stmts[j]
        for e in _stmt_exprs(st):
            fix(e)


def _expr_children(e: syn.Expr):
    if isinstance(e, syn.BinOp):
        return [e.left, e.right]
    if isinstance(e, syn.UnOp):
        return [e.operand]
    if isinstance(e, syn.Call):
        return list(e.args) + ([e.callee] if not isinstance(e.callee, syn.Var)
                               else [])
    if isinstance(e, syn.Member):
        return [e.base]
    if isinstance(e, syn.Index):
        return [e.base, e.key]
    if isinstance(e, syn.SliceRange):
        return [e.base] + [x for x in (e.lo, e.hi) if x is not None]
    if isinstance(e, (syn.TupleExpr, syn.ArrayExpr)):
        return list(e.items)
    return []


def _stmt_exprs(st: syn.Stmt) -> list[syn.Expr]:
    if isinstance(st, syn.VarDecl):
        return [st.init] if st.init is not None else []
    if isinstance(st, (syn.Assign, syn.StorageWrite)):
        return [st.target, st.value]
    if isinstance(st, syn.ExprStmt):
        return [st.expr]
    if isinstance(st, syn.Require):
        return [st.cond]
    if isinstance(st, syn.If):
        return [st.cond]
    if isinstance(st, syn.While):
        return [st.cond]
    if isinstance(st, syn.Return):
        return list(st.values)
    return []


def _walk_lists(body: list[syn.Stmt]):
    """Yield (owning list, index) pairs in statement preorder."""
    for j in range(len(body)):
        yield body, j
        st = body[j]
        if isinstance(st, syn.If):
            yield from _walk_lists(st.then)
            yield from _walk_lists(st.orelse)
        elif isinstance(st, syn.While):
            yield from _walk_lists(st.body)


def _scoped_functions(unit: syn.SourceUnit, fn: str | None):
    if fn is not None:
        f = unit.function(fn)
        return [f] if f is not None else []
    return list(unit.functions)


# ---------------------------------------------------------------- split


def _apply_split(unit: syn.SourceUnit, e: SplitFunction):
    host = unit.function(e.host)
    if host is None:
        raise EditConflict(f"split names unknown function {e.host!r}")
    if unit.function(e.new_name) is not None:
        raise EditConflict(f"split target name {e.new_name!r} already exists")
    spans = canonical_spans(unit)
    first, last = spans[e.host]
    if not (first < e.start_line <= e.end_line < last):
        raise EditConflict(
            f"split range [{e.start_line},{e.end_line}] outside {e.host} "
            f"body lines ({first + 1}..{last - 1})")
    lines = canonical(unit).splitlines()
    # map each top-level statement of the host to its canonical line
    stmt_lines = _top_level_lines(lines, host, first, last)
    selected = [i for i, ln in stmt_lines if e.start_line <= ln <= e.end_line]
    if not selected:
        raise EditConflict("split range selects no statement")
    lo, hi = min(selected), max(selected)
    if selected != list(range(lo, hi + 1)):
        raise EditConflict("split range must select a contiguous statement run")
    # the range must cover whole top-level statements: its last line must
    # be the final line of the statement that starts at the range's tail
    tail_start = max(ln for _, ln in stmt_lines if ln <= e.end_line)
    tail_extent = tail_start + _stmt_line_count(lines, tail_start) - 1
    head_starts = {ln for _, ln in stmt_lines}
    if e.start_line not in head_starts or e.end_line != tail_extent:
        raise EditConflict("split range cuts a compound statement")
    moved = host.body[lo:hi + 1]
    for st in moved[:-1]:
        if isinstance(st, syn.Return):
            raise EditConflict("split range has a return before its end")
    tail_return = isinstance(moved[-1], syn.Return)
    storage = unit.storage_names()
    params = _free_inputs(host, lo, hi, storage)
    outs = [] if tail_return else _outputs_used_after(host, lo, hi, storage)
    call = syn.Call(syn.Var(e.new_name), [syn.Var(p.name) for p in params])
    if tail_return:
        replacement: syn.Stmt = syn.Return([call])
    elif outs:
        target = syn.TupleExpr([syn.Var(o) for o in outs]) if len(outs) > 1 \
            else syn.Var(outs[0])
        replacement = syn.Assign(target=target, op="=", value=call)
    else:
        replacement = syn.ExprStmt(call)
    new_body = list(moved)
    if outs:
        new_body.append(syn.Return([syn.Var(o) for o in outs]))
    elif not tail_return:
        new_body.append(syn.Return([]))
    new_fn = syn.FunctionDecl(name=e.new_name, params=params, modifiers=[],
                              body=new_body, pos=host.pos)
    host.body[lo:hi + 1] = [replacement]
    idx = unit.functions.index(host)
    unit.functions.insert(idx + 1, new_fn)


def _top_level_lines(lines: list[str], host: syn.FunctionDecl,
                     first: int, last: int) -> list[tuple[int, int]]:
    """(statement index, canonical line) for the host's top-level body."""
    out: list[tuple[int, int]] = []
    cursor = first  # header line; body starts after it
    for i, st in enumerate(host.body):
        head = syn.render_stmt_head(st)
        ln = None
        for k in range(cursor, last - 1):
            if lines[k].strip() == head:
                ln = k + 1
                break
        if ln is None:
            raise EditConflict("cannot locate statement in canonical text")
        out.append((i, ln))
        cursor = ln - 1 + _stmt_line_count(lines, ln)
    return out


def _stmt_line_count(lines: list[str], ln: int) -> int:
    """Lines occupied by the statement starting at canonical line ln."""
    text = lines[ln - 1]
    if not text.rstrip().endswith("{"):
        return 1
    depth = 0
    count = 0
    for k in range(ln - 1, len(lines)):
        count += 1
        depth += lines[k].count("{") - lines[k].count("}")
        if depth == 0:
            return count
    return count


def _free_inputs(host: syn.FunctionDecl, lo: int, hi: int,
                 storage: set[str]) -> list[syn.Param]:
    from .parser import is_storage_name
    from . import builtins as bt

    defined_before: set[str] = {p.name for p in host.params}
    types: dict[str, SolType | None] = {p.name: p.decl_type for p in host.params}
    for st in host.body[:lo]:
        for s in _flat([st]):
            if isinstance(s, syn.VarDecl):
                defined_before.add(s.name)
                types[s.name] = s.decl_type
            elif isinstance(s, syn.Assign) and isinstance(s.target, syn.Var):
                defined_before.add(s.target.name)
                types.setdefault(s.target.name, None)
    used: list[str] = []
    defined_inside: set[str] = set()
    for s in _flat(host.body[lo:hi + 1]):
        for expr in _stmt_exprs(s):
            for name in _expr_names(expr):
                if bt.is_environment_name(name) or bt.is_builtin_function(name) \
                        or is_storage_name(name, storage):
                    continue
                if name in defined_inside:
                    continue
                if name in defined_before and name not in used:
                    used.append(name)
        if isinstance(s, syn.VarDecl):
            defined_inside.add(s.name)
        elif isinstance(s, syn.Assign) and isinstance(s.target, syn.Var):
            if s.target.name not in defined_before.union(used):
                defined_inside.add(s.target.name)
    return [syn.Param(n, types.get(n)) for n in used]


def _outputs_used_after(host: syn.FunctionDecl, lo: int, hi: int,
                        storage: set[str]) -> list[str]:
    from .parser import is_storage_name

    defined_inside: list[str] = []
    for s in _flat(host.body[lo:hi + 1]):
        if isinstance(s, syn.VarDecl):
            defined_inside.append(s.name)
        elif isinstance(s, syn.Assign) and isinstance(s.target, syn.Var):
            if s.target.name not in defined_inside:
                defined_inside.append(s.target.name)
    after_names: set[str] = set()
    for s in _flat(host.body[hi + 1:]):
        for expr in _stmt_exprs(s):
            after_names.update(_expr_names(expr))
    return [n for n in defined_inside
            if n in after_names and not is_storage_name(n, storage)]


def _flat(body: list[syn.Stmt]):
    for s in body:
        yield s
        if isinstance(s, syn.If):
            yield from _flat(s.then)
            yield from _flat(s.orelse)
        elif isinstance(s, syn.While):
            yield from _flat(s.body)


def _expr_names(e: syn.Expr):
    from .syntax import expr_variables
    return [name for name, _, _ in expr_variables(e)]
