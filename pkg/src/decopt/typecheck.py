"""Static type-rule violation checker over lowered units.

Eleven rules, each matching one syntactic form of the three-address
code.  A rule's premises meet operand types against a family set; a
concrete type outside the family, or an impossible common type, yields
one Violation naming that rule.  Unknown never violates on its own.

Decisions that give dormant rules a concrete surface:

* Comprehension governs element reads whose base is a string/bytes
  value inside a loop (the decompiled byte-iteration idiom); reads of
  arrays and mappings stay with Slice even inside loops; a concrete
  non-indexable base inside a loop violates Comprehension, outside a
  loop it violates Slice.
* Eq/NotEq/Is/IsNot is one rule: operands must share a common type;
  when both sides are reference values the check reads as identity
  comparison, otherwise as value comparison.
* Boolean Operation is strict: both operands of && and || and every
  branch or require condition must meet bool.
* A copy out of a rule-produced value (a call result, an element read,
  an arithmetic result) judges the destination's declared type against
  that producing rule; copies between plain variables propagate without
  judgment and a contradiction surfaces at the nearest rule-bearing use.
* Explicit casts are accepted as written and type their destination.

The environment stores declared types, storage slot types, and
inferred results.  Inferred entries are either concrete types or
plain unknown; family constraints never persist across instructions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import builtins
from .cfg import build_cfg
from .ir import ConstV, IRFunction, IRInstr, IRModule, Temp, Value, VarRef, storage_slot
from .soltypes import (
    Address,
    Array,
    Bool,
    Bottom,
    Callable,
    DynBytes,
    FixedBytes,
    Int,
    Mapping,
    SolType,
    String,
    Tuple,
    Unknown,
    element_type,
    family_of,
    is_concrete,
    meet,
    meet_types,
    more_precise,
    render,
    type_of_int_literal,
)
from .errors import NotIndexable

RULE_CONSTANT = "Constant"
RULE_SHIFT = "LShift, RShift"
RULE_NUMERIC = "Numeric Operations"
RULE_ORDER = "Lt, LtE, Gt, GtE"
RULE_TUPLE = "Tuple, Array"
RULE_COMPREHENSION = "Comprehension"
RULE_BOOLEAN = "Boolean Operation"
RULE_BITWISE = "Bitor, BitAnd, BitXor"
RULE_EQUALITY = "Eq, NotEq, Is, IsNot"
RULE_CALL = "Call"
RULE_SLICE = "Slice"

ALL_RULES = (
    RULE_CONSTANT, RULE_SHIFT, RULE_NUMERIC, RULE_ORDER, RULE_TUPLE,
    RULE_COMPREHENSION, RULE_BOOLEAN, RULE_BITWISE, RULE_EQUALITY,
    RULE_CALL, RULE_SLICE,
)

NUMERIC_FAMILIES = frozenset({"bool", "int"})
SHIFT_FAMILIES = frozenset({"bool", "int"})
BITWISE_FAMILIES = frozenset({"bool", "int", "byte"})
BYTEISH_FAMILIES = frozenset({"str", "bytes", "byte"})
KEY_FAMILIES = frozenset({"int", "bool"})
ORDER_FAMILIES = frozenset({"bool", "int", "byte", "bytes", "str",
                            "address", "array", "tuple"})
INDEXABLE_FAMILIES = frozenset({"array", "bytes", "str", "byte", "mapping"})
RANGE_FAMILIES = frozenset({"array", "bytes", "str", "byte"})

_NUMERIC_OPS = {"+", "-", "*", "/", "%", "**"}
_SHIFT_OPS = {"<<", ">>"}
_BITWISE_OPS = {"&", "|", "^"}
_ORDER_OPS = {"<", "<=", ">", ">="}
_EQUALITY_OPS = {"==", "!="}
_BOOLEAN_OPS = {"&&", "||"}

_SUGGESTIONS = {
    RULE_CONSTANT: "pick a type the literal can inhabit",
    RULE_SHIFT: "shift operands must be integers or booleans",
    RULE_NUMERIC: "arithmetic needs integer operands of one signedness",
    RULE_ORDER: "ordered comparison needs operands of one common type",
    RULE_TUPLE: "array elements must share one common type",
    RULE_COMPREHENSION: "element iteration needs a string or bytes value",
    RULE_BOOLEAN: "this position requires a boolean value",
    RULE_BITWISE: "bitwise operands must be integers, booleans, or fixed bytes",
    RULE_EQUALITY: "equality needs both sides to share one common type",
    RULE_CALL: "align the declared type with the callee's signature",
    RULE_SLICE: "subscripts need an indexable base and a matching key type",
}


@dataclass(frozen=True)
class Violation:
    rule: str
    fn: str
    pos: tuple[int, int]
    expected: str
    found: str
    what: str

    @property
    def suggestion(self) -> str:
        return _SUGGESTIONS[self.rule]

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "function": self.fn,
            "line": self.pos[0],
            "col": self.pos[1],
            "expected": self.expected,
            "found": self.found,
            "what": self.what,
            "suggestion": self.suggestion,
        }

    def describe(self) -> str:
        return (f"{self.rule} rule violated in {self.fn} at line {self.pos[0]}: "
                f"{self.what} has type {self.found}, expected {self.expected}; "
                f"{self.suggestion}.")


@dataclass
class ViolationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, v: Violation):
        self.violations.append(v)

    def sorted(self) -> list[Violation]:
        return sorted(self.violations,
                      key=lambda v: (v.fn, v.pos, v.rule, v.what, v.found))

    def to_json(self) -> str:
        return json.dumps({"violations": [v.to_dict() for v in self.sorted()]},
                          indent=2, sort_keys=True)

    def feedback_text(self) -> str:
        if self.ok:
            return "no type violations"
        return "\n".join(v.describe() for v in self.sorted())


class TypeEnv:
    """Scope chain: function locals looked up before module storage."""

    def __init__(self):
        self.storage: dict[str, SolType] = {}
        self.scopes: list[dict[str, SolType]] = []

    def push_scope(self) -> dict[str, SolType]:
        scope: dict[str, SolType] = {}
        self.scopes.append(scope)
        return scope

    def pop_scope(self):
        self.scopes.pop()

    def bind(self, name: str, t: SolType):
        if isinstance(t, Unknown) and t.families is not None:
            t = Unknown()
        if isinstance(t, Bottom):
            t = Unknown()
        self.scopes[-1][name] = t

    def bind_slot(self, slot: str, t: SolType):
        self.storage[slot] = t

    def lookup(self, name: str) -> SolType:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return self.storage.get(name, Unknown())

    def lookup_slot(self, slot: str) -> SolType:
        return self.storage.get(slot, Unknown())


def seed_env(module: IRModule, retypes: dict[str, SolType] | None = None) -> TypeEnv:
    """Storage declarations plus any externally accepted retypes."""
    env = TypeEnv()
    for name, t in module.storage.items():
        if t is not None:
            env.bind_slot(storage_slot(name), t)
    for slot, t in (retypes or {}).items():
        env.bind_slot(slot, t)
    return env


def check_unit(module: IRModule, env: TypeEnv | None = None) -> ViolationReport:
    if env is None:
        env = seed_env(module)
    report = ViolationReport()
    for fn in sorted(module.functions, key=lambda f: f.name):
        _Checker(fn, module, env, report).run()
    report.violations = report.sorted()
    return report


def const_type(cv: ConstV) -> SolType:
    v = cv.value
    if isinstance(v, bool):
        return Bool()
    if isinstance(v, int):
        return type_of_int_literal(v)
    if isinstance(v, str):
        return String()
    return Unknown()


def const_compatible(cv: ConstV, target: SolType) -> bool:
    """Can this literal inhabit the target type?"""
    if not is_concrete(target):
        return True
    v = cv.value
    hex_digits = None
    if isinstance(cv.lexeme, str) and cv.lexeme.lower().startswith("0x"):
        hex_digits = len(cv.lexeme) - 2
    if isinstance(target, Bool):
        return isinstance(v, bool)
    if isinstance(v, bool):
        return isinstance(target, Bool)
    if isinstance(target, Int):
        if not isinstance(v, int):
            return False
        if target.signed:
            lo = -(1 << (target.width - 1))
            hi = (1 << (target.width - 1)) - 1
            return lo <= v <= hi
        return 0 <= v < (1 << target.width)
    if isinstance(target, FixedBytes):
        return isinstance(v, int) and hex_digits == 2 * target.size
    if isinstance(target, Address):
        return isinstance(v, int) and (hex_digits == 40 or v == 0)
    if isinstance(target, String):
        return isinstance(v, str)
    if isinstance(target, DynBytes):
        return isinstance(v, str) or hex_digits is not None
    return False


class _Checker:
    def __init__(self, fn: IRFunction, module: IRModule, env: TypeEnv,
                 report: ViolationReport):
        self.fn = fn
        self.module = module
        self.env = env
        self.report = report
        self.cfg = build_cfg(fn)
        self.loopy = self._loop_blocks()
        # name -> rule that inferred its current type (temps mostly)
        self.provenance: dict[str, str] = {}

    def _loop_blocks(self) -> set[str]:
        """Blocks that can reach themselves through CFG edges."""
        loopy: set[str] = set()
        for start in self.cfg.succs:
            seen: set[str] = set()
            frontier = [lbl for lbl, _ in self.cfg.succs.get(start, ())]
            while frontier:
                lbl = frontier.pop()
                if lbl == start:
                    loopy.add(start)
                    break
                if lbl in seen:
                    continue
                seen.add(lbl)
                frontier.extend(l for l, _ in self.cfg.succs.get(lbl, ()))
        return loopy

    # ------------------------------------------------------------ plumbing

    def run(self):
        self.env.push_scope()
        try:
            for name, t in self.fn.decl_types.items():
                if t is not None:
                    self.env.bind(name, t)
            for block in self.cfg.blocks():
                in_loop = block.label in self.loopy
                for ins in block.instrs:
                    self._instr(ins, in_loop)
        finally:
            self.env.pop_scope()

    def violate(self, rule: str, pos, expected: str, found: SolType | str,
                what: str):
        found_text = found if isinstance(found, str) else render(found)
        self.report.add(Violation(rule=rule, fn=self.fn.name, pos=pos,
                                  expected=expected, found=found_text,
                                  what=what))

    def type_of(self, v: Value) -> SolType:
        if isinstance(v, (Temp, VarRef)):
            return self.env.lookup(v.name)
        if isinstance(v, ConstV):
            return const_type(v)
        return Unknown()

    def family_meet(self, v: Value, fam: frozenset, rule: str, pos,
                    what: str) -> SolType:
        t = self.type_of(v)
        m = meet(t, fam)
        if isinstance(m, Bottom):
            self.violate(rule, pos, expected="{" + ", ".join(sorted(fam)) + "}",
                         found=t, what=what)
            return Unknown()
        return m

    def declared(self, name: str | None) -> SolType | None:
        if name is None:
            return None
        t = self.fn.decl_types.get(name)
        return t

    def assign_result(self, ins: IRInstr, result: SolType, rule: str,
                      what: str | None = None):
        """Bind dest; a declared type that contradicts the result is a
        violation citing the rule that produced the result."""
        if ins.dest is None:
            return
        self.provenance[ins.dest] = rule
        decl = self.declared(ins.dest)
        if decl is not None and is_concrete(decl) and is_concrete(result):
            if isinstance(meet_types(decl, result), Bottom):
                self.violate(rule, ins.pos, expected=render(decl), found=result,
                             what=what or f"value assigned to {ins.dest}")
                self.env.bind(ins.dest, decl)
                return
        if decl is not None and is_concrete(decl):
            self.env.bind(ins.dest, decl)
        else:
            self.env.bind(ins.dest, result)

    # ------------------------------------------------------------ dispatch

    def _instr(self, ins: IRInstr, in_loop: bool):
        op = ins.op
        if op == "copy":
            self._copy(ins)
        elif op == "binop":
            self._binop(ins)
        elif op == "call":
            self._call(ins)
        elif op == "member":
            self._member(ins)
        elif op in ("index", "index_put"):
            self._index(ins, in_loop)
        elif op in ("load_storage", "store_storage"):
            self._storage(ins, in_loop)
        elif op == "tuple":
            self.assign_result(
                ins, Tuple(tuple(self.type_of(a) for a in ins.args)), RULE_TUPLE)
        elif op == "array":
            self._array(ins)
        elif op in ("require", "branch"):
            self.family_meet(ins.args[0], frozenset({"bool"}), RULE_BOOLEAN,
                             ins.pos, "condition")
        # ret / jump carry no judgment

    def _copy(self, ins: IRInstr):
        src = ins.args[0]
        if ins.cast is not None:
            self.assign_result(ins, ins.cast, RULE_CALL)
            return
        if isinstance(src, ConstV):
            decl = self.declared(ins.dest)
            if decl is not None and is_concrete(decl) \
                    and not const_compatible(src, decl):
                self.violate(RULE_CONSTANT, ins.pos, expected=render(decl),
                             found=const_type(src),
                             what=f"literal {src.lexeme or src.value}")
                if ins.dest is not None:
                    self.env.bind(ins.dest, decl)
                return
            if ins.dest is not None:
                self.env.bind(ins.dest, decl if decl is not None
                              else const_type(src))
            return
        # move: judge only when the source value was produced by a rule
        if ins.dest is None:
            return
        decl = self.declared(ins.dest)
        src_rule = self.provenance.get(getattr(src, "name", ""))
        src_t = self.type_of(src)
        if decl is not None and is_concrete(decl) and is_concrete(src_t) \
                and src_rule is not None \
                and isinstance(meet_types(decl, src_t), Bottom):
            self.violate(src_rule, ins.pos, expected=render(decl), found=src_t,
                         what=f"value assigned to {ins.dest}")
            self.env.bind(ins.dest, decl)
            return
        self.env.bind(ins.dest, decl if decl is not None else src_t)

    def _binop(self, ins: IRInstr):
        op = ins.operator
        a, b = ins.args
        if op in _NUMERIC_OPS:
            ta = self.family_meet(a, NUMERIC_FAMILIES, RULE_NUMERIC, ins.pos,
                                  f"left operand of '{op}'")
            tb = self.family_meet(b, NUMERIC_FAMILIES, RULE_NUMERIC, ins.pos,
                                  f"right operand of '{op}'")
            result = more_precise(ta, tb)
            if isinstance(result, Bottom):
                self.violate(RULE_NUMERIC, ins.pos,
                             expected="operands of one signedness",
                             found=f"{render(self.type_of(a))} with "
                                   f"{render(self.type_of(b))}",
                             what=f"operands of '{op}'")
                result = Unknown()
            self.assign_result(ins, result, RULE_NUMERIC)
        elif op in _SHIFT_OPS:
            ta = self.family_meet(a, SHIFT_FAMILIES, RULE_SHIFT, ins.pos,
                                  f"shifted value of '{op}'")
            self.family_meet(b, SHIFT_FAMILIES, RULE_SHIFT, ins.pos,
                             f"shift amount of '{op}'")
            self.assign_result(ins, ta, RULE_SHIFT)
        elif op in _BITWISE_OPS:
            ta = self.family_meet(a, BITWISE_FAMILIES, RULE_BITWISE, ins.pos,
                                  f"left operand of '{op}'")
            tb = self.family_meet(b, BITWISE_FAMILIES, RULE_BITWISE, ins.pos,
                                  f"right operand of '{op}'")
            result = meet_types(ta, tb)
            if isinstance(result, Bottom):
                result = Unknown()
            self.assign_result(ins, result, RULE_BITWISE)
        elif op in _ORDER_OPS:
            ta = self.family_meet(a, ORDER_FAMILIES, RULE_ORDER, ins.pos,
                                  f"left operand of '{op}'")
            tb = self.family_meet(b, ORDER_FAMILIES, RULE_ORDER, ins.pos,
                                  f"right operand of '{op}'")
            self._cross_compat(ins, a, b, ta, tb, RULE_ORDER, op)
            self.assign_result(ins, Bool(), RULE_ORDER)
        elif op in _EQUALITY_OPS:
            ta, tb = self.type_of(a), self.type_of(b)
            self._cross_compat(ins, a, b, ta, tb, RULE_EQUALITY, op)
            self.assign_result(ins, Bool(), RULE_EQUALITY)
        elif op in _BOOLEAN_OPS:
            self.family_meet(a, frozenset({"bool"}), RULE_BOOLEAN, ins.pos,
                             f"left operand of '{op}'")
            self.family_meet(b, frozenset({"bool"}), RULE_BOOLEAN, ins.pos,
                             f"right operand of '{op}'")
            self.assign_result(ins, Bool(), RULE_BOOLEAN)
        else:
            self.assign_result(ins, Unknown(), RULE_NUMERIC)

    def _cross_compat(self, ins: IRInstr, a: Value, b: Value,
                      ta: SolType, tb: SolType, rule: str, op: str):
        """Both sides must share a common type; literals use literal fit."""
        if isinstance(a, ConstV) and is_concrete(tb):
            if not const_compatible(a, tb):
                self.violate(rule, ins.pos, expected=render(tb), found=ta,
                             what=f"literal compared by '{op}'")
            return
        if isinstance(b, ConstV) and is_concrete(ta):
            if not const_compatible(b, ta):
                self.violate(rule, ins.pos, expected=render(ta), found=tb,
                             what=f"literal compared by '{op}'")
            return
        if is_concrete(ta) and is_concrete(tb) \
                and isinstance(meet_types(ta, tb), Bottom):
            self.violate(rule, ins.pos, expected=render(ta), found=tb,
                         what=f"operands of '{op}'")

    def _call(self, ins: IRInstr):
        callee = ins.callee or ""
        if ins.receiver is not None:
            sig = builtins.instance_method_signature(callee)
            if sig is not None:
                self._check_args(ins, sig, variadic=callee == "call")
                self.assign_result(ins, sig.ret, RULE_CALL,
                                   what=f"value returned by {callee}")
            else:
                self.assign_result(ins, Unknown(), RULE_CALL)
            return
        sig = builtins.function_signature(callee)
        if sig is not None:
            self._check_args(ins, sig, variadic=builtins.is_variadic(callee))
            self.assign_result(ins, sig.ret, RULE_CALL,
                               what=f"value returned by {callee}")
            return
        local = self.module.function(callee)
        if local is not None:
            params = [local.decl_types.get(p) for p in local.params]
            for i, (arg, pt) in enumerate(zip(ins.args, params)):
                if pt is None or not is_concrete(pt):
                    continue
                if isinstance(arg, ConstV):
                    if not const_compatible(arg, pt):
                        self.violate(RULE_CALL, ins.pos, expected=render(pt),
                                     found=const_type(arg),
                                     what=f"argument {i + 1} of {callee}")
                    continue
                at = self.type_of(arg)
                if is_concrete(at) and isinstance(meet_types(at, pt), Bottom):
                    self.violate(RULE_CALL, ins.pos, expected=render(pt),
                                 found=at, what=f"argument {i + 1} of {callee}")
        self.assign_result(ins, Unknown(), RULE_CALL)

    def _check_args(self, ins: IRInstr, sig: Callable, variadic: bool):
        if not variadic and len(ins.args) != len(sig.params):
            self.violate(RULE_CALL, ins.pos,
                         expected=f"{len(sig.params)} arguments",
                         found=f"{len(ins.args)} arguments",
                         what=f"call to {ins.callee}")
            return
        if variadic:
            return
        for i, (arg, pt) in enumerate(zip(ins.args, sig.params)):
            if not is_concrete(pt):
                continue
            if isinstance(arg, ConstV):
                if not const_compatible(arg, pt):
                    self.violate(RULE_CALL, ins.pos, expected=render(pt),
                                 found=const_type(arg),
                                 what=f"argument {i + 1} of {ins.callee}")
                continue
            at = self.type_of(arg)
            if is_concrete(at) and isinstance(meet_types(at, pt), Bottom):
                self.violate(RULE_CALL, ins.pos, expected=render(pt),
                             found=at, what=f"argument {i + 1} of {ins.callee}")

    def _member(self, ins: IRInstr):
        base = ins.args[0] if ins.args else None
        field_name = ins.member or ""
        if isinstance(base, VarRef) and builtins.is_namespace(base.name):
            t = builtins.member_type(base.name, field_name)
            self.assign_result(ins, t if t is not None else Unknown(), RULE_CALL)
            return
        t = builtins.instance_member_type(field_name)
        self.assign_result(ins, t if t is not None else Unknown(), RULE_CALL)

    def _array(self, ins: IRInstr):
        elem: SolType = Unknown()
        for a in ins.args:
            t = self.type_of(a)
            joined = meet_types(elem, t)
            if isinstance(joined, Bottom):
                self.violate(RULE_TUPLE, ins.pos, expected=render(elem),
                             found=t, what="array literal element")
                joined = Unknown()
            elem = joined
        self.assign_result(
            ins, Array(elem, len(ins.args)), RULE_TUPLE)

    # -------------------------------------------------- subscript forms

    def _index(self, ins: IRInstr, in_loop: bool):
        if ins.extra.get("tuple_get") is not None:
            base_t = self.type_of(ins.args[0])
            i = ins.extra["tuple_get"]
            if isinstance(base_t, Tuple) and i < len(base_t.elems):
                self.assign_result(ins, base_t.elems[i], RULE_TUPLE)
            else:
                self.assign_result(ins, Unknown(), RULE_TUPLE)
            return
        if ins.extra.get("slice"):
            base = ins.args[0]
            bt = self.family_meet(base, RANGE_FAMILIES, RULE_SLICE, ins.pos,
                                  "sliced value")
            for v in ins.args[1:]:
                if isinstance(v, ConstV) and v.value is None:
                    continue
                self.family_meet(v, KEY_FAMILIES, RULE_SLICE, ins.pos,
                                 "slice bound")
            self.assign_result(ins, bt if is_concrete(bt) else Unknown(),
                               RULE_SLICE)
            return
        if ins.op == "index_put":
            base, key, value = ins.args
            elem = self._subscript(ins, base, (key,), in_loop)
            self._value_fit(ins, value, elem, RULE_SLICE,
                            f"value stored into {ins.dest}")
            return
        base, key = ins.args
        elem = self._subscript(ins, base, (key,), in_loop)
        self.assign_result(ins, elem, RULE_SLICE)

    def _storage(self, ins: IRInstr, in_loop: bool):
        slot = ins.slot or ""
        if "." in slot:
            # struct field path: layout unmodeled, no judgment
            if ins.op == "load_storage":
                self.assign_result(ins, Unknown(), RULE_SLICE)
            return
        slot_t = self.env.lookup_slot(slot)
        if not ins.keys:
            if ins.op == "load_storage":
                self.assign_result(ins, slot_t, RULE_SLICE)
            else:
                self._value_fit(ins, ins.args[0], slot_t, RULE_SLICE,
                                f"value stored into slot {slot}")
            return
        elem = self._walk_keys(ins, slot_t, ins.keys, in_loop,
                               what=f"storage slot {slot}")
        if ins.op == "load_storage":
            self.assign_result(ins, elem, RULE_SLICE)
        else:
            self._value_fit(ins, ins.args[0], elem, RULE_SLICE,
                            f"value stored into slot {slot}")

    def _subscript(self, ins: IRInstr, base: Value, keys, in_loop: bool) -> SolType:
        bt = self.type_of(base)
        what = f"subscripted value {getattr(base, 'name', base)}"
        return self._walk_keys(ins, bt, keys, in_loop, what)

    def _walk_keys(self, ins: IRInstr, bt: SolType, keys, in_loop: bool,
                   what: str) -> SolType:
        cur = bt
        for key in keys:
            cur = self._one_key(ins, cur, key, in_loop, what)
        return cur

    def _one_key(self, ins: IRInstr, bt: SolType, key: Value, in_loop: bool,
                 what: str) -> SolType:
        fam = family_of(bt) if is_concrete(bt) else None
        byteish = fam in BYTEISH_FAMILIES or not is_concrete(bt)
        if in_loop and byteish:
            rule = RULE_COMPREHENSION
            m = meet(bt, BYTEISH_FAMILIES)
            if isinstance(m, Bottom):
                self.violate(rule, ins.pos,
                             expected="{" + ", ".join(sorted(BYTEISH_FAMILIES)) + "}",
                             found=bt, what=what)
                return Unknown()
            self.family_meet(key, KEY_FAMILIES, rule, ins.pos,
                             f"iteration index into {what}")
        elif in_loop and fam is not None and fam not in INDEXABLE_FAMILIES:
            self.violate(RULE_COMPREHENSION, ins.pos,
                         expected="{" + ", ".join(sorted(BYTEISH_FAMILIES)) + "}",
                         found=bt, what=what)
            return Unknown()
        else:
            rule = RULE_SLICE
            m = meet(bt, INDEXABLE_FAMILIES)
            if isinstance(m, Bottom):
                self.violate(rule, ins.pos,
                             expected="{" + ", ".join(sorted(INDEXABLE_FAMILIES)) + "}",
                             found=bt, what=what)
                return Unknown()
            if isinstance(bt, Mapping):
                self._value_fit(ins, key, bt.key, rule, f"key into {what}")
            else:
                self.family_meet(key, KEY_FAMILIES, rule, ins.pos,
                                 f"index into {what}")
        if not is_concrete(bt):
            return Unknown()
        try:
            return element_type(bt)
        except NotIndexable:
            return Unknown()

    def _value_fit(self, ins: IRInstr, value: Value, target: SolType,
                   rule: str, what: str):
        if not is_concrete(target):
            return
        if isinstance(value, ConstV):
            if not const_compatible(value, target):
                self.violate(rule, ins.pos, expected=render(target),
                             found=const_type(value), what=what)
            return
        vt = self.type_of(value)
        if is_concrete(vt) and isinstance(meet_types(vt, target), Bottom):
            self.violate(rule, ins.pos, expected=render(target), found=vt,
                         what=what)
