"""Three-address lowering of the syntax tree.

Opcodes: copy, binop, call, load_storage, store_storage, index, member,
ret, branch, jump, require — plus the internal composite makers tuple,
array, and index_put (in-place element write to a local aggregate).

Invariants
----------
* temps are numbered t0, t1, ... per function in statement preorder;
* every branch/jump names a block label that exists (ConsistencyError);
* every instruction keeps the source position of its statement;
* storage reads/writes go through load_storage/store_storage with the
  slot name and any index-key values, never through plain variables.

Unary operators are desugared into binop space so downstream passes see
one operator shape: !e becomes e ^ true, ~e becomes e ^ MAXWORD, and -e
becomes 0 - e.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConsistencyError, LoweringError
from .parser import is_storage_name
from .soltypes import SolType
from . import syntax as syn

MAXWORD = (1 << 256) - 1


@dataclass(frozen=True)
class Temp:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class VarRef:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class ConstV:
    value: object
    lexeme: str = ""

    def __repr__(self):
        return self.lexeme or repr(self.value)


Value = Temp | VarRef | ConstV


@dataclass
class IRInstr:
    op: str
    dest: str | None = None
    args: tuple[Value, ...] = ()
    operator: str | None = None        # binop
    callee: str | None = None          # call
    receiver: Value | None = None      # member-style call target
    slot: str | None = None            # load_storage / store_storage
    keys: tuple[Value, ...] = ()       # indexed storage access path
    member: str | None = None          # member
    labels: tuple[str, ...] = ()       # branch (true, false) / jump (target,)
    cast: SolType | None = None        # copy that came from a cast
    message: str | None = None         # require
    extra: dict = field(default_factory=dict)
    pos: tuple[int, int] = (0, 0)
    stmt_index: int = -1               # statement of origin, preorder

    def __repr__(self):
        parts = [self.op]
        if self.dest:
            parts.insert(0, f"{self.dest} =")
        if self.operator:
            parts.append(self.operator)
        if self.callee:
            parts.append(self.callee)
        if self.slot:
            parts.append(f"slot={self.slot}")
        if self.args:
            parts.append(", ".join(map(repr, self.args)))
        if self.labels:
            parts.append("-> " + ", ".join(self.labels))
        return " ".join(parts)


TERMINATORS = ("ret", "branch", "jump")


@dataclass
class IRBlock:
    label: str
    instrs: list[IRInstr] = field(default_factory=list)

    @property
    def terminator(self) -> IRInstr | None:
        if self.instrs and self.instrs[-1].op in TERMINATORS:
            return self.instrs[-1]
        return None


@dataclass
class IRFunction:
    name: str
    params: list[str]
    blocks: list[IRBlock]
    decl_types: dict[str, SolType] = field(default_factory=dict)
    modifiers: list[str] = field(default_factory=list)
    temp_count: int = 0

    def block(self, label: str) -> IRBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise ConsistencyError(f"no block {label!r} in {self.name}")

    def instructions(self):
        for b in self.blocks:
            for ins in b.instrs:
                yield b.label, ins


@dataclass
class IRModule:
    functions: list[IRFunction]
    storage: dict[str, SolType | None]
    unit: syn.SourceUnit

    def function(self, name: str) -> IRFunction | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None


def storage_slot(name: str) -> str:
    """Slot id for a storage identifier (stor_5 -> "5", named -> name)."""
    for prefix in ("stor_", "store_"):
        if name.startswith(prefix) and name[len(prefix):]:
            return name[len(prefix):]
    return name


def lower_ir(unit: syn.SourceUnit) -> IRModule:
    storage: dict[str, SolType | None] = {}
    for d in unit.storage:
        storage[d.name] = d.decl_type
    functions = [_FunctionLowerer(fn, unit).run() for fn in unit.functions]
    module = IRModule(functions=functions, storage=storage, unit=unit)
    _check_labels(module)
    return module


def _check_labels(module: IRModule):
    for fn in module.functions:
        known = {b.label for b in fn.blocks}
        if len(known) != len(fn.blocks):
            raise ConsistencyError(f"duplicate block label in {fn.name}")
        for _, ins in fn.instructions():
            for lbl in ins.labels:
                if lbl not in known:
                    raise ConsistencyError(
                        f"{fn.name}: {ins.op} targets missing label {lbl!r}")


class _FunctionLowerer:
    def __init__(self, fn: syn.FunctionDecl, unit: syn.SourceUnit):
        self.fn = fn
        self.declared_storage = unit.storage_names()
        self.blocks: list[IRBlock] = []
        self.current = self._new_block("entry")
        self.temp_n = 0
        self.label_n = 0
        self.stmt_n = 0
        self.decl_types: dict[str, SolType] = {}
        for p in fn.params:
            if p.decl_type is not None:
                self.decl_types[p.name] = p.decl_type

    def run(self) -> IRFunction:
        for stmt in self.fn.body:
            self._stmt(stmt)
        if self.current.terminator is None:
            self._emit(IRInstr("ret", pos=(self.fn.span[1], 1)))
        return IRFunction(
            name=self.fn.name,
            params=[p.name for p in self.fn.params],
            blocks=self.blocks,
            decl_types=self.decl_types,
            modifiers=list(self.fn.modifiers),
            temp_count=self.temp_n,
        )

    # ---------------------------------------------------------- plumbing

    def _new_block(self, label: str | None = None) -> IRBlock:
        if label is None:
            label = f"L{self.label_n}"
            self.label_n += 1
        block = IRBlock(label)
        self.blocks.append(block)
        return block

    def _emit(self, ins: IRInstr) -> IRInstr:
        ins.stmt_index = self.stmt_n
        self.current.instrs.append(ins)
        return ins

    def _temp(self) -> Temp:
        t = Temp(f"t{self.temp_n}")
        self.temp_n += 1
        return t

    def _is_storage(self, name: str) -> bool:
        return is_storage_name(name, self.declared_storage)

    # ---------------------------------------------------------- statements

    def _stmt(self, s: syn.Stmt):
        self.stmt_n += 1
        pos = s.pos
        if isinstance(s, syn.VarDecl):
            if s.decl_type is not None:
                self.decl_types[s.name] = s.decl_type
            if s.init is not None:
                val = self._expr(s.init, pos)
                self._emit(IRInstr("copy", dest=s.name, args=(val,), pos=pos))
        elif isinstance(s, (syn.Assign, syn.StorageWrite)):
            self._assign(s, pos)
        elif isinstance(s, syn.ExprStmt):
            self._expr(s.expr, pos, want_result=False)
        elif isinstance(s, syn.Require):
            cond = self._expr(s.cond, pos)
            self._emit(IRInstr("require", args=(cond,), message=s.message, pos=pos))
        elif isinstance(s, syn.If):
            self._if(s, pos)
        elif isinstance(s, syn.While):
            self._while(s, pos)
        elif isinstance(s, syn.Return):
            vals = tuple(self._expr(v, pos) for v in s.values)
            self._emit(IRInstr("ret", args=vals, pos=pos))
            self.current = self._new_block()
        else:
            raise LoweringError(f"no lowering for {type(s).__name__}")

    def _if(self, s: syn.If, pos):
        cond = self._expr(s.cond, pos)
        then_b = self._new_block()
        else_b = self._new_block() if s.orelse else None
        join_b = self._new_block()
        self._branch(cond, then_b.label, (else_b or join_b).label, pos)
        self.current = then_b
        for inner in s.then:
            self._stmt(inner)
        if self.current.terminator is None:
            self._emit(IRInstr("jump", labels=(join_b.label,), pos=pos))
        if else_b is not None:
            self.current = else_b
            for inner in s.orelse:
                self._stmt(inner)
            if self.current.terminator is None:
                self._emit(IRInstr("jump", labels=(join_b.label,), pos=pos))
        self.current = join_b

    def _while(self, s: syn.While, pos):
        head = self._new_block()
        self._emit(IRInstr("jump", labels=(head.label,), pos=pos))
        self.current = head
        cond = self._expr(s.cond, pos)
        body_b = self._new_block()
        exit_b = self._new_block()
        self._branch(cond, body_b.label, exit_b.label, pos)
        self.current = body_b
        for inner in s.body:
            self._stmt(inner)
        if self.current.terminator is None:
            self._emit(IRInstr("jump", labels=(head.label,), pos=pos))
        self.current = exit_b

    def _branch(self, cond: Value, true_l: str, false_l: str, pos):
        self._emit(IRInstr("branch", args=(cond,), labels=(true_l, false_l), pos=pos))

    def _assign(self, s, pos):
        if isinstance(s.target, syn.TupleExpr):
            self._tuple_assign(s, pos)
            return
        value = self._expr(s.value, pos)
        root = _root_var(s.target)
        storage = root is not None and self._is_storage(root)
        if storage:
            slot, keys = self._storage_path(s.target, pos)
            if s.op != "=":
                old = self._temp()
                self._emit(IRInstr("load_storage", dest=old.name, slot=slot,
                                   keys=keys, pos=pos))
                new = self._temp()
                self._emit(IRInstr("binop", dest=new.name, operator=s.op[0],
                                   args=(old, value), pos=pos))
                value = new
            self._emit(IRInstr("store_storage", slot=slot, keys=keys,
                               args=(value,), pos=pos))
            return
        if isinstance(s.target, syn.Var):
            if s.op != "=":
                cur = VarRef(s.target.name)
                new = self._temp()
                self._emit(IRInstr("binop", dest=new.name, operator=s.op[0],
                                   args=(cur, value), pos=pos))
                value = new
            self._emit(IRInstr("copy", dest=s.target.name, args=(value,), pos=pos))
            return
        if isinstance(s.target, syn.Index):
            base = self._expr(s.target.base, pos)
            key = self._expr(s.target.key, pos)
            root_name = root or "<expr>"
            if s.op != "=":
                cur = self._temp()
                self._emit(IRInstr("index", dest=cur.name, args=(base, key), pos=pos))
                new = self._temp()
                self._emit(IRInstr("binop", dest=new.name, operator=s.op[0],
                                   args=(cur, value), pos=pos))
                value = new
            self._emit(IRInstr("index_put", dest=root_name,
                               args=(base, key, value), pos=pos))
            return
        raise LoweringError(f"unassignable target {type(s.target).__name__}")

    def _tuple_assign(self, s, pos):
        value = self._expr(s.value, pos)
        for i, target in enumerate(s.target.items):
            part = self._temp()
            self._emit(IRInstr("index", dest=part.name,
                               args=(value, ConstV(i, str(i))),
                               extra={"tuple_get": i}, pos=pos))
            self._assign_value(target, part, pos)

    def _assign_value(self, target: syn.Expr, value: Value, pos):
        root = _root_var(target)
        if root is not None and self._is_storage(root):
            slot, keys = self._storage_path(target, pos)
            self._emit(IRInstr("store_storage", slot=slot, keys=keys,
                               args=(value,), pos=pos))
        elif isinstance(target, syn.Var):
            self._emit(IRInstr("copy", dest=target.name, args=(value,), pos=pos))
        else:
            raise LoweringError("tuple element target too complex")

    def _storage_path(self, target: syn.Expr, pos) -> tuple[str, tuple[Value, ...]]:
        keys: list[Value] = []
        node = target
        suffix = ""
        while not isinstance(node, syn.Var):
            if isinstance(node, syn.Index):
                keys.append(self._expr(node.key, pos))
                node = node.base
            elif isinstance(node, syn.Member):
                suffix = f".{node.name}" + suffix
                node = node.base
            else:
                raise LoweringError("unsupported storage target shape")
        keys.reverse()
        return storage_slot(node.name) + suffix, tuple(keys)

    # ---------------------------------------------------------- expressions

    def _expr(self, e: syn.Expr, pos, want_result: bool = True) -> Value:
        if isinstance(e, syn.Const):
            return ConstV(e.value, e.lexeme)
        if isinstance(e, syn.Var):
            if self._is_storage(e.name):
                t = self._temp()
                self._emit(IRInstr("load_storage", dest=t.name,
                                   slot=storage_slot(e.name), pos=pos))
                return t
            return VarRef(e.name)
        if isinstance(e, syn.BinOp):
            a = self._expr(e.left, pos)
            b = self._expr(e.right, pos)
            t = self._temp()
            self._emit(IRInstr("binop", dest=t.name, operator=e.op, args=(a, b), pos=pos))
            return t
        if isinstance(e, syn.UnOp):
            return self._unop(e, pos)
        if isinstance(e, syn.Call):
            return self._call(e, pos, want_result)
        if isinstance(e, syn.Member):
            base = self._expr(e.base, pos)
            t = self._temp()
            self._emit(IRInstr("member", dest=t.name, args=(base,), member=e.name, pos=pos))
            return t
        if isinstance(e, syn.Index):
            root = _root_var(e)
            if root is not None and self._is_storage(root):
                slot, keys = self._storage_path(e, pos)
                t = self._temp()
                self._emit(IRInstr("load_storage", dest=t.name, slot=slot,
                                   keys=keys, pos=pos))
                return t
            base = self._expr(e.base, pos)
            key = self._expr(e.key, pos)
            t = self._temp()
            self._emit(IRInstr("index", dest=t.name, args=(base, key), pos=pos))
            return t
        if isinstance(e, syn.SliceRange):
            base = self._expr(e.base, pos)
            lo = self._expr(e.lo, pos) if e.lo is not None else ConstV(0, "0")
            hi = self._expr(e.hi, pos) if e.hi is not None else ConstV(None, "")
            t = self._temp()
            self._emit(IRInstr("index", dest=t.name, args=(base, lo, hi),
                               extra={"slice": True}, pos=pos))
            return t
        if isinstance(e, syn.TupleExpr):
            items = tuple(self._expr(x, pos) for x in e.items)
            t = self._temp()
            self._emit(IRInstr("tuple", dest=t.name, args=items, pos=pos))
            return t
        if isinstance(e, syn.ArrayExpr):
            items = tuple(self._expr(x, pos) for x in e.items)
            t = self._temp()
            self._emit(IRInstr("array", dest=t.name, args=items, pos=pos))
            return t
        if isinstance(e, syn.TypeRef):
            raise LoweringError("type name used as a value")
        raise LoweringError(f"no lowering for {type(e).__name__}")

    def _unop(self, e: syn.UnOp, pos) -> Value:
        operand = self._expr(e.operand, pos)
        t = self._temp()
        if e.op == "!":
            self._emit(IRInstr("binop", dest=t.name, operator="^",
                               args=(operand, ConstV(True, "true")), pos=pos))
        elif e.op == "~":
            self._emit(IRInstr("binop", dest=t.name, operator="^",
                               args=(operand, ConstV(MAXWORD, hex(MAXWORD))), pos=pos))
        elif e.op == "-":
            self._emit(IRInstr("binop", dest=t.name, operator="-",
                               args=(ConstV(0, "0"), operand), pos=pos))
        else:
            raise LoweringError(f"unknown unary operator {e.op!r}")
        return t

    def _call(self, e: syn.Call, pos, want_result: bool) -> Value:
        if isinstance(e.callee, syn.TypeRef):
            if len(e.args) != 1:
                raise LoweringError("cast takes exactly one value")
            val = self._expr(e.args[0], pos)
            t = self._temp()
            self._emit(IRInstr("copy", dest=t.name, args=(val,),
                               cast=e.callee.type, pos=pos))
            return t
        args = tuple(self._expr(a, pos) for a in e.args)
        receiver = None
        if isinstance(e.callee, syn.Var):
            callee = e.callee.name
        elif isinstance(e.callee, syn.Member):
            receiver = self._expr(e.callee.base, pos)
            callee = e.callee.name
        else:
            raise LoweringError("call target too complex")
        dest = self._temp().name if want_result else None
        self._emit(IRInstr("call", dest=dest, callee=callee, receiver=receiver,
                           args=args, pos=pos))
        return Temp(dest) if dest else ConstV(None, "")


def _root_var(e: syn.Expr) -> str | None:
    node = e
    while isinstance(node, (syn.Index, syn.Member, syn.SliceRange)):
        node = node.base
    return node.name if isinstance(node, syn.Var) else None
