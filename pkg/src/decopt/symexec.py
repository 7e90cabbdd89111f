"""Bounded symbolic execution over the three-address IR.

Produces per-function summaries: a list of paths, each carrying a path
condition and the observable effects along it (return values, final
storage per written slot, the ordered vector of external calls, and a
revert flag).  Path conditions within one summary are pairwise mutually
exclusive by construction because every fork adds complementary
condition atoms to the two successors.

Semantics
---------
* values are 256-bit words with wrap-around arithmetic; comparisons are
  unsigned;
* mul, div, mod, and exponentiation of two non-constant operands become
  uninterpreted applications (uf.mul and friends), as do hashing
  builtins, external calls, storage reads of keyed slots, and member
  reads of environment objects; equal applications are equal and
  nothing more is assumed;
* div and mod by the constant zero yield zero;
* casts do not change the flowing word: decompiled sources carry any
  masking explicitly, so a cast is an annotation here;
* string literals denote a fixed 256-bit digest of their text, so equal
  strings stay equal and distinct strings stay distinct;
* require forks into a continue path and a revert path; a reverted path
  observes nothing except the revert itself (writes and calls are
  undone, matching transactional rollback);
* calls to functions defined in the same module are inlined, so a
  function split into host plus helper compares against the unsplit
  original over identical instruction streams;
* local tuple and array literals are concrete composites; indexing a
  plain word acts through uf.select, and writing through one rebuilds
  the variable as uf.store (no read-over-write axiom is assumed, which
  can only make the solver report spurious differences that concrete
  replay then rejects).

Replay
------
The same executor reruns with a resolver that substitutes concrete
values for every symbol and uninterpreted application.  All conditions
then fold to literals, exactly one path remains, and its observables
are plain numbers.  In "table" mode every uninterpreted application is
answered from a recorded value table (mirroring a solver model); in
"real" mode mul/div/mod/exp compute with genuine modular arithmetic
while externals still answer from the table, since they have no real
semantics to compute.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .builtins import is_builtin_function
from .errors import SymExecError
from .ir import ConstV, IRFunction, IRModule, Temp, Value, VarRef

WORD_BITS = 256
WORD_MASK = (1 << WORD_BITS) - 1


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Sym:
    """Free symbolic input (function argument, environment, storage)."""

    name: str
    sort: str = "word"


@dataclass(frozen=True)
class Lit:
    value: object  # int (already masked) or bool
    sort: str = "word"


@dataclass(frozen=True)
class App:
    op: str
    args: tuple
    sort: str = "word"


Term = Sym | Lit | App

TRUE = Lit(True, "bool")
FALSE = Lit(False, "bool")
ZERO = Lit(0, "word")
ONE = Lit(1, "word")

# interpreted operator table: name -> (argument sorts, result sort)
INTERPRETED = {
    "bvadd": ("ww", "word"),
    "bvsub": ("ww", "word"),
    "bvmul": ("ww", "word"),
    "bvudiv": ("ww", "word"),
    "bvurem": ("ww", "word"),
    "bvshl": ("ww", "word"),
    "bvlshr": ("ww", "word"),
    "bvand": ("ww", "word"),
    "bvor": ("ww", "word"),
    "bvxor": ("ww", "word"),
    "bvult": ("ww", "bool"),
    "bvule": ("ww", "bool"),
    "eq": ("ss", "bool"),
    "and": ("bb", "bool"),
    "or": ("bb", "bool"),
    "xor": ("bb", "bool"),
    "not": ("b", "bool"),
    "ite": ("bss", "same"),
}


def is_uninterpreted(op: str) -> bool:
    return op.startswith("uf.")


def _lit_word(v: int) -> Lit:
    return Lit(v & WORD_MASK, "word")


def string_word(text: str) -> int:
    """Deterministic 256-bit stand-in for a string literal."""
    return int.from_bytes(hashlib.sha256(text.encode()).digest(), "big")


def word(t: Term) -> Term:
    """Coerce a term to word sort (true becomes 1, false 0)."""
    if t.sort == "word":
        return t
    if isinstance(t, Lit):
        return ONE if t.value else ZERO
    return App("ite", (t, ONE, ZERO), "word")


def boolt(t: Term) -> Term:
    """Coerce a term to bool sort (a word is true when nonzero)."""
    if t.sort == "bool":
        return t
    if isinstance(t, Lit):
        return TRUE if (t.value & WORD_MASK) != 0 else FALSE
    return mk_not(mk_eq(t, ZERO))


def eval_interp(op: str, args: list) -> object:
    """Concrete semantics of interpreted operators over python values."""
    if op == "bvadd":
        return (args[0] + args[1]) & WORD_MASK
    if op == "bvsub":
        return (args[0] - args[1]) & WORD_MASK
    if op == "bvmul":
        return (args[0] * args[1]) & WORD_MASK
    if op == "bvudiv":
        return 0 if args[1] == 0 else (args[0] // args[1]) & WORD_MASK
    if op == "bvurem":
        return 0 if args[1] == 0 else (args[0] % args[1]) & WORD_MASK
    if op == "bvshl":
        return 0 if args[1] >= WORD_BITS else (args[0] << args[1]) & WORD_MASK
    if op == "bvlshr":
        return 0 if args[1] >= WORD_BITS else args[0] >> args[1]
    if op == "bvand":
        return args[0] & args[1]
    if op == "bvor":
        return args[0] | args[1]
    if op == "bvxor":
        return args[0] ^ args[1]
    if op == "bvult":
        return args[0] < args[1]
    if op == "bvule":
        return args[0] <= args[1]
    if op == "eq":
        return args[0] == args[1]
    if op == "and":
        return args[0] and args[1]
    if op == "or":
        return args[0] or args[1]
    if op == "xor":
        return bool(args[0]) != bool(args[1])
    if op == "not":
        return not args[0]
    if op == "ite":
        return args[1] if args[0] else args[2]
    raise SymExecError(f"no concrete semantics for {op!r}")


def real_uf(op: str, args: list) -> int | None:
    """Real modular arithmetic for abstracted operators, where it exists."""
    if op == "uf.mul":
        return (args[0] * args[1]) & WORD_MASK
    if op == "uf.div":
        return 0 if args[1] == 0 else (args[0] // args[1]) & WORD_MASK
    if op == "uf.mod":
        return 0 if args[1] == 0 else args[0] % args[1]
    if op == "uf.exp":
        return pow(args[0], args[1], 1 << WORD_BITS)
    return None


def mk(op: str, *args: Term) -> Term:
    """Build an interpreted application, folding constants."""
    sorts, result = INTERPRETED[op]
    if result == "same":
        result = args[1].sort
    if all(isinstance(a, Lit) for a in args):
        v = eval_interp(op, [a.value for a in args])
        if result == "bool":
            return TRUE if v else FALSE
        return _lit_word(int(v))
    if op == "eq" and args[0] == args[1]:
        return TRUE
    if op == "ite":
        c, t, e = args
        if isinstance(c, Lit):
            return t if c.value else e
        if t == e:
            return t
    if op == "and":
        if FALSE in args:
            return FALSE
        live = [a for a in args if a != TRUE]
        if not live:
            return TRUE
        if len(live) == 1:
            return live[0]
        args = tuple(live)
    if op == "or":
        if TRUE in args:
            return TRUE
        live = [a for a in args if a != FALSE]
        if not live:
            return FALSE
        if len(live) == 1:
            return live[0]
        args = tuple(live)
    if op == "not":
        inner = args[0]
        if isinstance(inner, App) and inner.op == "not":
            return inner.args[0]
    return App(op, args, result)


def mk_eq(a: Term, b: Term) -> Term:
    if a.sort != b.sort:
        a, b = word(a), word(b)
    return mk("eq", a, b)


def mk_not(a: Term) -> Term:
    return mk("not", boolt(a))


def big_and(terms: list[Term]) -> Term:
    """Conjunction with flattening and complementary-literal detection."""
    flat: list[Term] = []
    for t in terms:
        t = boolt(t)
        if isinstance(t, App) and t.op == "and":
            flat.extend(t.args)
        else:
            flat.append(t)
    seen: list[Term] = []
    for t in flat:
        if t == FALSE:
            return FALSE
        if t == TRUE or t in seen:
            continue
        seen.append(t)
    for t in seen:
        if mk_not(t) in seen:
            return FALSE
    if not seen:
        return TRUE
    if len(seen) == 1:
        return seen[0]
    return App("and", tuple(seen), "bool")


def big_or(terms: list[Term]) -> Term:
    flat: list[Term] = []
    for t in terms:
        t = boolt(t)
        if isinstance(t, App) and t.op == "or":
            flat.extend(t.args)
        else:
            flat.append(t)
    seen: list[Term] = []
    for t in flat:
        if t == TRUE:
            return TRUE
        if t == FALSE or t in seen:
            continue
        seen.append(t)
    if not seen:
        return FALSE
    if len(seen) == 1:
        return seen[0]
    return App("or", tuple(seen), "bool")


def term_size(t: Term) -> int:
    if isinstance(t, App):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


def collect_apps(t: Term, out: dict[Term, None]) -> None:
    """Record every application subterm, innermost first."""
    if isinstance(t, App):
        for a in t.args:
            collect_apps(a, out)
        out.setdefault(t)


def collect_syms(t: Term, out: dict[str, Sym]) -> None:
    if isinstance(t, Sym):
        out.setdefault(t.name, t)
    elif isinstance(t, App):
        for a in t.args:
            collect_syms(a, out)


# ---------------------------------------------------------------------------
# composites (live only in the local environment, never inside formulas)


@dataclass(frozen=True)
class TupleVal:
    items: tuple


@dataclass(frozen=True)
class ArrayVal:
    items: tuple


def flatten_values(vals) -> tuple[Term, ...]:
    out: list[Term] = []
    for v in vals:
        if isinstance(v, TupleVal):
            out.extend(flatten_values(v.items))
        elif isinstance(v, ArrayVal):
            out.append(_lit_word(len(v.items)))
            out.extend(flatten_values(v.items))
        else:
            out.append(word(v))
    return tuple(out)


# ---------------------------------------------------------------------------
# summaries


@dataclass
class Bounds:
    loop_unroll: int = 2
    max_paths: int = 64
    max_steps: int = 10_000
    call_depth: int = 8


@dataclass(frozen=True)
class PathSummary:
    condition: tuple[Term, ...]
    reverted: bool
    rets: tuple[Term, ...]
    scalar_writes: tuple[tuple[str, Term], ...]
    keyed_writes: tuple[tuple[str, tuple], ...]
    calls: tuple[tuple[str, tuple], ...]

    @property
    def pc(self) -> Term:
        return big_and(list(self.condition))


@dataclass
class SymbolicSummary:
    fn: str
    params: tuple[str, ...]
    arg_syms: tuple[Sym, ...]
    paths: list[PathSummary]
    bound_hit: bool

    def touched_scalars(self) -> set[str]:
        return {s for p in self.paths for s, _ in p.scalar_writes}

    def touched_keyed(self) -> dict[str, int]:
        """Written keyed slots with their key arity."""
        out: dict[str, int] = {}
        for p in self.paths:
            for slot, log in p.keyed_writes:
                if log:
                    out.setdefault(slot, len(log[0][0]))
        return out

    def to_json(self) -> dict:
        return {
            "function": self.fn,
            "params": list(self.params),
            "path_count": len(self.paths),
            "bound_hit": self.bound_hit,
            "paths": [
                {
                    "condition": render_term(p.pc),
                    "reverted": p.reverted,
                    "returns": [render_term(r) for r in p.rets],
                    "storage": {s: render_term(t) for s, t in p.scalar_writes},
                    "calls": [
                        {"callee": name, "args": [render_term(a) for a in args]}
                        for name, args in p.calls
                    ],
                }
                for p in self.paths
            ],
        }


def render_term(t: Term) -> str:
    if isinstance(t, Sym):
        return t.name
    if isinstance(t, Lit):
        if t.sort == "bool":
            return "true" if t.value else "false"
        return str(t.value)
    return "(" + " ".join([t.op] + [render_term(a) for a in t.args]) + ")"


# ---------------------------------------------------------------------------
# replay resolution


class Resolver:
    """Concrete answers for symbols and uninterpreted applications.

    `syms` maps symbol names to values; `table` maps (op, concrete arg
    tuple) pairs to values.  Missing entries default to zero, matching
    solver models that omit don't-care constants.
    """

    def __init__(self, syms: dict[str, int] | None = None,
                 table: dict[tuple, int] | None = None,
                 mode: str = "table"):
        if mode not in ("table", "real"):
            raise SymExecError(f"unknown replay mode {mode!r}")
        self.syms = dict(syms or {})
        self.table = dict(table or {})
        self.mode = mode

    def sym_value(self, name: str, sort: str) -> Lit:
        v = self.syms.get(name, 0)
        if sort == "bool":
            return TRUE if v not in (0, False) else FALSE
        if isinstance(v, bool):
            v = int(v)
        return _lit_word(v)

    def uf_value(self, op: str, args: tuple) -> Lit:
        key = (op, tuple(int(a) & WORD_MASK for a in args))
        if self.mode == "real":
            real = real_uf(op, list(key[1]))
            if real is not None:
                return _lit_word(real)
        return _lit_word(self.table.get(key, 0))

    def lookup(self, op: str, args: tuple) -> int | None:
        """Raw table probe without a default (None when unrecorded)."""
        return self.table.get(
            (op, tuple(int(a) & WORD_MASK for a in args)))


# ---------------------------------------------------------------------------
# execution state


@dataclass
class _Frame:
    fn: IRFunction
    block: str
    idx: int
    env: dict
    visits: dict[str, int]
    ret_dest: str | None


@dataclass
class _State:
    frames: list[_Frame]
    condition: list[Term]
    scalars: dict[str, Term]
    written: set[str]
    keyed: dict[str, list]
    calls: list
    steps: int = 0

    def clone(self) -> "_State":
        return _State(
            frames=[
                _Frame(f.fn, f.block, f.idx, dict(f.env), dict(f.visits),
                       f.ret_dest)
                for f in self.frames
            ],
            condition=list(self.condition),
            scalars=dict(self.scalars),
            written=set(self.written),
            keyed={k: list(v) for k, v in self.keyed.items()},
            calls=list(self.calls),
            steps=self.steps,
        )


class _Execution:
    def __init__(self, fn: IRFunction, module: IRModule, bounds: Bounds,
                 resolver: Resolver | None = None):
        self.fn = fn
        self.module = module
        self.bounds = bounds
        self.resolver = resolver
        self.paths: list[PathSummary] = []
        self.bound_hit = False
        self.arg_syms = tuple(
            self._sym(f"arg{i}") for i in range(len(fn.params)))

    # -------------------------------------------------------- term makers

    def _sym(self, name: str, sort: str = "word") -> Term:
        if self.resolver is not None:
            return self.resolver.sym_value(name, sort)
        return Sym(name, sort)

    def _uf(self, op: str, args: tuple[Term, ...]) -> Term:
        args = tuple(word(a) for a in args)
        if self.resolver is not None:
            if not all(isinstance(a, Lit) for a in args):
                raise SymExecError("symbolic value escaped into replay")
            return self.resolver.uf_value(op, tuple(a.value for a in args))
        return App(op, args, "word")

    # -------------------------------------------------------- entry point

    def run(self) -> SymbolicSummary:
        env = {p: self.arg_syms[i] for i, p in enumerate(self.fn.params)}
        entry = self.fn.blocks[0].label
        root = _State(
            frames=[_Frame(self.fn, entry, 0, env, {entry: 1}, None)],
            condition=[], scalars={}, written=set(), keyed={}, calls=[],
        )
        stack = [root]
        while stack:
            state = stack.pop()
            self._run_state(state, stack)
            if len(self.paths) >= self.bounds.max_paths:
                if stack:
                    self.bound_hit = True
                break
        return SymbolicSummary(
            fn=self.fn.name,
            params=tuple(self.fn.params),
            arg_syms=self.arg_syms,
            paths=self.paths,
            bound_hit=self.bound_hit,
        )

    # -------------------------------------------------------- driving

    def _run_state(self, st: _State, stack: list[_State]) -> None:
        """Advance one state to a recorded path, a fork, or a bound cut."""
        while True:
            st.steps += 1
            if st.steps > self.bounds.max_steps:
                self.bound_hit = True
                return
            frame = st.frames[-1]
            block = frame.fn.block(frame.block)
            if frame.idx >= len(block.instrs):
                # fall through past an unterminated block: function end
                if not self._leave_frame(st, ()):
                    self._record(st, reverted=False, rets=())
                    return
                continue
            ins = block.instrs[frame.idx]
            frame.idx += 1
            op = ins.op

            if op == "copy":
                frame.env[ins.dest] = self._value(ins.args[0], frame)
            elif op == "binop":
                a = self._value(ins.args[0], frame)
                b = self._value(ins.args[1], frame)
                frame.env[ins.dest] = self._binop(ins.operator, a, b)
            elif op == "member":
                frame.env[ins.dest] = self._member(ins, frame)
            elif op == "tuple":
                frame.env[ins.dest] = TupleVal(
                    tuple(self._value(a, frame) for a in ins.args))
            elif op == "array":
                frame.env[ins.dest] = ArrayVal(
                    tuple(self._value(a, frame) for a in ins.args))
            elif op == "index":
                frame.env[ins.dest] = self._index(ins, frame)
            elif op == "index_put":
                self._index_put(ins, frame)
            elif op == "load_storage":
                frame.env[ins.dest] = self._load_storage(ins, frame, st)
            elif op == "store_storage":
                self._store_storage(ins, frame, st)
            elif op == "call":
                if not self._call(ins, frame, st):
                    return  # reverted or bound cut inside the call setup
            elif op == "require":
                cond = boolt(self._value(ins.args[0], frame))
                if cond == TRUE:
                    continue
                if cond == FALSE:
                    self._record(st, reverted=True, rets=())
                    return
                drop = st.clone()
                drop.condition.append(mk_not(cond))
                self._record(drop, reverted=True, rets=())
                if len(self.paths) >= self.bounds.max_paths:
                    self.bound_hit = True
                    return
                st.condition.append(cond)
            elif op == "branch":
                cond = boolt(self._value(ins.args[0], frame))
                if cond == TRUE:
                    if not self._goto(st, frame, ins.labels[0]):
                        return
                elif cond == FALSE:
                    if not self._goto(st, frame, ins.labels[1]):
                        return
                else:
                    other = st.clone()
                    other.condition.append(mk_not(cond))
                    if self._goto(other, other.frames[-1], ins.labels[1]):
                        stack.append(other)
                    st.condition.append(cond)
                    if not self._goto(st, frame, ins.labels[0]):
                        return
            elif op == "jump":
                if not self._goto(st, frame, ins.labels[0]):
                    return
            elif op == "ret":
                vals = tuple(self._value(a, frame) for a in ins.args)
                if not self._leave_frame(st, vals):
                    self._record(st, reverted=False, rets=flatten_values(vals))
                    return
            else:
                raise SymExecError(f"no symbolic semantics for {op!r}")

    def _goto(self, st: _State, frame: _Frame, label: str) -> bool:
        count = frame.visits.get(label, 0) + 1
        if count > self.bounds.loop_unroll + 1:
            self.bound_hit = True
            return False
        frame.visits[label] = count
        frame.block = label
        frame.idx = 0
        return True

    def _leave_frame(self, st: _State, vals: tuple) -> bool:
        """Pop an inlined frame, delivering return values. False at depth 0."""
        if len(st.frames) == 1:
            return False
        frame = st.frames.pop()
        if frame.ret_dest is not None:
            if len(vals) == 1:
                result = vals[0]
            elif not vals:
                result = ZERO
            else:
                result = TupleVal(vals)
            st.frames[-1].env[frame.ret_dest] = result
        return True

    def _record(self, st: _State, reverted: bool, rets: tuple) -> None:
        if reverted:
            self.paths.append(PathSummary(
                condition=tuple(st.condition), reverted=True, rets=(),
                scalar_writes=(), keyed_writes=(), calls=()))
            return
        scalars = tuple(sorted(
            (slot, word(st.scalars[slot])) for slot in st.written))
        keyed = tuple(sorted(
            (slot, tuple(log)) for slot, log in st.keyed.items() if log))
        self.paths.append(PathSummary(
            condition=tuple(st.condition), reverted=False, rets=rets,
            scalar_writes=scalars, keyed_writes=keyed,
            calls=tuple(st.calls)))

    # -------------------------------------------------------- operands

    def _value(self, v: Value, frame: _Frame):
        if isinstance(v, ConstV):
            raw = v.value
            if isinstance(raw, bool):
                return TRUE if raw else FALSE
            if isinstance(raw, int):
                return _lit_word(raw)
            if isinstance(raw, str):
                return _lit_word(string_word(raw))
            return ZERO
        if isinstance(v, (Temp, VarRef)):
            if v.name in frame.env:
                return frame.env[v.name]
            return self._sym(f"env.{v.name}")
        raise SymExecError(f"unknown operand {v!r}")

    def _binop(self, operator: str, a, b) -> Term:
        a = self._scalarize(a)
        b = self._scalarize(b)
        if operator in ("&&", "||"):
            return mk("and" if operator == "&&" else "or", boolt(a), boolt(b))
        if operator in ("&", "|", "^"):
            if a.sort == "bool" or b.sort == "bool":
                name = {"&": "and", "|": "or", "^": "xor"}[operator]
                return mk(name, boolt(a), boolt(b))
            name = {"&": "bvand", "|": "bvor", "^": "bvxor"}[operator]
            return mk(name, word(a), word(b))
        if operator in ("<", "<=", ">", ">="):
            x, y = word(a), word(b)
            if operator == "<":
                return mk("bvult", x, y)
            if operator == "<=":
                return mk("bvule", x, y)
            if operator == ">":
                return mk("bvult", y, x)
            return mk("bvule", y, x)
        if operator == "==":
            return mk_eq(a, b)
        if operator == "!=":
            return mk_not(mk_eq(a, b))
        x, y = word(a), word(b)
        if operator == "+":
            return mk("bvadd", x, y)
        if operator == "-":
            return mk("bvsub", x, y)
        if operator in ("*", "/", "%", "**"):
            return self._arith(operator, x, y)
        if operator == "<<":
            return mk("bvshl", x, y)
        if operator == ">>":
            return mk("bvlshr", x, y)
        raise SymExecError(f"no symbolic semantics for operator {operator!r}")

    _NONLINEAR = {"*": "uf.mul", "/": "uf.div", "%": "uf.mod", "**": "uf.exp"}

    def _arith(self, operator: str, x: Term, y: Term) -> Term:
        """Multiplicative arithmetic: interpreted with a constant operand,
        uninterpreted otherwise.  A table-mode replay first consults the
        recorded table so it sees exactly what the solver assumed."""
        uf_op = self._NONLINEAR[operator]
        if (self.resolver is not None and self.resolver.mode == "table"
                and isinstance(x, Lit) and isinstance(y, Lit)):
            hit = self.resolver.lookup(uf_op, (x.value, y.value))
            if hit is not None:
                return _lit_word(hit)
        if operator == "*":
            if isinstance(x, Lit) or isinstance(y, Lit):
                return mk("bvmul", x, y)
        elif operator == "**":
            if isinstance(x, Lit) and isinstance(y, Lit):
                return _lit_word(pow(x.value, y.value, 1 << WORD_BITS))
        else:
            if isinstance(y, Lit):
                if y.value == 0:
                    return ZERO
                return mk("bvudiv" if operator == "/" else "bvurem", x, y)
        return self._uf(uf_op, (x, y))

    def _scalarize(self, v) -> Term:
        if isinstance(v, TupleVal):
            return flatten_values(v.items)[0] if v.items else ZERO
        if isinstance(v, ArrayVal):
            return _lit_word(len(v.items))
        return v

    def _member(self, ins, frame) -> Term:
        base = self._value(ins.args[0], frame)
        if isinstance(base, (TupleVal, ArrayVal)) and ins.member == "length":
            return _lit_word(len(base.items))
        return self._uf(f"uf.member.{ins.member}/1", (self._scalarize(base),))

    def _index(self, ins, frame):
        if ins.extra.get("slice"):
            args = tuple(self._scalarize(self._value(a, frame))
                         for a in ins.args)
            return self._uf(f"uf.slice/{len(args)}", args)
        base = self._value(ins.args[0], frame)
        key = self._value(ins.args[1], frame)
        pick = ins.extra.get("tuple_get")
        if isinstance(base, (TupleVal, ArrayVal)):
            items = base.items
            if pick is not None:
                if pick < len(items):
                    return items[pick]
                return ZERO
            key = word(self._scalarize(key))
            if isinstance(key, Lit):
                i = key.value
                return items[i] if 0 <= i < len(items) else ZERO
            acc = ZERO
            for i in reversed(range(len(items))):
                acc = mk("ite", mk_eq(key, _lit_word(i)),
                         word(self._scalarize(items[i])), acc)
            return acc
        if pick is not None and pick == 0:
            # tuple destructuring of a one-word value takes the word itself
            return self._scalarize(base)
        return self._uf("uf.select",
                        (self._scalarize(base), self._scalarize(key)))

    def _index_put(self, ins, frame) -> None:
        base = self._value(ins.args[0], frame)
        key = self._value(ins.args[1], frame)
        val = self._value(ins.args[2], frame)
        name = ins.dest
        if name == "<expr>":
            return
        if isinstance(base, (TupleVal, ArrayVal)):
            items = list(base.items)
            key = word(self._scalarize(key))
            if isinstance(key, Lit):
                i = key.value
                if 0 <= i < len(items):
                    items[i] = val
            else:
                wv = word(self._scalarize(val))
                for i in range(len(items)):
                    items[i] = mk("ite", mk_eq(key, _lit_word(i)), wv,
                                  word(self._scalarize(items[i])))
            frame.env[name] = type(base)(tuple(items))
            return
        frame.env[name] = self._uf(
            "uf.store",
            (self._scalarize(base), self._scalarize(key),
             self._scalarize(val)))

    def _load_storage(self, ins, frame, st: _State) -> Term:
        slot = ins.slot
        if not ins.keys:
            if slot not in st.scalars:
                st.scalars[slot] = self._sym(f"stor.{slot}")
            return st.scalars[slot]
        keys = tuple(word(self._scalarize(self._value(k, frame)))
                     for k in ins.keys)
        return resolve_keyed(slot, keys, st.keyed.get(slot, ()), self._uf)

    def _store_storage(self, ins, frame, st: _State) -> None:
        slot = ins.slot
        val = self._scalarize(self._value(ins.args[0], frame))
        if not ins.keys:
            st.scalars[slot] = word(val)
            st.written.add(slot)
            return
        keys = tuple(word(self._scalarize(self._value(k, frame)))
                     for k in ins.keys)
        st.keyed.setdefault(slot, []).append((keys, word(val)))

    def _call(self, ins, frame, st: _State) -> bool:
        args = tuple(self._value(a, frame) for a in ins.args)
        callee = ins.callee
        target = self.module.function(callee) if ins.receiver is None else None
        if target is not None:
            if len(st.frames) >= self.bounds.call_depth:
                self.bound_hit = True
                return False
            env = {}
            for i, p in enumerate(target.params):
                env[p] = args[i] if i < len(args) else ZERO
            entry = target.blocks[0].label
            st.frames.append(_Frame(target, entry, 0, env, {entry: 1},
                                    ins.dest))
            return True
        if ins.receiver is None and is_builtin_function(callee):
            if callee == "revert":
                self._record(st, reverted=True, rets=())
                return False
            if callee == "assert":
                cond = boolt(self._scalarize(args[0])) if args else TRUE
                if cond == FALSE:
                    self._record(st, reverted=True, rets=())
                    return False
                if cond != TRUE:
                    drop = st.clone()
                    drop.condition.append(mk_not(cond))
                    self._record(drop, reverted=True, rets=())
                    if len(self.paths) >= self.bounds.max_paths:
                        self.bound_hit = True
                        return False
                    st.condition.append(cond)
                return True
            if callee == "selfdestruct":
                flat = tuple(word(self._scalarize(a)) for a in args)
                st.calls.append((callee, flat))
                self._record(st, reverted=False, rets=())
                return False
            flat = tuple(self._scalarize(a) for a in args)
            if ins.dest is not None:
                frame.env[ins.dest] = self._uf(
                    f"uf.b.{callee}/{len(flat)}", flat)
            return True
        # external call: observable, result uninterpreted
        flat = []
        if ins.receiver is not None:
            flat.append(self._scalarize(self._value(ins.receiver, frame)))
        flat.extend(self._scalarize(a) for a in args)
        flat_words = tuple(word(t) for t in flat)
        st.calls.append((callee, flat_words))
        if ins.dest is not None:
            frame.env[ins.dest] = self._uf(
                f"uf.x.{callee}/{len(flat_words)}", flat_words)
        return True


def resolve_keyed(slot: str, keys: tuple[Term, ...], log, uf) -> Term:
    """Read a keyed slot through its write log, newest write winning.

    `uf` builds an uninterpreted application for the initial content.
    """
    acc = uf(f"uf.sload.{slot}/{len(keys)}", keys)
    for wkeys, wval in log:
        if len(wkeys) != len(keys):
            continue
        same = big_and([mk_eq(a, b) for a, b in zip(keys, wkeys)])
        acc = mk("ite", same, wval, acc)
    return acc


# ---------------------------------------------------------------------------
# public entry points


def symbolic_summary(fn: IRFunction, module: IRModule,
                     bounds: Bounds | None = None) -> SymbolicSummary:
    return _Execution(fn, module, bounds or Bounds()).run()


REPLAY_BOUNDS = Bounds(loop_unroll=1 << 20, max_paths=2, max_steps=200_000,
                       call_depth=64)


@dataclass
class ReplayOutcome:
    completed: bool
    reverted: bool = False
    rets: tuple = ()
    scalars: dict = field(default_factory=dict)
    keyed: dict = field(default_factory=dict)
    calls: tuple = ()

    def observables(self) -> dict:
        if not self.completed:
            return {"incomplete": True}
        if self.reverted:
            return {"reverted": 1}
        out: dict = {"reverted": 0}
        for i, r in enumerate(self.rets):
            out[f"ret[{i}]"] = r
        for slot, v in sorted(self.scalars.items()):
            out[f"storage.{slot}"] = v
        for slot, entries in sorted(self.keyed.items()):
            for keys, v in sorted(entries.items()):
                label = ",".join(str(k) for k in keys)
                out[f"storage.{slot}[{label}]"] = v
        out["calls"] = list(self.calls)
        return out


def concrete_run(fn: IRFunction, module: IRModule, resolver: Resolver
                 ) -> ReplayOutcome:
    """Execute with every symbol resolved; exactly one path survives."""
    summary = _Execution(fn, module, REPLAY_BOUNDS, resolver=resolver).run()
    if len(summary.paths) != 1:
        return ReplayOutcome(completed=False)
    path = summary.paths[0]
    if path.reverted:
        return ReplayOutcome(completed=True, reverted=True)

    def as_int(t: Term) -> int:
        if not isinstance(t, Lit):
            raise SymExecError("replay produced a symbolic observable")
        return int(t.value) & WORD_MASK if t.sort == "word" \
            else int(bool(t.value))

    keyed: dict[str, dict] = {}
    for slot, log in path.keyed_writes:
        final: dict[tuple, int] = {}
        for keys, val in log:
            final[tuple(as_int(k) for k in keys)] = as_int(val)
        keyed[slot] = final
    return ReplayOutcome(
        completed=True,
        reverted=False,
        rets=tuple(as_int(r) for r in path.rets),
        scalars={slot: as_int(v) for slot, v in path.scalar_writes},
        keyed=keyed,
        calls=tuple((name, tuple(as_int(a) for a in args))
                    for name, args in path.calls),
    )


def compare_outcomes(left: ReplayOutcome, right: ReplayOutcome
                     ) -> tuple[str, object, object] | None:
    """First differing observable between two completed replays, if any."""
    if not (left.completed and right.completed):
        return None
    if left.reverted != right.reverted:
        return "reverted", int(left.reverted), int(right.reverted)
    lo, ro = left.observables(), right.observables()
    for key in sorted(set(lo) | set(ro)):
        lv = lo.get(key, 0 if key != "calls" else [])
        rv = ro.get(key, 0 if key != "calls" else [])
        if lv != rv:
            return key, lv, rv
    return None
