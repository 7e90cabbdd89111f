"""Program-behavior equivalence of an original and an optimized function.

Both functions are summarized by bounded symbolic execution, their
observables are aligned (parameters by position, storage by slot with
renames honored, return values by position), and a single first-order
divergence formula is handed to an external SMT solver:

    divergence exists  iff  some pair of paths can run under a common
    input, with one observable differing, or the two path-condition
    covers differ.

An unsatisfiable formula with complete exploration means the functions
are behaviorally equivalent over the modeled semantics.  A satisfiable
one yields a candidate input assignment, which is replayed concretely
through both functions; only a replay that actually diverges is
reported as NonEquivalent, so every witness is a hard test case.
Replay runs twice: once answering abstracted operations from the
solver's model table, once computing multiplication, division, modulo,
and exponentiation with real modular arithmetic.  Unless
`trust_uf_witness` is set, both replays must diverge, which filters
models that exploit the uninterpreted-function abstraction (for
example assigning different values to `a*b` and `b*a`).

Keyed storage (mappings, storage arrays) is compared at a fresh probe
key per slot: the final contents of the two write logs are resolved at
the probe and must agree for every probe value, which is exactly
extensional map equality over the shared initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .edits import EditSet, RenameVariable, SplitFunction
from .errors import ArityMismatch
from .ir import IRFunction, IRModule, storage_slot
from . import smt
from .symexec import (
    App, Bounds, FALSE, Lit, PathSummary, Resolver, Sym, SymbolicSummary,
    TRUE, Term, big_and, big_or, concrete_run, mk, mk_eq, mk_not,
    render_term, resolve_keyed, symbolic_summary, word,
)


# ---------------------------------------------------------------------------
# alignment


@dataclass(frozen=True)
class AlignmentMap:
    """Pairs of (original entity, optimized entity) per observable class."""

    params: tuple[tuple[str, str], ...]
    storage: tuple[tuple[str, str], ...]

    def storage_to_original(self) -> dict[str, str]:
        return {opt: orig for orig, opt in self.storage if opt != orig}

    def storage_to_optimized(self) -> dict[str, str]:
        return {orig: opt for orig, opt in self.storage if opt != orig}

    def to_json(self) -> dict:
        return {
            "params": [list(p) for p in self.params],
            "storage": [list(p) for p in self.storage],
        }


def _param_names(fn) -> list[str]:
    out = []
    for p in fn.params:
        out.append(p if isinstance(p, str) else p.name)
    return out


def align(original, optimized, edits: EditSet | None = None) -> AlignmentMap:
    """Parameters by position, storage slots by id, renames honored."""
    edits = edits or EditSet(edits=())
    p0, p1 = _param_names(original), _param_names(optimized)
    if len(p0) != len(p1):
        if not any(isinstance(e, SplitFunction) for e in edits):
            raise ArityMismatch(
                f"{getattr(original, 'name', '?')} has {len(p0)} parameters "
                f"but the optimized version has {len(p1)} and no split edit "
                f"explains it")
    params = tuple(zip(p0, p1))
    renames: dict[str, str] = {}
    for e in edits:
        if isinstance(e, RenameVariable):
            old, new = storage_slot(e.old), storage_slot(e.new)
            if old != new:
                renames[old] = new
    storage = tuple(sorted(renames.items()))
    seen_new = [n for _, n in storage]
    if len(set(seen_new)) != len(seen_new):
        raise ArityMismatch("storage renames collide on a target slot")
    return AlignmentMap(params=params, storage=storage)


# ---------------------------------------------------------------------------
# slot renaming inside summaries

_SLOAD = "uf.sload."


def _map_sload_op(op: str, slot_map: dict[str, str]) -> str:
    if not op.startswith(_SLOAD):
        return op
    rest = op[len(_SLOAD):]
    slot, _, arity = rest.rpartition("/")
    mapped = slot_map.get(slot)
    return f"{_SLOAD}{mapped}/{arity}" if mapped else op


def _subst(t: Term, sym_map: dict[str, str], slot_map: dict[str, str],
           memo: dict) -> Term:
    if isinstance(t, Lit):
        return t
    if isinstance(t, Sym):
        new = sym_map.get(t.name)
        return Sym(new, t.sort) if new else t
    if t in memo:
        return memo[t]
    args = tuple(_subst(a, sym_map, slot_map, memo) for a in t.args)
    out = App(_map_sload_op(t.op, slot_map), args, t.sort)
    memo[t] = out
    return out


def _rename_summary(s: SymbolicSummary, to_orig: dict[str, str]
                    ) -> SymbolicSummary:
    """Rewrite a summary so its storage identities use original names."""
    if not to_orig:
        return s
    sym_map = {f"stor.{opt}": f"stor.{orig}"
               for opt, orig in to_orig.items()}
    memo: dict = {}

    def sub(t: Term) -> Term:
        return _subst(t, sym_map, to_orig, memo)

    paths = []
    for p in s.paths:
        paths.append(PathSummary(
            condition=tuple(sub(c) for c in p.condition),
            reverted=p.reverted,
            rets=tuple(sub(r) for r in p.rets),
            scalar_writes=tuple(sorted(
                (to_orig.get(slot, slot), sub(v))
                for slot, v in p.scalar_writes)),
            keyed_writes=tuple(sorted(
                (to_orig.get(slot, slot),
                 tuple((tuple(sub(k) for k in keys), sub(v))
                       for keys, v in log))
                for slot, log in p.keyed_writes)),
            calls=tuple((name, tuple(sub(a) for a in args))
                        for name, args in p.calls),
        ))
    return SymbolicSummary(fn=s.fn, params=s.params, arg_syms=s.arg_syms,
                           paths=paths, bound_hit=s.bound_hit)


# ---------------------------------------------------------------------------
# the divergence formula


def _pure_uf(op: str, args: tuple) -> Term:
    return App(op, tuple(word(a) for a in args), "word")


def _final_keyed(slot: str, arity: int, log) -> Term:
    probes = tuple(Sym(f"probe.{slot}.{i}") for i in range(arity))
    return resolve_keyed(slot, probes, log, _pure_uf)


def _divergence(p: PathSummary, q: PathSummary) -> Term:
    if p.reverted != q.reverted:
        return TRUE
    if p.reverted:
        return FALSE
    diffs: list[Term] = []
    if len(p.rets) != len(q.rets):
        return TRUE
    for a, b in zip(p.rets, q.rets):
        diffs.append(mk_not(mk_eq(a, b)))

    ps, qs = dict(p.scalar_writes), dict(q.scalar_writes)
    for slot in sorted(set(ps) | set(qs)):
        a = ps.get(slot, Sym(f"stor.{slot}"))
        b = qs.get(slot, Sym(f"stor.{slot}"))
        diffs.append(mk_not(mk_eq(a, b)))

    pk, qk = dict(p.keyed_writes), dict(q.keyed_writes)
    for slot in sorted(set(pk) | set(qk)):
        la, lb = pk.get(slot, ()), qk.get(slot, ())
        arities = {len(keys) for keys, _ in (*la, *lb)}
        if len(arities) != 1:
            return TRUE
        arity = arities.pop()
        diffs.append(mk_not(mk_eq(
            _final_keyed(slot, arity, la), _final_keyed(slot, arity, lb))))

    if len(p.calls) != len(q.calls):
        return TRUE
    for (name_a, args_a), (name_b, args_b) in zip(p.calls, q.calls):
        if name_a != name_b or len(args_a) != len(args_b):
            return TRUE
        for a, b in zip(args_a, args_b):
            diffs.append(mk_not(mk_eq(a, b)))
    return big_or(diffs)


def equivalence_assertion(s: SymbolicSummary, s_opt: SymbolicSummary,
                          amap: AlignmentMap) -> Term:
    """Satisfiable iff some input drives a pair of paths apart, or the
    two functions' path-condition covers differ."""
    q_sum = _rename_summary(s_opt, amap.storage_to_original())
    disjuncts: list[Term] = []
    for p in s.paths:
        for q in q_sum.paths:
            d = _divergence(p, q)
            if d == FALSE:
                continue
            clause = big_and([*p.condition, *q.condition, d])
            if clause != FALSE:
                disjuncts.append(clause)
    cover_p = big_or([p.pc for p in s.paths])
    cover_q = big_or([q.pc for q in q_sum.paths])
    if cover_p != cover_q:
        disjuncts.append(mk("xor", cover_p, cover_q))
    return big_or(disjuncts)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class Witness:
    inputs: dict[str, int]
    environment: dict[str, int]
    storage: dict[str, int]
    uf_table: tuple
    differs: tuple
    confirmed_by: str

    def to_json(self) -> dict:
        return {
            "inputs": dict(self.inputs),
            "environment": dict(self.environment),
            "storage": dict(self.storage),
            "uninterpreted": [
                {"op": op, "args": list(args), "value": v}
                for (op, args), v in self.uf_table
            ],
            "differs": {
                "observable": self.differs[0],
                "original": self.differs[1],
                "optimized": self.differs[2],
            },
            "confirmed_by": self.confirmed_by,
        }


@dataclass(frozen=True)
class EquivalenceVerdict:
    outcome: str                    # Equivalent | NonEquivalent | Inconclusive
    reason: str | None = None       # bound_hit | solver_timeout | solver_unknown
    witness: Witness | None = None
    solver_status: str | None = None

    @property
    def equivalent(self) -> bool:
        return self.outcome == "Equivalent"

    def to_json(self) -> dict:
        out: dict = {"outcome": self.outcome}
        if self.reason:
            out["reason"] = self.reason
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        if self.solver_status:
            out["solver_status"] = self.solver_status
        return out


@dataclass
class ReplayContext:
    original: IRFunction
    original_module: IRModule
    optimized: IRFunction
    optimized_module: IRModule
    to_optimized: dict[str, str] = field(default_factory=dict)

    def _translate(self, syms: dict[str, int], table: dict[tuple, int]
                   ) -> tuple[dict[str, int], dict[tuple, int]]:
        if not self.to_optimized:
            return syms, table
        sym_map = {f"stor.{orig}": f"stor.{opt}"
                   for orig, opt in self.to_optimized.items()}
        syms2 = {sym_map.get(k, k): v for k, v in syms.items()}
        table2 = {(_map_sload_op(op, self.to_optimized), args): v
                  for (op, args), v in table.items()}
        return syms2, table2

    def replay(self, syms: dict[str, int], table: dict[tuple, int],
               mode: str):
        """Run both sides concretely; outcomes use original slot names."""
        left = concrete_run(self.original, self.original_module,
                            Resolver(syms, table, mode))
        syms2, table2 = self._translate(syms, table)
        right = concrete_run(self.optimized, self.optimized_module,
                             Resolver(syms2, table2, mode))
        back = {opt: orig for orig, opt in self.to_optimized.items()}
        if back and right.completed and not right.reverted:
            right.scalars = {back.get(s, s): v
                             for s, v in right.scalars.items()}
            right.keyed = {back.get(s, s): v for s, v in right.keyed.items()}
        return left, right


def _compare_with_base(left, right, syms: dict[str, int],
                       table: dict[tuple, int]):
    """First differing observable, reading unwritten storage from the
    shared initial state and treating a missing return as a mismatch."""
    if not (left.completed and right.completed):
        return None
    if left.reverted != right.reverted:
        return ("reverted", int(left.reverted), int(right.reverted))
    lo, ro = left.observables(), right.observables()

    def default(key: str):
        if key == "calls":
            return []
        if key.startswith("ret["):
            return None
        if key.startswith("storage."):
            body = key[len("storage."):]
            if "[" in body:
                slot, _, rest = body.partition("[")
                keys = tuple(int(k) for k in rest[:-1].split(",") if k)
                return table.get((f"uf.sload.{slot}/{len(keys)}", keys), 0)
            return syms.get(f"stor.{body}", 0)
        return 0

    for key in sorted(set(lo) | set(ro)):
        lv = lo.get(key, default(key))
        rv = ro.get(key, default(key))
        if lv != rv:
            return (key, lv, rv)
    return None


def decide(phi: Term, solver: smt.SolverCommand | None, timeout_s: float,
           context: ReplayContext | None = None, bound_hit: bool = False,
           trust_uf_witness: bool = False) -> EquivalenceVerdict:
    """Solve the divergence formula and gate any model through replay."""
    if phi == FALSE:
        if bound_hit:
            return EquivalenceVerdict("Inconclusive", reason="bound_hit")
        return EquivalenceVerdict("Equivalent", solver_status="folded")

    if phi == TRUE:
        syms: dict[str, int] = {}
        table: dict[tuple, int] = {}
        status = "folded"
    else:
        emitted = smt.emit(phi)
        if solver is None:
            solver = smt.find_solver()
        reply = smt.solve(emitted, solver, timeout_s)
        status = reply.status
        if status == "unsat":
            if bound_hit:
                return EquivalenceVerdict("Inconclusive", reason="bound_hit",
                                          solver_status=status)
            return EquivalenceVerdict("Equivalent", solver_status=status)
        if status == "timeout":
            return EquivalenceVerdict("Inconclusive", reason="solver_timeout",
                                      solver_status=status)
        if status in ("unknown", "error"):
            return EquivalenceVerdict("Inconclusive", reason="solver_unknown",
                                      solver_status=status)
        syms, table = smt.assignment_from_model(emitted, reply.values)

    if context is None:
        return EquivalenceVerdict("Inconclusive", reason="solver_unknown",
                                  solver_status=status)

    def attempt(mode: str):
        left, right = context.replay(syms, table, mode)
        return _compare_with_base(left, right, syms, table)

    diff_table = attempt("table")
    if diff_table is None:
        return EquivalenceVerdict("Inconclusive", reason="solver_unknown",
                                  solver_status=status)
    if trust_uf_witness:
        confirmed, diff = "table", diff_table
    else:
        diff_real = attempt("real")
        if diff_real is None:
            return EquivalenceVerdict("Inconclusive", reason="solver_unknown",
                                      solver_status=status)
        confirmed, diff = "table+real", diff_real

    params = _param_names(context.original)
    witness = Witness(
        inputs={p: syms.get(f"arg{i}", 0) for i, p in enumerate(params)},
        environment={k: v for k, v in sorted(syms.items())
                     if k.startswith("env.") or k.startswith("probe.")},
        storage={k[len("stor."):]: v for k, v in sorted(syms.items())
                 if k.startswith("stor.")},
        uf_table=tuple(sorted(table.items())),
        differs=diff,
        confirmed_by=confirmed,
    )
    return EquivalenceVerdict("NonEquivalent", witness=witness,
                              solver_status=status)


# ---------------------------------------------------------------------------
# one-stop entry point


def check_equivalence(original: IRFunction, original_module: IRModule,
                      optimized: IRFunction, optimized_module: IRModule,
                      edits: EditSet | None = None,
                      bounds: Bounds | None = None,
                      solver: smt.SolverCommand | None = None,
                      timeout_s: float = 10.0,
                      trust_uf_witness: bool = False) -> EquivalenceVerdict:
    amap = align(original, optimized, edits)
    s = symbolic_summary(original, original_module, bounds)
    s_opt = symbolic_summary(optimized, optimized_module, bounds)
    phi = equivalence_assertion(s, s_opt, amap)
    context = ReplayContext(
        original=original, original_module=original_module,
        optimized=optimized, optimized_module=optimized_module,
        to_optimized=amap.storage_to_optimized(),
    )
    return decide(phi, solver, timeout_s, context=context,
                  bound_hit=s.bound_hit or s_opt.bound_hit,
                  trust_uf_witness=trust_uf_witness)


def assertion_text(phi: Term) -> str:
    """Readable rendering, mostly for logs and reports."""
    return render_term(phi)
