"""Control-flow, data-flow, and call graphs over the IR.

The data-flow graph is def-use: an edge (def_site, use_site, var) means
the definition reaches that use along some path with no intervening
redefinition.  Computed by the standard iterative reaching-definitions
worklist; storage slots participate as function-spanning pseudo
variables named "stor:<slot>" so cross-statement state flow shows up in
the same machinery.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import UnknownFunction
from .ir import ConstV, IRFunction, IRInstr, IRModule, Temp, Value, VarRef

Site = tuple[str, int]  # (block label, instruction index); entry defs use index -1

ENTRY_SITE: Site = ("entry", -1)


# ================================================================ CFG


@dataclass
class CFG:
    fn: IRFunction
    entry: str
    succs: dict[str, list[tuple[str, str]]]  # label -> [(succ, kind)]
    preds: dict[str, list[str]]
    dropped: list[str] = field(default_factory=list)

    def blocks(self):
        return [b for b in self.fn.blocks if b.label not in set(self.dropped)]


def build_cfg(fn: IRFunction) -> CFG:
    layout = [b.label for b in fn.blocks]
    succs: dict[str, list[tuple[str, str]]] = {l: [] for l in layout}
    for i, block in enumerate(fn.blocks):
        term = block.terminator
        if term is None:
            if i + 1 < len(fn.blocks):
                succs[block.label].append((fn.blocks[i + 1].label, "fallthrough"))
        elif term.op == "jump":
            succs[block.label].append((term.labels[0], "fallthrough"))
        elif term.op == "branch":
            succs[block.label].append((term.labels[0], "branch-true"))
            succs[block.label].append((term.labels[1], "branch-false"))
        # ret: no successors
    entry = layout[0]
    reachable = {entry}
    work = deque([entry])
    while work:
        cur = work.popleft()
        for nxt, _ in succs[cur]:
            if nxt not in reachable:
                reachable.add(nxt)
                work.append(nxt)
    dropped = [l for l in layout if l not in reachable]
    for l in dropped:
        succs.pop(l)
    preds: dict[str, list[str]] = {l: [] for l in succs}
    for src, outs in succs.items():
        for dst, _ in outs:
            preds[dst].append(src)
    return CFG(fn=fn, entry=entry, succs=succs, preds=preds, dropped=dropped)


def export_edges(cfg: CFG) -> list[str]:
    """Debug dump, one `a -> b [kind]` line per edge, sorted."""
    lines = []
    for src in sorted(cfg.succs):
        for dst, kind in cfg.succs[src]:
            lines.append(f"{src} -> {dst} [{kind}]")
    return sorted(lines)


# ================================================================ def/use

def instr_defs(ins: IRInstr) -> list[str]:
    out = []
    if ins.op == "store_storage":
        out.append(f"stor:{ins.slot}")
    elif ins.op == "index_put":
        if ins.dest:
            out.append(ins.dest)
    elif ins.dest:
        out.append(ins.dest)
    return out


def instr_uses(ins: IRInstr) -> list[str]:
    used: list[str] = []

    def add(v: Value | None):
        if isinstance(v, (Temp, VarRef)):
            used.append(v.name)

    for a in ins.args:
        add(a)
    for k in ins.keys:
        add(k)
    add(ins.receiver)
    if ins.op == "load_storage":
        used.append(f"stor:{ins.slot}")
    return used


# ================================================================ DFG


@dataclass
class DFG:
    fn: IRFunction
    edges: set[tuple[Site, Site, str]]
    entry_defs: set[str]  # names defined virtually at entry (params, storage)

    def uses_of(self, var: str) -> list[Site]:
        return sorted({u for _, u, v in self.edges if v == var})

    def defs_reaching(self, use: Site, var: str) -> list[Site]:
        return sorted({d for d, u, v in self.edges if u == use and v == var})


def build_dfg(fn: IRFunction, cfg: CFG) -> DFG:
    blocks = cfg.blocks()
    order = [b.label for b in blocks]
    by_label = {b.label: b for b in blocks}

    entry_defs = set(fn.params)
    for _, ins in fn.instructions():
        if ins.op == "load_storage":
            entry_defs.add(f"stor:{ins.slot}")
        elif ins.op == "store_storage":
            entry_defs.add(f"stor:{ins.slot}")
        # plain reads of names never defined locally (callee-less flows,
        # environment roots) get virtual entry definitions too
    defined_somewhere = set()
    for _, ins in fn.instructions():
        defined_somewhere.update(instr_defs(ins))
    for _, ins in fn.instructions():
        for name in instr_uses(ins):
            if name not in defined_somewhere:
                entry_defs.add(name)

    # gen/kill per block over (site, var) pairs
    gen: dict[str, dict[str, Site]] = {}
    for label in order:
        current: dict[str, Site] = {}
        for idx, ins in enumerate(by_label[label].instrs):
            for var in instr_defs(ins):
                current[var] = (label, idx)
        gen[label] = current

    in_sets: dict[str, set[tuple[Site, str]]] = {l: set() for l in order}
    out_sets: dict[str, set[tuple[Site, str]]] = {l: set() for l in order}
    entry_pairs = {(ENTRY_SITE, v) for v in entry_defs}

    work = deque(order)
    while work:
        label = work.popleft()
        incoming: set[tuple[Site, str]] = set()
        if label == cfg.entry:
            incoming |= entry_pairs
        for p in cfg.preds.get(label, []):
            incoming |= out_sets[p]
        in_sets[label] = incoming
        killed = set(gen[label])
        outgoing = {(s, v) for (s, v) in incoming if v not in killed}
        outgoing |= {(site, var) for var, site in gen[label].items()}
        if outgoing != out_sets[label]:
            out_sets[label] = outgoing
            for nxt, _ in cfg.succs.get(label, []):
                work.append(nxt)

    edges: set[tuple[Site, Site, str]] = set()
    for label in order:
        live: dict[str, set[Site]] = {}
        for site, var in in_sets[label]:
            live.setdefault(var, set()).add(site)
        for idx, ins in enumerate(by_label[label].instrs):
            use_site = (label, idx)
            for var in instr_uses(ins):
                for def_site in live.get(var, ()):
                    edges.add((def_site, use_site, var))
            for var in instr_defs(ins):
                live[var] = {(label, idx)}
    return DFG(fn=fn, edges=edges, entry_defs=entry_defs)


# ================================================================ call graph


@dataclass
class CallGraph:
    nodes: list[str]
    edges: set[tuple[str, str]]
    externals: set[str]
    call_sites: dict[tuple[str, str], list[Site]] = field(default_factory=dict)

    def callees(self, fn: str) -> list[str]:
        return sorted(d for s, d in self.edges if s == fn)

    def callers(self, fn: str) -> list[str]:
        return sorted(s for s, d in self.edges if d == fn)


def call_graph(module: IRModule) -> CallGraph:
    defined = {f.name for f in module.functions}
    edges: set[tuple[str, str]] = set()
    externals: set[str] = set()
    sites: dict[tuple[str, str], list[Site]] = {}
    for fn in module.functions:
        for label, ins in fn.instructions():
            if ins.op != "call":
                continue
            callee = ins.callee
            if callee in defined:
                edges.add((fn.name, callee))
                idx = fn.block(label).instrs.index(ins)
                sites.setdefault((fn.name, callee), []).append((label, idx))
            else:
                externals.add(callee)
    return CallGraph(nodes=[f.name for f in module.functions], edges=edges,
                     externals=externals, call_sites=sites)


def call_chains(graph: CallGraph, fn: str) -> list[list[str]]:
    """Maximal simple call chains through fn, longest-extension first.

    A chain is a simple path in the call graph that passes through fn
    and cannot be extended on either end without repeating a node.
    Self-loops contribute the function itself once.
    """
    if fn not in graph.nodes:
        raise UnknownFunction(fn)
    ups = _simple_paths_up(graph, fn)
    downs = _simple_paths_down(graph, fn)
    chains = []
    for up in ups:
        for down in downs:
            if set(up[:-1]) & set(down[1:]):
                continue  # would repeat a node around fn
            chains.append(up[:-1] + [fn] + down[1:])
    # deterministic: by descending length then lexicographic
    chains.sort(key=lambda c: (-len(c), c))
    return chains


def chain_context(graph: CallGraph, fn: str) -> list[str]:
    """Functions on chains through fn, concatenated, first occurrence kept."""
    seen: list[str] = []
    for chain in call_chains(graph, fn):
        for name in chain:
            if name not in seen:
                seen.append(name)
    return seen


def _simple_paths_up(graph: CallGraph, fn: str) -> list[list[str]]:
    """Paths caller...fn (inclusive) that cannot be extended upward."""
    out: list[list[str]] = []

    def walk(node: str, path: list[str]):
        callers = [c for c in graph.callers(node) if c not in path and c != node]
        if not callers:
            out.append(list(reversed(path)))
            return
        for c in callers:
            walk(c, path + [c])

    walk(fn, [fn])
    return out


def _simple_paths_down(graph: CallGraph, fn: str) -> list[list[str]]:
    out: list[list[str]] = []

    def walk(node: str, path: list[str]):
        callees = [c for c in graph.callees(node) if c not in path and c != node]
        if not callees:
            out.append(path)
            return
        for c in callees:
            walk(c, path + [c])

    walk(fn, [fn])
    return out
