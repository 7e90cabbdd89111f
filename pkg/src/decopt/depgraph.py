"""Labeled dependency graph over a unit, and slices of it.

Nodes are variables (locals, params, storage) and statements
("expression nodes").  Edges carry one of three labels:

* TD — type dependency: one fact per typing-relevant syntactic relation
  (assignment flow, call returns, operands/keys/targets of composite
  expressions, builtin signatures, declared types);
* SD — state dependency: reads and writes of storage slots;
* DFD — def-use flow lifted to statement level, classified by the
  control-flow role of its endpoints (declaration, return, call site,
  shared require prefix).

Each edge also records a `shape`: the template row that can verbalize
it.  Slices are reachability cones in the undirected view, with hop =
BFS distance from the slice target (hop(target) == 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import builtins
from . import syntax as syn
from .cfg import ENTRY_SITE, CallGraph, build_cfg, build_dfg, call_graph, chain_context
from .errors import EmptySlice, UnknownNode
from .ir import IRModule, lower_ir, storage_slot
from .parser import is_storage_name
from .soltypes import render as render_type
from .syntax import expr_variables, preorder_statements, render_stmt_head

TD, SD, DFD = "TD", "SD", "DFD"


@dataclass(frozen=True)
class DGNode:
    id: str
    kind: str                 # "var" | "expr"
    label: str                # display name / one-line statement text
    ref: tuple[int, int]      # source position
    fn: str | None = None     # scope; None for storage variables


@dataclass(frozen=True)
class DGEdge:
    src: str
    dst: str
    label: str                # TD | SD | DFD
    shape: str                # template row selector
    annot: tuple[tuple[str, str], ...] = ()  # sorted key/value pairs

    def get(self, key: str, default: str = "") -> str:
        for k, v in self.annot:
            if k == key:
                return v
        return default


def _annot(**kv: str) -> tuple[tuple[str, str], ...]:
    return tuple(sorted((k, str(v)) for k, v in kv.items() if v is not None))


@dataclass
class DependencyGraph:
    nodes: dict[str, DGNode] = field(default_factory=dict)
    edges: list[DGEdge] = field(default_factory=list)
    unit: syn.SourceUnit | None = None
    module: IRModule | None = None
    callgraph: CallGraph | None = None
    _edge_set: set[DGEdge] = field(default_factory=set)

    def add_node(self, node: DGNode) -> DGNode:
        if node.id not in self.nodes:
            self.nodes[node.id] = node
        return self.nodes[node.id]

    def add_edge(self, edge: DGEdge):
        if edge.src not in self.nodes or edge.dst not in self.nodes:
            raise UnknownNode(f"edge endpoint missing: {edge.src} -> {edge.dst}")
        if edge not in self._edge_set:
            self._edge_set.add(edge)
            self.edges.append(edge)

    def incident(self, node_id: str) -> list[DGEdge]:
        return [e for e in self.edges if e.src == node_id or e.dst == node_id]

    def to_json(self) -> str:
        payload = {
            "nodes": [
                {"id": n.id, "kind": n.kind, "label": n.label,
                 "ref": list(n.ref), "fn": n.fn}
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "edges": [
                {"src": e.src, "dst": e.dst, "label": e.label,
                 "shape": e.shape, "annot": dict(e.annot)}
                for e in sorted(self.edges,
                                key=lambda e: (e.src, e.dst, e.label, e.shape, e.annot))
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclass
class SliceGraph:
    target: str
    nodes: dict[str, DGNode]
    edges: list[DGEdge]
    hops: dict[str, int]
    graph: DependencyGraph

    def edge_hop(self, e: DGEdge) -> int:
        return min(self.hops.get(e.src, 1 << 30), self.hops.get(e.dst, 1 << 30))

    def edges_by_hop(self) -> list[DGEdge]:
        def sort_key(e: DGEdge):
            src = self.nodes[e.src]
            dst = self.nodes[e.dst]
            near = min(src.ref, dst.ref)
            return (self.edge_hop(e), near, e.label, e.shape, e.src, e.dst)
        return sorted(self.edges, key=sort_key)


# ================================================================ node ids


def var_node_id(fn: str | None, name: str) -> str:
    return f"stor:{name}" if fn is None else f"var:{fn}:{name}"


def expr_node_id(fn: str, stmt_index: int) -> str:
    return f"expr:{fn}:{stmt_index}"


def storage_decl_node_id(name: str) -> str:
    return f"expr::{name}"


# ================================================================ assembly


def assemble_dg(unit: syn.SourceUnit, module: IRModule | None = None) -> DependencyGraph:
    if module is None:
        module = lower_ir(unit)
    dg = DependencyGraph(unit=unit, module=module, callgraph=call_graph(module))
    builder = _Builder(dg, unit, module)
    builder.run()
    return dg


class _Builder:
    def __init__(self, dg: DependencyGraph, unit: syn.SourceUnit, module: IRModule):
        self.dg = dg
        self.unit = unit
        self.module = module
        self.storage_declared = unit.storage_names()
        # fn -> stmt_index -> Stmt
        self.stmts: dict[str, dict[int, syn.Stmt]] = {}
        # fn -> returned variable names
        self.returned: dict[str, list[str]] = {}

    # ------------------------------------------------------------ helpers

    def is_storage(self, name: str) -> bool:
        return is_storage_name(name, self.storage_declared)

    def var_node(self, fn: str, name: str, pos) -> str:
        if self.is_storage(name):
            nid = var_node_id(None, name)
            self.dg.add_node(DGNode(nid, "var", name, pos, fn=None))
        else:
            nid = var_node_id(fn, name)
            self.dg.add_node(DGNode(nid, "var", name, pos, fn=fn))
        return nid

    def expr_node(self, fn: str, idx: int, label: str, pos) -> str:
        nid = expr_node_id(fn, idx)
        self.dg.add_node(DGNode(nid, "expr", label, pos, fn=fn))
        return nid

    def vars_of(self, e: syn.Expr):
        """Variable occurrences minus environment roots and callee names."""
        for name, pos, role in expr_variables(e):
            if builtins.is_environment_name(name):
                continue
            yield name, pos, role

    # ------------------------------------------------------------ run

    def run(self):
        for decl in self.unit.storage:
            nid = var_node_id(None, decl.name)
            self.dg.add_node(DGNode(nid, "var", decl.name, decl.pos, fn=None))
        for fn in self.unit.functions:
            self.stmts[fn.name] = dict(preorder_statements(fn))
            self.returned[fn.name] = self._returned_vars(fn)
        for decl in self.unit.storage:
            self._storage_decl_edges(decl)
        for fn in self.unit.functions:
            self._header_edges(fn)
            for idx, stmt in self.stmts[fn.name].items():
                self._type_edges(fn, idx, stmt)
                self._state_edges(fn, idx, stmt)
        self._flow_edges()
        self._modifier_edges()

    def _returned_vars(self, fn: syn.FunctionDecl) -> list[str]:
        names: list[str] = []
        for _, stmt in preorder_statements(fn):
            if isinstance(stmt, syn.Return):
                for v in stmt.values:
                    if isinstance(v, syn.Var) and not self.is_storage(v.name):
                        names.append(v.name)
        return names

    # ------------------------------------------------------------ TD

    def _storage_decl_edges(self, decl: syn.StorageDecl):
        if decl.decl_type is None:
            return
        enid = storage_decl_node_id(decl.name)
        self.dg.add_node(DGNode(enid, "expr", syn._storage_line(decl),
                                decl.pos, fn=None))
        vnid = var_node_id(None, decl.name)
        self.dg.add_edge(DGEdge(enid, vnid, TD, "type_var", _annot(
            name=decl.name, type=render_type(decl.decl_type))))

    def _header_edges(self, fn: syn.FunctionDecl):
        header = syn._function_lines(fn)[0]
        hnid = self.expr_node(fn.name, 0, header, fn.pos)
        for p in fn.params:
            vnid = self.var_node(fn.name, p.name, fn.pos)
            if p.decl_type is not None:
                self.dg.add_edge(DGEdge(hnid, vnid, TD, "type_var", _annot(
                    name=p.name, type=render_type(p.decl_type))))

    def _type_edges(self, fn: syn.FunctionDecl, idx: int, stmt: syn.Stmt):
        label = render_stmt_head(stmt)
        enid = self.expr_node(fn.name, idx, label, stmt.pos)

        target_name: str | None = None
        value: syn.Expr | None = None
        if isinstance(stmt, syn.VarDecl):
            target_name, value = stmt.name, stmt.init
            if stmt.decl_type is not None:
                vnid = self.var_node(fn.name, stmt.name, stmt.pos)
                self.dg.add_edge(DGEdge(enid, vnid, TD, "type_var", _annot(
                    name=stmt.name, type=render_type(stmt.decl_type))))
        elif isinstance(stmt, (syn.Assign, syn.StorageWrite)):
            value = stmt.value
            if isinstance(stmt.target, syn.Var):
                target_name = stmt.target.name

        if value is not None and target_name is not None:
            self._value_flow_edges(fn, enid, target_name, value, stmt)

        # builtin values used anywhere in the statement constrain the
        # variable they are compared or combined with
        for expr in _stmt_exprs(stmt):
            self._builtin_value_edges(fn, enid, expr, stmt)

        # operand / key / target / value roles
        roles: dict[str, str] = {}
        if isinstance(stmt, (syn.Assign, syn.StorageWrite)):
            for name, pos, role in self.vars_of(stmt.target):
                roles[name] = role if role != "operand" else "target"
            for name, pos, role in self.vars_of(stmt.value):
                roles.setdefault(name, "value" if isinstance(stmt, syn.StorageWrite)
                                 and role == "operand" else role)
        direct_copy = isinstance(value, syn.Var) and target_name is not None
        for expr in _stmt_exprs(stmt):
            for name, pos, role in self.vars_of(expr):
                if direct_copy and value is not None \
                        and isinstance(value, syn.Var) and name == value.name:
                    continue  # already a var_var edge
                vnid = self.var_node(fn.name, name, pos)
                alt = roles.get(name, role)
                self.dg.add_edge(DGEdge(vnid, enid, TD, "var_expr", _annot(
                    name=name, alt=alt)))

    def _value_flow_edges(self, fn: syn.FunctionDecl, enid: str,
                          target_name: str, value: syn.Expr, stmt: syn.Stmt):
        tnid = self.var_node(fn.name, target_name, stmt.pos)
        if isinstance(value, syn.Var):
            snid = self.var_node(fn.name, value.name, value.pos)
            self.dg.add_edge(DGEdge(snid, tnid, TD, "var_var", _annot(
                src=value.name, dst=target_name)))
            return
        if isinstance(value, syn.Call) and isinstance(value.callee, syn.TypeRef):
            self.dg.add_edge(DGEdge(enid, tnid, TD, "type_var", _annot(
                name=target_name, type=render_type(value.callee.type))))
            return
        if isinstance(value, syn.Call) and isinstance(value.callee, syn.Var):
            callee = value.callee.name
            sig = builtins.function_signature(callee)
            if sig is not None:
                self.dg.add_edge(DGEdge(enid, tnid, TD, "type_expr", _annot(
                    name=callee, type=render_type(sig.ret))))
                return
            self.dg.add_edge(DGEdge(enid, tnid, TD, "expr_var", _annot(
                name=target_name)))
            if self.unit.function(callee) is not None:
                for rname in self.returned[callee]:
                    rnid = self.var_node(callee, rname, value.pos)
                    self.dg.add_edge(DGEdge(rnid, tnid, TD, "var_var", _annot(
                        src=rname, dst=target_name)))
            return
        if isinstance(value, syn.Member):
            base = value.base
            if isinstance(base, syn.Var) and builtins.is_namespace(base.name):
                mtype = builtins.member_type(base.name, value.name)
                if mtype is not None:
                    self.dg.add_edge(DGEdge(enid, tnid, TD, "type_expr", _annot(
                        name=f"{base.name}.{value.name}", type=render_type(mtype))))
                    return
        # general expression: the target's type depends on it
        self.dg.add_edge(DGEdge(enid, tnid, TD, "expr_var", _annot(name=target_name)))

    def _builtin_value_edges(self, fn: syn.FunctionDecl, enid: str,
                             expr: syn.Expr, stmt: syn.Stmt):
        """Type->Expression facts for builtin values compared to variables."""

        def peer_var(a: syn.Expr) -> syn.Var | None:
            node = a
            while isinstance(node, syn.Index):
                node = node.base
            return node if isinstance(node, syn.Var) else None

        def walk(node: syn.Expr):
            if isinstance(node, syn.BinOp):
                for side, other in ((node.left, node.right), (node.right, node.left)):
                    btype = _builtin_value_type(side)
                    peer = peer_var(other)
                    if btype is not None and peer is not None \
                            and not builtins.is_environment_name(peer.name):
                        vnid = self.var_node(fn.name, peer.name, peer.pos)
                        self.dg.add_edge(DGEdge(enid, vnid, TD, "type_expr", _annot(
                            name=_builtin_value_name(side), type=render_type(btype))))
                walk(node.left)
                walk(node.right)
            elif isinstance(node, syn.UnOp):
                walk(node.operand)
            elif isinstance(node, syn.Call):
                for a in node.args:
                    walk(a)
            elif isinstance(node, (syn.Index, syn.SliceRange)):
                walk(node.base)
            elif isinstance(node, (syn.TupleExpr, syn.ArrayExpr)):
                for item in node.items:
                    walk(item)

        walk(expr)

    # ------------------------------------------------------------ SD

    def _state_edges(self, fn: syn.FunctionDecl, idx: int, stmt: syn.Stmt):
        label = render_stmt_head(stmt)
        reads: set[str] = set()
        writes: set[str] = set()
        if isinstance(stmt, (syn.Assign, syn.StorageWrite)):
            for name, _, _ in expr_variables(stmt.target):
                if self.is_storage(name):
                    root = _root_name(stmt.target)
                    if name == root:
                        writes.add(name)
                    else:
                        reads.add(name)  # storage var used as key
            for name, _, _ in expr_variables(stmt.value):
                if self.is_storage(name):
                    reads.add(name)
            if stmt.op != "=":
                reads |= writes
        else:
            for expr in _stmt_exprs(stmt):
                for name, _, _ in expr_variables(expr):
                    if self.is_storage(name):
                        reads.add(name)
        if not reads and not writes:
            return
        enid = self.expr_node(fn.name, idx, label, stmt.pos)
        for name in sorted(writes):
            vnid = self.var_node(fn.name, name, stmt.pos)
            self.dg.add_edge(DGEdge(vnid, enid, SD, "sd_write", _annot(name=name)))
            for rname in sorted(reads - {name}):
                rnid = self.var_node(fn.name, rname, stmt.pos)
                self.dg.add_edge(DGEdge(rnid, vnid, SD, "sd_var", _annot(
                    src=rname, dst=name)))
        for name in sorted(reads):
            vnid = self.var_node(fn.name, name, stmt.pos)
            self.dg.add_edge(DGEdge(enid, vnid, SD, "sd_read", _annot(name=name)))

    # ------------------------------------------------------------ DFD

    def _flow_edges(self):
        for irfn in self.module.functions:
            fn = self.unit.function(irfn.name)
            if fn is None:
                continue
            stmts = self.stmts[irfn.name]
            first_def = self._first_definitions(irfn.name)
            cfg = build_cfg(irfn)
            dfg = build_dfg(irfn, cfg)
            instr_stmt: dict[tuple[str, int], int] = {}
            for block in cfg.blocks():
                for i, ins in enumerate(block.instrs):
                    instr_stmt[(block.label, i)] = ins.stmt_index
            pairs: set[tuple[int, int, str]] = set()
            for def_site, use_site, var in dfg.edges:
                if def_site == ENTRY_SITE:
                    continue
                ds = instr_stmt.get(def_site)
                us = instr_stmt.get(use_site)
                if ds is None or us is None or ds == us:
                    continue
                pairs.add((ds, us, var))
            for ds, us, var in sorted(pairs):
                dstmt = stmts.get(ds)
                ustmt = stmts.get(us)
                if dstmt is None or ustmt is None:
                    continue
                shape = self._flow_shape(dstmt, ustmt, var, first_def, ds)
                src = self.expr_node(irfn.name, ds, render_stmt_head(dstmt), dstmt.pos)
                dst = self.expr_node(irfn.name, us, render_stmt_head(ustmt), ustmt.pos)
                self.dg.add_edge(DGEdge(src, dst, DFD, shape, _annot(var=var)))
            self._call_stmt_edges(irfn.name, stmts)

    def _first_definitions(self, fn_name: str) -> dict[str, int]:
        first: dict[str, int] = {}
        for idx, stmt in self.stmts[fn_name].items():
            name = None
            if isinstance(stmt, syn.VarDecl):
                name = stmt.name
            elif isinstance(stmt, syn.Assign) and isinstance(stmt.target, syn.Var):
                name = stmt.target.name
            if name is not None and name not in first:
                first[name] = idx
        return first

    def _flow_shape(self, dstmt, ustmt, var: str, first_def: dict[str, int],
                    ds: int) -> str:
        if isinstance(ustmt, syn.Return):
            return "cf_return"
        if _contains_call(dstmt) or _contains_call(ustmt):
            return "cf_call"
        return "cf_decl"

    def _call_stmt_edges(self, fn_name: str, stmts: dict[int, syn.Stmt]):
        """Every call-bearing statement points at the function header."""
        header = expr_node_id(fn_name, 0)
        if header not in self.dg.nodes:
            return
        for idx, stmt in stmts.items():
            if _contains_call(stmt):
                enid = self.expr_node(fn_name, idx, render_stmt_head(stmt), stmt.pos)
                self.dg.add_edge(DGEdge(enid, header, DFD, "cf_call", _annot()))

    def _modifier_edges(self):
        """Shared require-prefixes across functions read as inlined modifiers."""
        prefixes: dict[tuple[str, ...], list[tuple[str, list[int]]]] = {}
        for fn in self.unit.functions:
            run: list[int] = []
            texts: list[str] = []
            for idx, stmt in self.stmts[fn.name].items():
                if isinstance(stmt, syn.Require):
                    run.append(idx)
                    texts.append(render_stmt_head(stmt))
                else:
                    break
            if run:
                prefixes.setdefault(tuple(texts), []).append((fn.name, run))
        for texts, owners in prefixes.items():
            if len(owners) < 2:
                continue
            for fn_name, run in owners:
                stmts = self.stmts[fn_name]
                first, last = run[0], run[-1]
                src = self.expr_node(fn_name, first,
                                     render_stmt_head(stmts[first]), stmts[first].pos)
                dst = self.expr_node(fn_name, last,
                                     render_stmt_head(stmts[last]), stmts[last].pos)
                self.dg.add_edge(DGEdge(src, dst, DFD, "cf_modifier", _annot()))


def _stmt_exprs(stmt: syn.Stmt) -> list[syn.Expr]:
    if isinstance(stmt, syn.VarDecl):
        return [stmt.init] if stmt.init is not None else []
    if isinstance(stmt, (syn.Assign, syn.StorageWrite)):
        return [stmt.target, stmt.value]
    if isinstance(stmt, syn.ExprStmt):
        return [stmt.expr]
    if isinstance(stmt, syn.Require):
        return [stmt.cond]
    if isinstance(stmt, (syn.If,)):
        return [stmt.cond]
    if isinstance(stmt, syn.While):
        return [stmt.cond]
    if isinstance(stmt, syn.Return):
        return list(stmt.values)
    return []


def _contains_call(stmt: syn.Stmt) -> bool:
    def walk(e: syn.Expr) -> bool:
        if isinstance(e, syn.Call):
            if isinstance(e.callee, syn.TypeRef):
                return any(walk(a) for a in e.args)
            if isinstance(e.callee, syn.Var) and builtins.is_builtin_function(e.callee.name):
                return any(walk(a) for a in e.args)
            return True
        if isinstance(e, syn.BinOp):
            return walk(e.left) or walk(e.right)
        if isinstance(e, syn.UnOp):
            return walk(e.operand)
        if isinstance(e, syn.Member):
            return walk(e.base)
        if isinstance(e, (syn.Index,)):
            return walk(e.base) or walk(e.key)
        if isinstance(e, syn.SliceRange):
            parts = [e.base] + [x for x in (e.lo, e.hi) if x is not None]
            return any(walk(p) for p in parts)
        if isinstance(e, (syn.TupleExpr, syn.ArrayExpr)):
            return any(walk(x) for x in e.items)
        return False

    return any(walk(e) for e in _stmt_exprs(stmt) if e is not None)


def _builtin_value_type(e: syn.Expr):
    if isinstance(e, syn.Member) and isinstance(e.base, syn.Var) \
            and builtins.is_namespace(e.base.name):
        return builtins.member_type(e.base.name, e.name)
    if isinstance(e, syn.Var):
        return builtins.value_type(e.name)
    if isinstance(e, syn.Call) and isinstance(e.callee, syn.Var):
        sig = builtins.function_signature(e.callee.name)
        return sig.ret if sig else None
    return None


def _builtin_value_name(e: syn.Expr) -> str:
    if isinstance(e, syn.Member) and isinstance(e.base, syn.Var):
        return f"{e.base.name}.{e.name}"
    if isinstance(e, syn.Var):
        return e.name
    if isinstance(e, syn.Call) and isinstance(e.callee, syn.Var):
        return e.callee.name
    return "<builtin>"


def _root_name(e: syn.Expr) -> str | None:
    node = e
    while isinstance(node, (syn.Index, syn.Member, syn.SliceRange)):
        node = node.base
    return node.name if isinstance(node, syn.Var) else None


# ================================================================ slicing


def slice_variable(dg: DependencyGraph, node_id: str,
                   labels: set[str] | None = None) -> SliceGraph:
    if node_id not in dg.nodes:
        raise UnknownNode(node_id)
    pool = dg.edges if labels is None \
        else [e for e in dg.edges if e.label in labels]
    incident: dict[str, list[DGEdge]] = {}
    for e in pool:
        incident.setdefault(e.src, []).append(e)
        incident.setdefault(e.dst, []).append(e)
    if node_id not in incident:
        raise EmptySlice(node_id)
    hops = {node_id: 0}
    frontier = [node_id]
    while frontier:
        nxt: list[str] = []
        for nid in frontier:
            for e in incident.get(nid, ()):
                for other in (e.src, e.dst):
                    if other not in hops:
                        hops[other] = hops[nid] + 1
                        nxt.append(other)
        frontier = nxt
    nodes = {nid: dg.nodes[nid] for nid in hops}
    edges = [e for e in pool if e.src in hops and e.dst in hops]
    return SliceGraph(target=node_id, nodes=nodes, edges=edges, hops=hops, graph=dg)


def slice_function(dg: DependencyGraph, fn: str) -> list[str]:
    """Call-chain context for fn: chains through fn, first occurrence kept."""
    if dg.callgraph is None:
        raise UnknownNode("dependency graph has no call graph attached")
    return chain_context(dg.callgraph, fn)


def function_slice_view(dg: DependencyGraph, fns: list[str]) -> SliceGraph:
    """Flow-only pseudo-slice over the given functions' statement nodes.

    Used for boundary prompts: every node sits at hop 0 so ordering
    falls back to source position.
    """
    nodes = {nid: n for nid, n in dg.nodes.items()
             if n.kind == "expr" and n.fn in fns}
    edges = [e for e in dg.edges
             if e.label == DFD and e.src in nodes and e.dst in nodes]
    hops = {nid: 0 for nid in nodes}
    return SliceGraph(target=fns[0] if fns else "", nodes=nodes, edges=edges,
                      hops=hops, graph=dg)


def restrict_labels(s: SliceGraph, labels: set[str]) -> SliceGraph:
    edges = [e for e in s.edges if e.label in labels]
    return SliceGraph(target=s.target, nodes=s.nodes, edges=edges,
                      hops=s.hops, graph=s.graph)
