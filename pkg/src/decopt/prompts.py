"""Prompt assembly: code context, inference candidates, reasoning sentences.

A target names one thing to improve: a variable's type, a state
variable's attribute label, or a function's boundary.  Its prompt has
three parts:

* context — the statements its slice touches (variables) or the bodies
  of the functions on its call chains (boundaries);
* candidates — the closed answer set the reply must choose from
  (types or attribute labels; boundary prompts carry none);
* reasoning sentences — one per slice edge, each filled from the
  template row matching the edge's shape, ordered by ascending hop of
  the nearer endpoint with source position breaking ties.

Each target kind reads its own edge categories: types read TD and DFD
edges, attributes read SD and DFD edges, boundaries read DFD edges
only.  Bundles over the token budget drop highest-hop sentences first
and record the truncation; context statements are never dropped.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from . import syntax as syn
from .depgraph import (
    DependencyGraph,
    SliceGraph,
    function_slice_view,
    slice_function,
    slice_variable,
    var_node_id,
)
from .errors import EmptySlice, MissingTemplate, UnknownFunction, UnsupportedKind
from .soltypes import SolType, render as render_type

VariableType = "type"
ContractAttribute = "attribute"
FunctionBoundary = "boundary"

KINDS = (VariableType, ContractAttribute, FunctionBoundary)

KIND_LABELS = {
    VariableType: {"TD", "DFD"},
    ContractAttribute: {"SD", "DFD"},
    FunctionBoundary: {"DFD"},
}

ATTRIBUTE_LABELS = ["Limit", "Fee", "Flag", "Address", "Asset", "Router", "Others"]

DEFAULT_TOKEN_BUDGET = 6000
CHAIN_HOP_CAP = 3

_ALT_WORDS = {
    "operand": "operand(s)",
    "target": "target(s)",
    "key": "key(s)",
    "value": "value(s)",
}


@dataclass(frozen=True)
class OptimizationTarget:
    kind: str
    name: str                  # variable name, or function name for boundaries
    fn: str | None = None      # owning function; None for storage variables

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedKind(self.kind)
        if self.kind == FunctionBoundary and self.fn is not None:
            raise UnsupportedKind("boundary targets name a function, not a local")

    @property
    def target_id(self) -> str:
        if self.kind == FunctionBoundary:
            return f"boundary:{self.name}"
        return f"{self.kind}:{self.fn or ''}:{self.name}"

    @property
    def node_id(self) -> str:
        return var_node_id(self.fn, self.name)

    def describe(self) -> str:
        if self.kind == FunctionBoundary:
            return f"function {self.name}"
        if self.fn is None:
            return f"state variable {self.name}"
        return f"variable {self.name} in function {self.fn}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, "function": self.fn,
                "id": self.target_id}


@dataclass(frozen=True)
class CotTemplate:
    category: str
    row: str
    shape: str
    pattern: str


@dataclass(frozen=True)
class CotSentence:
    text: str
    hop: int
    shape: str
    alt: str | None = None


@dataclass
class PromptBundle:
    target: OptimizationTarget
    instruction: str
    context: str
    candidates: list[str]
    cot: list[CotSentence]
    output_contract: str
    budget: int = DEFAULT_TOKEN_BUDGET
    truncated: bool = False
    dropped: int = 0
    feedback: str = ""

    def text(self) -> str:
        parts = [self.instruction, "", f"Target: {self.target.describe()}", ""]
        parts += ["## Code context", self.context, ""]
        if self.candidates:
            parts.append("## Candidates")
            parts += [f"- {c}" for c in self.candidates]
            parts.append("")
        if self.cot:
            parts.append("## Dependency analysis")
            parts += [f"- {s.text}" for s in self.cot]
            parts.append("")
        if self.feedback:
            parts += ["## Verifier feedback", self.feedback, ""]
        parts += ["## Output format", self.output_contract]
        return "\n".join(parts)

    @property
    def prompt_hash(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    @property
    def estimated_tokens(self) -> int:
        return estimate_tokens(self.text())

    def to_json(self) -> str:
        return json.dumps({
            "target": self.target.to_dict(),
            "instruction": self.instruction,
            "context": self.context,
            "candidates": self.candidates,
            "cot": [{"text": s.text, "hop": s.hop, "shape": s.shape,
                     "alt": s.alt} for s in self.cot],
            "output_contract": self.output_contract,
            "budget": self.budget,
            "truncated": self.truncated,
            "dropped": self.dropped,
            "estimated_tokens": self.estimated_tokens,
            "prompt_hash": self.prompt_hash,
        }, indent=2, sort_keys=True)


def estimate_tokens(text: str) -> int:
    return (len(text) + 3) // 4


@lru_cache(maxsize=1)
def _template_data() -> dict:
    path = resources.files("decopt").joinpath("data/cot_templates.json")
    return json.loads(path.read_text())


@lru_cache(maxsize=1)
def load_templates() -> tuple[CotTemplate, ...]:
    return tuple(CotTemplate(t["category"], t["row"], t["shape"], t["pattern"])
                 for t in _template_data()["templates"])


@lru_cache(maxsize=1)
def _by_shape() -> dict[str, CotTemplate]:
    return {t.shape: t for t in load_templates()}


def instruction_for(kind: str) -> str:
    return _template_data()["instructions"][kind]


def output_contract_for(kind: str) -> str:
    return _template_data()["output_contract"][kind]


def candidates_for(kind: str) -> list[str]:
    if kind == VariableType:
        out = ["bool"]
        out += [f"uint{w}" for w in range(8, 257, 8)]
        out += [f"int{w}" for w in range(8, 257, 8)]
        out += ["address", "address payable"]
        out += [f"bytes{n}" for n in range(1, 33)]
        out += ["bytes", "string"]
        out += ["mapping(K => V)", "T[]", "T[k]", "tuple"]
        return out
    if kind == ContractAttribute:
        return list(ATTRIBUTE_LABELS)
    raise UnsupportedKind(kind)


# ========================================================== slice plumbing


def slice_for_target(dg: DependencyGraph, target: OptimizationTarget) -> SliceGraph:
    if target.kind == FunctionBoundary:
        fns = chain_functions(dg, target.name)
        return function_slice_view(dg, fns)
    return slice_variable(dg, target.node_id, labels=KIND_LABELS[target.kind])


def chain_functions(dg: DependencyGraph, fn: str) -> list[str]:
    """Call-chain context, capped at CHAIN_HOP_CAP call-graph hops."""
    if dg.callgraph is None or fn not in dg.callgraph.nodes:
        raise UnknownFunction(fn)
    order = slice_function(dg, fn)
    dist = {fn: 0}
    frontier = [fn]
    adj: dict[str, set[str]] = {}
    for a, b in dg.callgraph.edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    while frontier:
        nxt = []
        for cur in frontier:
            for other in sorted(adj.get(cur, ())):
                if other not in dist:
                    dist[other] = dist[cur] + 1
                    nxt.append(other)
        frontier = nxt
    return [f for f in order if dist.get(f, CHAIN_HOP_CAP + 1) <= CHAIN_HOP_CAP]


# ========================================================== rendering


def render_context(dg: DependencyGraph, target: OptimizationTarget,
                   s: SliceGraph) -> str:
    if target.kind == FunctionBoundary:
        unit = dg.unit
        chunks = []
        for name in chain_functions(dg, target.name):
            fn = unit.function(name)
            if fn is not None:
                chunks.append("\n".join(syn._function_lines(fn)))
        return "\n\n".join(chunks)
    stmts = [n for n in s.nodes.values() if n.kind == "expr"]
    if not stmts:
        raise EmptySlice(target.target_id)
    stmts.sort(key=lambda n: (n.ref, n.id))
    return "\n".join(n.label for n in stmts)


def render_cot(s: SliceGraph, dg: DependencyGraph) -> list[CotSentence]:
    by_shape = _by_shape()
    out: list[CotSentence] = []
    seen: set[str] = set()
    for e in s.edges_by_hop():
        tpl = by_shape.get(e.shape)
        if tpl is None:
            raise MissingTemplate(e.label, e.shape)
        sentence = _fill_sentence(tpl, e, s, dg)
        if sentence.text in seen:
            continue
        seen.add(sentence.text)
        out.append(sentence)
    return out


def _node_label(s: SliceGraph, nid: str) -> str:
    return s.nodes[nid].label


def _known_type_text(dg: DependencyGraph, nid: str) -> str:
    node = dg.nodes.get(nid)
    if node is None or dg.module is None:
        return "unknown"
    t: SolType | None = None
    if node.fn is None:
        t = dg.module.storage.get(node.label)
    else:
        irfn = dg.module.function(node.fn)
        if irfn is not None:
            t = irfn.decl_types.get(node.label)
    return render_type(t) if t is not None else "unknown"


def _fill(pattern: str, fills: list[str], placeholder: str) -> str:
    text = pattern
    for value in fills:
        text = text.replace(f"[{placeholder}]", value, 1)
    return text


def _fill_sentence(tpl: CotTemplate, e, s: SliceGraph,
                   dg: DependencyGraph) -> CotSentence:
    hop = s.edge_hop(e)
    shape = e.shape
    if shape == "var_var":
        src_name, dst_name = e.get("src"), e.get("dst")
        src_fn = s.nodes[e.src].fn if e.src in s.nodes else None
        dst_fn = s.nodes[e.dst].fn if e.dst in s.nodes else None
        if src_fn != dst_fn:
            if src_fn is not None:
                src_name = f"{src_name} of function {src_fn}"
            if dst_fn is not None:
                dst_name = f"{dst_name} of function {dst_fn}"
        text = _fill(tpl.pattern, [src_name, dst_name], "NAME")
    elif shape == "type_expr":
        text = _fill(tpl.pattern, [e.get("name")], "NAME")
        text = _fill(text, [_node_label(s, e.src)], "STATEMENT")
        text = _fill(text, [e.get("type")], "TYPE")
    elif shape == "type_var":
        text = _fill(tpl.pattern, [e.get("name")], "NAME")
        text = _fill(text, [e.get("type")], "TYPE")
    elif shape == "expr_var":
        text = _fill(tpl.pattern, [e.get("name")], "NAME")
        text = _fill(text, [_node_label(s, e.src)], "STATEMENT")
    elif shape == "var_expr":
        alt = e.get("alt", "operand")
        word = _ALT_WORDS.get(alt, "operand(s)")
        text = tpl.pattern.replace("operand(s)/target(s)/key(s)/value(s)", word)
        text = text.replace("is/are", "is")
        text = _fill(text, [_node_label(s, e.dst)], "STATEMENT")
        text = _fill(text, [_known_type_text(dg, e.src)], "TYPE")
        return CotSentence(text, hop, shape, alt=alt)
    elif shape == "sd_var":
        text = _fill(tpl.pattern, [e.get("src"), e.get("dst")], "NAME")
    elif shape == "sd_write":
        text = _fill(tpl.pattern, [e.get("name")], "NAME")
        text = _fill(text, [_node_label(s, e.dst)], "STATEMENT")
    elif shape == "sd_read":
        text = _fill(tpl.pattern, [e.get("name")], "NAME")
        text = _fill(text, [_node_label(s, e.src)], "STATEMENT")
    elif shape == "cf_call":
        text = _fill(tpl.pattern, [_node_label(s, e.src)], "STATEMENT")
    elif shape == "cf_modifier":
        text = _fill(tpl.pattern,
                     [_node_label(s, e.src), _node_label(s, e.dst)], "STATEMENT")
    elif shape == "cf_return":
        text = _fill(tpl.pattern, [_node_label(s, e.dst)], "STATEMENT")
    elif shape == "cf_decl":
        text = _fill(tpl.pattern, [_node_label(s, e.src)], "STATEMENT")
    else:
        raise MissingTemplate(e.label, shape)
    return CotSentence(text, hop, shape)


# ========================================================== assembly


def assemble_prompt(target: OptimizationTarget, context: str,
                    candidates: list[str], cot: list[CotSentence],
                    budget: int = DEFAULT_TOKEN_BUDGET,
                    feedback: str = "") -> PromptBundle:
    bundle = PromptBundle(
        target=target,
        instruction=instruction_for(target.kind),
        context=context,
        candidates=list(candidates),
        cot=list(cot),
        output_contract=output_contract_for(target.kind),
        budget=budget,
        feedback=feedback,
    )
    while bundle.cot and bundle.estimated_tokens > budget:
        bundle.cot.pop()  # ordered ascending: the tail is the farthest hop
        bundle.dropped += 1
        bundle.truncated = True
    if bundle.estimated_tokens > budget:
        bundle.truncated = True
    return bundle


def build_bundle(dg: DependencyGraph, target: OptimizationTarget,
                 budget: int = DEFAULT_TOKEN_BUDGET,
                 feedback: str = "") -> PromptBundle:
    s = slice_for_target(dg, target)
    context = render_context(dg, target, s)
    cot = render_cot(s, dg)
    if target.kind == FunctionBoundary:
        candidates: list[str] = []
    else:
        candidates = candidates_for(target.kind)
    return assemble_prompt(target, context, candidates, cot, budget, feedback)
