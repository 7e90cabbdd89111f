"""Prompt bundles: template coverage, golden snapshot, budget honoring."""

import pytest

from decopt.depgraph import DGEdge, DGNode, DependencyGraph, SliceGraph, assemble_dg
from decopt.errors import EmptySlice, UnknownFunction, UnsupportedKind
from decopt.parser import parse_unit
from decopt.prompts import (
    ATTRIBUTE_LABELS, CHAIN_HOP_CAP, ContractAttribute, FunctionBoundary,
    OptimizationTarget, VariableType, build_bundle, candidates_for,
    chain_functions, estimate_tokens, load_templates, render_cot,
)

from conftest import parse_fixture

# Byte-stable digest of the fig_mapping type bundle, frozen once.
GOLDEN_TYPE_BUNDLE_SHA256 = \
    "e6f2499f6eeef56884cd4f052d5fa5379bab8c0e92e5618bab3a2a4614b3b3de"

RESIDUE = ("[NAME]", "[STATEMENT]", "[TYPE]")


@pytest.fixture(scope="module")
def mapping_dg():
    return assemble_dg(parse_fixture("fig_mapping.dsol"))


# ------------------------------------------------------------- templates


def test_twelve_templates_with_unique_shapes():
    tpls = load_templates()
    assert len(tpls) == 12
    assert len({t.shape for t in tpls}) == 12
    assert {t.category for t in tpls} == {
        "TypeDependency", "StateDependency", "ControlFlowDependency"}


def _shape_edge(shape: str, label: str, dg: DependencyGraph) -> DGEdge:
    annot_by_shape = {
        "var_var": (("src", "a"), ("dst", "b")),
        "type_expr": (("name", "keccak256"), ("type", "bytes32")),
        "type_var": (("name", "a"), ("type", "uint256")),
        "expr_var": (("name", "a"),),
        "var_expr": (("alt", "key"), ("name", "a")),
        "sd_var": (("src", "stor_0"), ("dst", "a")),
        "sd_write": (("name", "stor_0"),),
        "sd_read": (("name", "stor_0"),),
        "cf_call": (),
        "cf_modifier": (),
        "cf_return": (),
        "cf_decl": (),
    }
    return DGEdge("expr:f:1", "expr:f:2", label, shape,
                  annot=tuple(sorted(annot_by_shape[shape])))


def test_every_template_renders_without_residue():
    dg = DependencyGraph()
    dg.add_node(DGNode("expr:f:1", "expr", "x = y + 1;", (1, 1), fn="f"))
    dg.add_node(DGNode("expr:f:2", "expr", "return x;", (2, 1), fn="f"))
    for tpl in load_templates():
        edge = _shape_edge(tpl.shape, tpl.category, dg)
        s = SliceGraph(target="expr:f:1", nodes=dict(dg.nodes),
                       edges=[edge], hops={"expr:f:1": 0, "expr:f:2": 1},
                       graph=dg)
        sentences = render_cot(s, dg)
        assert len(sentences) == 1, tpl.shape
        text = sentences[0].text
        assert text.strip(), tpl.shape
        for residue in RESIDUE:
            assert residue not in text, (tpl.shape, text)


# ------------------------------------------------------------ candidates


def test_type_candidates():
    got = candidates_for(VariableType)
    assert len(got) == 105
    for needed in ("bool", "uint256", "int8", "address payable", "bytes32",
                   "bytes", "string"):
        assert needed in got


def test_attribute_candidates_exact():
    assert candidates_for(ContractAttribute) == ATTRIBUTE_LABELS
    assert ATTRIBUTE_LABELS == ["Limit", "Fee", "Flag", "Address", "Asset",
                                "Router", "Others"]


def test_boundary_has_no_candidate_set():
    with pytest.raises(UnsupportedKind):
        candidates_for(FunctionBoundary)


# ---------------------------------------------------------------- golden


def test_type_bundle_golden_snapshot(mapping_dg):
    target = OptimizationTarget(VariableType, "v0", fn="setTokenValue")
    first = build_bundle(mapping_dg, target)
    second = build_bundle(assemble_dg(parse_fixture("fig_mapping.dsol")),
                          target)
    assert first.text() == second.text()
    assert first.prompt_hash == second.prompt_hash
    assert first.prompt_hash == GOLDEN_TYPE_BUNDLE_SHA256
    text = first.text()
    assert text.startswith("You are given decompiled smart contract code.")
    assert "Target: variable v0 in function setTokenValue" in text
    assert "## Code context" in text
    assert "## Candidates" in text
    assert "## Dependency analysis" in text
    assert "## Output format" in text
    for residue in RESIDUE:
        assert residue not in text


def test_bundle_sections_ordered(mapping_dg):
    target = OptimizationTarget(VariableType, "v0", fn="setTokenValue")
    text = build_bundle(mapping_dg, target).text()
    idx = [text.index(h) for h in
           ("## Code context", "## Candidates", "## Dependency analysis",
            "## Output format")]
    assert idx == sorted(idx)


def test_cot_hops_ascending(mapping_dg):
    target = OptimizationTarget(VariableType, "v0", fn="setTokenValue")
    bundle = build_bundle(mapping_dg, target)
    hops = [s.hop for s in bundle.cot]
    assert hops == sorted(hops)
    assert not bundle.truncated


def test_attribute_bundle(mapping_dg):
    target = OptimizationTarget(ContractAttribute, "uintStorage")
    bundle = build_bundle(mapping_dg, target)
    assert bundle.candidates == ATTRIBUTE_LABELS
    assert any("(Write)" in s.text for s in bundle.cot)
    assert "Target: state variable uintStorage" in bundle.text()


def test_boundary_bundle(mapping_dg):
    target = OptimizationTarget(FunctionBoundary, "setTokenValue")
    bundle = build_bundle(mapping_dg, target)
    assert bundle.candidates == []
    assert "function _getTokenKey" in bundle.context
    assert "function setTokenValue" in bundle.context


def test_feedback_section_placement(mapping_dg):
    target = OptimizationTarget(VariableType, "v0", fn="setTokenValue")
    plain = build_bundle(mapping_dg, target)
    assert "## Verifier feedback" not in plain.text()
    noted = build_bundle(mapping_dg, target,
                         feedback="Call rule violated at line 2.")
    text = noted.text()
    assert "## Verifier feedback" in text
    assert text.index("## Dependency analysis") \
        < text.index("## Verifier feedback") \
        < text.index("## Output format")


# ------------------------------------------------------------ budgeting


def test_truncation_drops_cot_tail(mapping_dg):
    target = OptimizationTarget(VariableType, "v0", fn="setTokenValue")
    full = build_bundle(mapping_dg, target)
    tight = build_bundle(mapping_dg, target, budget=120)
    assert tight.truncated and tight.dropped > 0
    assert len(tight.cot) + tight.dropped == len(full.cot)
    # what survives is a prefix of the full ordering
    assert [s.text for s in tight.cot] == \
        [s.text for s in full.cot[:len(tight.cot)]]
    assert tight.context == full.context


def test_estimate_tokens_formula():
    assert estimate_tokens("") == 0
    assert estimate_tokens("a") == 1
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2


# ----------------------------------------------------------- edge cases


def test_untouched_storage_attribute_raises_empty_slice():
    dg = assemble_dg(parse_unit(
        "uint256 stor_unused;\n\nfunction f() {\n    return 1;\n}\n"))
    target = OptimizationTarget(ContractAttribute, "stor_unused")
    with pytest.raises(EmptySlice):
        build_bundle(dg, target)


def test_unused_param_still_gets_header_context():
    # the declaring header anchors the slice, so a never-read parameter
    # still produces a prompt instead of an error
    dg = assemble_dg(parse_unit(
        "function f(uint256 unused) {\n    return 1;\n}\n"))
    bundle = build_bundle(dg, OptimizationTarget(VariableType, "unused",
                                                 fn="f"))
    assert "function f(uint256 unused)" in bundle.context


def test_boundary_unknown_function():
    dg = assemble_dg(parse_unit("function f() {\n    return 1;\n}\n"))
    with pytest.raises(UnknownFunction):
        build_bundle(dg, OptimizationTarget(FunctionBoundary, "ghost"))


def test_chain_context_capped():
    hops = CHAIN_HOP_CAP + 2
    fns = []
    for i in range(hops):
        callee = f"c{i + 1}" if i + 1 < hops else None
        body = f"    v = c{i + 1}(varg0);\n    return v;" if callee \
            else "    return varg0;"
        fns.append(f"function c{i}(uint256 varg0) {{\n{body}\n}}\n")
    dg = assemble_dg(parse_unit("".join(fns)))
    chain = chain_functions(dg, "c0")
    assert "c0" in chain
    assert f"c{CHAIN_HOP_CAP}" in chain
    assert f"c{CHAIN_HOP_CAP + 1}" not in chain


def test_target_validation():
    with pytest.raises(UnsupportedKind):
        OptimizationTarget("flavor", "x", fn="f")
    with pytest.raises(UnsupportedKind):
        OptimizationTarget(FunctionBoundary, "f", fn="g")
    t = OptimizationTarget(VariableType, "v0", fn="f")
    assert t.target_id == "type:f:v0"
    assert OptimizationTarget(ContractAttribute, "stor_0").target_id \
        == "attribute::stor_0"
    assert OptimizationTarget(FunctionBoundary, "f").target_id == "boundary:f"
