"""Control-flow and data-flow graphs over the IR, plus the call graph."""

from decopt.cfg import (
    build_cfg, build_dfg, call_chains, call_graph, chain_context, export_edges,
)
from decopt.ir import lower_ir
from decopt.parser import parse_unit

DIAMOND_LOOP = """\
function f(uint256 a, bool b) {
    if (b) {
        a = a + 1;
    } else {
        a = a + 2;
    }
    while (a > 0) {
        a = a - 1;
    }
    return a;
}
"""

CALLS = """\
function a() {
    v = b();
    return v;
}
function b() {
    v = c();
    return v;
}
function c() {
    return 1;
}
function d() {
    v = b();
    return v;
}
"""


def _fn(src: str, name: str = "f"):
    return lower_ir(parse_unit(src)).function(name)


def test_cfg_edges_frozen():
    cfg = build_cfg(_fn(DIAMOND_LOOP))
    assert export_edges(cfg) == [
        "L0 -> L2 [fallthrough]",
        "L1 -> L2 [fallthrough]",
        "L2 -> L3 [fallthrough]",
        "L3 -> L4 [branch-true]",
        "L3 -> L5 [branch-false]",
        "L4 -> L3 [fallthrough]",
        "entry -> L0 [branch-true]",
        "entry -> L1 [branch-false]",
    ]


def test_cfg_straight_line_no_edges_beyond_layout():
    cfg = build_cfg(_fn("function f(uint256 a) {\n    return a;\n}\n"))
    # a bare return splits into the return block and the implicit tail
    assert export_edges(cfg) == []


def test_dfg_params_are_entry_defs():
    fn = _fn(DIAMOND_LOOP)
    dfg = build_dfg(fn, build_cfg(fn))
    assert dfg.entry_defs == {"a", "b"}


def test_dfg_diamond_reaches_join():
    fn = _fn(DIAMOND_LOOP)
    dfg = build_dfg(fn, build_cfg(fn))
    # both arm definitions of `a` reach the loop header, the body, and the exit
    for def_site in (("L0", 1), ("L1", 1)):
        for use_block in ("L3", "L4", "L5"):
            assert any(e[0] == def_site and e[1][0] == use_block and e[2] == "a"
                       for e in dfg.edges), (def_site, use_block)


def test_dfg_loop_body_def_reaches_header():
    fn = _fn(DIAMOND_LOOP)
    dfg = build_dfg(fn, build_cfg(fn))
    assert any(e[0][0] == "L4" and e[1][0] == "L3" and e[2] == "a"
               for e in dfg.edges)


def test_dfg_temp_edges_local():
    fn = _fn(DIAMOND_LOOP)
    dfg = build_dfg(fn, build_cfg(fn))
    temp_edges = [e for e in dfg.edges if e[2].startswith("t")]
    # temporaries are consumed in the block that defines them
    assert temp_edges
    for src, dst, _ in temp_edges:
        assert src[0] == dst[0]


def test_storage_sites_in_dfg():
    src = ("uint256 stor_0;\n\n"
           "function f(uint256 a) {\n"
           "    stor_0 = a;\n"
           "    v = stor_0;\n"
           "    return v;\n"
           "}\n")
    fn = _fn(src)
    dfg = build_dfg(fn, build_cfg(fn))
    assert any(e[2] == "stor:0" for e in dfg.edges)


# ------------------------------------------------------------- call graph


def test_call_graph_shape():
    g = call_graph(lower_ir(parse_unit(CALLS)))
    assert g.nodes == ["a", "b", "c", "d"]
    assert sorted(g.edges) == [("a", "b"), ("b", "c"), ("d", "b")]
    assert g.externals == set()


def test_external_callees_separated():
    g = call_graph(lower_ir(parse_unit(
        "function f(address x) {\n"
        "    v = keccak256(x);\n"
        "    x.transfer(1);\n"
        "    return v;\n"
        "}\n")))
    assert g.nodes == ["f"]
    assert g.edges == set()
    assert "keccak256" in g.externals or "transfer" in g.externals


def test_call_chains_through_middle():
    g = call_graph(lower_ir(parse_unit(CALLS)))
    assert call_chains(g, "b") == [["a", "b", "c"], ["d", "b", "c"]]


def test_chain_context_first_occurrence_order():
    g = call_graph(lower_ir(parse_unit(CALLS)))
    assert chain_context(g, "b") == ["a", "b", "c", "d"]


def test_chain_context_isolated_function():
    g = call_graph(lower_ir(parse_unit("function solo() {\n    return 1;\n}\n")))
    assert chain_context(g, "solo") == ["solo"]


def test_recursive_call_graph_terminates():
    g = call_graph(lower_ir(parse_unit(
        "function f(uint256 a) {\n"
        "    v = f(a);\n"
        "    return v;\n"
        "}\n")))
    assert ("f", "f") in g.edges
    chains = call_chains(g, "f")
    for chain in chains:
        assert len(chain) <= len(set(chain)) + 1
