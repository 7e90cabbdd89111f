"""Dependency graph assembly and slicing, checked against an
edge-relaxation oracle that shares no code with the BFS under test."""

import json
import random

import pytest

from decopt import depgraph as dgm
from decopt.depgraph import (
    DGEdge, DGNode, DependencyGraph, assemble_dg, expr_node_id,
    slice_variable, storage_decl_node_id, var_node_id,
)
from decopt.errors import EmptySlice, UnknownNode

from conftest import parse_fixture


# ------------------------------------------------------------ node ids


def test_node_id_scheme():
    assert var_node_id("f", "v0") == "var:f:v0"
    assert var_node_id(None, "stor_0") == "stor:stor_0"
    assert expr_node_id("f", 3) == "expr:f:3"
    assert storage_decl_node_id("balances") == "expr::balances"


# ------------------------------------------------- fixture unit edges


@pytest.fixture(scope="module")
def mapping_dg():
    return assemble_dg(parse_fixture("fig_mapping.dsol"))


def _edge(dg, **want):
    for e in dg.edges:
        if all(getattr(e, k, None) == v for k, v in want.items()):
            return e
    return None


def test_keccak_result_type_edge(mapping_dg):
    e = _edge(mapping_dg, shape="type_expr",
              src="expr:_getTokenKey:1", dst="var:_getTokenKey:v0")
    assert e is not None and e.label == "TD"
    assert e.get("name") == "keccak256" and e.get("type") == "bytes32"


def test_cross_function_return_edge(mapping_dg):
    e = _edge(mapping_dg, shape="var_var",
              src="var:_getTokenKey:v0", dst="var:setTokenValue:v0")
    assert e is not None and e.label == "TD"


def test_mapping_key_use_edge(mapping_dg):
    e = _edge(mapping_dg, shape="var_expr",
              src="var:setTokenValue:v0", dst="expr:setTokenValue:2")
    assert e is not None and e.get("alt") == "key"


def test_storage_write_edge(mapping_dg):
    sd = [e for e in mapping_dg.edges
          if e.label == "SD" and e.shape == "sd_write"
          and e.src == "stor:uintStorage"]
    assert sd and sd[0].dst == "expr:setTokenValue:2"


def test_call_site_flow_edge(mapping_dg):
    dfd = [e for e in mapping_dg.edges if e.shape == "cf_call"]
    assert any(e.src == "expr:setTokenValue:1" for e in dfd)


def test_storage_slice_crosses_functions(mapping_dg):
    s = slice_variable(mapping_dg, "stor:uintStorage")
    assert "expr:_getTokenKey:1" in s.nodes
    assert s.hops["stor:uintStorage"] == 0


def test_to_json_deterministic(mapping_dg):
    a = mapping_dg.to_json()
    b = assemble_dg(parse_fixture("fig_mapping.dsol")).to_json()
    assert a == b
    payload = json.loads(a)
    assert set(payload) == {"nodes", "edges"}
    ids = [n["id"] for n in payload["nodes"]]
    assert ids == sorted(ids)


def test_every_edge_endpoint_exists(mapping_dg):
    for e in mapping_dg.edges:
        assert e.src in mapping_dg.nodes and e.dst in mapping_dg.nodes


def test_label_shape_pairing(mapping_dg):
    by_label = {"TD": {"var_var", "type_expr", "type_var", "expr_var", "var_expr"},
                "SD": {"sd_write", "sd_read", "sd_var"},
                "DFD": {"cf_return", "cf_call", "cf_decl", "cf_modifier"}}
    for e in mapping_dg.edges:
        assert e.shape in by_label[e.label], (e.label, e.shape)


# ------------------------------------------------------- graph surface


def test_add_edge_requires_endpoints():
    dg = DependencyGraph()
    dg.add_node(DGNode("var:f:a", "var", "a", (1, 1), fn="f"))
    with pytest.raises(UnknownNode):
        dg.add_edge(DGEdge("var:f:a", "var:f:missing", "TD", "var_var"))


def test_duplicate_edges_collapse():
    dg = DependencyGraph()
    dg.add_node(DGNode("var:f:a", "var", "a", (1, 1), fn="f"))
    dg.add_node(DGNode("var:f:b", "var", "b", (1, 2), fn="f"))
    e = DGEdge("var:f:a", "var:f:b", "TD", "var_var")
    dg.add_edge(e)
    dg.add_edge(e)
    assert len(dg.edges) == 1


def test_slice_unknown_target():
    dg = DependencyGraph()
    with pytest.raises(UnknownNode):
        slice_variable(dg, "var:f:ghost")


def test_slice_isolated_target_is_empty():
    dg = DependencyGraph()
    dg.add_node(DGNode("var:f:a", "var", "a", (1, 1), fn="f"))
    with pytest.raises(EmptySlice):
        slice_variable(dg, "var:f:a")


def test_label_restriction_can_empty_a_slice(mapping_dg):
    full = slice_variable(mapping_dg, "var:setTokenValue:varg1")
    assert len(full.nodes) > 1
    td_only = slice_variable(mapping_dg, "var:setTokenValue:varg1",
                             labels={"TD"})
    assert set(td_only.edges).issubset(set(full.graph.edges))
    for e in td_only.edges:
        assert e.label == "TD"


# --------------------------------------------------- random graph oracle


def random_graph(seed: int):
    """A synthetic DG plus a target node guaranteed one incident edge."""
    rng = random.Random(seed)
    n = rng.randint(2, 50)
    dg = DependencyGraph()
    ids = []
    for i in range(n):
        kind = rng.choice(["var", "expr"])
        nid = f"{kind}:f:{i}" if kind == "var" else f"expr:f:{i}"
        ids.append(nid)
        dg.add_node(DGNode(nid, kind, f"n{i}", (i + 1, 1), fn="f"))
    shapes = {"TD": "var_var", "SD": "sd_var", "DFD": "cf_call"}
    m = rng.randint(1, 2 * n)
    for _ in range(m):
        a, b = rng.choice(ids), rng.choice(ids)
        if a == b:
            continue
        label = rng.choice(["TD", "SD", "DFD"])
        dg.add_edge(DGEdge(a, b, label, shapes[label]))
    touched = sorted({e.src for e in dg.edges} | {e.dst for e in dg.edges})
    if not touched:
        a, b = ids[0], ids[1]
        dg.add_edge(DGEdge(a, b, "TD", "var_var"))
        touched = [a, b]
    return dg, rng.choice(touched)


def oracle_distances(edges, target: str) -> dict[str, int]:
    """Undirected hop distances by repeated edge relaxation."""
    inf = 1 << 30
    dist: dict[str, int] = {target: 0}
    changed = True
    while changed:
        changed = False
        for e in edges:
            for u, v in ((e.src, e.dst), (e.dst, e.src)):
                du = dist.get(u, inf)
                if du + 1 < dist.get(v, inf):
                    dist[v] = du + 1
                    changed = True
    return dist


def check_slice_against_oracle(dg, target: str, labels=None) -> None:
    pool = dg.edges if labels is None \
        else [e for e in dg.edges if e.label in labels]
    want = oracle_distances(pool, target)
    if len(want) == 1 and not any(
            e.src == target or e.dst == target for e in pool):
        with pytest.raises(EmptySlice):
            slice_variable(dg, target, labels=labels)
        return
    s = slice_variable(dg, target, labels=labels)
    assert s.hops == want
    assert set(s.nodes) == set(want)
    expected_edges = [e for e in pool if e.src in want and e.dst in want]
    assert sorted(s.edges, key=str) == sorted(expected_edges, key=str)


@pytest.mark.parametrize("seed", range(40))
def test_random_slices_match_oracle(seed):
    dg, target = random_graph(seed)
    check_slice_against_oracle(dg, target)


@pytest.mark.parametrize("seed", range(40, 60))
def test_random_label_restricted_slices(seed):
    dg, target = random_graph(seed)
    check_slice_against_oracle(dg, target, labels={"TD", "DFD"})


def test_edges_by_hop_monotone():
    for seed in range(10):
        dg, target = random_graph(seed)
        try:
            s = slice_variable(dg, target)
        except EmptySlice:
            continue
        hops = [s.edge_hop(e) for e in s.edges_by_hop()]
        assert hops == sorted(hops)
