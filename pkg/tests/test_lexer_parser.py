"""Surface syntax: tokens, recursive descent, canonical rendering."""

import pytest
from hypothesis import given, strategies as st

from decopt import syntax as syn
from decopt.errors import ParseError
from decopt.lexer import tokenize
from decopt.parser import parse_expression, parse_unit
from decopt.soltypes import render as render_type

from conftest import fixture_text

SMALL = """\
uint256 stor_0;
mapping(bytes32 => uint256) uintStorage;

function _handle(address varg0, uint256 varg1) {
    require(msg.sender == varg0);
    require(varg1 > 0);
    v0 = keccak256("k", varg0);
    uintStorage[v0] = varg1;
    stor_0 += varg1;
    return v0;
}
"""


# ----------------------------------------------------------------- lexer


def test_token_stream_frozen():
    toks, notes = tokenize("function f() {\n    return 1 + x;\n}\n")
    got = [(t.kind, t.text, t.line, t.col) for t in toks]
    assert got == [
        ("ident", "function", 1, 1), ("ident", "f", 1, 10),
        ("op", "(", 1, 11), ("op", ")", 1, 12), ("op", "{", 1, 14),
        ("ident", "return", 2, 5), ("number", "1", 2, 12),
        ("op", "+", 2, 14), ("ident", "x", 2, 16), ("op", ";", 2, 17),
        ("op", "}", 3, 1), ("eof", "", 4, 1),
    ]
    assert notes == []


def test_attribute_notes_collected():
    _, notes = tokenize("uint256 stor_0; // attribute: Limit\n")
    assert len(notes) == 1
    assert notes[0].line == 1 and notes[0].label == "Limit"


def test_string_literals_and_hex():
    toks, _ = tokenize('v = keccak256("to\\"ken", 0x1F);')
    kinds = [t.kind for t in toks]
    assert "string" in kinds and "number" in kinds


def test_two_char_operators():
    toks, _ = tokenize("a += b << c >= d == e;")
    ops = [t.text for t in toks if t.kind == "op"]
    assert ops == ["+=", "<<", ">=", "==", ";"]


# ---------------------------------------------------------------- parser


def test_parse_small_unit_shape():
    unit = parse_unit(SMALL)
    assert [d.name for d in unit.storage] == ["stor_0", "uintStorage"]
    assert render_type(unit.storage[1].decl_type) == "mapping(bytes32 => uint256)"
    fn = unit.function("_handle")
    assert fn is not None
    assert [p.name for p in fn.params] == ["varg0", "varg1"]
    assert len(fn.body) == 6


def test_storage_write_classified():
    unit = parse_unit(SMALL)
    fn = unit.function("_handle")
    kinds = [type(s).__name__ for s in fn.body]
    # keyed write and scalar compound write both classify as storage writes
    assert kinds.count("StorageWrite") == 2


def test_canonical_idempotent():
    unit = parse_unit(SMALL)
    once = syn.canonical(unit)
    again = syn.canonical(parse_unit(once))
    assert once == again


def test_canonical_idempotent_on_fixtures():
    for name in ("fig_mapping.dsol", "fig_keccak.dsol", "corpus.dsol"):
        unit = parse_unit(fixture_text(name))
        once = syn.canonical(unit)
        assert syn.canonical(parse_unit(once)) == once, name


def test_canonical_layout():
    text = syn.canonical(parse_unit(SMALL))
    lines = text.splitlines()
    assert lines[0] == "uint256 stor_0;"
    assert lines[1] == "mapping(bytes32 => uint256) uintStorage;"
    assert lines[2] == ""
    assert text.endswith("\n")
    body = [l for l in lines if l.startswith("    ")]
    # one statement per line, four space indent
    assert all(l.rstrip().endswith(";") or l.strip().endswith("{")
               or l.strip() == "}" for l in body)


def test_canonical_spans_cover_functions():
    unit = parse_unit(fixture_text("fig_mapping.dsol"))
    spans = syn.canonical_spans(unit)
    assert set(spans) == {"_getTokenKey", "setTokenValue"}
    lines = syn.canonical(unit).splitlines()
    for name, (start, end) in spans.items():
        assert lines[start - 1].startswith(f"function {name}(")
        assert lines[end - 1].strip() == "}"


def test_preorder_statements_indexes():
    unit = parse_unit(SMALL)
    fn = unit.function("_handle")
    pairs = syn.preorder_statements(fn)
    assert [i for i, _ in pairs] == [1, 2, 3, 4, 5, 6]


def test_attribute_note_binds_to_decl():
    unit = parse_unit("uint256 stor_0; // attribute: Fee\n"
                      "function f() {\n    return stor_0;\n}\n")
    assert unit.storage[0].attribute == "Fee"
    assert "// attribute: Fee" in syn.canonical(unit)


def test_nested_control_flow_round_trip():
    src = """\
function g(uint256 varg0) {
    if (varg0 > 2) {
        while (varg0 > 0) {
            varg0 = varg0 - 1;
        }
    } else {
        varg0 = 0;
    }
    return varg0;
}
"""
    unit = parse_unit(src)
    once = syn.canonical(unit)
    assert syn.canonical(parse_unit(once)) == once
    assert "while (varg0 > 0) {" in once


def test_parse_expression_round_trip():
    e = parse_expression("a + b * c(d, e[f])")
    assert isinstance(e, syn.BinOp)
    assert e.op == "+"


def test_modifier_words_kept():
    unit = parse_unit("function f() public payable {\n    return;\n}\n")
    text = syn.canonical(unit)
    assert "function f() public payable {" in text


# ----------------------------------------------------- recovery contract


def test_broken_function_skipped_lenient():
    src = "function broken( {\nfunction ok() {\n    return 1;\n}\n"
    unit = parse_unit(src, strict=False)
    assert [s.function for s in unit.skips] == ["broken"]
    assert unit.skips[0].reason
    assert unit.function("ok") is not None


def test_broken_function_strict_raises():
    src = "function broken( {\nfunction ok() {\n    return 1;\n}\n"
    with pytest.raises(ParseError):
        parse_unit(src, strict=True)


def test_storage_garbage_always_hard():
    with pytest.raises(ParseError):
        parse_unit("%%% not pseudocode %%%\n", strict=False)


def test_skip_report_position():
    src = "function ok() {\n    return 1;\n}\nfunction broken( {\n"
    unit = parse_unit(src, strict=False)
    assert unit.skips and unit.skips[0].position[0] == 4


# ------------------------------------------------------------ properties

_names = st.sampled_from(["a", "b", "varg0", "v1", "x9"])
_lits = st.integers(min_value=0, max_value=2 ** 64)


@st.composite
def _exprs(draw, depth=0):
    if depth > 2 or draw(st.booleans()):
        if draw(st.booleans()):
            return str(draw(_lits))
        return draw(_names)
    op = draw(st.sampled_from(["+", "-", "*", "&", "|", "<", "=="]))
    left = draw(_exprs(depth + 1))
    right = draw(_exprs(depth + 1))
    return f"({left} {op} {right})"


@given(_exprs())
def test_expression_parser_total_on_generated(src):
    parse_expression(src)


@given(st.lists(st.sampled_from(["x = a + b;", "require(a > 0);",
                                 "return x;", "stor_0 = a;"]),
                min_size=1, max_size=6))
def test_generated_bodies_round_trip(stmts):
    src = "uint256 stor_0;\n\nfunction f(uint256 a, uint256 b) {\n"
    src += "".join(f"    {s}\n" for s in stmts)
    src += "}\n"
    unit = parse_unit(src)
    once = syn.canonical(unit)
    assert syn.canonical(parse_unit(once)) == once
