"""Lowering to three-address IR: frozen instruction tables and helpers."""

import pytest

from decopt.ir import lower_ir, storage_slot
from decopt.parser import parse_unit
from decopt.soltypes import render as render_type


def lower(src: str):
    return lower_ir(parse_unit(src))


def flat(fn):
    return [(b.label, ins.op, ins.dest, tuple(str(a) for a in ins.args))
            for b in fn.blocks for ins in b.instrs]


@pytest.mark.parametrize("name,slot", [
    ("stor_5", "5"), ("stor_0", "0"), ("stor_123", "123"),
    ("uintStorage", "uintStorage"), ("balances", "balances"),
])
def test_storage_slot(name, slot):
    assert storage_slot(name) == slot


def test_straight_line_frozen():
    m = lower("function f(uint256 varg0) {\n"
              "    uint256 v0 = varg0 + 1;\n"
              "    return v0;\n"
              "}\n")
    fn = m.function("f")
    assert flat(fn) == [
        ("entry", "binop", "t0", ("varg0", "1")),
        ("entry", "copy", "v0", ("t0",)),
        ("entry", "ret", None, ("v0",)),
        ("L0", "ret", None, ()),
    ]
    ops = {ins.operator for b in fn.blocks for ins in b.instrs if ins.op == "binop"}
    assert ops == {"+"}


def test_decl_types_carried():
    m = lower("uint256 stor_0;\n\n"
              "function f(uint256 varg0, bool varg1) {\n"
              "    uint256 v0 = varg0;\n"
              "    return v0;\n"
              "}\n")
    fn = m.function("f")
    assert render_type(fn.decl_types["varg0"]) == "uint256"
    assert render_type(fn.decl_types["varg1"]) == "bool"
    assert render_type(fn.decl_types["v0"]) == "uint256"
    assert render_type(m.storage["stor_0"]) == "uint256"


def test_if_else_block_structure():
    m = lower("uint256 stor_0;\n"
              "mapping(address => uint256) balances;\n\n"
              "function f(uint256 varg0, bool varg1) {\n"
              "    uint256 v0 = varg0 + 1;\n"
              "    if (varg1) {\n"
              "        stor_0 = v0;\n"
              "    } else {\n"
              "        balances[msg.sender] = v0;\n"
              "    }\n"
              "    return v0;\n"
              "}\n")
    fn = m.function("f")
    labels = [b.label for b in fn.blocks]
    assert labels == ["entry", "L0", "L1", "L2", "L3"]
    entry = fn.blocks[0].instrs
    assert entry[-1].op == "branch" and entry[-1].labels == ("L0", "L1")
    then_block = fn.blocks[1].instrs
    assert then_block[0].op == "store_storage" and then_block[0].slot == "0"
    else_block = fn.blocks[2].instrs
    keyed = [i for i in else_block if i.op == "store_storage"]
    assert keyed and keyed[0].slot == "balances"


def test_while_loop_frozen():
    m = lower("function h(uint256 varg0) {\n"
              "    uint256 v0 = 0;\n"
              "    while (v0 < varg0) {\n"
              "        v0 = v0 + 1;\n"
              "    }\n"
              "    return v0;\n"
              "}\n")
    fn = m.function("h")
    assert [b.label for b in fn.blocks] == ["entry", "L0", "L1", "L2", "L3"]
    # header re-evaluates the condition; body jumps back to the header
    header = fn.blocks[1].instrs
    assert header[-1].op == "branch" and header[-1].labels == ("L1", "L2")
    body = fn.blocks[2].instrs
    assert body[-1].op == "jump" and body[-1].labels == ("L0",)
    entry = fn.blocks[0].instrs
    assert entry[-1].op == "jump" and entry[-1].labels == ("L0",)


def test_require_keeps_message():
    m = lower('function f(uint256 varg0) {\n'
              '    require(varg0 > 0, "bad");\n'
              '    return varg0;\n'
              '}\n')
    instrs = [ins for b in m.function("f").blocks for ins in b.instrs]
    req = [i for i in instrs if i.op == "require"]
    assert len(req) == 1 and req[0].message == "bad"


def test_unop_desugaring_frozen():
    m = lower("function g(uint256 x, bool b) {\n"
              "    a = !b;\n"
              "    c = ~x;\n"
              "    d = -x;\n"
              "    return;\n"
              "}\n")
    binops = [(ins.operator, tuple(str(a) for a in ins.args))
              for blk in m.function("g").blocks
              for ins in blk.instrs if ins.op == "binop"]
    mask = "0x" + "f" * 64
    assert binops == [
        ("^", ("b", "true")),
        ("^", ("x", mask)),
        ("-", ("0", "x")),
    ]


def test_internal_call_lowering():
    m = lower("function f(uint256 varg0) {\n"
              "    v1 = helper(varg0);\n"
              "    return v1;\n"
              "}\n"
              "function helper(uint256 x) { return x; }\n")
    calls = [ins for b in m.function("f").blocks
             for ins in b.instrs if ins.op == "call"]
    assert len(calls) == 1 and calls[0].callee == "helper"
    assert tuple(str(a) for a in calls[0].args) == ("varg0",)


def test_tuple_assign_lowering():
    m = lower("function h() {\n"
              "    a, b = pair();\n"
              "    return a;\n"
              "}\n"
              "function pair() { return (1, 2); }\n")
    instrs = [ins for blk in m.function("h").blocks for ins in blk.instrs]
    gets = [ins.extra.get("tuple_get") for ins in instrs
            if ins.op == "index" and "tuple_get" in ins.extra]
    assert gets == [0, 1]


def test_keyed_load_and_store():
    m = lower("mapping(bytes32 => uint256) uintStorage;\n\n"
              "function f(bytes32 varg0, uint256 varg1) {\n"
              "    uintStorage[varg0] = varg1;\n"
              "    v = uintStorage[varg0];\n"
              "    return v;\n"
              "}\n")
    instrs = [ins for blk in m.function("f").blocks for ins in blk.instrs]
    stores = [i for i in instrs if i.op == "store_storage"]
    loads = [i for i in instrs if i.op == "load_storage"]
    assert stores and stores[0].slot == "uintStorage"
    assert len(stores[0].keys) == 1
    assert loads and loads[0].slot == "uintStorage"


def test_member_access_lowering():
    m = lower("function f() {\n    v = msg.sender;\n    return v;\n}\n")
    instrs = [ins for blk in m.function("f").blocks for ins in blk.instrs]
    members = [i for i in instrs if i.op == "member"]
    assert members and members[0].member == "sender"


def test_cast_lowering():
    m = lower("function f(bytes32 x) {\n    v = uint256(x);\n    return v;\n}\n")
    instrs = [ins for blk in m.function("f").blocks for ins in blk.instrs]
    casts = [i for i in instrs if i.op == "copy" and i.cast is not None]
    assert len(casts) == 1
    assert render_type(casts[0].cast) == "uint256"


def test_every_block_terminated():
    src = ("function f(uint256 a, bool b) {\n"
           "    if (b) {\n"
           "        a = a + 1;\n"
           "    }\n"
           "    while (a > 0) {\n"
           "        a = a - 1;\n"
           "    }\n"
           "    return a;\n"
           "}\n")
    fn = lower(src).function("f")
    terminators = {"jump", "branch", "ret", "revert"}
    for blk in fn.blocks:
        assert blk.instrs, blk.label
        assert blk.instrs[-1].op in terminators, blk.label
        # terminators never appear mid-block
        for ins in blk.instrs[:-1]:
            assert ins.op not in terminators, blk.label
