"""Static type judgments: one accepting and one rejecting case per rule."""

import pytest

from decopt.ir import lower_ir
from decopt.parser import parse_unit
from decopt.typecheck import (
    ALL_RULES, ViolationReport, check_unit, seed_env,
)


def check(src: str) -> ViolationReport:
    module = lower_ir(parse_unit(src))
    return check_unit(module, seed_env(module))


def wrap(body: str, params: str = "") -> str:
    return f"function f({params}) {{\n{body}\n}}\n"


# Each rule: (rule tag, accepting source, rejecting source).
RULE_CASES = [
    ("Constant",
     wrap("    uint256 x = 5;\n    return x;"),
     wrap("    string x = 5;\n    return x;")),
    ("LShift, RShift",
     wrap("    z = x << 2;\n    return z;", "uint256 x"),
     wrap("    z = s << 2;\n    return z;", "string s")),
    ("Numeric Operations",
     wrap("    c = a + b;\n    return c;", "uint256 a, uint256 b"),
     wrap("    c = a + b;\n    return c;", "uint8 a, int8 b")),
    ("Lt, LtE, Gt, GtE",
     wrap("    bool b = x < y;\n    return b;", "uint256 x, uint256 y"),
     wrap("    b = a < x;\n    return b;", "address a, uint256 x")),
    ("Tuple, Array",
     wrap("    xs = [x, y];\n    return;", "uint256 x, uint256 y"),
     wrap("    xs = [x, s];\n    return;", "uint256 x, string s")),
    ("Comprehension",
     ("function f(bytes data) {\n"
      "    uint256 i = 0;\n"
      "    while (i < 32) {\n"
      "        b = data[i];\n"
      "        i = i + 1;\n"
      "    }\n"
      "    return;\n"
      "}\n"),
     ("function f(uint256 data) {\n"
      "    uint256 i = 0;\n"
      "    while (i < 32) {\n"
      "        b = data[i];\n"
      "        i = i + 1;\n"
      "    }\n"
      "    return;\n"
      "}\n")),
    ("Boolean Operation",
     wrap("    require(a > 0);\n    return;", "uint256 a"),
     wrap("    require(a);\n    return;", "uint256 a")),
    ("Bitor, BitAnd, BitXor",
     wrap("    z = a & b;\n    return z;", "uint256 a, uint256 b"),
     wrap("    z = s & t;\n    return z;", "string s, uint256 t")),
    ("Eq, NotEq, Is, IsNot",
     wrap("    b = x == y;\n    return b;", "uint256 x, uint256 y"),
     wrap("    b = s == u;\n    return b;", "string s, uint256 u")),
    ("Call",
     wrap("    bytes32 x = keccak256(varg0);\n    return x;", "bytes varg0"),
     wrap("    uint256 x = keccak256(varg0);\n    return x;", "bytes varg0")),
    ("Slice",
     ("mapping(address => uint256) balances;\n\n"
      + wrap("    v = balances[a];\n    return v;", "address a")),
     ("mapping(bytes32 => uint256) balances;\n\n"
      + wrap("    v = balances[a];\n    return v;", "address a"))),
]


def test_catalog_covers_all_rules():
    assert sorted(r for r, _, _ in RULE_CASES) == sorted(ALL_RULES)
    assert len(ALL_RULES) == 11


@pytest.mark.parametrize("rule,accept_src,_", RULE_CASES,
                         ids=[r for r, _, _ in RULE_CASES])
def test_rule_accepts(rule, accept_src, _):
    report = check(accept_src)
    assert report.ok, (rule, report.to_json())


@pytest.mark.parametrize("rule,_,reject_src", RULE_CASES,
                         ids=[r for r, _, _ in RULE_CASES])
def test_rule_rejects(rule, _, reject_src):
    report = check(reject_src)
    assert any(v.rule == rule for v in report.violations), \
        (rule, report.to_json())


# ------------------------------------------------------ worked examples


def test_keccak_mismatch_is_single_call_violation():
    report = check(wrap("    uint256 x = keccak256(varg0);\n    return x;",
                        "bytes varg0"))
    assert len(report.violations) == 1
    v = report.violations[0]
    assert v.rule == "Call"
    fields = f"{v.expected} {v.found}"
    assert "bytes32" in fields and "uint256" in fields


def test_violation_describe_format():
    report = check(wrap("    uint256 x = keccak256(varg0);\n    return x;",
                        "bytes varg0"))
    text = report.violations[0].describe()
    assert text.startswith("Call rule violated in f at line ")
    assert "bytes32" in text and "uint256" in text


def test_internal_call_argument_mismatch():
    report = check("function g(address who) {\n    return;\n}\n"
                   "function f(uint256 x) {\n    g(x);\n    return;\n}\n")
    assert any(v.rule == "Call" for v in report.violations)


def test_storage_value_fit():
    report = check("uint256 stor_0;\n\n"
                   "function f(string s) {\n    stor_0 = s;\n    return;\n}\n")
    assert any(v.rule == "Slice" for v in report.violations)


def test_unknowns_never_violate_alone():
    report = check("function f(a, b) {\n"
                   "    c = a + b;\n"
                   "    d = c[a];\n"
                   "    e = d == b;\n"
                   "    return e;\n"
                   "}\n")
    assert report.ok, report.to_json()


def test_desugared_unops_accepted():
    report = check(wrap("    a = !flag;\n    b = ~x;\n    c = -x;\n    return;",
                        "bool flag, uint256 x"))
    assert report.ok, report.to_json()


def test_uint_subscript_outside_loop_is_slice():
    report = check(wrap("    b = data[0];\n    return b;", "uint256 data"))
    assert any(v.rule == "Slice" for v in report.violations)


# ----------------------------------------------------------- reporting


def test_function_order_independence():
    src_a = ("function g(address who) {\n    return;\n}\n"
             "function f(uint256 x) {\n    g(x);\n    return;\n}\n")
    src_b = ("function f(uint256 x) {\n    g(x);\n    return;\n}\n"
             "function g(address who) {\n    return;\n}\n")
    ra, rb = check(src_a), check(src_b)
    assert sorted(v.rule for v in ra.violations) == \
        sorted(v.rule for v in rb.violations)


def test_sorted_report_is_positional():
    src = ("function f(string s, uint256 t) {\n"
           "    z = s & t;\n"
           "    b = s == t;\n"
           "    return;\n"
           "}\n")
    report = check(src)
    positions = [(v.fn, v.pos) for v in report.sorted()]
    assert positions == sorted(positions)


def test_feedback_text_names_rules():
    report = check(wrap("    uint256 x = keccak256(varg0);\n    return x;",
                        "bytes varg0"))
    fb = report.feedback_text()
    assert "Call" in fb and "bytes32" in fb


def test_clean_unit_empty_feedback():
    report = check(wrap("    return varg0;", "uint256 varg0"))
    assert report.ok and report.violations == []


def test_retype_overlay_changes_verdict():
    src = wrap("    uint256 x = keccak256(varg0);\n    return x;",
               "bytes varg0")
    module = lower_ir(parse_unit(src))
    baseline = check_unit(module, seed_env(module))
    assert not baseline.ok
    fixed_src = wrap("    bytes32 x = keccak256(varg0);\n    return x;",
                     "bytes varg0")
    fixed = lower_ir(parse_unit(fixed_src))
    assert check_unit(fixed, seed_env(fixed)).ok
