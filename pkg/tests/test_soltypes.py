"""Type lattice: parse/render round-trips and meet-table properties."""

import pytest
from hypothesis import given, strategies as st

from decopt import soltypes as T
from decopt.errors import NotCallable, NotIndexable, ParseError

# One representative instance per variant, aggregates included.
REPS = [
    T.Bool(),
    T.Int(256, signed=False),
    T.Int(8, signed=False),
    T.Int(128, signed=True),
    T.Address(),
    T.Address(payable=True),
    T.FixedBytes(1),
    T.FixedBytes(32),
    T.DynBytes(),
    T.String(),
    T.Array(T.Int(256, signed=False), None),
    T.Array(T.Int(8, signed=False), 4),
    T.Mapping(T.Address(), T.Int(256, signed=False)),
    T.Mapping(T.FixedBytes(32), T.Int(256, signed=False)),
    T.Tuple((T.Int(256, signed=False), T.Bool())),
    T.Callable((T.Int(256, signed=False),), T.Bool()),
    T.Unknown(),
    T.Unknown(frozenset({"int", "bool"})),
    T.Bottom(),
]

RULE_FAMILY_SETS = [
    frozenset({"bool", "int"}),                      # numeric / shift
    frozenset({"bool", "int", "byte"}),              # bitwise
    frozenset({"str", "bytes", "byte"}),             # element iteration
    frozenset({"int", "bool"}),                      # subscript keys
    frozenset({"bool", "int", "byte", "bytes", "str",
               "address", "array", "tuple"}),        # ordered comparison
    frozenset({"array", "bytes", "str", "byte", "mapping"}),
    frozenset({"array", "bytes", "str", "byte"}),
    frozenset({"bool"}),
]

ROUND_TRIP = [
    "bool", "uint8", "uint256", "int128", "address", "address payable",
    "bytes1", "bytes32", "bytes", "string",
    "uint256[]", "uint8[4]",
    "mapping(address => uint256)",
    "mapping(bytes32 => mapping(address => bool))",
]


@pytest.mark.parametrize("text", ROUND_TRIP)
def test_parse_render_round_trip(text):
    assert T.render(T.parse_type(text)) == text


@pytest.mark.parametrize("alias,canon", [
    ("uint", "uint256"),
    ("int", "int256"),
    ("byte", "bytes1"),
])
def test_alias_canonicalization(alias, canon):
    assert T.parse_type(alias) == T.parse_type(canon)
    assert T.canonical(alias) == canon


@pytest.mark.parametrize("bad", ["uint9", "int0", "uint264", "bytes0", "bytes33"])
def test_bad_widths_rejected(bad):
    with pytest.raises((ParseError, ValueError)):
        T.parse_type(bad)


def test_trailing_garbage_rejected():
    with pytest.raises(ParseError):
        T.parse_type("uint256 extra")


def test_structural_equality():
    assert T.parse_type("mapping(address => uint256)") == \
        T.Mapping(T.Address(), T.Int(256, signed=False))
    assert T.parse_type("address payable") != T.parse_type("address")


# ----------------------------------------------------------- meet tables


def test_meet_types_idempotent_exhaustive():
    for t in REPS:
        assert T.meet_types(t, t) == t, T.render(t) if T.is_concrete(t) else t


def test_meet_types_commutative_exhaustive():
    for a in REPS:
        for b in REPS:
            assert T.meet_types(a, b) == T.meet_types(b, a), (a, b)


def test_family_meet_idempotent_exhaustive():
    # meet against a family set is a projection: applying twice changes nothing
    for t in REPS:
        for fams in RULE_FAMILY_SETS:
            once = T.meet(t, fams)
            assert T.meet(once, fams) == once, (t, fams)


def test_meet_frozen_oracle():
    u256 = T.parse_type("uint256")
    cases = [
        ("uint8", "uint256", "uint256"),        # widen within one signedness
        ("int8", "int128", "int128"),
        ("uint8", "int8", None),                # signedness clash
        ("bytes4", "bytes32", "bytes32"),       # bytesN widen
        ("address payable", "address", "address"),  # payable narrows away
        ("string", "uint256", None),
        ("uint256[]", "uint256[3]", "uint256[]"),
        ("uint8[2]", "uint8[3]", None),
    ]
    for a, b, want in cases:
        got = T.meet_types(T.parse_type(a), T.parse_type(b))
        if want is None:
            assert isinstance(got, T.Bottom), (a, b, got)
        else:
            assert got == T.parse_type(want), (a, b, got)
    assert T.meet_types(T.Unknown(), u256) == u256
    assert T.meet_types(T.Unknown(frozenset({"int"})), u256) == u256
    assert isinstance(T.meet_types(T.Unknown(frozenset({"str"})), u256), T.Bottom)


def test_more_precise_oracle():
    u256 = T.parse_type("uint256")
    assert T.more_precise(T.Unknown(), u256) == u256
    assert T.more_precise(u256, T.Unknown()) == u256
    assert T.more_precise(T.parse_type("uint8"), u256) == u256
    assert T.more_precise(T.parse_type("address payable"),
                          T.parse_type("address")) == T.parse_type("address payable")
    assert isinstance(T.more_precise(T.parse_type("int8"),
                                     T.parse_type("uint8")), T.Bottom)
    both = T.more_precise(T.Unknown(frozenset({"int", "bool"})),
                          T.Unknown(frozenset({"bool", "byte"})))
    assert both == T.Unknown(frozenset({"bool"}))


def test_meet_bottom_absorbing():
    for t in REPS:
        assert isinstance(T.meet_types(t, T.Bottom()), T.Bottom)
        assert isinstance(T.meet(T.Bottom(), RULE_FAMILY_SETS[0]), T.Bottom)


def test_meet_unknown_empty_constraint_collapses():
    got = T.meet(T.Unknown(frozenset({"address"})), frozenset({"int"}))
    assert isinstance(got, T.Bottom)


# ----------------------------------------------------------- accessors


def test_element_type():
    assert T.element_type(T.parse_type("uint256[]")) == T.parse_type("uint256")
    assert T.element_type(T.parse_type("mapping(address => bool)")) == T.Bool()
    assert T.element_type(T.parse_type("bytes")) == T.FixedBytes(1)
    with pytest.raises(NotIndexable):
        T.element_type(T.Bool())


def test_return_and_key_type():
    f = T.Callable((T.Address(),), T.Bool())
    assert T.return_type(f) == T.Bool()
    assert T.return_type(T.Unknown()) == T.Unknown()
    with pytest.raises(NotCallable):
        T.return_type(T.parse_type("uint256"))
    assert T.key_type(T.parse_type("mapping(bytes32 => uint256)")) == \
        T.FixedBytes(32)
    assert T.key_type(T.Bool()) is None


@pytest.mark.parametrize("value,want", [
    (0, "uint8"), (1, "uint8"), (255, "uint8"), (256, "uint16"),
    (2 ** 256 - 1, "uint256"), (-1, "int8"), (-129, "int16"),
])
def test_int_literal_widths(value, want):
    assert T.render(T.type_of_int_literal(value)) == want


# ----------------------------------------------------------- properties

_leaf = st.sampled_from([
    T.Bool(), T.Int(256, signed=False), T.Int(8, signed=True),
    T.Address(), T.Address(payable=True), T.FixedBytes(4), T.FixedBytes(32),
    T.DynBytes(), T.String(), T.Unknown(), T.Bottom(),
])

_types = st.recursive(
    _leaf,
    lambda kids: st.one_of(
        st.builds(T.Array, kids, st.sampled_from([None, 2, 8])),
        st.builds(T.Mapping, _leaf, kids),
        st.builds(lambda a, b: T.Tuple((a, b)), kids, kids),
    ),
    max_leaves=6,
)


@given(_types, _types)
def test_meet_types_commutative_property(a, b):
    assert T.meet_types(a, b) == T.meet_types(b, a)


@given(_types)
def test_meet_types_idempotent_property(t):
    assert T.meet_types(t, t) == t


@given(_types)
def test_render_parse_round_trip_property(t):
    if not T.is_concrete(t):
        return
    # mappings with unknown-bearing members have no surface syntax
    text = T.render(t)
    if "unknown" in text or "bottom" in text:
        return
    assert T.parse_type(text) == t
