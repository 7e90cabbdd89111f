"""Solidity-flavored type lattice.

Types form a meet-semilattice: Unknown sits on top, Bottom at the foot,
and every concrete constructor in between.  Unknown is deliberately
harmless: meeting it with any family narrows the constraint but never
produces a violation on its own.  Bottom is the checker's failure value.

Numeric widths follow the language: uint8..uint256 and int8..int256 in
steps of 8, bytes1..bytes32.  Aliases canonicalize on parse (uint ->
uint256, int -> int256, byte -> bytes1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NotCallable, NotIndexable, ParseError

# ================================================================ variants


@dataclass(frozen=True)
class SolType:
    pass


@dataclass(frozen=True)
class Bool(SolType):
    pass


@dataclass(frozen=True)
class Int(SolType):
    width: int = 256
    signed: bool = False

    def __post_init__(self):
        if self.width % 8 or not 8 <= self.width <= 256:
            raise ValueError(f"bad integer width {self.width}")


@dataclass(frozen=True)
class Address(SolType):
    payable: bool = False


@dataclass(frozen=True)
class FixedBytes(SolType):
    size: int = 32

    def __post_init__(self):
        if not 1 <= self.size <= 32:
            raise ValueError(f"bad bytes size {self.size}")


@dataclass(frozen=True)
class DynBytes(SolType):
    pass


@dataclass(frozen=True)
class String(SolType):
    pass


@dataclass(frozen=True)
class Array(SolType):
    elem: SolType = field(default_factory=lambda: Unknown())
    length: int | None = None


@dataclass(frozen=True)
class Mapping(SolType):
    key: SolType = field(default_factory=lambda: Unknown())
    value: SolType = field(default_factory=lambda: Unknown())


@dataclass(frozen=True)
class Tuple(SolType):
    elems: tuple[SolType, ...] = ()


@dataclass(frozen=True)
class Callable(SolType):
    params: tuple[SolType, ...] = ()
    ret: SolType = field(default_factory=lambda: Unknown())


@dataclass(frozen=True)
class Unknown(SolType):
    # None = unconstrained; otherwise the families this unknown may
    # still inhabit (the marker produced by meeting Unknown with a rule
    # family).
    families: frozenset[str] | None = None


@dataclass(frozen=True)
class Bottom(SolType):
    pass


# ================================================================ families

# Family names used by the checker's rule premises.
_FAMILY_OF = {
    Bool: "bool",
    Int: "int",
    Address: "address",
    FixedBytes: "byte",
    DynBytes: "bytes",
    String: "str",
    Array: "array",
    Mapping: "mapping",
    Tuple: "tuple",
    Callable: "callable",
}

ALL_FAMILIES = frozenset(_FAMILY_OF.values())
# Elementary value types; what comparison operators accept besides
# aggregates.
ELEMENTARY = frozenset({"bool", "int", "address", "byte", "bytes", "str"})
INDEXABLE = frozenset({"array", "bytes", "str", "byte", "mapping"})
REFERENCE = frozenset({"array", "mapping", "bytes", "str"})


def family_of(t: SolType) -> str | None:
    return _FAMILY_OF.get(type(t))


def is_concrete(t: SolType) -> bool:
    return not isinstance(t, (Unknown, Bottom))


def meet(t: SolType, families: frozenset[str]) -> SolType:
    """Meet a type against a rule's family set.

    Concrete types survive iff their family is in the set; Unknown
    narrows its constraint (empty constraint collapses to Bottom, a
    genuinely contradictory usage); Bottom is absorbing.
    """
    if isinstance(t, Bottom):
        return t
    if isinstance(t, Unknown):
        left = ALL_FAMILIES if t.families is None else t.families
        joint = left & families
        return Unknown(joint) if joint else Bottom()
    return t if family_of(t) in families else Bottom()


def meet_types(a: SolType, b: SolType) -> SolType:
    """Common type of two values, Bottom when none exists.

    Mirrors implicit convertibility: numeric widening within one
    signedness, bytesN widening, payable address narrowing to plain
    address, pointwise descent through aggregates.
    """
    if isinstance(a, Bottom) or isinstance(b, Bottom):
        return Bottom()
    if isinstance(a, Unknown):
        return meet(b, a.families) if a.families is not None else b
    if isinstance(b, Unknown):
        return meet(a, b.families) if b.families is not None else a
    if a == b:
        return a
    if isinstance(a, Int) and isinstance(b, Int):
        if a.signed != b.signed:
            return Bottom()
        return a if a.width >= b.width else b
    if isinstance(a, Address) and isinstance(b, Address):
        return Address(payable=a.payable and b.payable)
    if isinstance(a, FixedBytes) and isinstance(b, FixedBytes):
        return a if a.size >= b.size else b
    if isinstance(a, Array) and isinstance(b, Array):
        elem = meet_types(a.elem, b.elem)
        if isinstance(elem, Bottom):
            return Bottom()
        if a.length == b.length:
            return Array(elem, a.length)
        if a.length is None or b.length is None:
            return Array(elem, None)
        return Bottom()
    if isinstance(a, Mapping) and isinstance(b, Mapping):
        k = meet_types(a.key, b.key)
        v = meet_types(a.value, b.value)
        if isinstance(k, Bottom) or isinstance(v, Bottom):
            return Bottom()
        return Mapping(k, v)
    if isinstance(a, Tuple) and isinstance(b, Tuple):
        if len(a.elems) != len(b.elems):
            return Bottom()
        elems = tuple(meet_types(x, y) for x, y in zip(a.elems, b.elems))
        if any(isinstance(e, Bottom) for e in elems):
            return Bottom()
        return Tuple(elems)
    if isinstance(a, Callable) and isinstance(b, Callable):
        if len(a.params) != len(b.params):
            return Bottom()
        params = tuple(meet_types(x, y) for x, y in zip(a.params, b.params))
        ret = meet_types(a.ret, b.ret)
        if any(isinstance(p, Bottom) for p in params) or isinstance(ret, Bottom):
            return Bottom()
        return Callable(params, ret)
    return Bottom()


def more_precise(a: SolType, b: SolType) -> SolType:
    """Pick the more informative of two comparable types.

    Exactly-one-Unknown picks the other side; two numerics of one
    signedness pick the wider width; a signedness clash is Bottom.
    """
    if isinstance(a, Bottom) or isinstance(b, Bottom):
        return Bottom()
    if isinstance(a, Unknown) and isinstance(b, Unknown):
        return Unknown(_meet_constraints(a.families, b.families))
    if isinstance(a, Unknown):
        return b
    if isinstance(b, Unknown):
        return a
    if isinstance(a, Int) and isinstance(b, Int):
        if a.signed != b.signed:
            return Bottom()
        return a if a.width >= b.width else b
    if isinstance(a, Address) and isinstance(b, Address):
        return a if a.payable else b
    if isinstance(a, FixedBytes) and isinstance(b, FixedBytes):
        return a if a.size >= b.size else b
    if a == b:
        return a
    return meet_types(a, b)


def _meet_constraints(x: frozenset[str] | None, y: frozenset[str] | None):
    if x is None:
        return y
    if y is None:
        return x
    return x & y


def element_type(t: SolType) -> SolType:
    """Type produced by indexing, errors on non-indexable shapes."""
    if isinstance(t, Array):
        return t.elem
    if isinstance(t, Mapping):
        return t.value
    if isinstance(t, (DynBytes, String, FixedBytes)):
        return FixedBytes(1)
    raise NotIndexable(f"cannot index a value of type {render(t)}")


def return_type(t: SolType) -> SolType:
    if isinstance(t, Callable):
        return t.ret
    if isinstance(t, Unknown):
        return Unknown()
    raise NotCallable(f"cannot call a value of type {render(t)}")


def key_type(t: SolType) -> SolType | None:
    return t.key if isinstance(t, Mapping) else None


def type_of_int_literal(value: int) -> Int:
    """Smallest machine type holding the literal."""
    if value >= 0:
        bits = max(value.bit_length(), 1)
        width = min(256, ((bits + 7) // 8) * 8)
        return Int(width, signed=False)
    bits = (-value - 1).bit_length() + 1
    width = min(256, ((bits + 7) // 8) * 8)
    return Int(width, signed=True)


# ================================================================ text form


def render(t: SolType) -> str:
    if isinstance(t, Bool):
        return "bool"
    if isinstance(t, Int):
        return f"{'int' if t.signed else 'uint'}{t.width}"
    if isinstance(t, Address):
        return "address payable" if t.payable else "address"
    if isinstance(t, FixedBytes):
        return f"bytes{t.size}"
    if isinstance(t, DynBytes):
        return "bytes"
    if isinstance(t, String):
        return "string"
    if isinstance(t, Array):
        inner = render(t.elem)
        return f"{inner}[{t.length}]" if t.length is not None else f"{inner}[]"
    if isinstance(t, Mapping):
        return f"mapping({render(t.key)} => {render(t.value)})"
    if isinstance(t, Tuple):
        return "(" + ", ".join(render(e) for e in t.elems) + ")"
    if isinstance(t, Callable):
        params = ", ".join(render(p) for p in t.params)
        return f"function({params}) returns ({render(t.ret)})"
    if isinstance(t, Unknown):
        return "unknown"
    return "bottom"


_ELEMENTARY_WORDS = {"bool", "address", "string", "bytes"}


def looks_like_type(word: str) -> bool:
    """Whether a bare identifier is plausibly a type name."""
    if word in _ELEMENTARY_WORDS or word == "mapping":
        return True
    for prefix in ("uint", "int", "bytes"):
        if word.startswith(prefix):
            rest = word[len(prefix):]
            if rest == "":
                return prefix != "bytes"  # bare "bytes" already matched
            if rest.isdigit():
                return True
    return word == "byte"


def parse_type(text: str) -> SolType:
    """Parse a type expression, canonicalizing aliases.

    Accepts elementary names, `address payable`, `mapping(K => V)`,
    array suffixes `T[]` / `T[k]`, and parenthesized tuples.
    """
    parser = _TypeParser(text)
    t = parser.parse()
    parser.expect_end()
    return t


class _TypeParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _word(self) -> str:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start:self.pos]

    def _expect(self, ch: str):
        self._skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            raise ParseError((1, self.pos + 1), (ch,), self.text[self.pos:self.pos + 1])
        self.pos += 1

    def expect_end(self):
        self._skip_ws()
        if self.pos != len(self.text):
            raise ParseError((1, self.pos + 1), ("end of type",), self.text[self.pos:])

    def parse(self) -> SolType:
        t = self._base()
        while self._peek() == "[":
            self._expect("[")
            if self._peek() == "]":
                self._expect("]")
                t = Array(t, None)
            else:
                length = self._word()
                if not length.isdigit():
                    raise ParseError((1, self.pos), ("array length",), length)
                self._expect("]")
                t = Array(t, int(length))
        return t

    def _base(self) -> SolType:
        if self._peek() == "(":
            self._expect("(")
            elems = []
            if self._peek() != ")":
                elems.append(self.parse())
                while self._peek() == ",":
                    self._expect(",")
                    elems.append(self.parse())
            self._expect(")")
            return Tuple(tuple(elems))
        word = self._word()
        if not word:
            raise ParseError((1, self.pos + 1), ("type name",), self._peek())
        if word == "mapping":
            self._expect("(")
            key = self.parse()
            self._skip_ws()
            if self.text[self.pos:self.pos + 2] != "=>":
                raise ParseError((1, self.pos + 1), ("=>",), self.text[self.pos:self.pos + 2])
            self.pos += 2
            value = self.parse()
            self._expect(")")
            return Mapping(key, value)
        return self._elementary(word)

    def _elementary(self, word: str) -> SolType:
        if word == "bool":
            return Bool()
        if word == "address":
            mark = self.pos
            nxt = self._word()
            if nxt == "payable":
                return Address(payable=True)
            self.pos = mark
            return Address()
        if word == "string":
            return String()
        if word == "bytes":
            return DynBytes()
        if word == "byte":
            return FixedBytes(1)
        if word == "uint":
            return Int(256, signed=False)
        if word == "int":
            return Int(256, signed=True)
        if word == "tuple":
            return Tuple(())
        if word.startswith("uint") and word[4:].isdigit():
            return Int(int(word[4:]), signed=False)
        if word.startswith("int") and word[3:].isdigit():
            return Int(int(word[3:]), signed=True)
        if word.startswith("bytes") and word[5:].isdigit():
            return FixedBytes(int(word[5:]))
        if word == "unknown":
            return Unknown()
        raise ParseError((1, self.pos), ("type name",), word)


def canonical(text: str) -> str:
    """Alias-normalized rendering of a type written as text."""
    return render(parse_type(text))
