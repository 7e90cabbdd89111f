"""Concrete syntax tree and the canonical text form.

The canonical form is the contract everything else leans on: one
statement per line, four-space indentation, single-space operator
spacing, minimal parentheses.  Rendering is idempotent through a parse:
render(parse(render(parse(text)))) == render(parse(text)).  Line-based
artifacts (boundary spans, edit ranges, [STATEMENT] prompt fillers) are
all expressed against this form, never against raw input text.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .soltypes import SolType, render as render_type

# ================================================================
# expressions
# ================================================================


@dataclass
class Expr:
    pass


@dataclass
class Const(Expr):
    value: object  # int | str | bool
    lexeme: str = ""
    pos: tuple[int, int] = (0, 0)


@dataclass
class Var(Expr):
    name: str
    pos: tuple[int, int] = (0, 0)


@dataclass
class TypeRef(Expr):
    """A type name in expression position (cast callee)."""

    type: SolType
    text: str
    pos: tuple[int, int] = (0, 0)


@dataclass
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    pos: tuple[int, int] = (0, 0)


@dataclass
class UnOp(Expr):
    op: str
    operand: Expr
    pos: tuple[int, int] = (0, 0)


@dataclass
class Call(Expr):
    callee: Expr
    args: list[Expr]
    pos: tuple[int, int] = (0, 0)


@dataclass
class Member(Expr):
    base: Expr
    name: str
    pos: tuple[int, int] = (0, 0)


@dataclass
class Index(Expr):
    base: Expr
    key: Expr
    pos: tuple[int, int] = (0, 0)


@dataclass
class SliceRange(Expr):
    base: Expr
    lo: Expr | None
    hi: Expr | None
    pos: tuple[int, int] = (0, 0)


@dataclass
class TupleExpr(Expr):
    items: list[Expr]
    pos: tuple[int, int] = (0, 0)


@dataclass
class ArrayExpr(Expr):
    items: list[Expr]
    pos: tuple[int, int] = (0, 0)


# ================================================================
# statements
# ================================================================


@dataclass
class Stmt:
    pass


@dataclass
class VarDecl(Stmt):
    decl_type: SolType | None
    name: str
    init: Expr | None
    pos: tuple[int, int] = (0, 0)


@dataclass
class Assign(Stmt):
    target: Expr
    op: str  # "=", "+=", "-=", "*=", "/=", "%="
    value: Expr
    pos: tuple[int, int] = (0, 0)


@dataclass
class StorageWrite(Stmt):
    """Assignment whose target root is a storage identifier."""

    target: Expr
    op: str
    value: Expr
    pos: tuple[int, int] = (0, 0)


@dataclass
class ExprStmt(Stmt):
    expr: Expr
    pos: tuple[int, int] = (0, 0)


@dataclass
class Require(Stmt):
    cond: Expr
    message: str | None = None
    pos: tuple[int, int] = (0, 0)


@dataclass
class If(Stmt):
    cond: Expr
    then: list[Stmt] = field(default_factory=list)
    orelse: list[Stmt] = field(default_factory=list)
    pos: tuple[int, int] = (0, 0)


@dataclass
class While(Stmt):
    cond: Expr
    body: list[Stmt] = field(default_factory=list)
    pos: tuple[int, int] = (0, 0)


@dataclass
class Return(Stmt):
    values: list[Expr] = field(default_factory=list)
    pos: tuple[int, int] = (0, 0)


# ================================================================
# declarations
# ================================================================


@dataclass
class Param:
    name: str
    decl_type: SolType | None = None


@dataclass
class StorageDecl:
    name: str
    decl_type: SolType | None = None
    init: Expr | None = None
    attribute: str | None = None
    pos: tuple[int, int] = (0, 0)


@dataclass
class FunctionDecl:
    name: str
    params: list[Param]
    modifiers: list[str]
    body: list[Stmt]
    pos: tuple[int, int] = (0, 0)
    span: tuple[int, int] = (0, 0)  # first/last line in the parsed text


@dataclass
class SkipReport:
    function: str
    position: tuple[int, int]
    reason: str


@dataclass
class SourceUnit:
    storage: list[StorageDecl] = field(default_factory=list)
    functions: list[FunctionDecl] = field(default_factory=list)
    skips: list[SkipReport] = field(default_factory=list)

    def function(self, name: str) -> FunctionDecl | None:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None

    def storage_names(self) -> set[str]:
        return {d.name for d in self.storage}


# ================================================================
# canonical rendering
# ================================================================

# binding strength; parenthesize a child bound looser than its parent
_PREC = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
    "**": 11,
}
_UNARY_PREC = 12
_POSTFIX_PREC = 13


def render_expr(e: Expr) -> str:
    return _expr(e, 0)


def _expr(e: Expr, ctx: int) -> str:
    if isinstance(e, Const):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        if e.lexeme:
            return e.lexeme
        if isinstance(e.value, str):
            return '"' + e.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, TypeRef):
        return render_type(e.type)
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        left = _expr(e.left, prec)
        # left-assoc: equal precedence on the right needs parens
        right = _expr(e.right, prec + 1)
        text = f"{left} {e.op} {right}"
        return f"({text})" if prec < ctx else text
    if isinstance(e, UnOp):
        inner = _expr(e.operand, _UNARY_PREC)
        text = f"{e.op}{inner}"
        return f"({text})" if _UNARY_PREC < ctx else text
    if isinstance(e, Call):
        callee = _expr(e.callee, _POSTFIX_PREC)
        return f"{callee}({', '.join(_expr(a, 0) for a in e.args)})"
    if isinstance(e, Member):
        return f"{_expr(e.base, _POSTFIX_PREC)}.{e.name}"
    if isinstance(e, Index):
        return f"{_expr(e.base, _POSTFIX_PREC)}[{_expr(e.key, 0)}]"
    if isinstance(e, SliceRange):
        lo = _expr(e.lo, 0) if e.lo is not None else ""
        hi = _expr(e.hi, 0) if e.hi is not None else ""
        return f"{_expr(e.base, _POSTFIX_PREC)}[{lo}:{hi}]"
    if isinstance(e, TupleExpr):
        return "(" + ", ".join(_expr(x, 0) for x in e.items) + ")"
    if isinstance(e, ArrayExpr):
        return "[" + ", ".join(_expr(x, 0) for x in e.items) + "]"
    raise TypeError(f"unrenderable expression {e!r}")


def render_stmt_head(s: Stmt) -> str:
    """One-line form of a statement; block statements show their header."""
    if isinstance(s, VarDecl):
        t = render_type(s.decl_type) if s.decl_type is not None else "var"
        if s.init is not None:
            return f"{t} {s.name} = {render_expr(s.init)};"
        return f"{t} {s.name};"
    if isinstance(s, (Assign, StorageWrite)):
        return f"{render_expr(s.target)} {s.op} {render_expr(s.value)};"
    if isinstance(s, ExprStmt):
        return f"{render_expr(s.expr)};"
    if isinstance(s, Require):
        if s.message is not None:
            return f'require({render_expr(s.cond)}, "{s.message}");'
        return f"require({render_expr(s.cond)});"
    if isinstance(s, If):
        return f"if ({render_expr(s.cond)})"
    if isinstance(s, While):
        return f"while ({render_expr(s.cond)})"
    if isinstance(s, Return):
        if s.values:
            return f"return {', '.join(render_expr(v) for v in s.values)};"
        return "return;"
    raise TypeError(f"unrenderable statement {s!r}")


def _stmt_lines(s: Stmt, depth: int, out: list[str]):
    pad = "    " * depth
    if isinstance(s, If):
        out.append(f"{pad}if ({render_expr(s.cond)}) {{")
        for inner in s.then:
            _stmt_lines(inner, depth + 1, out)
        if s.orelse:
            out.append(f"{pad}}} else {{")
            for inner in s.orelse:
                _stmt_lines(inner, depth + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, While):
        out.append(f"{pad}while ({render_expr(s.cond)}) {{")
        for inner in s.body:
            _stmt_lines(inner, depth + 1, out)
        out.append(f"{pad}}}")
    else:
        out.append(pad + render_stmt_head(s))


def _storage_line(d: StorageDecl) -> str:
    t = render_type(d.decl_type) if d.decl_type is not None else "var"
    line = f"{t} {d.name}"
    if d.init is not None:
        line += f" = {render_expr(d.init)}"
    line += ";"
    if d.attribute:
        line += f" // attribute: {d.attribute}"
    return line


def _function_lines(fn: FunctionDecl) -> list[str]:
    params = []
    for p in fn.params:
        if p.decl_type is not None:
            params.append(f"{render_type(p.decl_type)} {p.name}")
        else:
            params.append(p.name)
    mods = "".join(f" {m}" for m in fn.modifiers)
    lines = [f"function {fn.name}({', '.join(params)}){mods} {{"]
    for s in fn.body:
        _stmt_lines(s, 1, lines)
    lines.append("}")
    return lines


def canonical(unit: SourceUnit) -> str:
    """Canonical text of a unit, trailing newline included."""
    chunks: list[list[str]] = []
    if unit.storage:
        chunks.append([_storage_line(d) for d in unit.storage])
    for fn in unit.functions:
        chunks.append(_function_lines(fn))
    lines: list[str] = []
    for i, chunk in enumerate(chunks):
        if i:
            lines.append("")
        lines.extend(chunk)
    return "\n".join(lines) + "\n" if lines else ""


def preorder_statements(fn: FunctionDecl) -> list[tuple[int, Stmt]]:
    """Statements in lowering preorder, 1-based, matching IR stmt_index."""
    out: list[tuple[int, Stmt]] = []
    counter = [0]

    def walk(stmts: list[Stmt]):
        for s in stmts:
            counter[0] += 1
            out.append((counter[0], s))
            if isinstance(s, If):
                walk(s.then)
                walk(s.orelse)
            elif isinstance(s, While):
                walk(s.body)

    walk(fn.body)
    return out


def expr_variables(e: Expr) -> list[tuple[str, tuple[int, int], str]]:
    """Variable occurrences in an expression as (name, pos, role).

    Role is how the occurrence participates: "key" for index keys,
    "target" for indexed bases, "operand" otherwise.
    """
    found: list[tuple[str, tuple[int, int], str]] = []

    def walk(node: Expr, role: str):
        if isinstance(node, Var):
            found.append((node.name, node.pos, role))
        elif isinstance(node, BinOp):
            walk(node.left, "operand")
            walk(node.right, "operand")
        elif isinstance(node, UnOp):
            walk(node.operand, "operand")
        elif isinstance(node, Call):
            if not isinstance(node.callee, (Var, TypeRef)):
                walk(node.callee, "operand")
            for a in node.args:
                walk(a, "operand")
        elif isinstance(node, Member):
            walk(node.base, "operand")
        elif isinstance(node, Index):
            walk(node.base, "target")
            walk(node.key, "key")
        elif isinstance(node, SliceRange):
            walk(node.base, "target")
            if node.lo is not None:
                walk(node.lo, "key")
            if node.hi is not None:
                walk(node.hi, "key")
        elif isinstance(node, (TupleExpr, ArrayExpr)):
            for item in node.items:
                walk(item, "operand")

    walk(e, "operand")
    return found


def canonical_spans(unit: SourceUnit) -> dict[str, tuple[int, int]]:
    """1-based (first, last) line of each function in the canonical text."""
    spans: dict[str, tuple[int, int]] = {}
    line = 0
    if unit.storage:
        line += len(unit.storage)
    for i, fn in enumerate(unit.functions):
        if line:
            line += 1  # blank separator
        body = _function_lines(fn)
        spans[fn.name] = (line + 1, line + len(body))
        line += len(body)
    return spans
