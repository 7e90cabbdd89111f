"""Recursive-descent parser for decompiler pseudocode units.

Recovery is function-grained: a body that will not parse is skipped to
its balancing brace and reported, so one mangled function never sinks a
unit.  Strict mode turns those skips back into hard errors.
"""

from __future__ import annotations

from .errors import ParseError
from .lexer import AttrNote, Token, tokenize
from .soltypes import SolType, looks_like_type, parse_type
from .syntax import (
    ArrayExpr, Assign, BinOp, Call, Const, Expr, ExprStmt, FunctionDecl, If,
    Index, Member, Param, Require, Return, SkipReport, SliceRange,
    SourceUnit, Stmt, StorageDecl, StorageWrite, TupleExpr, TypeRef, UnOp,
    Var, VarDecl, While,
)

_ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%="}
_MODIFIER_WORDS = {
    "public", "private", "internal", "external", "payable", "view", "pure",
    "constant", "nonpayable",
}

_BIN_PREC = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
    "**": 11,
}


def is_storage_name(name: str, declared: set[str]) -> bool:
    return name in declared or name.startswith("stor_") or name.startswith("store_")


def parse_unit(text: str, strict: bool = False) -> SourceUnit:
    tokens, notes = tokenize(text)
    parser = _Parser(tokens, strict=strict)
    unit = parser.parse_unit()
    _bind_attr_notes(unit, notes)
    classify_storage_writes(unit)
    return unit


def parse_expression(text: str) -> Expr:
    """Parse a single expression (used by tests and edit recovery)."""
    tokens, _ = tokenize(text)
    parser = _Parser(tokens, strict=True)
    expr = parser.parse_expr()
    parser.expect_kind("eof")
    return expr


def _bind_attr_notes(unit: SourceUnit, notes: list[AttrNote]):
    by_line = {d.pos[0]: d for d in unit.storage}
    for note in notes:
        decl = by_line.get(note.line)
        if decl is not None:
            decl.attribute = note.label


class _Parser:
    def __init__(self, tokens: list[Token], strict: bool = False):
        self.tokens = tokens
        self.i = 0
        self.strict = strict

    # -------------------------------------------------------- plumbing

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("op", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            raise ParseError((tok.line, tok.col), (text,), tok.text or "end of input")
        return self.next()

    def expect_kind(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError((tok.line, tok.col), (kind,), tok.text or "end of input")
        return self.next()

    def error(self, *expected: str) -> ParseError:
        tok = self.peek()
        return ParseError((tok.line, tok.col), expected, tok.text or "end of input")

    # -------------------------------------------------------- unit level

    def parse_unit(self) -> SourceUnit:
        unit = SourceUnit()
        seen: set[str] = set()
        while self.peek().kind != "eof":
            if self.at("function"):
                start = self.i
                tok = self.peek()
                try:
                    fn = self.parse_function()
                except ParseError as err:
                    if self.strict:
                        raise
                    name = self._recover_function(start)
                    unit.skips.append(SkipReport(name, (tok.line, tok.col), str(err)))
                    continue
                if fn.name in seen:
                    unit.skips.append(SkipReport(
                        fn.name, fn.pos, f"duplicate function name {fn.name!r}"))
                    continue
                seen.add(fn.name)
                unit.functions.append(fn)
            else:
                unit.storage.append(self.parse_storage_decl())
        return unit

    def _recover_function(self, start: int) -> str:
        """Skip past a broken function; return its name if visible.

        Resync at the balancing brace, or at the next column-one
        `function` keyword when the broken body never closes.
        """
        name = "<unknown>"
        if self.tokens[start + 1].kind in ("ident", "number"):
            name = self.tokens[start + 1].text
        depth = 0
        opened = False
        j = start + 1
        while j < len(self.tokens) and self.tokens[j].kind != "eof":
            tok = self.tokens[j]
            if tok.text == "function" and tok.col == 1:
                break
            if tok.text == "{":
                depth += 1
                opened = True
            elif tok.text == "}":
                depth -= 1
                if opened and depth <= 0:
                    j += 1
                    break
            j += 1
        self.i = j
        return name

    def parse_storage_decl(self) -> StorageDecl:
        tok = self.peek()
        decl_type = self.try_parse_type()
        if decl_type is None:
            raise self.error("type name", "function")
        name = self.expect_kind("ident").text
        init = None
        if self.accept("="):
            init = self.parse_expr()
        self.expect(";")
        return StorageDecl(name=name, decl_type=decl_type, init=init,
                           pos=(tok.line, tok.col))

    def parse_function(self) -> FunctionDecl:
        start = self.expect("function")
        name_tok = self.peek()
        if name_tok.kind not in ("ident", "number"):
            raise self.error("function name")
        self.next()
        self.expect("(")
        params: list[Param] = []
        if not self.at(")"):
            params.append(self.parse_param())
            while self.accept(","):
                params.append(self.parse_param())
        self.expect(")")
        modifiers: list[str] = []
        while True:
            tok = self.peek()
            if tok.kind == "ident" and tok.text in _MODIFIER_WORDS:
                modifiers.append(self.next().text)
            elif tok.kind == "ident" and tok.text == "returns":
                self.next()
                self.expect("(")
                types = [self.parse_type_text()]
                while self.accept(","):
                    types.append(self.parse_type_text())
                self.expect(")")
                modifiers.append(f"returns({', '.join(types)})")
            else:
                break
        self.expect("{")
        body = self.parse_block_rest()
        end = self.tokens[self.i - 1]
        return FunctionDecl(
            name=name_tok.text, params=params, modifiers=modifiers, body=body,
            pos=(start.line, start.col), span=(start.line, end.line))

    def parse_param(self) -> Param:
        decl_type = self.try_parse_type()
        if decl_type is not None and self.peek().kind == "ident":
            return Param(name=self.expect_kind("ident").text, decl_type=decl_type)
        if decl_type is not None:
            # single bare identifier that happened to look like a type
            raise self.error("parameter name")
        return Param(name=self.expect_kind("ident").text)

    # -------------------------------------------------------- types

    def try_parse_type(self) -> SolType | None:
        """Parse a type if one starts here, else rewind and return None."""
        mark = self.i
        try:
            text = self.parse_type_text()
            return parse_type(text)
        except ParseError:
            self.i = mark
            return None

    def parse_type_text(self) -> str:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error("type name")
        if tok.text == "mapping":
            self.next()
            self.expect("(")
            key = self.parse_type_text()
            self.expect("=>")
            value = self.parse_type_text()
            self.expect(")")
            text = f"mapping({key} => {value})"
        elif looks_like_type(tok.text):
            text = self.next().text
            if text == "address" and self.peek().kind == "ident" \
                    and self.peek().text == "payable":
                self.next()
                text = "address payable"
        else:
            raise self.error("type name")
        while (self.at("[") and self.peek(1).text == "]") or self._fixed_array_ahead():
            self.expect("[")
            if self.at("]"):
                self.next()
                text += "[]"
            else:
                length = self.expect_kind("number").text
                self.expect("]")
                text += f"[{length}]"
        return text

    def _fixed_array_ahead(self) -> bool:
        return (self.at("[") and self.peek(1).kind == "number"
                and self.peek(2).text == "]")

    # -------------------------------------------------------- statements

    def parse_block_rest(self) -> list[Stmt]:
        body: list[Stmt] = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise self.error("}")
            body.append(self.parse_stmt())
        self.expect("}")
        return body

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        pos = (tok.line, tok.col)
        if self.at("require"):
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            message = None
            if self.accept(","):
                s = self.expect_kind("string")
                message = s.text[1:-1]
            self.expect(")")
            self.expect(";")
            return Require(cond, message, pos=pos)
        if self.at("if"):
            return self.parse_if(pos)
        if self.at("while"):
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            self.expect("{")
            body = self.parse_block_rest()
            return While(cond, body, pos=pos)
        if self.at("return"):
            self.next()
            values: list[Expr] = []
            if not self.at(";"):
                values.append(self.parse_expr())
                while self.accept(","):
                    values.append(self.parse_expr())
            self.expect(";")
            return Return(values, pos=pos)
        decl = self.try_parse_var_decl(pos)
        if decl is not None:
            return decl
        return self.parse_assign_or_expr(pos)

    def parse_if(self, pos: tuple[int, int]) -> If:
        self.expect("if")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        self.expect("{")
        then = self.parse_block_rest()
        orelse: list[Stmt] = []
        if self.accept("else"):
            if self.at("if"):
                tok = self.peek()
                orelse = [self.parse_if((tok.line, tok.col))]
            else:
                self.expect("{")
                orelse = self.parse_block_rest()
        return If(cond, then, orelse, pos=pos)

    def try_parse_var_decl(self, pos: tuple[int, int]) -> VarDecl | None:
        tok = self.peek()
        if tok.kind != "ident" or not (looks_like_type(tok.text) or tok.text == "mapping"):
            return None
        mark = self.i
        decl_type = self.try_parse_type()
        if decl_type is None or self.peek().kind != "ident":
            self.i = mark
            return None
        # "address(x)" is a cast, not a declaration; the ident check above
        # already excluded it, but a following "=" or ";" confirms a decl.
        name = self.next().text
        if self.at("="):
            self.next()
            init = self.parse_expr()
            self.expect(";")
            return VarDecl(decl_type, name, init, pos=pos)
        if self.at(";"):
            self.next()
            return VarDecl(decl_type, name, None, pos=pos)
        self.i = mark
        return None

    def parse_assign_or_expr(self, pos: tuple[int, int]) -> Stmt:
        first = self.parse_expr()
        targets = [first]
        while self.at(","):
            self.next()
            targets.append(self.parse_expr())
        op_tok = self.peek()
        if op_tok.text in _ASSIGN_OPS and op_tok.kind == "op":
            self.next()
            value = self.parse_expr()
            self.expect(";")
            target = targets[0] if len(targets) == 1 else TupleExpr(targets, pos=pos)
            for t in targets:
                if not isinstance(t, (Var, Index, Member)):
                    raise ParseError(pos, ("assignable target",), type(t).__name__)
            if _targets_storage(target):
                return StorageWrite(target, op_tok.text, value, pos=pos)
            return Assign(target, op_tok.text, value, pos=pos)
        if len(targets) != 1:
            raise self.error("=")
        self.expect(";")
        return ExprStmt(first, pos=pos)

    # -------------------------------------------------------- expressions

    def parse_expr(self) -> Expr:
        return self.parse_binary(1)

    def parse_binary(self, min_prec: int) -> Expr:
        left = self.parse_unary()
        while True:
            tok = self.peek()
            prec = _BIN_PREC.get(tok.text) if tok.kind == "op" else None
            if prec is None or prec < min_prec:
                return left
            self.next()
            # ** binds right; everything else binds left
            nxt = prec if tok.text == "**" else prec + 1
            right = self.parse_binary(nxt)
            left = BinOp(tok.text, left, right, pos=(tok.line, tok.col))

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("!", "-", "~", "+"):
            self.next()
            operand = self.parse_unary()
            if tok.text == "+":
                return operand
            return UnOp(tok.text, operand, pos=(tok.line, tok.col))
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while True:
            tok = self.peek()
            if self.at("("):
                self.next()
                args: list[Expr] = []
                if not self.at(")"):
                    args.append(self.parse_expr())
                    while self.accept(","):
                        args.append(self.parse_expr())
                self.expect(")")
                if isinstance(expr, Var) and looks_like_type(expr.name):
                    expr = TypeRef(parse_type(expr.name), expr.name, pos=expr.pos)
                expr = Call(expr, args, pos=(tok.line, tok.col))
            elif self.at("."):
                self.next()
                name = self.expect_kind("ident").text
                expr = Member(expr, name, pos=(tok.line, tok.col))
            elif self.at("["):
                self.next()
                if self.at(":"):
                    self.next()
                    hi = None if self.at("]") else self.parse_expr()
                    self.expect("]")
                    expr = SliceRange(expr, None, hi, pos=(tok.line, tok.col))
                    continue
                key = self.parse_expr()
                if self.accept(":"):
                    hi = None if self.at("]") else self.parse_expr()
                    self.expect("]")
                    expr = SliceRange(expr, key, hi, pos=(tok.line, tok.col))
                else:
                    self.expect("]")
                    expr = Index(expr, key, pos=(tok.line, tok.col))
            else:
                return expr

    def parse_primary(self) -> Expr:
        tok = self.peek()
        pos = (tok.line, tok.col)
        if tok.kind == "number":
            self.next()
            value = int(tok.text, 16) if tok.text.lower().startswith("0x") else int(tok.text)
            return Const(value, tok.text, pos=pos)
        if tok.kind == "string":
            self.next()
            inner = tok.text[1:-1].replace('\\"', '"').replace("\\\\", "\\")
            return Const(inner, tok.text, pos=pos)
        if tok.kind == "ident":
            if tok.text == "true":
                self.next()
                return Const(True, "true", pos=pos)
            if tok.text == "false":
                self.next()
                return Const(False, "false", pos=pos)
            self.next()
            return Var(tok.text, pos=pos)
        if self.at("("):
            self.next()
            items = [self.parse_expr()]
            while self.accept(","):
                items.append(self.parse_expr())
            self.expect(")")
            if len(items) == 1:
                return items[0]
            return TupleExpr(items, pos=pos)
        if self.at("["):
            self.next()
            items = []
            if not self.at("]"):
                items.append(self.parse_expr())
                while self.accept(","):
                    items.append(self.parse_expr())
            self.expect("]")
            return ArrayExpr(items, pos=pos)
        raise self.error("expression")


def _targets_storage(target: Expr) -> bool:
    root = target
    while isinstance(root, (Index, Member, SliceRange)):
        root = root.base
    if isinstance(root, TupleExpr):
        return any(_targets_storage(t) for t in root.items)
    return isinstance(root, Var) and is_storage_name(root.name, set())


def classify_storage_writes(unit: SourceUnit):
    """Reclassify Assign/StorageWrite against the unit's declared storage.

    The grammar-level classifier only sees stor_/store_ prefixes; once
    the unit's top-level declarations are known, writes to declared
    names (e.g. uintStorage) must become StorageWrite as well.
    """
    declared = unit.storage_names()

    def root_is_storage(target: Expr) -> bool:
        root = target
        while isinstance(root, (Index, Member, SliceRange)):
            root = root.base
        if isinstance(root, TupleExpr):
            return any(root_is_storage(t) for t in root.items)
        return isinstance(root, Var) and is_storage_name(root.name, declared)

    def walk(stmts: list[Stmt]):
        for i, s in enumerate(stmts):
            if isinstance(s, If):
                walk(s.then)
                walk(s.orelse)
            elif isinstance(s, While):
                walk(s.body)
            elif isinstance(s, Assign) and root_is_storage(s.target):
                stmts[i] = StorageWrite(s.target, s.op, s.value, pos=s.pos)

    for fn in unit.functions:
        walk(fn.body)
