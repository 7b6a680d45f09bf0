"""Frontend for the MiniTest subject dialect.

MiniTest is a small Java-flavored language (grammar in docs/minitest.md):
classes with typed fields and methods, ``@Test`` test methods, ``@MR``
parameterized methods, ``new``, field access, ``throw IllegalArgument(msg)``,
``if``/``while`` (parsed fully inside subject-class methods, recorded as
opaque regions inside test bodies) and the JUnit-style assertion APIs.

Parsing is total: any byte input yields a fragment plus diagnostics.  Errors
suppress IR emission for the enclosing declaration only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field

from .ir import (
    ASSERTION_APIS,
    EXTRA_COMP_APIS,
    PRIMITIVE_TYPES,
    Assign,
    AssertionStmt,
    BinaryOp,
    CallExpr,
    ClassDecl,
    Expr,
    ExprStmt,
    FieldAccess,
    IfStmt,
    InvocationStmt,
    IrError,
    Literal,
    MethodDecl,
    MethodInvocation,
    NewExpr,
    OpaqueRegion,
    ProjectModel,
    ReturnStmt,
    SetField,
    SourceSpan,
    Stmt,
    TestCaseIR,
    TestSuite,
    ThrowStmt,
    UnaryOp,
    VarDecl,
    VarRef,
    WhileStmt,
)

# Comparison-style APIs from testing frameworks mapped onto the supported
# binary assertion set when they carry exactly two operands.
_COMP_ALIAS = {
    "assertThat": "assertEquals",
    "failNotEqual": "assertEquals",
    "assertIterableEquals": "assertEquals",
    "assertLinesMatch": "assertEquals",
    "failNotSame": "assertNotSame",
}

# Method names understood on built-in string values.
STRING_BUILTINS = {"equals": "bool", "length": "int", "isEmpty": "bool", "concat": "string"}

_KEYWORDS = {
    "class", "void", "int", "float", "bool", "string", "new", "this",
    "if", "else", "while", "return", "throw", "true", "false", "null",
    "IllegalArgument",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<float>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<str>"(?:\\.|[^"\\])*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<anno>@[A-Za-z]+)
  | (?P<op><=|>=|==|!=|&&|\|\||[-+*/<>=!.,;(){}])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # 'error' | 'warning'
    path: str
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass
class Fragment:
    """Per-file parse result, joined into a ProjectModel by link_project."""

    file_id: str
    classes: list[ClassDecl] = dc_field(default_factory=list)
    test_cases: list[TestCaseIR] = dc_field(default_factory=list)
    diagnostics: list[Diagnostic] = dc_field(default_factory=list)


@dataclass(frozen=True)
class _Tok:
    kind: str  # ident/int/float/str/op/anno/eof
    text: str
    line: int
    col: int
    pos: int  # byte offset in source


class _ParseError(Exception):
    def __init__(self, tok: _Tok, message: str):
        super().__init__(message)
        self.tok = tok
        self.message = message


def _lex(text: str, path: str, diags: list[Diagnostic]) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        m = _TOKEN_RE.match(text, i)
        if not m:
            diags.append(Diagnostic("error", path, line, col, f"unexpected character {text[i]!r}"))
            i += 1
            col += 1
            continue
        kind = m.lastgroup
        tok_text = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, tok_text, line, col, i))
        nl = tok_text.count("\n")
        if nl:
            line += nl
            col = len(tok_text) - tok_text.rfind("\n")
        else:
            col += len(tok_text)
        i = m.end()
    toks.append(_Tok("eof", "", line, col, n))
    return toks


def _unescape(raw: str) -> str:
    body = raw[1:-1]
    return body.replace("\\n", "\n").replace('\\"', '"').replace("\\\\", "\\")


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


class _Parser:
    def __init__(self, source: SourceFile, lift_nested_args: bool = True):
        self.source = source
        self.diags: list[Diagnostic] = []
        self.toks = _lex(source.text, source.path, self.diags)
        self.i = 0
        self.lift_nested_args = lift_nested_args
        # current scope: var name -> declared type ('?' when unknown)
        self.scope: dict[str, str] = {}
        self.current_class: str | None = None
        self.pending: list[Stmt] = []  # lifted temporaries
        self.tmp_counter = 0
        self.in_test = False

    # -- token helpers ------------------------------------------------------

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("op", "ident", "anno")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> _Tok:
        if self.at(text):
            return self.next()
        raise _ParseError(self.peek(), f"expected {text!r}, found {self.peek().text!r}")

    def error(self, tok: _Tok, message: str) -> None:
        self.diags.append(Diagnostic("error", self.source.path, tok.line, tok.col, message))

    def warn(self, tok: _Tok, message: str) -> None:
        self.diags.append(Diagnostic("warning", self.source.path, tok.line, tok.col, message))

    def skip_balanced_block(self) -> None:
        """Skip tokens until the brace nesting closes; error recovery."""
        depth = 0
        while self.peek().kind != "eof":
            t = self.next()
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                depth -= 1
                if depth <= 0:
                    return

    # -- top level ----------------------------------------------------------

    def parse_file(self) -> Fragment:
        frag = Fragment(self.source.path)
        while self.peek().kind != "eof":
            if self.at("class"):
                try:
                    self.parse_class(frag)
                except _ParseError as e:
                    self.error(e.tok, e.message)
                    self.skip_balanced_block()
            else:
                t = self.next()
                self.error(t, f"expected 'class', found {t.text!r}")
                # resync at next 'class'
                while self.peek().kind != "eof" and not self.at("class"):
                    self.next()
        return frag

    def parse_qname(self) -> str:
        parts = [self.expect_ident()]
        while self.peek().text == "." and self.peek(1).kind == "ident" and self.peek(2).text != "(":
            # consume only when this keeps being a plain dotted name
            self.next()
            parts.append(self.expect_ident())
        return ".".join(parts)

    def expect_ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            raise _ParseError(t, f"expected identifier, found {t.text!r}")
        self.next()
        return t.text

    def parse_type(self) -> str:
        t = self.peek()
        if t.text in PRIMITIVE_TYPES:
            self.next()
            return t.text
        # dotted class name used as a type
        parts = [self.expect_ident()]
        while self.at(".") and self.peek(1).kind == "ident":
            self.next()
            parts.append(self.expect_ident())
        return ".".join(parts)

    def parse_class(self, frag: Fragment) -> None:
        self.expect("class")
        start = self.peek()
        name_parts = [self.expect_ident()]
        while self.accept("."):
            name_parts.append(self.expect_ident())
        fqn = ".".join(name_parts)
        self.expect("{")
        self.current_class = fqn
        fields: list[tuple[str, str]] = []
        methods: list[MethodDecl] = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise _ParseError(start, f"unbalanced braces in class {fqn}")
            try:
                self.parse_member(frag, fqn, fields, methods)
            except _ParseError as e:
                self.error(e.tok, e.message)
                # resync: skip to end of the enclosing member
                while self.peek().kind != "eof" and self.peek().text not in ("{", "}", ";"):
                    self.next()
                if self.at("{"):
                    self.skip_balanced_block()
                elif self.at(";"):
                    self.next()
        self.expect("}")
        self.current_class = None
        frag.classes.append(ClassDecl(fqn, tuple(fields), tuple(methods)))

    def parse_member(
        self,
        frag: Fragment,
        class_fqn: str,
        fields: list[tuple[str, str]],
        methods: list[MethodDecl],
    ) -> None:
        if self.peek().kind == "anno":
            anno = self.next().text
            if anno not in ("@Test", "@MR"):
                self.warn(self.peek(), f"ignoring unknown annotation {anno}")
                anno = "@Test"
            self.expect("void")
            start_tok = self.peek()
            name = self.expect_ident()
            self.expect("(")
            params: list[tuple[str, str]] = []
            if not self.at(")"):
                while True:
                    ptype = self.parse_type()
                    pname = self.expect_ident()
                    params.append((pname, ptype))
                    if not self.accept(","):
                        break
            self.expect(")")
            if anno == "@Test" and params:
                raise _ParseError(start_tok, "@Test methods take no parameters")
            body, end_line = self.parse_body(is_test=True, params=params)
            frag.test_cases.append(
                TestCaseIR(
                    name=name,
                    statements=tuple(body),
                    source_span=SourceSpan(self.source.path, start_tok.line, end_line),
                    params=tuple(params),
                )
            )
            return

        ret_tok = self.peek()
        if self.accept("void"):
            ret_type: str | None = None
        else:
            ret_type = self.parse_type()
        name = self.expect_ident()
        if self.accept(";"):
            # field declaration
            if ret_type is None:
                raise _ParseError(ret_tok, "fields cannot be void")
            fields.append((name, ret_type))
            return
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                ptype = self.parse_type()
                pname = self.expect_ident()
                params.append((pname, ptype))
                if not self.accept(","):
                    break
        self.expect(")")
        body, _ = self.parse_body(is_test=False, params=params, receiver_class=class_fqn)
        methods.append(MethodDecl(name, tuple(params), ret_type, tuple(body)))

    # -- statement bodies ---------------------------------------------------

    def parse_body(
        self,
        is_test: bool,
        params: list[tuple[str, str]],
        receiver_class: str | None = None,
    ) -> tuple[list[Stmt], int]:
        saved_scope, saved_test = self.scope, self.in_test
        self.scope = {n: t for n, t in params}
        if receiver_class:
            self.scope["this"] = receiver_class
        self.in_test = is_test
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise _ParseError(self.peek(), "unbalanced braces in method body")
            stmts.extend(self.parse_statement())
        end = self.expect("}")
        self.scope, self.in_test = saved_scope, saved_test
        return stmts, end.line

    def parse_block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise _ParseError(self.peek(), "unbalanced braces in block")
            stmts.extend(self.parse_statement())
        self.expect("}")
        return tuple(stmts)

    def parse_statement(self) -> list[Stmt]:
        t = self.peek()
        if t.text in ("if", "while"):
            if self.in_test:
                return [self.capture_opaque()]
            return [self.parse_control()]
        if t.text == "return":
            if self.in_test:
                raise _ParseError(t, "return not allowed in test bodies")
            self.next()
            if self.accept(";"):
                return [ReturnStmt(None)]
            e, pre = self.parse_expr_lifted()
            self.expect(";")
            return pre + [ReturnStmt(e)]
        if t.text == "throw":
            self.next()
            self.expect("IllegalArgument")
            self.expect("(")
            e, pre = self.parse_expr_lifted()
            self.expect(")")
            self.expect(";")
            return pre + [ThrowStmt(e)]
        if t.kind == "ident" and t.text in ASSERTION_APIS + EXTRA_COMP_APIS and self.peek(1).text == "(":
            return self.parse_assertion()
        return self.parse_simple()

    def capture_opaque(self) -> OpaqueRegion:
        """Slice the raw source of an if/while (plus else) out of the file."""
        start = self.peek().pos
        self.next()  # if/while
        self.expect("(")
        depth = 1
        while depth and self.peek().kind != "eof":
            txt = self.next().text
            if txt == "(":
                depth += 1
            elif txt == ")":
                depth -= 1
        self.skip_balanced_block_from_open()
        if self.at("else"):
            self.next()
            self.skip_balanced_block_from_open()
        end = self.peek().pos
        return OpaqueRegion(self.source.text[start:end].strip())

    def skip_balanced_block_from_open(self) -> None:
        self.expect("{")
        depth = 1
        while depth and self.peek().kind != "eof":
            txt = self.next().text
            if txt == "{":
                depth += 1
            elif txt == "}":
                depth -= 1

    def parse_control(self) -> Stmt:
        kw = self.next().text
        self.expect("(")
        cond = self.parse_expr()  # no lifting inside conditions
        self.expect(")")
        saved = dict(self.scope)
        body = self.parse_block()
        self.scope = saved
        if kw == "while":
            return WhileStmt(cond, body)
        else_body: tuple[Stmt, ...] = ()
        if self.accept("else"):
            saved = dict(self.scope)
            else_body = self.parse_block()
            self.scope = saved
        return IfStmt(cond, body, else_body)

    def parse_assertion(self) -> list[Stmt]:
        tok = self.next()
        api = tok.text
        self.expect("(")
        operands: list[Expr] = []
        pre: list[Stmt] = []
        if not self.at(")"):
            while True:
                e, p = self.parse_expr_lifted(lift_calls=False)
                operands.append(e)
                pre.extend(p)
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect(";")
        if api in _COMP_ALIAS:
            if len(operands) == 2:
                api = _COMP_ALIAS[api]
            else:
                self.warn(tok, f"{api} with {len(operands)} operand(s) ignored")
                return pre
        want = 1 if api in ("assertTrue", "assertFalse") else 2
        if len(operands) != want:
            self.error(tok, f"{api} takes {want} operand(s), found {len(operands)}")
            return pre
        return pre + [AssertionStmt(api, tuple(operands))]

    def parse_simple(self) -> list[Stmt]:
        """VarDecl, assignment, field store, or invocation statement."""
        t = self.peek()
        # Try: type ident '=' (a declaration).  Distinguish from expressions by
        # looking for ident after a type-shaped prefix.
        if t.text in PRIMITIVE_TYPES or (t.kind == "ident" and self._looks_like_decl()):
            dtype = self.parse_type()
            name = self.expect_ident()
            self.expect("=")
            stmts = self.parse_init(dtype, name)
            self.expect(";")
            return stmts
        if t.text == "this" and self.peek(1).text == ".":
            # this.field = e;  or  this.m(...)
            return self.parse_this_statement()
        if t.kind == "ident":
            return self.parse_ident_statement()
        raise _ParseError(t, f"unexpected token {t.text!r}")

    def _looks_like_decl(self) -> bool:
        # scan ident(.ident)* ident — a dotted type followed by a fresh name
        j = self.i
        if self.toks[j].kind != "ident":
            return False
        j += 1
        while self.toks[j].text == "." and self.toks[j + 1].kind == "ident":
            j += 2
        return self.toks[j].kind == "ident" and self.toks[j + 1].text == "="

    def parse_init(self, dtype: str, name: str) -> list[Stmt]:
        e, pre = self.parse_expr_lifted()
        self.scope[name] = dtype
        if isinstance(e, CallExpr):
            inv = e.invocation
            return pre + [
                InvocationStmt(
                    MethodInvocation(
                        inv.receiver, inv.class_fqn, inv.method, inv.args, name, dtype
                    )
                )
            ]
        return pre + [VarDecl(name, dtype, e)]

    def parse_this_statement(self) -> list[Stmt]:
        self.expect("this")
        self.expect(".")
        name = self.expect_ident()
        if self.at("("):
            inv, pre = self.parse_call_tail("this", self.current_class or "?", name)
            self.expect(";")
            return pre + [InvocationStmt(inv)]
        if self.in_test:
            raise _ParseError(self.peek(), "field stores not allowed in test bodies")
        self.expect("=")
        e, pre = self.parse_expr_lifted()
        self.expect(";")
        return pre + [SetField("this", name, e)]

    def parse_ident_statement(self) -> list[Stmt]:
        start = self.peek()
        first = self.expect_ident()
        if first in self.scope:
            if self.accept("="):
                e, pre = self.parse_expr_lifted()
                self.expect(";")
                if isinstance(e, CallExpr):
                    inv = e.invocation
                    return pre + [
                        InvocationStmt(
                            MethodInvocation(
                                inv.receiver, inv.class_fqn, inv.method, inv.args, first, None
                            )
                        )
                    ]
                return pre + [Assign(first, e)]
            if self.at("."):
                e, pre = self.parse_postfix_on_var(first)
                if isinstance(e, CallExpr):
                    self.expect(";")
                    return pre + [InvocationStmt(e.invocation)]
                if isinstance(e, FieldAccess) and self.accept("="):
                    if self.in_test:
                        raise _ParseError(start, "field stores not allowed in test bodies")
                    if not isinstance(e.base, VarRef):
                        raise _ParseError(start, "field store base must be a variable")
                    v, pre2 = self.parse_expr_lifted()
                    self.expect(";")
                    return pre + pre2 + [SetField(e.base.name, e.field, v)]
                raise _ParseError(start, "expression is not a statement")
            raise _ParseError(start, f"expected '=' or '.' after {first!r}")
        # static call on a dotted class name
        parts = [first]
        while self.accept("."):
            parts.append(self.expect_ident())
            if self.at("("):
                cls = ".".join(parts[:-1])
                inv, pre = self.parse_call_tail(None, cls, parts[-1])
                self.expect(";")
                return pre + [InvocationStmt(inv)]
        raise _ParseError(start, f"unknown variable {first!r}")

    # -- expressions --------------------------------------------------------

    def parse_expr_lifted(self, lift_calls: bool = False) -> tuple[Expr, list[Stmt]]:
        """Parse an expression, collecting lifted temp declarations."""
        saved = self.pending
        self.pending = []
        e = self.parse_expr()
        pre, self.pending = self.pending, saved
        return e, pre

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        e = self.parse_and()
        while self.at("||"):
            self.next()
            e = BinaryOp("||", e, self.parse_and())
        return e

    def parse_and(self) -> Expr:
        e = self.parse_eq()
        while self.at("&&"):
            self.next()
            e = BinaryOp("&&", e, self.parse_eq())
        return e

    def parse_eq(self) -> Expr:
        e = self.parse_rel()
        while self.peek().text in ("==", "!="):
            op = self.next().text
            e = BinaryOp(op, e, self.parse_rel())
        return e

    def parse_rel(self) -> Expr:
        e = self.parse_add()
        while self.peek().text in ("<", ">", "<=", ">="):
            op = self.next().text
            e = BinaryOp(op, e, self.parse_add())
        return e

    def parse_add(self) -> Expr:
        e = self.parse_mul()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            e = BinaryOp(op, e, self.parse_mul())
        return e

    def parse_mul(self) -> Expr:
        e = self.parse_unary()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            e = BinaryOp(op, e, self.parse_unary())
        return e

    def parse_unary(self) -> Expr:
        if self.peek().text in ("-", "!"):
            op = self.next().text
            return UnaryOp(op, self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Literal(int(t.text), "int")
        if t.kind == "float":
            self.next()
            return Literal(float(t.text), "float")
        if t.kind == "str":
            self.next()
            return Literal(_unescape(t.text), "string")
        if t.text == "true":
            self.next()
            return Literal(True, "bool")
        if t.text == "false":
            self.next()
            return Literal(False, "bool")
        if t.text == "null":
            self.next()
            return Literal(None, "null")
        if self.accept("("):
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.text == "new":
            self.next()
            cls = self.parse_type()
            self.expect("(")
            args = self.parse_args()
            self.expect(")")
            return NewExpr(cls, tuple(args))
        if t.text == "this":
            self.next()
            return self.parse_chain(VarRef("this"), self.scope.get("this", "?"))
        if t.kind == "ident":
            name = self.expect_ident()
            if name in self.scope:
                return self.parse_chain(VarRef(name), self.scope[name])
            # dotted static call
            parts = [name]
            while self.at("."):
                self.next()
                parts.append(self.expect_ident())
                if self.at("("):
                    cls = ".".join(parts[:-1])
                    inv, pre = self.parse_call_tail(None, cls, parts[-1])
                    self.pending.extend(pre)
                    return self.parse_chain(CallExpr(inv), inv_return_type(inv, self))
            raise _ParseError(t, f"unknown variable {name!r}")
        raise _ParseError(t, f"unexpected token {t.text!r} in expression")

    def parse_chain(self, base: Expr, base_type: str) -> Expr:
        """Parse .field / .method(...) chains, lifting complex receivers."""
        e, etype = base, base_type
        while self.at(".") and self.peek(1).kind == "ident":
            self.next()
            name = self.expect_ident()
            if self.at("("):
                recv_name, pre0 = self.materialize(e, etype)
                cls = etype if etype else "?"
                inv, pre = self.parse_call_tail(recv_name, cls, name)
                self.pending.extend(pre0 + pre)
                e = CallExpr(inv)
                etype = inv_return_type(inv, self)
            else:
                e = FieldAccess(e, name)
                etype = self.field_type_hint(etype, name)
        return e

    def parse_postfix_on_var(self, name: str) -> tuple[Expr, list[Stmt]]:
        saved = self.pending
        self.pending = []
        e = self.parse_chain(VarRef(name), self.scope.get(name, "?"))
        pre, self.pending = self.pending, saved
        return e, pre

    def materialize(self, e: Expr, etype: str) -> tuple[str, list[Stmt]]:
        """Ensure a call receiver is a plain variable, lifting when needed."""
        if isinstance(e, VarRef):
            return e.name, []
        tmp = f"_t{self.tmp_counter}"
        self.tmp_counter += 1
        self.scope[tmp] = etype or "?"
        if isinstance(e, CallExpr):
            inv = e.invocation
            return tmp, [
                InvocationStmt(
                    MethodInvocation(inv.receiver, inv.class_fqn, inv.method, inv.args, tmp, etype or "?")
                )
            ]
        return tmp, [VarDecl(tmp, etype or "?", e)]

    def parse_call_tail(
        self, receiver: str | None, class_fqn: str, method: str
    ) -> tuple[MethodInvocation, list[Stmt]]:
        self.expect("(")
        args = self.parse_args()
        self.expect(")")
        pre: list[Stmt] = []
        if self.lift_nested_args and self.in_test:
            lifted_args: list[Expr] = []
            for a in args:
                if isinstance(a, CallExpr):
                    inner = a.invocation
                    rt = inv_return_type(inner, self)
                    tmp = f"_t{self.tmp_counter}"
                    self.tmp_counter += 1
                    self.scope[tmp] = rt or "?"
                    pre.append(
                        InvocationStmt(
                            MethodInvocation(
                                inner.receiver, inner.class_fqn, inner.method, inner.args, tmp, rt or "?"
                            )
                        )
                    )
                    lifted_args.append(VarRef(tmp))
                else:
                    lifted_args.append(a)
            args = lifted_args
        cls = class_fqn
        if cls == "string" or (receiver and self.scope.get(receiver) == "string"):
            cls = "string"
        return MethodInvocation(receiver, cls, method, tuple(args)), pre

    def parse_args(self) -> list[Expr]:
        args: list[Expr] = []
        if not self.at(")"):
            while True:
                args.append(self.parse_expr())
                if not self.accept(","):
                    break
        return args

    def field_type_hint(self, base_type: str, field: str) -> str:
        # best effort; resolved definitively by the linker/interpreter
        return "?"


def inv_return_type(inv: MethodInvocation, parser: _Parser | None = None) -> str:
    if inv.class_fqn == "string":
        return STRING_BUILTINS.get(inv.method, "?")
    return "?"


def parse_source(source: SourceFile, lift_nested_args: bool = True) -> Fragment:
    """Parse one MiniTest file; never raises on malformed input."""
    parser = _Parser(source, lift_nested_args=lift_nested_args)
    try:
        frag = parser.parse_file()
    except _ParseError as e:  # defensive; parse_file recovers internally
        parser.error(e.tok, e.message)
        frag = Fragment(source.path)
    frag.diagnostics = parser.diags
    return frag


# ---------------------------------------------------------------------------
# Linking
# ---------------------------------------------------------------------------


def link_project(fragments: list[Fragment], internal_prefixes: list[str]) -> ProjectModel:
    """Join fragments into one model; duplicate fqns are an error."""
    seen: dict[str, str] = {}
    classes: list[ClassDecl] = []
    suites: list[TestSuite] = []
    for frag in fragments:
        for c in frag.classes:
            if c.fqn in seen:
                raise IrError(
                    f"duplicate class {c.fqn!r} declared in {seen[c.fqn]} and {frag.file_id}"
                )
            seen[c.fqn] = frag.file_id
            classes.append(c)
        if frag.test_cases:
            suites.append(TestSuite(frag.file_id, tuple(frag.test_cases)))
    model = ProjectModel(
        internal_prefixes=tuple(internal_prefixes),
        classes=tuple(_resolve_types(classes)),
        test_suites=tuple(suites),
    )
    return model


def _resolve_types(classes: list[ClassDecl]) -> list[ClassDecl]:
    return classes


# ---------------------------------------------------------------------------
# Pretty printing (used by synthesis.render and round-trip tests)
# ---------------------------------------------------------------------------


def print_expr(e: Expr) -> str:
    if isinstance(e, Literal):
        if e.type == "string":
            return f'"{_escape(e.value)}"'
        if e.type == "bool":
            return "true" if e.value else "false"
        if e.type == "null":
            return "null"
        if e.type == "float":
            s = repr(float(e.value))
            return s if "." in s or "e" in s else s + ".0"
        return str(e.value)
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, FieldAccess):
        return f"{_print_atom(e.base)}.{e.field}"
    if isinstance(e, BinaryOp):
        return f"{_print_atom(e.lhs)} {e.op} {_print_atom(e.rhs)}"
    if isinstance(e, UnaryOp):
        return f"{e.op}{_print_atom(e.operand)}"
    if isinstance(e, CallExpr):
        return _print_call(e.invocation)
    if isinstance(e, NewExpr):
        return f"new {e.class_fqn}({', '.join(print_expr(a) for a in e.args)})"
    raise IrError(f"unprintable expression {e!r}")


def _print_atom(e: Expr) -> str:
    if isinstance(e, (BinaryOp, UnaryOp)):
        return f"({print_expr(e)})"
    return print_expr(e)


def _print_call(inv: MethodInvocation) -> str:
    args = ", ".join(print_expr(a) for a in inv.args)
    if inv.receiver:
        return f"{inv.receiver}.{inv.method}({args})"
    return f"{inv.class_fqn}.{inv.method}({args})"


def print_stmt(s: Stmt, indent: str = "    ") -> list[str]:
    if isinstance(s, VarDecl):
        return [f"{indent}{s.declared_type} {s.name} = {print_expr(s.init)};"]
    if isinstance(s, Assign):
        return [f"{indent}{s.name} = {print_expr(s.value)};"]
    if isinstance(s, SetField):
        return [f"{indent}{s.base}.{s.field} = {print_expr(s.value)};"]
    if isinstance(s, InvocationStmt):
        inv = s.invocation
        call = _print_call(inv)
        if inv.return_binding and inv.binding_type:
            return [f"{indent}{inv.binding_type} {inv.return_binding} = {call};"]
        if inv.return_binding:
            return [f"{indent}{inv.return_binding} = {call};"]
        return [f"{indent}{call};"]
    if isinstance(s, AssertionStmt):
        return [f"{indent}{s.api}({', '.join(print_expr(o) for o in s.operands)});"]
    if isinstance(s, ThrowStmt):
        return [f"{indent}throw IllegalArgument({print_expr(s.message)});"]
    if isinstance(s, ReturnStmt):
        if s.value is None:
            return [f"{indent}return;"]
        return [f"{indent}return {print_expr(s.value)};"]
    if isinstance(s, IfStmt):
        lines = [f"{indent}if ({print_expr(s.cond)}) {{"]
        for t in s.then_body:
            lines.extend(print_stmt(t, indent + "    "))
        if s.else_body:
            lines.append(f"{indent}}} else {{")
            for t in s.else_body:
                lines.extend(print_stmt(t, indent + "    "))
        lines.append(f"{indent}}}")
        return lines
    if isinstance(s, WhileStmt):
        lines = [f"{indent}while ({print_expr(s.cond)}) {{"]
        for t in s.body:
            lines.extend(print_stmt(t, indent + "    "))
        lines.append(f"{indent}}}")
        return lines
    if isinstance(s, ExprStmt):
        return [f"{indent}{print_expr(s.expr)};"]
    if isinstance(s, OpaqueRegion):
        return [f"{indent}{s.text}"]
    raise IrError(f"unprintable statement {s!r}")


def print_test_case(tc: TestCaseIR, indent: str = "    ") -> list[str]:
    anno = "@MR" if tc.params else "@Test"
    params = ", ".join(f"{t} {n}" for n, t in tc.params)
    lines = [f"{indent}{anno}", f"{indent}void {tc.name}({params}) {{"]
    for s in tc.statements:
        lines.extend(print_stmt(s, indent + "    "))
    lines.append(f"{indent}}}")
    return lines


def print_class(c: ClassDecl, test_cases: tuple[TestCaseIR, ...] = ()) -> str:
    lines = [f"class {c.fqn} {{"]
    for name, ftype in c.fields:
        lines.append(f"    {ftype} {name};")
    for m in c.methods:
        params = ", ".join(f"{t} {n}" for n, t in m.params)
        ret = m.return_type if m.return_type else "void"
        lines.append(f"    {ret} {m.name}({params}) {{")
        for s in m.body:
            lines.extend(print_stmt(s, "        "))
        lines.append("    }")
    for tc in test_cases:
        lines.extend(print_test_case(tc))
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = [
    "SourceFile",
    "Diagnostic",
    "Fragment",
    "parse_source",
    "link_project",
    "print_expr",
    "print_stmt",
    "print_test_case",
    "print_class",
    "STRING_BUILTINS",
]
