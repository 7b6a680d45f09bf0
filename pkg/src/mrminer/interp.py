"""Tree-walking interpreter for MiniTest programs.

Values are Python natives plus ``ObjValue`` references with mutable field
maps.  Integer arithmetic wraps to signed 64-bit.  Subject-level failures
(``throw IllegalArgument``, division by zero, null dereference) raise
SubjectException; interpreter faults (unknown methods, exhausted step
budget) raise EngineError and are excluded from all statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .ir import (
    Assign,
    AssertionStmt,
    BinaryOp,
    CallExpr,
    Expr,
    ExprStmt,
    FieldAccess,
    IfStmt,
    InvocationStmt,
    Literal,
    MethodInvocation,
    NewExpr,
    OpaqueRegion,
    ProjectModel,
    ReturnStmt,
    SetField,
    Stmt,
    TestCaseIR,
    ThrowStmt,
    UnaryOp,
    VarDecl,
    VarRef,
    WhileStmt,
)

DEFAULT_STEP_BUDGET = 1_000_000

_INT_MIN = -(2**63)
_INT_MASK = 2**64


class SubjectException(Exception):
    """Exception raised by the program under execution."""


class EngineError(Exception):
    """Interpreter fault: not attributable to the subject program."""


class AssertionFailure(Exception):
    def __init__(self, statement_index: int, api: str, values: tuple):
        super().__init__(f"{api} failed at statement {statement_index}")
        self.statement_index = statement_index
        self.api = api
        self.values = values


@dataclass
class ObjValue:
    class_fqn: str
    fields: dict[str, object] = dc_field(default_factory=dict)

    def __repr__(self) -> str:  # stable, content-based
        inner = ", ".join(f"{k}={_show(v)}" for k, v in self.fields.items())
        return f"{self.class_fqn}{{{inner}}}"


def _show(v: object) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, str):
        return f'"{v}"'
    return repr(v)


def _wrap_int(x: int) -> int:
    return (x - _INT_MIN) % _INT_MASK + _INT_MIN


def zero_value(model: ProjectModel, type_name: str | None) -> object:
    if type_name == "int":
        return 0
    if type_name == "float":
        return 0.0
    if type_name == "bool":
        return False
    if type_name == "string":
        return ""
    return None


def deep_copy_value(v: object, _memo: dict | None = None) -> object:
    if not isinstance(v, ObjValue):
        return v
    memo = _memo if _memo is not None else {}
    if id(v) in memo:
        return memo[id(v)]
    copy = ObjValue(v.class_fqn, {})
    memo[id(v)] = copy
    copy.fields = {k: deep_copy_value(f, memo) for k, f in v.fields.items()}
    return copy


def values_equal(a: object, b: object, _depth: int = 0) -> bool:
    """Structural equality used by the binary assertion APIs."""
    if _depth > 64:
        raise EngineError("equality recursion too deep")
    if isinstance(a, ObjValue) and isinstance(b, ObjValue):
        if a.class_fqn != b.class_fqn or a.fields.keys() != b.fields.keys():
            return False
        return all(values_equal(a.fields[k], b.fields[k], _depth + 1) for k in a.fields)
    if isinstance(a, bool) or isinstance(b, bool):
        return a is b if isinstance(a, bool) and isinstance(b, bool) else False
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return float(a) == float(b) if (isinstance(a, float) or isinstance(b, float)) else a == b
    return type(a) is type(b) and a == b


class Interpreter:
    def __init__(self, model: ProjectModel, step_budget: int = DEFAULT_STEP_BUDGET):
        self.model = model
        self.step_budget = step_budget
        self.steps = 0

    def _tick(self) -> None:
        self.steps += 1
        if self.steps > self.step_budget:
            raise EngineError("step budget exhausted")

    # -- expressions ---------------------------------------------------------

    def eval_expr(self, e: Expr, env: dict[str, object]) -> object:
        self._tick()
        if isinstance(e, Literal):
            return e.value
        if isinstance(e, VarRef):
            if e.name not in env:
                raise EngineError(f"undefined variable {e.name!r}")
            return env[e.name]
        if isinstance(e, FieldAccess):
            base = self.eval_expr(e.base, env)
            if base is None:
                raise SubjectException("null dereference")
            if not isinstance(base, ObjValue):
                raise EngineError(f"field access on non-object {_show(base)}")
            if e.field not in base.fields:
                raise EngineError(f"unknown field {e.field!r} on {base.class_fqn}")
            return base.fields[e.field]
        if isinstance(e, BinaryOp):
            return self._binop(e, env)
        if isinstance(e, UnaryOp):
            v = self.eval_expr(e.operand, env)
            if e.op == "-":
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise EngineError("unary '-' on non-number")
                return _wrap_int(-v) if isinstance(v, int) else -v
            if e.op == "!":
                if not isinstance(v, bool):
                    raise EngineError("unary '!' on non-boolean")
                return not v
            raise EngineError(f"unknown unary operator {e.op!r}")
        if isinstance(e, CallExpr):
            return self.eval_invocation(e.invocation, env)
        if isinstance(e, NewExpr):
            return self.construct(e.class_fqn, [self.eval_expr(a, env) for a in e.args])
        raise EngineError(f"unevaluable expression {e!r}")

    def _binop(self, e: BinaryOp, env: dict[str, object]) -> object:
        op = e.op
        if op in ("&&", "||"):
            lv = self.eval_expr(e.lhs, env)
            if not isinstance(lv, bool):
                raise EngineError(f"{op} on non-boolean")
            if op == "&&" and not lv:
                return False
            if op == "||" and lv:
                return True
            rv = self.eval_expr(e.rhs, env)
            if not isinstance(rv, bool):
                raise EngineError(f"{op} on non-boolean")
            return rv
        lv = self.eval_expr(e.lhs, env)
        rv = self.eval_expr(e.rhs, env)
        if op in ("==", "!="):
            same = self._eq(lv, rv)
            return same if op == "==" else not same
        if op in ("<", ">", "<=", ">="):
            if not self._both_numbers(lv, rv):
                raise EngineError(f"{op} on non-numbers")
            return {"<": lv < rv, ">": lv > rv, "<=": lv <= rv, ">=": lv >= rv}[op]
        if op == "+" and isinstance(lv, str) and isinstance(rv, str):
            return lv + rv
        if op in ("+", "-", "*", "/"):
            if not self._both_numbers(lv, rv):
                raise EngineError(f"{op} on non-numbers")
            if isinstance(lv, float) or isinstance(rv, float):
                if op == "/" and rv == 0.0:
                    raise SubjectException("float division by zero")
                return {"+": lv + rv, "-": lv - rv, "*": lv * rv, "/": lv / rv}[op]
            if op == "+":
                return _wrap_int(lv + rv)
            if op == "-":
                return _wrap_int(lv - rv)
            if op == "*":
                return _wrap_int(lv * rv)
            if rv == 0:
                raise SubjectException("integer division by zero")
            q = abs(lv) // abs(rv)
            return _wrap_int(q if (lv >= 0) == (rv >= 0) else -q)
        raise EngineError(f"unknown operator {op!r}")

    @staticmethod
    def _both_numbers(a: object, b: object) -> bool:
        return (
            isinstance(a, (int, float))
            and isinstance(b, (int, float))
            and not isinstance(a, bool)
            and not isinstance(b, bool)
        )

    @staticmethod
    def _eq(a: object, b: object) -> bool:
        if isinstance(a, ObjValue) or isinstance(b, ObjValue):
            return a is b  # reference equality for ==
        if a is None or b is None:
            return a is b
        if isinstance(a, bool) or isinstance(b, bool):
            return isinstance(a, bool) and isinstance(b, bool) and a == b
        if isinstance(a, (int, float)) and isinstance(b, (int, float)):
            return a == b
        return type(a) is type(b) and a == b

    # -- calls and construction ----------------------------------------------

    def construct(self, class_fqn: str, args: list[object]) -> ObjValue:
        cls = self.model.class_by_fqn(class_fqn)
        if cls is None:
            raise EngineError(f"unknown class {class_fqn!r}")
        obj = ObjValue(class_fqn, {n: zero_value(self.model, t) for n, t in cls.fields})
        if args:
            if len(args) != len(cls.fields):
                raise EngineError(
                    f"{class_fqn} construction takes 0 or {len(cls.fields)} arguments"
                )
            for (n, _t), v in zip(cls.fields, args):
                obj.fields[n] = v
        return obj

    def eval_invocation(self, inv: MethodInvocation, env: dict[str, object]) -> object:
        receiver = None
        if inv.receiver is not None:
            if inv.receiver not in env:
                raise EngineError(f"undefined receiver {inv.receiver!r}")
            receiver = env[inv.receiver]
            if receiver is None:
                raise SubjectException("null dereference")
        args = [self.eval_expr(a, env) for a in inv.args]
        return self.call(inv.class_fqn, inv.method, receiver, args)

    def call(self, class_fqn: str, method: str, receiver: object, args: list[object]) -> object:
        self._tick()
        if isinstance(receiver, str) or class_fqn == "string":
            return self._string_builtin(method, receiver, args)
        if receiver is None and class_fqn != "string":
            cls = self.model.class_by_fqn(class_fqn)
            if cls is not None and cls.method(method, len(args)) is not None:
                # static-style call: no receiver bound
                return self._run_method(cls, method, None, args)
            raise EngineError(f"unknown method {class_fqn}.{method}/{len(args)}")
        if not isinstance(receiver, ObjValue):
            raise EngineError(f"call on non-object {_show(receiver)}")
        cls = self.model.class_by_fqn(receiver.class_fqn)
        if cls is None or cls.method(method, len(args)) is None:
            raise EngineError(f"unknown method {receiver.class_fqn}.{method}/{len(args)}")
        return self._run_method(cls, method, receiver, args)

    def _string_builtin(self, method: str, receiver: object, args: list[object]) -> object:
        if not isinstance(receiver, str):
            if receiver is None:
                raise SubjectException("null dereference")
            raise EngineError("string builtin on non-string")
        if method == "length" and not args:
            return len(receiver)
        if method == "isEmpty" and not args:
            return receiver == ""
        if method == "equals" and len(args) == 1:
            return isinstance(args[0], str) and receiver == args[0]
        if method == "concat" and len(args) == 1 and isinstance(args[0], str):
            return receiver + args[0]
        raise EngineError(f"unknown string method {method}/{len(args)}")

    def _run_method(self, cls, method: str, receiver: object, args: list[object]) -> object:
        m = cls.method(method, len(args))
        env: dict[str, object] = {n: v for (n, _t), v in zip(m.params, args)}
        if receiver is not None:
            env["this"] = receiver
        result = self.exec_stmts(m.body, env)
        if result is not _NO_RETURN:
            return result
        if m.return_type is None:
            return None
        raise EngineError(f"{cls.fqn}.{method} ended without returning a {m.return_type}")

    # -- statements ------------------------------------------------------------

    def exec_stmts(self, stmts: tuple[Stmt, ...], env: dict[str, object]) -> object:
        for s in stmts:
            r = self.exec_stmt(s, env)
            if r is not _NO_RETURN:
                return r
        return _NO_RETURN

    def exec_stmt(self, s: Stmt, env: dict[str, object]) -> object:
        self._tick()
        if isinstance(s, VarDecl):
            env[s.name] = self.eval_expr(s.init, env)
            return _NO_RETURN
        if isinstance(s, Assign):
            env[s.name] = self.eval_expr(s.value, env)
            return _NO_RETURN
        if isinstance(s, SetField):
            if s.base not in env:
                raise EngineError(f"undefined variable {s.base!r}")
            obj = env[s.base]
            if obj is None:
                raise SubjectException("null dereference")
            if not isinstance(obj, ObjValue):
                raise EngineError("field store on non-object")
            obj.fields[s.field] = self.eval_expr(s.value, env)
            return _NO_RETURN
        if isinstance(s, InvocationStmt):
            v = self.eval_invocation(s.invocation, env)
            if s.invocation.return_binding is not None:
                env[s.invocation.return_binding] = v
            return _NO_RETURN
        if isinstance(s, ThrowStmt):
            msg = self.eval_expr(s.message, env)
            raise SubjectException(str(msg))
        if isinstance(s, ReturnStmt):
            return self.eval_expr(s.value, env) if s.value is not None else None
        if isinstance(s, IfStmt):
            cond = self.eval_expr(s.cond, env)
            if not isinstance(cond, bool):
                raise EngineError("if condition is not boolean")
            return self.exec_stmts(s.then_body if cond else s.else_body, env)
        if isinstance(s, WhileStmt):
            while True:
                cond = self.eval_expr(s.cond, env)
                if not isinstance(cond, bool):
                    raise EngineError("while condition is not boolean")
                if not cond:
                    return _NO_RETURN
                r = self.exec_stmts(s.body, env)
                if r is not _NO_RETURN:
                    return r
        if isinstance(s, ExprStmt):
            self.eval_expr(s.expr, env)
            return _NO_RETURN
        if isinstance(s, AssertionStmt):
            self.check_assertion(s, env, -1)
            return _NO_RETURN
        if isinstance(s, OpaqueRegion):
            raise EngineError("cannot execute opaque region")
        raise EngineError(f"unexecutable statement {s!r}")

    # -- assertions -------------------------------------------------------------

    def check_assertion(self, s: AssertionStmt, env: dict[str, object], index: int) -> None:
        vals = tuple(self.eval_expr(o, env) for o in s.operands)
        api = s.api
        if api in ("assertTrue", "assertFalse"):
            (v,) = vals
            if not isinstance(v, bool):
                raise EngineError(f"{api} operand is not boolean")
            ok = v if api == "assertTrue" else not v
        elif api in ("assertEquals", "assertArrayEquals"):
            ok = values_equal(*vals)
        elif api == "assertNotEquals":
            ok = not values_equal(*vals)
        elif api == "assertSame":
            ok = self._eq(*vals)
        elif api == "assertNotSame":
            ok = not self._eq(*vals)
        else:
            raise EngineError(f"unknown assertion API {api!r}")
        if not ok:
            raise AssertionFailure(index, api, vals)

    def run_test_case(self, tc: TestCaseIR, env: dict[str, object] | None = None) -> None:
        """Execute a test body; raises AssertionFailure / SubjectException /
        EngineError on the corresponding outcome."""
        env = dict(env or {})
        for i, s in enumerate(tc.statements):
            if isinstance(s, AssertionStmt):
                self._tick()
                self.check_assertion(s, env, i)
            else:
                self.exec_stmt(s, env)


_NO_RETURN = object()


def interpret(
    model: ProjectModel,
    class_fqn: str,
    method: str,
    args: list[object],
    step_budget: int = DEFAULT_STEP_BUDGET,
    receiver: object = None,
) -> object:
    """One-shot entry point: call a method and return its result."""
    return Interpreter(model, step_budget).call(class_fqn, method, receiver, args)


__all__ = [
    "DEFAULT_STEP_BUDGET",
    "SubjectException",
    "EngineError",
    "AssertionFailure",
    "ObjValue",
    "Interpreter",
    "interpret",
    "values_equal",
    "deep_copy_value",
    "zero_value",
]
