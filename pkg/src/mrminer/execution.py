"""Execution-based quality filtering of codified MRs.

Type-directed random inputs (with boundary-value injection) are fed to each
codified MR under the interpreter; an MR passing on at least ``threshold``
of the valid inputs (given at least ``min_valid`` of them) is high quality.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, replace

from .ir import AssertionStmt, PRIMITIVE_TYPES, ProjectModel, TestCaseIR
from .interp import (
    DEFAULT_STEP_BUDGET,
    AssertionFailure,
    EngineError,
    Interpreter,
    ObjValue,
    SubjectException,
    deep_copy_value,
    zero_value,
)
from .synthesis import CodifiedMR


class UnconstructibleType(Exception):
    """A parameter type cannot be built by the generator."""


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    attempts: int = 200
    int_range: tuple[int, int] = (-1000, 1000)
    float_range: tuple[float, float] = (-1000.0, 1000.0)
    alphabet: str = "abcdefghijklmnopqrstuvwxyz"
    max_string_length: int = 8
    depth_limit: int = 3

    def __post_init__(self) -> None:
        if self.attempts < 1:
            raise ValueError("attempts must be ≥ 1")
        if self.depth_limit < 1:
            raise ValueError("depth limit must be ≥ 1")


# Boundary values injected with probability 0.1 each where type-compatible.
_BOUNDARY_P = 0.1


@dataclass(frozen=True)
class Outcome:
    status: str  # 'pass' | 'relation_violated' | 'invalid_input' | 'engine_error'
    detail: str = ""
    statement_index: int = -1
    values: tuple = ()


@dataclass(frozen=True)
class FilterVerdict:
    mr_name: str
    generated: int
    valid: int
    passed: int
    violated: int
    invalid: int
    engine_errors: int
    pass_ratio: float
    status: str  # 'high_quality' | 'low_quality' | 'undetermined'


def _mr_rng(cfg: GenConfig, mr_name: str) -> random.Random:
    return random.Random((cfg.seed ^ zlib.crc32(mr_name.encode("utf-8"))) & (2**64 - 1))


def _gen_value(model: ProjectModel, cfg: GenConfig, rng: random.Random, type_name: str, depth: int):
    if depth > cfg.depth_limit:
        raise UnconstructibleType(f"construction of {type_name!r} exceeds depth limit")
    if type_name == "int":
        r = rng.random()
        if r < _BOUNDARY_P:
            return 0
        if r < 2 * _BOUNDARY_P:
            return -1
        if r < 3 * _BOUNDARY_P:
            return 1
        return rng.randint(*cfg.int_range)
    if type_name == "float":
        r = rng.random()
        if r < _BOUNDARY_P:
            return 0.0
        if r < 2 * _BOUNDARY_P:
            return -1.0
        if r < 3 * _BOUNDARY_P:
            return 1.0
        return round(rng.uniform(*cfg.float_range), 4)
    if type_name == "bool":
        return rng.random() < 0.5
    if type_name == "string":
        if rng.random() < _BOUNDARY_P:
            return ""
        n = rng.randint(1, cfg.max_string_length)
        return "".join(rng.choice(cfg.alphabet) for _ in range(n))
    # object type: zero-init fields, then optional random fills
    cls = model.class_by_fqn(type_name)
    if cls is None:
        raise UnconstructibleType(f"class {type_name!r} is not declared in the model")
    obj = ObjValue(type_name, {n: zero_value(model, t) for n, t in cls.fields})
    for fname, ftype in cls.fields:
        if ftype in PRIMITIVE_TYPES:
            obj.fields[fname] = _gen_value(model, cfg, rng, ftype, depth)
        elif depth < cfg.depth_limit and rng.random() < 0.5:
            obj.fields[fname] = _gen_value(model, cfg, rng, ftype, depth + 1)
    return obj


def generate_inputs(
    mr: CodifiedMR, model: ProjectModel, cfg: GenConfig
) -> list[dict[str, object]]:
    """Exactly cfg.attempts input tuples, deterministic given cfg.seed."""
    for _name, ptype in mr.params:
        if ptype not in PRIMITIVE_TYPES and model.class_by_fqn(ptype) is None:
            raise UnconstructibleType(f"class {ptype!r} is not declared in the model")
    rng = _mr_rng(cfg, mr.name)
    return [
        {name: _gen_value(model, cfg, rng, ptype, 1) for name, ptype in mr.params}
        for _ in range(cfg.attempts)
    ]


def _relation_assertion_index(body: TestCaseIR) -> int:
    for i, s in enumerate(body.statements):
        if isinstance(s, AssertionStmt):
            return i
    raise EngineError(f"{body.name}: body has no relation assertion")


def execute_mr(
    mr: CodifiedMR,
    inputs: dict[str, object],
    model: ProjectModel,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> Outcome:
    """One execution of a codified MR on one input tuple."""
    interp = Interpreter(model, step_budget)
    env = {name: deep_copy_value(v) for name, v in inputs.items()}
    a_idx = _relation_assertion_index(mr.body)
    for i, stmt in enumerate(mr.body.statements):
        try:
            if i == a_idx:
                assert isinstance(stmt, AssertionStmt)
                interp.check_assertion(stmt, env, i)
            else:
                interp.exec_stmt(stmt, env)
        except AssertionFailure as e:
            return Outcome("relation_violated", e.api, i, e.values)
        except SubjectException as e:
            if i < a_idx:
                return Outcome("invalid_input", str(e), i)
            return Outcome("engine_error", f"subject exception at relation assertion: {e}", i)
        except EngineError as e:
            return Outcome("engine_error", str(e), i)
    return Outcome("pass")


def filter_mrs(
    mrs: list[CodifiedMR],
    model: ProjectModel,
    cfg: GenConfig,
    threshold: float = 0.95,
    min_valid: int = 5,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> tuple[list[CodifiedMR], list[FilterVerdict]]:
    """Verdicts in MR-name order; returns status-updated MRs alongside."""
    verdicts: list[FilterVerdict] = []
    updated: list[CodifiedMR] = []
    for mr in sorted(mrs, key=lambda m: m.name):
        try:
            inputs = generate_inputs(mr, model, cfg)
        except UnconstructibleType:
            verdicts.append(FilterVerdict(mr.name, 0, 0, 0, 0, 0, 0, 0.0, "undetermined"))
            updated.append(replace(mr, status="undetermined"))
            continue
        passed = violated = invalid = engine_errors = 0
        for tup in inputs:
            outcome = execute_mr(mr, tup, model, step_budget)
            if outcome.status == "pass":
                passed += 1
            elif outcome.status == "relation_violated":
                violated += 1
            elif outcome.status == "invalid_input":
                invalid += 1
            else:
                engine_errors += 1
        valid = passed + violated
        ratio = passed / valid if valid else 0.0
        if valid >= min_valid and ratio >= threshold:
            status = "high_quality"
        elif valid >= min_valid:
            status = "low_quality"
        else:
            status = "undetermined"
        verdicts.append(
            FilterVerdict(
                mr.name, len(inputs), valid, passed, violated, invalid, engine_errors, ratio, status
            )
        )
        updated.append(replace(mr, status=status))
    return updated, verdicts


# ---------------------------------------------------------------------------
# Origin replay
# ---------------------------------------------------------------------------


def run_origin_test(
    model: ProjectModel, tc: TestCaseIR, step_budget: int = DEFAULT_STEP_BUDGET
) -> Outcome:
    """Execute an origin test case end to end."""
    interp = Interpreter(model, step_budget)
    try:
        interp.run_test_case(tc)
    except AssertionFailure as e:
        return Outcome("relation_violated", e.api, e.statement_index, e.values)
    except SubjectException as e:
        return Outcome("invalid_input", str(e))
    except EngineError as e:
        return Outcome("engine_error", str(e))
    return Outcome("pass")


def recover_origin_inputs(
    model: ProjectModel,
    tc: TestCaseIR,
    mr: CodifiedMR,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> dict[str, object] | None:
    """Parameter values the origin test supplied, captured just before the
    first related invocation executes.  None when recovery fails."""
    interp = Interpreter(model, step_budget)
    env: dict[str, object] = {}
    try:
        for stmt in tc.statements[: mr.capture_index]:
            if isinstance(stmt, AssertionStmt):
                continue
            interp.exec_stmt(stmt, env)
    except (SubjectException, EngineError):
        return None
    values: dict[str, object] = {}
    for origin in mr.param_origins:
        if origin.kind == "literal":
            values[origin.name] = origin.literal
        else:
            if origin.name not in env:
                return None
            values[origin.name] = deep_copy_value(env[origin.name])
    return values


__all__ = [
    "UnconstructibleType",
    "GenConfig",
    "Outcome",
    "FilterVerdict",
    "generate_inputs",
    "execute_mr",
    "filter_mrs",
    "run_origin_test",
    "recover_origin_inputs",
]
