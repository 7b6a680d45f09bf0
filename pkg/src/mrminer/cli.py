"""Command-line pipeline: discover → synthesize → filter, plus stats.

Subcommands operate on MiniTest sources (``.mt``) or a serialized model
(``.mrir``).  All reports are byte-deterministic for a fixed configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import frontend
from .dataflow import method_writes_summary
from .discovery import DiscoveryResult, discover_mtc
from .execution import GenConfig, FilterVerdict, filter_mrs
from .interp import DEFAULT_STEP_BUDGET
from .ir import IrError, ProjectModel, parse_ir, serialize_ir
from .synthesis import CodifiedMR, deduce_constituents, render, synthesize_all

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARSE = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mrminer",
        description=(
            "Mine metamorphic relations from unit tests: discover encoded "
            "relations, synthesize parameterized methods, and filter them by "
            "execution quality."
        ),
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("discover", "detect relation-encoded test cases"),
        ("synthesize", "codify discovered relations into parameterized methods"),
        ("filter", "execute codified relations on generated inputs and grade them"),
        ("stats", "corpus statistics"),
        ("run", "all stages"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("inputs", nargs="+", help=".mt sources, directories, or a .mrir model")
        sp.add_argument("--prefix", action="append", default=[], help="internal class prefix (repeatable)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--attempts", type=int, default=200)
        sp.add_argument("--threshold", type=float, default=0.95)
        sp.add_argument("--min-valid", type=int, default=5)
        sp.add_argument("--policy", choices=["conservative", "assume-mutated"], default="conservative")
        sp.add_argument("--depth", type=int, default=3)
        sp.add_argument("--format", choices=["text", "structured"], default="text")
        sp.add_argument("--dump-summaries", action="store_true")
    return p


def load_model(inputs: list[str], prefixes: list[str]) -> tuple[ProjectModel | None, list[str], int]:
    """Returns (model, diagnostics, exit code hint)."""
    paths: list[Path] = []
    for raw in inputs:
        path = Path(raw)
        if not path.exists():
            return None, [f"{raw}: no such file or directory"], EXIT_CONFIG
        if path.is_dir():
            paths.extend(sorted(path.rglob("*.mt")))
        else:
            paths.append(path)
    if not paths:
        # existing but empty input directories: an empty project, not an error
        return ProjectModel(tuple(prefixes), (), ()), [], EXIT_OK

    if len(paths) == 1 and paths[0].suffix == ".mrir":
        try:
            model = parse_ir(paths[0].read_text())
        except IrError as e:
            return None, [f"{paths[0]}: {e}"], EXIT_PARSE
        if prefixes:
            from dataclasses import replace

            model = replace(model, internal_prefixes=tuple(prefixes))
        return model, [], EXIT_OK

    diagnostics: list[str] = []
    fragments = []
    any_ok = False
    for path in paths:
        frag = frontend.parse_source(frontend.SourceFile(str(path), path.read_text()))
        diagnostics.extend(str(d) for d in frag.diagnostics)
        if frag.classes or frag.test_cases:
            any_ok = True
        fragments.append(frag)
    if not any_ok:
        return None, diagnostics or ["all inputs failed to parse"], EXIT_PARSE
    try:
        model = frontend.link_project(fragments, prefixes)
    except IrError as e:
        return None, diagnostics + [str(e)], EXIT_CONFIG
    return model, diagnostics, EXIT_OK


def _discover_all(model: ProjectModel, depth: int, policy: str) -> list[DiscoveryResult]:
    summaries = method_writes_summary(model, depth)
    results = []
    for suite in model.test_suites:
        for tc in suite.test_cases:
            if tc.params:
                continue  # parameterized methods are outputs, not inputs
            results.append(discover_mtc(tc, model, summaries, policy))
    return results


def _mtc_report(results: list[DiscoveryResult]) -> dict:
    tests = []
    for r in sorted(results, key=lambda r: r.test_name):
        instances = []
        for inst in r.instances:
            instances.append(
                {
                    "cut": inst.cut,
                    "assertion_index": inst.alpha.assertion_index,
                    "pattern": inst.alpha.pattern,
                    "operator": inst.alpha.operator,
                    "mi1": list(inst.alpha.mi1),
                    "mi2": list(inst.alpha.mi2),
                    "mi_size": len(inst.MI),
                    "mi": [list(k) for k in inst.MI],
                }
            )
        tests.append({"test": r.test_name, "is_mtc": r.is_mtc, "instances": instances})
    return {
        "tests": tests,
        "mtc_count": sum(1 for r in results if r.is_mtc),
        "test_count": len(results),
    }


def _stats_report(model: ProjectModel, results: list[DiscoveryResult]) -> dict:
    by_name = {r.test_name: r for r in results}
    tests = {tc.name: tc for s in model.test_suites for tc in s.test_cases}
    histogram: dict[str, int] = {}
    transform_present = 0
    pairs_two = 0
    instance_count = 0
    for r in results:
        for inst in r.instances:
            instance_count += 1
            key = str(len(inst.MI))
            histogram[key] = histogram.get(key, 0) + 1
            if len(inst.MI) == 2:
                pairs_two += 1
                if deduce_constituents(inst, r, tests[r.test_name]) is not None:
                    transform_present += 1
    mtc_count = sum(1 for r in results if r.is_mtc)
    test_count = len(results)
    return {
        "test_count": test_count,
        "mtc_count": mtc_count,
        "mtc_percentage": round(100.0 * mtc_count / test_count, 2) if test_count else 0.0,
        "mr_instance_count": instance_count,
        "mi_histogram": dict(sorted(histogram.items())),
        "mi2_instances": pairs_two,
        "mi2_with_transformation": transform_present,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _print_report(payload: dict, fmt: str, text_lines: list[str]) -> None:
    if fmt == "structured":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _mtc_text(report: dict) -> list[str]:
    lines = [f"tests: {report['test_count']}  relation-encoded: {report['mtc_count']}"]
    for t in report["tests"]:
        mark = "MTC" if t["is_mtc"] else "---"
        lines.append(f"  [{mark}] {t['test']}  instances={len(t['instances'])}")
        for inst in t["instances"]:
            lines.append(
                f"        {inst['pattern']} {inst['operator']} cut={inst['cut']} "
                f"mi1={tuple(inst['mi1'])} mi2={tuple(inst['mi2'])} |MI|={inst['mi_size']}"
            )
    return lines


def _verdict_payload(verdicts: list[FilterVerdict]) -> dict:
    return {
        "verdicts": [
            {
                "name": v.mr_name,
                "generated": v.generated,
                "valid": v.valid,
                "passed": v.passed,
                "violated": v.violated,
                "invalid": v.invalid,
                "engine_errors": v.engine_errors,
                "pass_ratio": round(v.pass_ratio, 6),
                "status": v.status,
            }
            for v in verdicts
        ]
    }


def _verdict_text(verdicts: list[FilterVerdict]) -> list[str]:
    lines = [f"{'name':40} {'gen':>5} {'valid':>5} {'pass':>5} {'ratio':>7} status"]
    for v in verdicts:
        lines.append(
            f"{v.mr_name:40} {v.generated:>5} {v.valid:>5} {v.passed:>5} "
            f"{v.pass_ratio:>7.4f} {v.status}"
        )
    return lines


def _synthesize(model: ProjectModel, results: list[DiscoveryResult], out: Path) -> tuple[list[CodifiedMR], list[str]]:
    mrs, notes = synthesize_all(model, results)
    codified_dir = out / "codified"
    codified_dir.mkdir(parents=True, exist_ok=True)
    for mr in sorted(mrs, key=lambda m: m.name):
        (codified_dir / f"{mr.name}.mt").write_text(render(mr))
    return mrs, notes


def _manifest(mrs: list[CodifiedMR], notes: list[str]) -> dict:
    return {
        "codified": [
            {
                "name": mr.name,
                "origin_test": mr.provenance[0],
                "instance_index": mr.provenance[1],
                "cut": mr.cut,
                "params": [[n, t] for n, t in mr.params],
                "status": mr.status,
            }
            for mr in sorted(mrs, key=lambda m: m.name)
        ],
        "skipped": sorted(notes),
    }


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not 0.0 < args.threshold <= 1.0:
        print("error: --threshold must be in (0, 1]", file=sys.stderr)
        return EXIT_CONFIG
    if args.attempts < 1 or args.min_valid < 0 or args.depth < 0:
        print("error: --attempts must be ≥ 1, --min-valid and --depth ≥ 0", file=sys.stderr)
        return EXIT_CONFIG

    model, diagnostics, code = load_model(args.inputs, args.prefix)
    for d in diagnostics:
        print(d, file=sys.stderr)
    if model is None:
        return code

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.dump_summaries:
        summaries = method_writes_summary(model, args.depth)
        for key in sorted(summaries):
            s = summaries[key]
            print(
                f"{key[0]}.{key[1]}/{key[2]}: reads_receiver={s.reads_receiver_fields} "
                f"writes_receiver={s.writes_receiver_fields} "
                f"writes_args={sorted(s.writes_arg_fields)} inconclusive={s.inconclusive}",
                file=sys.stderr,
            )

    results = _discover_all(model, args.depth, args.policy)

    if args.command == "stats":
        report = _stats_report(model, results)
        _write_json(out / "stats.json", report)
        _print_report(
            report,
            args.format,
            [f"{k}: {v}" for k, v in report.items()],
        )
        return EXIT_OK

    (out / "model.mrir").write_text(serialize_ir(model))
    mtc_report = _mtc_report(results)
    _write_json(out / "mtc_report.json", mtc_report)

    if args.command == "discover":
        _print_report(mtc_report, args.format, _mtc_text(mtc_report))
        return EXIT_OK

    mrs, notes = _synthesize(model, results, out)
    manifest = _manifest(mrs, notes)
    _write_json(out / "manifest.json", manifest)

    if args.command == "synthesize":
        _print_report(
            manifest,
            args.format,
            [f"codified {len(mrs)} relation(s); skipped {len(notes)}"]
            + [f"  {m['name']} <- {m['origin_test']}[{m['instance_index']}]" for m in manifest["codified"]]
            + [f"  {n}" for n in manifest["skipped"]],
        )
        return EXIT_OK

    cfg = GenConfig(seed=args.seed, attempts=args.attempts)
    updated, verdicts = filter_mrs(
        mrs, model, cfg, threshold=args.threshold, min_valid=args.min_valid,
        step_budget=DEFAULT_STEP_BUDGET,
    )
    manifest = _manifest(updated, notes)
    _write_json(out / "manifest.json", manifest)
    payload = _verdict_payload(verdicts)
    _write_json(out / "filter_report.json", payload)
    _print_report(payload, args.format, _verdict_text(verdicts))

    if args.command == "run":
        report = _stats_report(model, results)
        _write_json(out / "stats.json", report)
    if any(v.engine_errors for v in verdicts):
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
