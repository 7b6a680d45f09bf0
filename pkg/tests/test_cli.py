"""Command-line pipeline: exit codes, artifacts, reports, determinism."""

import json
from pathlib import Path

from mrminer.cli import main
from conftest import CORPUS, ROOT


def run_cli(*argv):
    return main(list(argv))


def test_run_produces_all_artifacts(tmp_path):
    out = tmp_path / "out"
    assert run_cli("run", str(CORPUS), "--prefix", "com.demo", "--out", str(out)) == 0
    for name in ("model.mrir", "mtc_report.json", "manifest.json", "filter_report.json", "stats.json"):
        assert (out / name).exists(), name
    assert len(list((out / "codified").glob("*.mt"))) == 18


def test_discover_reports_exactly_labeled_positives(tmp_path, labels):
    out = tmp_path / "out"
    assert run_cli("discover", str(CORPUS), "--prefix", "com.demo", "--out", str(out)) == 0
    report = json.loads((out / "mtc_report.json").read_text())
    found = {t["test"] for t in report["tests"] if t["is_mtc"]}
    assert found == set(labels["positive"])


def test_empty_input_directory_is_ok(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    out = tmp_path / "out"
    code = run_cli("discover", str(empty), "--prefix", "com.demo", "--out", str(out))
    assert code == 0
    report = json.loads((out / "mtc_report.json").read_text())
    assert report["test_count"] == 0 and report["mtc_count"] == 0


def test_missing_path_is_config_error(tmp_path):
    assert run_cli("discover", str(tmp_path / "nope"), "--prefix", "com.demo") == 1


def test_all_inputs_unparsable_is_parse_error(tmp_path):
    bad = tmp_path / "bad.mt"
    bad.write_text("this is not minitest at all ~~~~")
    out = tmp_path / "out"
    assert run_cli("discover", str(bad), "--prefix", "com.demo", "--out", str(out)) == 2


def test_invalid_threshold_is_config_error(tmp_path):
    out = tmp_path / "out"
    code = run_cli(
        "filter", str(CORPUS), "--prefix", "com.demo", "--out", str(out), "--threshold", "1.5"
    )
    assert code == 1


def test_stats_histogram_totals(tmp_path):
    out = tmp_path / "out"
    assert run_cli("stats", str(CORPUS), "--prefix", "com.demo", "--out", str(out)) == 0
    stats = json.loads((out / "stats.json").read_text())
    assert sum(stats["mi_histogram"].values()) == stats["mr_instance_count"]
    assert 0.0 <= stats["mtc_percentage"] <= 100.0
    assert stats["mtc_count"] == 20 and stats["test_count"] == 40
    assert stats["mi2_with_transformation"] <= stats["mi2_instances"]


def test_double_run_is_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert run_cli("run", str(CORPUS), "--prefix", "com.demo", "--out", str(out)) == 0
    files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
    files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
    assert files1 == files2
    for rel in files1:
        assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel


def test_mrir_round_trip_through_cli(tmp_path):
    out1 = tmp_path / "a"
    assert run_cli("discover", str(CORPUS), "--prefix", "com.demo", "--out", str(out1)) == 0
    out2 = tmp_path / "b"
    assert run_cli("discover", str(out1 / "model.mrir"), "--out", str(out2)) == 0
    assert (out1 / "mtc_report.json").read_bytes() == (out2 / "mtc_report.json").read_bytes()


def test_filter_verdicts_match_direct_api(tmp_path, codified, corpus_model):
    from mrminer.execution import GenConfig, filter_mrs

    out = tmp_path / "out"
    assert run_cli("run", str(CORPUS), "--prefix", "com.demo", "--out", str(out)) == 0
    report = json.loads((out / "filter_report.json").read_text())
    _mrs, verdicts = filter_mrs(codified[0], corpus_model, GenConfig())
    assert [(v["name"], v["status"]) for v in report["verdicts"]] == [
        (v.mr_name, v.status) for v in verdicts
    ]


def test_golden_files_match_cli_output(tmp_path):
    out = tmp_path / "out"
    assert run_cli("run", str(CORPUS), "--prefix", "com.demo", "--out", str(out)) == 0
    golden_dir = Path(__file__).resolve().parent / "golden"
    emitted = sorted(p.name for p in (out / "codified").glob("*.mt"))
    assert emitted == sorted(p.name for p in golden_dir.glob("*.mt"))
    for name in emitted:
        assert (out / "codified" / name).read_bytes() == (golden_dir / name).read_bytes(), name
