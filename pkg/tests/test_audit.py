"""NDJSON audit log and the HTML report built from it."""

import json

import numpy as np
import pytest

from deepadapt.audit import AuditLog, emit
from deepadapt.errors import StorageError
from deepadapt.report import generate_report


def _events(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


def test_audit_log_writes_one_json_object_per_line(tmp_path):
    path = tmp_path / "run" / "audit.ndjson"
    with AuditLog(path) as log:
        log.write("run_start", {"command": "train", "seed": np.int64(3)})
        log.write("metrics", {"top1": np.float64(0.5), "curve": np.arange(2), "dir": tmp_path})
    events = _events(path)
    assert [e["type"] for e in events] == ["run_start", "metrics"]
    assert events[0]["data"]["seed"] == 3
    assert events[1]["data"]["curve"] == [0, 1]
    assert events[1]["data"]["dir"] == str(tmp_path)
    assert events[0]["ts"].endswith("Z")


def test_emit_without_log_is_a_no_op(tmp_path):
    emit(None, "metrics", {"top1": 1.0})
    with AuditLog(tmp_path / "a.ndjson") as log:
        emit(log, "metrics", {"top1": 1.0})
    assert len(_events(tmp_path / "a.ndjson")) == 1


def test_close_is_idempotent(tmp_path):
    log = AuditLog(tmp_path / "a.ndjson")
    log.close()
    log.close()
    assert log.elapsed_seconds >= 0.0


def test_report_renders_run_sections(tmp_path):
    log_path = tmp_path / "audit.ndjson"
    with AuditLog(log_path) as log:
        log.write("run_start", {"command": "train", "mode": "deep"})
        for it in range(3):
            log.write("train_progress", {"iteration": it, "loss_total": 1.0 / (it + 1), "loss_writer": 0.5,
                                         "loss_aux": 0.4, "current_lambda": 0.5})
        log.write("metrics", {"top1": 0.25, "top5": 0.75, "aux": {"top1": 0.1}, "fusion": {"1": 0.3, "2": 0.4}})
        log.write("run_complete", {"duration_s": 75})
    report = tmp_path / "report.html"
    generate_report(log_path, report)
    page = report.read_text(encoding="utf-8")
    assert 'id="training"' in page
    assert 'id="metrics"' in page
    assert 'id="benchmark"' not in page
    assert "Status: complete" in page
    assert "1m 15s" in page
    assert "3 logged iterations" in page


def test_report_marks_failed_runs_and_escapes_text(tmp_path):
    log_path = tmp_path / "audit.ndjson"
    with AuditLog(log_path) as log:
        log.write("run_start", {"command": "eval", "checkpoint": "<ckpt>"})
        log.write("run_error", {"error": "boom"})
    generate_report(log_path, tmp_path / "report.html")
    page = (tmp_path / "report.html").read_text(encoding="utf-8")
    assert "Status: failed" in page
    assert "&lt;ckpt&gt;" in page
    assert "<ckpt>" not in page


def test_report_renders_benchmark_summary(tmp_path):
    log_path = tmp_path / "audit.ndjson"
    with AuditLog(log_path) as log:
        log.write("benchmark_summary", {
            "modes": {"baseline": {"median_top1": 0.4, "median_top5": 0.8,
                                   "median_fused_lo": 0.4, "median_fused_hi": 0.6}},
            "checks": {"deep_beats_baseline": True},
            "chance": 0.1,
        })
    generate_report(log_path, tmp_path / "report.html")
    page = (tmp_path / "report.html").read_text(encoding="utf-8")
    assert 'id="benchmark"' in page
    assert "deep_beats_baseline" in page


def test_report_skips_corrupt_lines(tmp_path):
    log_path = tmp_path / "audit.ndjson"
    log_path.write_text('{"type": "run_start", "ts": "2024-01-01T00:00:00Z", "data": {}}\nnot json\n')
    generate_report(log_path, tmp_path / "report.html")
    assert "1 events" in (tmp_path / "report.html").read_text(encoding="utf-8")


def test_missing_audit_log_is_a_storage_error(tmp_path):
    with pytest.raises(StorageError):
        generate_report(tmp_path / "missing.ndjson", tmp_path / "report.html")
