"""Benchmark plan, summary and the end-to-end pipeline."""

import csv
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from deepadapt.audit import AuditLog
from deepadapt.config import RESOLVED_FILE
from deepadapt.labels import AuxTask
from deepadapt.net import AdaptiveMode, load_network
from deepadapt.pipeline import BENCHMARK_FILE, create_pipeline, initial_state, summarize_results, write_benchmark_csv
from deepadapt.state import BenchmarkPlan


def _result(mode, seed, top1, fused_lo, fused_hi):
    return {"mode": mode, "seed": seed, "top1": top1, "top5": min(1.0, top1 + 0.2),
            "fusion": {1: fused_lo, 5: fused_hi}}


def test_runs_follow_mode_then_seed_order():
    plan = BenchmarkPlan(modes=[AdaptiveMode.DEEP, AdaptiveMode.BASELINE], seeds=[2, 0, 2])
    assert plan.runs() == [
        (AdaptiveMode.BASELINE, 0),
        (AdaptiveMode.BASELINE, 2),
        (AdaptiveMode.DEEP, 0),
        (AdaptiveMode.DEEP, 2),
    ]


@pytest.mark.parametrize("field", ["modes", "seeds", "fuse_n"])
def test_plan_rejects_empty_lists(field):
    with pytest.raises(ValidationError):
        BenchmarkPlan(**{field: []})


def test_chance_is_one_over_writers():
    assert BenchmarkPlan(writers=20).chance == pytest.approx(0.05)


def test_summary_medians_and_checks():
    plan = BenchmarkPlan(writers=50)
    results = [
        _result("baseline", 0, 0.30, 0.30, 0.50),
        _result("baseline", 1, 0.40, 0.40, 0.60),
        _result("baseline", 2, 0.50, 0.50, 0.70),
        _result("deep", 0, 0.45, 0.45, 0.40),
        _result("deep", 1, 0.55, 0.55, 0.80),
        _result("deep", 2, 0.60, 0.60, 0.90),
    ]
    summary = summarize_results(results, plan)
    assert summary["modes"]["baseline"]["median_top1"] == pytest.approx(0.40)
    assert summary["modes"]["deep"]["median_top1"] == pytest.approx(0.55)
    assert summary["modes"]["deep"]["median_fused_hi"] == pytest.approx(0.80)
    assert summary["checks"] == {"above_10x_chance": True, "fusion_monotone": True, "deep_ge_baseline": True}
    assert summary["fuse_n"] == [1, 5]


def test_summary_flags_weak_modes():
    plan = BenchmarkPlan(writers=10)
    summary = summarize_results([_result("linear", 0, 0.5, 0.6, 0.4)], plan)
    assert summary["checks"] == {"above_10x_chance": False, "fusion_monotone": False}


def test_benchmark_csv_has_runs_then_medians(tmp_path):
    plan = BenchmarkPlan()
    results = [_result("deep", 1, 0.5, 0.5, 0.7), _result("deep", 0, 0.3, 0.3, 0.5)]
    path = write_benchmark_csv(tmp_path / BENCHMARK_FILE, results, summarize_results(results, plan), plan)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["mode", "seed", "top1", "top5", "fused_n1", "fused_n5"]
    assert [r[1] for r in rows[1:]] == ["0", "1", "median"]
    assert float(rows[3][2]) == pytest.approx(0.4)


def _tiny_plan():
    return BenchmarkPlan(
        seeds=[0],
        aux=AuxTask.LENGTH,
        writers=3,
        words_per_writer=8,
        iterations=2,
        batch_size=4,
        channels=(2, 2, 2, 2),
        fc_widths=(4, 4),
        fuse_n=[1, 2],
        repetitions=2,
    )


def _run_benchmark(out_dir):
    with AuditLog(out_dir / "audit.ndjson") as audit:
        return create_pipeline(audit).invoke(initial_state(_tiny_plan(), out_dir))


@pytest.mark.slow
def test_tiny_benchmark_end_to_end(tmp_path):
    final = _run_benchmark(tmp_path)
    assert final["phase"] == "complete"
    assert len(final["runs"]) == 3
    summary = final["summary"]
    assert sorted(summary["modes"]) == ["baseline", "deep", "linear"]
    assert set(summary["checks"]) == {"above_10x_chance", "fusion_monotone", "deep_ge_baseline"}
    assert summary == summarize_results(final["results"], _tiny_plan())
    for result in final["results"]:
        assert 0.0 <= result["top1"] <= result["top5"] <= 1.0
        assert sorted(result["fusion"]) == [1, 2]
    assert (tmp_path / BENCHMARK_FILE).exists()
    assert (tmp_path / "data" / "vocab.txt").exists()
    for mode in ("baseline", "linear", "deep"):
        run_dir = tmp_path / "runs" / f"{mode}_seed0"
        assert (run_dir / "metrics" / "fusion.csv").exists()
        resolved = (run_dir / RESOLVED_FILE).read_text(encoding="utf-8").splitlines()
        assert f"mode = {mode}" in resolved
        assert "seed = 0" in resolved


@pytest.mark.slow
def test_tiny_benchmark_is_reproducible(tmp_path):
    first = _run_benchmark(tmp_path / "a")
    second = _run_benchmark(tmp_path / "b")
    assert (tmp_path / "a" / BENCHMARK_FILE).read_bytes() == (tmp_path / "b" / BENCHMARK_FILE).read_bytes()
    assert first["results"] == second["results"]
    for run_a, run_b in zip(first["runs"], second["runs"]):
        net_a, _, _ = load_network(Path(run_a["checkpoint"]))
        net_b, _, _ = load_network(Path(run_b["checkpoint"]))
        for (name, p), (_, q) in zip(net_a.parameters(), net_b.parameters()):
            np.testing.assert_array_equal(p.data, q.data, err_msg=name)
