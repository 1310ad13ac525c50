"""LangGraph pipeline for the desk-scale benchmark.

Architecture
------------
prepare_data  → Renders the synthetic corpus, splits it and derives the vocabulary.
train_runs    → Trains one network per (mode, seed) in sorted order.
evaluate_runs → Evaluates every checkpoint on the test split.
summarize     → Per-mode medians, directional checks and benchmark.csv.

Every node is deterministic, so two pipelines with the same plan produce the
same checkpoints and CSVs.
"""

from __future__ import annotations

import csv
import logging
import statistics
from pathlib import Path
from typing import Optional

from langgraph.graph import END, StateGraph

from .audit import AuditLog, emit
from .config import RunConfig, make_run_dir
from .core import RngStream
from .data import default_vocab, generate_corpus, read_manifest, split_manifest, write_manifest
from .errors import StorageError
from .evaluator import evaluate, write_report_csvs
from .labels import AuxTask, build_vocab, build_writer_index, save_vocab
from .net import AdaptiveMode, build_network, load_network
from .state import BenchmarkPlan, BenchmarkState
from .trainer import FINAL_CHECKPOINT, TrainingSet, restrict_to_vocab, train

logger = logging.getLogger(__name__)

BENCHMARK_FILE = "benchmark.csv"


def _run_config(plan: BenchmarkPlan, mode: AdaptiveMode, seed: int, data_dir: Path) -> RunConfig:
    """The single-run config equivalent to one (mode, seed) cell of *plan*."""
    return RunConfig(
        data_dir=str(data_dir),
        min_word_instances=plan.min_word_instances,
        channels=plan.channels,
        fc_widths=plan.fc_widths,
        mode=mode,
        aux=plan.aux,
        iterations=plan.iterations,
        batch_size=plan.batch_size,
        learning_rate=plan.learning_rate,
        seed=seed,
        log_every=max(1, plan.iterations // 20),
        fuse_n=tuple(plan.fuse_n),
        fuse_repetitions=plan.repetitions,
        eval_seed=seed,
    )


def _run_dir(out_dir: Path, mode: str, seed: int) -> Path:
    return out_dir / "runs" / f"{mode}_seed{seed}"


def _load_data(data: dict):
    train_m = read_manifest(Path(data["train_manifest"]), split="train")
    test_m = read_manifest(Path(data["test_manifest"]), split="test")
    vocab = {w: i for i, w in enumerate(data["vocab"])}
    writer_index = {w: i for i, w in enumerate(data["writers"])}
    return train_m, test_m, vocab, writer_index


# =============================================================================
# Nodes
# =============================================================================

def make_nodes(audit: Optional[AuditLog] = None):
    """Build the node functions, bound to an optional audit log."""

    def prepare_data(state: BenchmarkState) -> dict:
        """Generate the corpus once for all runs."""
        plan = state["plan"]
        out_dir = Path(state["out_dir"])
        data_dir = out_dir / "data"
        manifest = generate_corpus(plan.writers, plan.words_per_writer, default_vocab(), plan.data_seed, data_dir)
        train_m, test_m = split_manifest(manifest, plan.train_fraction, plan.data_seed)
        write_manifest(data_dir / "train.tsv", train_m)
        write_manifest(data_dir / "test.tsv", test_m)

        if plan.aux in (AuxTask.WORD, AuxTask.COMBINED):
            vocab = build_vocab(train_m.words(), plan.min_word_instances)
        else:
            vocab = build_vocab(manifest.words(), 1)
        save_vocab(data_dir / "vocab.txt", vocab)
        writer_index = build_writer_index(train_m.writers())
        data = {
            "train_manifest": str(data_dir / "train.tsv"),
            "test_manifest": str(data_dir / "test.tsv"),
            "vocab": sorted(vocab, key=vocab.__getitem__),
            "writers": sorted(writer_index, key=writer_index.__getitem__),
            "train_samples": len(train_m),
            "test_samples": len(test_m),
        }
        emit(audit, "data_ready", {
            "train_samples": len(train_m),
            "test_samples": len(test_m),
            "vocab_size": len(vocab),
            "writers": len(writer_index),
        })
        return {"data": data, "phase": "training"}

    def train_runs(state: BenchmarkState) -> dict:
        """Train every (mode, seed) pair on the shared training split."""
        plan = state["plan"]
        out_dir = Path(state["out_dir"])
        data_dir = out_dir / "data"
        train_m, _, vocab, writer_index = _load_data(state["data"])
        if plan.aux in (AuxTask.WORD, AuxTask.COMBINED):
            train_m = restrict_to_vocab(train_m, vocab)
        base = _run_config(plan, AdaptiveMode.BASELINE, 0, data_dir).network_config(len(writer_index), len(vocab))
        data = TrainingSet.from_manifest(train_m, base, vocab, writer_index)

        runs = []
        for mode, seed in plan.runs():
            run_config = _run_config(plan, mode, seed, data_dir)
            network = build_network(run_config.network_config(len(writer_index), len(vocab)), RngStream(seed))
            run_dir = make_run_dir(_run_dir(out_dir, mode.value, seed))
            run_config.write_resolved(run_dir)
            logger.info("training %s seed %d", mode.value, seed)
            result = train(network, data, run_config.train_config(), out_dir=run_dir, audit=audit)
            last = result.log.rows[-1]
            run = {
                "mode": mode.value,
                "seed": seed,
                "checkpoint": str(run_dir / FINAL_CHECKPOINT),
                "parameters": network.num_parameters(),
                "final_loss": last.loss_total,
            }
            emit(audit, "benchmark_run", run)
            runs.append(run)
        return {"runs": runs, "phase": "evaluating"}

    def evaluate_runs(state: BenchmarkState) -> dict:
        """Evaluate every trained checkpoint on the test split."""
        plan = state["plan"]
        out_dir = Path(state["out_dir"])
        train_m, test_m, vocab, writer_index = _load_data(state["data"])
        results = []
        for run in sorted(state["runs"], key=lambda r: (r["mode"], r["seed"])):
            network, _, _ = load_network(Path(run["checkpoint"]))
            report = evaluate(
                network, test_m, writer_index, vocab,
                fuse_n=plan.fuse_n, repetitions=plan.repetitions, seed=run["seed"], train_manifest=train_m,
            )
            write_report_csvs(report, _run_dir(out_dir, run["mode"], run["seed"]) / "metrics")
            entry = {"mode": run["mode"], "seed": run["seed"], "top1": report.top1, "top5": report.top5,
                     "fusion": {int(n): v for n, v in report.fusion_curve.items()}}
            emit(audit, "metrics", entry)
            results.append(entry)
        return {"results": results, "phase": "summarizing"}

    def summarize(state: BenchmarkState) -> dict:
        """Median Top-1 per mode plus the directional checks."""
        plan = state["plan"]
        summary = summarize_results(state["results"], plan)
        write_benchmark_csv(Path(state["out_dir"]) / BENCHMARK_FILE, state["results"], summary, plan)
        emit(audit, "benchmark_summary", summary)
        return {"summary": summary, "phase": "complete"}

    return prepare_data, train_runs, evaluate_runs, summarize


def summarize_results(results: list[dict], plan: BenchmarkPlan) -> dict:
    """Per-mode medians over seeds and the directional checks.

    Checks: ``deep_ge_baseline`` (median Deep Top-1 at least median
    Baseline), ``above_10x_chance`` (every mode's median above ten times
    chance) and ``fusion_monotone`` (median fused Top-1 at the largest N at
    least that at the smallest N, per mode).
    """
    by_mode: dict[str, list[dict]] = {}
    for r in results:
        by_mode.setdefault(r["mode"], []).append(r)
    n_lo, n_hi = min(plan.fuse_n), max(plan.fuse_n)
    modes = {}
    for mode, rows in by_mode.items():
        modes[mode] = {
            "median_top1": statistics.median(r["top1"] for r in rows),
            "median_top5": statistics.median(r["top5"] for r in rows),
            "median_fused_lo": statistics.median(r["fusion"][n_lo] for r in rows),
            "median_fused_hi": statistics.median(r["fusion"][n_hi] for r in rows),
        }
    checks = {
        "above_10x_chance": all(m["median_top1"] > 10 * plan.chance for m in modes.values()),
        "fusion_monotone": all(m["median_fused_hi"] >= m["median_fused_lo"] for m in modes.values()),
    }
    if "deep" in modes and "baseline" in modes:
        checks["deep_ge_baseline"] = modes["deep"]["median_top1"] >= modes["baseline"]["median_top1"]
    return {"chance": plan.chance, "fuse_n": [n_lo, n_hi], "modes": modes, "checks": checks}


def write_benchmark_csv(path: Path, results: list[dict], summary: dict, plan: BenchmarkPlan) -> Path:
    """Per-run rows, then one ``median`` row per mode."""
    fuse_n = sorted(set(plan.fuse_n))
    header = ["mode", "seed", "top1", "top5"] + [f"fused_n{n}" for n in fuse_n]
    rows = [[r["mode"], r["seed"], r["top1"], r["top5"]] + [r["fusion"][n] for n in fuse_n]
            for r in sorted(results, key=lambda r: (r["mode"], r["seed"]))]
    for mode, m in sorted(summary["modes"].items()):
        medians = [statistics.median(r["fusion"][n] for r in results if r["mode"] == mode) for n in fuse_n]
        rows.append([mode, "median", m["median_top1"], m["median_top5"]] + medians)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path


# =============================================================================
# Graph
# =============================================================================

def create_pipeline_graph(audit: Optional[AuditLog] = None) -> StateGraph:
    prepare_data, train_runs, evaluate_runs, summarize = make_nodes(audit)
    graph = StateGraph(BenchmarkState)
    graph.add_node("prepare_data",  prepare_data)
    graph.add_node("train_runs",    train_runs)
    graph.add_node("evaluate_runs", evaluate_runs)
    graph.add_node("summarize",     summarize)

    graph.set_entry_point("prepare_data")
    graph.add_edge("prepare_data",  "train_runs")
    graph.add_edge("train_runs",    "evaluate_runs")
    graph.add_edge("evaluate_runs", "summarize")
    graph.add_edge("summarize",     END)

    return graph.compile()


def create_pipeline(audit: Optional[AuditLog] = None):
    """Create and return the compiled benchmark pipeline."""
    return create_pipeline_graph(audit)


def initial_state(plan: BenchmarkPlan, out_dir: Path) -> BenchmarkState:
    return {
        "plan": plan,
        "out_dir": str(out_dir),
        "data": None,
        "runs": [],
        "results": [],
        "summary": None,
        "phase": "data",
    }
