"""Command-line interface for the deep adaptive writer identification toolkit."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .audit import AUDIT_FILE, AuditCallbackHandler, AuditLog, emit
from .config import RunConfig, make_run_dir, write_resolved
from .core import RngStream
from .data import generate_corpus, read_manifest, split_manifest, write_manifest
from .errors import CheckpointError, ConfigurationError, DeepAdaptError, ExitCode, StorageError
from .evaluator import evaluate, write_report_csvs
from .gradcheck import (
    DEFAULT_SAMPLES,
    DEFAULT_TOLERANCE,
    NetworkCheckOptions,
    get_all_checks,
    get_checks_by_category,
    run_checks,
)
from .labels import AuxTask, LossSchedule, build_vocab, build_writer_index, load_vocab, loss_lambda, schedule_boundaries
from .net import AdaptiveMode, Precision, build_network, load_network
from .pipeline import BENCHMARK_FILE, create_pipeline, initial_state
from .report import generate_report
from .state import BenchmarkPlan
from .trainer import FINAL_CHECKPOINT, TrainingSet, check_heads, restrict_to_vocab, resume, train

console = Console()
logger = logging.getLogger(__name__)

REPORT_FILE = "report.html"
METRICS_DIR = "metrics"

# flags with a fixed set of values; every other RunConfig key is a free-form string flag
_CHOICES = {
    "mode": [m.value for m in AdaptiveMode],
    "aux": [t.value for t in AuxTask],
    "precision": [p.value for p in Precision],
    "schedule": ["scaled", "full"],
    "conv_method": ["direct", "gemm"],
    "fuse_average": ["softmax", "logits"],
}


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _run_with_audit(run_dir: Path, command: str, args: dict[str, Any], body: Callable[[AuditLog], None]) -> None:
    """Run *body* with an audit log in *run_dir*, then render the HTML report.

    The report is written even when *body* fails; the error is re-raised.
    """
    log_path = run_dir / AUDIT_FILE
    html_path = run_dir / REPORT_FILE
    audit = AuditLog(log_path)
    audit.write("run_start", {"command": command, **{k: v for k, v in args.items() if v is not None}})
    try:
        body(audit)
        audit.write("run_complete", {"duration_s": audit.elapsed_seconds})
    except DeepAdaptError as exc:
        audit.write("run_error", {"error": str(exc), "exit_code": exc.exit_code})
        raise
    finally:
        audit.close()
        try:
            generate_report(log_path, html_path)
            console.print(f"[dim]Audit log:[/dim]   {log_path}")
            console.print(f"[dim]Run report:[/dim] {html_path}")
        except DeepAdaptError as report_err:
            console.print(f"[yellow]Warning: could not generate HTML report:[/yellow] {report_err}")


# =============================================================================
# gen-data
# =============================================================================

def cmd_gen_data(args: argparse.Namespace) -> None:
    # read the vocabulary before touching out_dir so a bad file leaves nothing behind
    vocab = load_vocab(args.vocab_file)
    out_dir = Path(args.out_dir)
    manifest = generate_corpus(args.writers, args.words_per_writer, list(vocab), args.seed, out_dir,
                               height=args.height, width=args.width)
    train_m, test_m = split_manifest(manifest, args.train_fraction, args.seed)
    write_manifest(out_dir / "train.tsv", train_m)
    write_manifest(out_dir / "test.tsv", test_m)

    table = Table(title="Generated corpus")
    table.add_column("Split", style="cyan")
    table.add_column("Images", justify="right")
    table.add_column("Writers", justify="right")
    table.add_column("Distinct words", justify="right")
    for name, m in (("all", manifest), ("train", train_m), ("test", test_m)):
        table.add_row(name, str(len(m)), str(len(m.writers())), str(len(set(m.words()))))
    console.print(table)
    console.print(f"[dim]Written to[/dim] {out_dir}")


# =============================================================================
# train
# =============================================================================

def _config_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {name: getattr(args, name, None) for name in RunConfig.model_fields}


def _data_dir(config: RunConfig) -> Path:
    if not config.data_dir:
        raise ConfigurationError("data_dir is required (set it in the config file or pass --data-dir)")
    return Path(config.data_dir)


def cmd_train(args: argparse.Namespace) -> None:
    config = RunConfig.from_sources(args.config, _config_overrides(args))
    data_dir = _data_dir(config)
    train_m = read_manifest(data_dir / config.train_manifest, split="train")
    writer_index = build_writer_index(train_m.writers())
    if config.aux in (AuxTask.WORD, AuxTask.COMBINED):
        vocab = build_vocab(train_m.words(), config.min_word_instances)
        train_m = restrict_to_vocab(train_m, vocab)
    else:
        vocab = build_vocab(train_m.words(), 1)

    run_dir = make_run_dir(args.out_dir)
    config.write_resolved(run_dir)
    net_config = config.network_config(len(writer_index), len(vocab))
    train_config = config.train_config()

    console.print(Panel(
        f"mode [cyan]{config.mode.value}[/cyan] | aux [cyan]{config.aux.value}[/cyan] | "
        f"{len(writer_index)} writers | {len(vocab)} words | {len(train_m)} images",
        title="[bold]Training[/bold]", border_style="blue",
    ))

    def body(audit: AuditLog) -> None:
        if args.resume:
            # the checkpoint's own config fixes the input size
            network, _, _ = load_network(args.resume)
            data = TrainingSet.from_manifest(train_m, network.config, vocab, writer_index)
            result = resume(args.resume, data, train_config, out_dir=run_dir, audit=audit)
        else:
            data = TrainingSet.from_manifest(train_m, net_config, vocab, writer_index)
            network = build_network(net_config, RngStream(config.seed))
            logger.info("network has %d parameters", network.num_parameters())
            result = train(network, data, train_config, out_dir=run_dir, audit=audit)
        if result.log.rows:
            last = result.log.rows[-1]
            console.print(f"final loss [bold]{last.loss_total:.5f}[/bold] at iteration {last.iteration}")
        console.print(f"[dim]Checkpoint:[/dim] {run_dir / FINAL_CHECKPOINT}")

    _run_with_audit(run_dir, "train", {"mode": config.mode.value, "aux": config.aux.value,
                                       "seed": config.seed, "iterations": config.iterations,
                                       "data_dir": str(data_dir), "resume": args.resume}, body)


# =============================================================================
# eval
# =============================================================================

def _eval_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "data_dir": str(args.data_dir) if args.data_dir else None,
        "train_manifest": args.train_manifest,
        "test_manifest": args.test_manifest,
        "fuse_n": args.fuse_n,
        "fuse_repetitions": args.fuse_repetitions,
        "fuse_average": args.average,
        "eval_seed": args.seed,
    }


def cmd_eval(args: argparse.Namespace) -> None:
    config = RunConfig.from_sources(args.config, _eval_overrides(args))
    data_dir = _data_dir(config)
    network, meta, _ = load_network(args.checkpoint)
    if "writers" not in meta or "vocab" not in meta:
        raise CheckpointError(f"{args.checkpoint} holds no label maps")
    writer_index = {w: i for i, w in enumerate(meta["writers"])}
    vocab = {w: i for i, w in enumerate(meta["vocab"])}
    try:
        check_heads(network.config, writer_index, vocab)
    except ConfigurationError as exc:
        raise CheckpointError(str(exc)) from exc

    test_m = read_manifest(data_dir / config.test_manifest, split="test")
    train_path = data_dir / config.train_manifest
    train_m = read_manifest(train_path, split="train") if train_path.exists() else None
    run_dir = make_run_dir(args.out_dir)
    config.write_resolved(run_dir, notes={"checkpoint": Path(args.checkpoint).resolve()})

    def body(audit: AuditLog) -> None:
        report = evaluate(
            network, test_m, writer_index, vocab,
            fuse_n=config.fuse_n, repetitions=config.fuse_repetitions, seed=config.eval_seed,
            average=config.fuse_average, train_manifest=train_m,
        )
        write_report_csvs(report, run_dir / METRICS_DIR)
        emit(audit, "metrics", report.summary())

        table = Table(title="Evaluation")
        table.add_column("Task", style="cyan")
        table.add_column("Metric")
        table.add_column("Value", justify="right")
        table.add_row("writer", "top1", f"{report.top1:.4f}")
        table.add_row("writer", "top5", f"{report.top5:.4f}")
        for name, value in sorted(report.aux.items()):
            table.add_row("aux", name, f"{value:.4f}")
        for n, value in sorted(report.fusion_curve.items()):
            table.add_row("fusion", f"N={n}", f"{value:.4f}")
        console.print(table)
        console.print(f"[dim]Metrics:[/dim] {run_dir / METRICS_DIR}")

    _run_with_audit(run_dir, "eval", {"checkpoint": str(args.checkpoint), "data_dir": str(data_dir),
                                      "fuse_n": list(config.fuse_n), "seed": config.eval_seed}, body)


# =============================================================================
# grad-check
# =============================================================================

def cmd_grad_check(args: argparse.Namespace) -> None:
    config = RunConfig.from_sources(args.config, {"precision": args.precision, "seed": args.seed})
    options = NetworkCheckOptions(
        leaky_slope=config.leaky_slope, conv_method=config.conv_method, adaptive_blocks=config.adaptive_blocks
    )
    try:
        checks = get_checks_by_category(args.category, options) if args.category else get_all_checks(options)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    precision = config.precision

    def on_result(result) -> None:
        mark = "[green]✓[/green]" if result.passed else "[red]✗[/red]"
        console.print(f"{mark} {result.name} [dim]{result.max_rel_error:.2e}[/dim]")

    results = run_checks(checks, args.tolerance, args.samples, config.seed, precision, on_result=on_result)

    table = Table(title="Gradient checks")
    table.add_column("Check", style="cyan")
    table.add_column("Category")
    table.add_column("Worst input")
    table.add_column("Max rel. error", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Status")
    for r in results:
        status = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, r.category, r.worst_input, f"{r.max_rel_error:.3e}", f"{r.tolerance:.0e}", status)
    console.print(table)
    for warning in sorted({w for r in results for w in r.warnings}):
        console.print(f"[yellow]Warning:[/yellow] {warning}")

    failed = [r for r in results if not r.passed]
    if args.out_dir:
        run_dir = make_run_dir(args.out_dir)
        config.write_resolved(run_dir, notes={"tolerance": args.tolerance, "samples": args.samples})
        with AuditLog(run_dir / AUDIT_FILE) as audit:
            audit.write("run_start", {"command": "grad-check", "tolerance": args.tolerance,
                                      "precision": precision.value, "seed": config.seed})
            for r in results:
                audit.write("gradcheck", r.to_dict())
            audit.write("run_complete", {"duration_s": audit.elapsed_seconds, "failed": len(failed)})
        generate_report(run_dir / AUDIT_FILE, run_dir / REPORT_FILE)
    if failed:
        console.print(f"[red]{len(failed)} of {len(results)} checks failed[/red]")
        sys.exit(ExitCode.FAILURE)
    console.print(f"[bold green]All {len(results)} checks passed[/bold green]")


# =============================================================================
# schedule-dump
# =============================================================================

def cmd_schedule_dump(args: argparse.Namespace) -> None:
    schedule = LossSchedule.scaled(args.iterations) if args.scaled else LossSchedule()
    rows = [(it, loss_lambda(it, schedule)) for it in schedule_boundaries(args.iterations, schedule)]
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as f:
                _write_schedule(f, rows)
        except OSError as exc:
            raise StorageError(f"cannot write {args.out}: {exc}") from exc
    else:
        _write_schedule(sys.stdout, rows)


def _write_schedule(stream, rows: list[tuple[int, float]]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["iteration", "lambda"])
    for it, lam in rows:
        writer.writerow([it, f"{lam:g}"])


# =============================================================================
# benchmark
# =============================================================================

def cmd_benchmark(args: argparse.Namespace) -> None:
    values = {
        "seeds": args.seeds,
        "iterations": args.iterations,
        "writers": args.writers,
        "words_per_writer": args.words_per_writer,
        "modes": args.modes,
        "aux": args.aux,
    }
    try:
        plan = BenchmarkPlan(**{k: v for k, v in values.items() if v is not None})
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc
    run_dir = make_run_dir(args.out_dir)
    write_resolved(run_dir, plan.model_dump(mode="json"))

    def body(audit: AuditLog) -> None:
        pipeline = create_pipeline(audit)
        callback = AuditCallbackHandler(audit)
        summary: Optional[dict] = None
        for event in pipeline.stream(initial_state(plan, run_dir), config={"callbacks": [callback]}):
            for node_name, node_state in event.items():
                console.print(f"[cyan]✓[/cyan] {node_name}")
                if node_state and node_state.get("summary"):
                    summary = node_state["summary"]
        if summary is not None:
            _print_benchmark(summary)
        console.print(f"[dim]Benchmark CSV:[/dim] {run_dir / BENCHMARK_FILE}")

    _run_with_audit(run_dir, "benchmark", plan.model_dump(mode="json"), body)


def _print_benchmark(summary: dict) -> None:
    lo, hi = summary["fuse_n"]
    table = Table(title=f"Benchmark (chance {summary['chance']:.3f})")
    table.add_column("Mode", style="cyan")
    table.add_column("Median Top-1", justify="right")
    table.add_column("Median Top-5", justify="right")
    table.add_column(f"Fused N={lo}", justify="right")
    table.add_column(f"Fused N={hi}", justify="right")
    for mode, m in summary["modes"].items():
        table.add_row(mode, f"{m['median_top1']:.4f}", f"{m['median_top5']:.4f}",
                      f"{m['median_fused_lo']:.4f}", f"{m['median_fused_hi']:.4f}")
    console.print(table)
    for name, ok in sorted(summary["checks"].items()):
        console.print(f"{'[green]✓[/green]' if ok else '[red]✗[/red]'} {name}")


# =============================================================================
# report
# =============================================================================

def cmd_report(args: argparse.Namespace) -> None:
    run_dir = Path(args.run_dir)
    generate_report(run_dir / AUDIT_FILE, run_dir / REPORT_FILE)
    console.print(f"[dim]Run report:[/dim] {run_dir / REPORT_FILE}")


# =============================================================================
# Parser
# =============================================================================

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per RunConfig key; values are validated by RunConfig itself."""
    group = parser.add_argument_group("config overrides")
    for name, field in RunConfig.model_fields.items():
        flag = "--" + name.replace("_", "-")
        if field.annotation is bool:
            group.add_argument(flag, dest=name, action="store_true", default=None, help=f"set {name}")
        elif name in _CHOICES:
            group.add_argument(flag, dest=name, choices=_CHOICES[name], default=None,
                               help=f"(default: {field.default.value if hasattr(field.default, 'value') else field.default})")
        else:
            group.add_argument(flag, dest=name, default=None, metavar=name.upper(),
                               help=f"(default: {field.default})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepadapt",
        description="Writer identification with deep adaptive multi-task CNNs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s gen-data --writers 50 --words-per-writer 40 --vocab-file words.txt --out-dir data
  %(prog)s train --data-dir data --mode deep --aux word --iterations 2000
  %(prog)s eval --checkpoint runs/<ts>/checkpoint_final --data-dir data --fuse-n 1,2,3,4,5
  %(prog)s grad-check --tolerance 1e-4
  %(prog)s schedule-dump --iterations 40000
  %(prog)s benchmark --seeds 0,1,2 --iterations 2000

Environment Variables:
  DEEPADAPT_RUN_ROOT    Root for timestamped run directories (default: runs)
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen-data", help="Render a synthetic word-image corpus")
    p.add_argument("--writers", type=int, default=50)
    p.add_argument("--words-per-writer", type=int, default=40)
    p.add_argument("--vocab-file", type=Path, required=True, help="One word per line")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.71)
    p.add_argument("--height", type=int, default=40)
    p.add_argument("--width", type=int, default=120)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="Train a network on a corpus")
    p.add_argument("--config", type=Path, help="key = value run config file")
    p.add_argument("--out-dir", type=Path, help="Run directory (default: timestamped under the run root)")
    p.add_argument("--resume", type=Path, help="Continue from a training checkpoint")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Evaluate a checkpoint on the test split")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--config", type=Path, help="key = value run config file (evaluation and data keys are used)")
    p.add_argument("--data-dir", type=Path, help="Corpus directory (default: data_dir from --config)")
    p.add_argument("--train-manifest", help="Train manifest name inside the data dir, for support counts")
    p.add_argument("--test-manifest", help="Test manifest name inside the data dir")
    p.add_argument("--fuse-n", type=_int_list, help="Comma-separated fusion sizes (default: 1,2,3,4,5)")
    p.add_argument("--fuse-repetitions", type=int)
    p.add_argument("--average", choices=["softmax", "logits"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad-check", help="Finite-difference gradient checks")
    p.add_argument("--config", type=Path, help="key = value run config file (network and seed keys are used)")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="Coordinates sampled per input")
    p.add_argument("--precision", choices=[pr.value for pr in Precision])
    p.add_argument("--category", help="primitives, losses or network (default: all)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", type=Path, help="Also write audit log, resolved config and report here")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("schedule-dump", help="Print the loss-weight schedule as CSV")
    p.add_argument("--iterations", type=int, default=40_000)
    p.add_argument("--scaled", action="store_true", help="Use the schedule scaled to --iterations")
    p.add_argument("--out", type=Path, help="Output file (default: stdout)")
    p.set_defaults(func=cmd_schedule_dump)

    p = sub.add_parser("benchmark", help="Train and evaluate every adaptive mode over several seeds")
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--iterations", type=int)
    p.add_argument("--writers", type=int)
    p.add_argument("--words-per-writer", type=int)
    p.add_argument("--modes", type=lambda s: [m.strip() for m in s.split(",") if m.strip()],
                   help="Comma-separated subset of baseline,linear,deep")
    p.add_argument("--aux", choices=[t.value for t in AuxTask])
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="Regenerate report.html from a run's audit log")
    p.add_argument("--run-dir", type=Path, required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[list[str]] = None) -> None:
    """CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        sys.exit(ExitCode.USAGE)
    setup_logging(args.verbose)
    try:
        args.func(args)
    except DeepAdaptError as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
