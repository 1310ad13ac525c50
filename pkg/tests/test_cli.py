"""Command-line entry points."""

import csv

import pytest

from deepadapt.cli import main

WORDS = ["ab", "bed", "cab", "dace", "face"]


def _exit_code(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    return excinfo.value.code


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_no_command_prints_help_and_exits_2(capsys):
    assert _exit_code([]) == 2
    assert "gen-data" in capsys.readouterr().out


def test_schedule_dump_lists_every_change(capsys):
    main(["schedule-dump"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "iteration,lambda"
    assert lines[1] == "0,0.5"
    assert lines[2] == "10000,0.566"
    assert lines[-1] == "35000,0.896"
    assert len(lines) == 8


def test_schedule_dump_single_iteration(tmp_path):
    out = tmp_path / "schedule.csv"
    main(["schedule-dump", "--iterations", "1", "--out", str(out)])
    assert _rows(out) == [["iteration", "lambda"], ["0", "0.5"]]


def test_invalid_choice_is_a_usage_error():
    assert _exit_code(["train", "--data-dir", "x", "--mode", "wide"]) == 2


def test_train_without_data_dir_is_a_usage_error(tmp_path):
    assert _exit_code(["train", "--out-dir", str(tmp_path / "run")]) == 2


def test_gen_data_with_missing_vocab_leaves_nothing_behind(tmp_path):
    out = tmp_path / "data"
    assert _exit_code(["gen-data", "--vocab-file", str(tmp_path / "none.txt"), "--out-dir", str(out)]) == 3
    assert not out.exists()


def test_grad_check_category(tmp_path):
    main(["grad-check", "--category", "losses", "--out-dir", str(tmp_path / "gc")])
    assert (tmp_path / "gc" / "report.html").exists()


def test_grad_check_reads_network_settings_from_config(tmp_path):
    conf = tmp_path / "gc.conf"
    conf.write_text("leaky_slope = 0.2\nconv_method = gemm\nseed = 3\n", encoding="utf-8")
    out = tmp_path / "gc"
    main(["grad-check", "--config", str(conf), "--category", "network", "--samples", "2", "--out-dir", str(out)])
    resolved = (out / "config.resolved").read_text(encoding="utf-8").splitlines()
    assert resolved[:2] == ["# tolerance = 0.0001", "# samples = 2"]
    assert {"leaky_slope = 0.2", "conv_method = gemm", "seed = 3"} <= set(resolved)


def test_grad_check_rejects_unknown_config_keys(tmp_path):
    conf = tmp_path / "gc.conf"
    conf.write_text("colour = blue\n", encoding="utf-8")
    assert _exit_code(["grad-check", "--config", str(conf), "--category", "losses"]) == 2


def test_grad_check_failure_exits_1():
    assert _exit_code(["grad-check", "--category", "losses", "--tolerance", "1e-14"]) == 1


def test_grad_check_unknown_category_is_a_usage_error():
    assert _exit_code(["grad-check", "--category", "optimizers"]) == 2


def test_gen_data_train_eval(tmp_path):
    vocab = tmp_path / "words.txt"
    vocab.write_text("\n".join(WORDS) + "\n", encoding="utf-8")
    data = tmp_path / "data"
    main(["gen-data", "--writers", "3", "--words-per-writer", "8", "--vocab-file", str(vocab),
          "--out-dir", str(data), "--seed", "2"])
    assert (data / "train.tsv").exists() and (data / "test.tsv").exists()

    run = tmp_path / "run"
    main(["train", "--data-dir", str(data), "--out-dir", str(run), "--input-height", "32", "--input-width", "48",
          "--channels", "2,2,2,2", "--fc-widths", "4,4", "--aux", "length", "--mode", "deep",
          "--iterations", "3", "--batch-size", "4", "--checkpoint-every", "2", "--log-every", "1"])
    assert (run / "checkpoint_final" / "header.json").exists()
    assert (run / "checkpoints" / "iter_0000002").is_dir()
    assert "mode = deep" in (run / "config.resolved").read_text(encoding="utf-8")
    assert len(_rows(run / "train_log.csv")) == 4
    assert (run / "report.html").exists()

    resumed = tmp_path / "resumed"
    main(["train", "--data-dir", str(data), "--out-dir", str(resumed), "--aux", "length", "--iterations", "4",
          "--batch-size", "4", "--log-every", "1", "--resume", str(run / "checkpoints" / "iter_0000002")])
    assert [r[0] for r in _rows(resumed / "train_log.csv")[1:]] == ["2", "3"]

    ev = tmp_path / "eval"
    main(["eval", "--checkpoint", str(run / "checkpoint_final"), "--data-dir", str(data),
          "--fuse-n", "1,2", "--fuse-repetitions", "2", "--out-dir", str(ev)])
    metrics = _rows(ev / "metrics" / "metrics.csv")
    assert metrics[0] == ["task", "metric", "value"]
    assert {tuple(r[:2]) for r in metrics[1:]} >= {("writer", "top1"), ("writer", "top5"), ("aux", "top1")}
    assert [r[0] for r in _rows(ev / "metrics" / "fusion.csv")] == ["n", "1", "2"]
    assert (ev / "report.html").exists()
    resolved = (ev / "config.resolved").read_text(encoding="utf-8").splitlines()
    assert resolved[0] == f"# checkpoint = {(run / 'checkpoint_final').resolve()}"
    assert "fuse_n = 1,2" in resolved
    assert f"data_dir = {data}" in resolved

    (data / "held_out.tsv").write_text((data / "test.tsv").read_text(encoding="utf-8"), encoding="utf-8")
    conf = tmp_path / "eval.conf"
    conf.write_text(f"data_dir = {data}\ntest_manifest = held_out.tsv\nfuse_n = 1\nfuse_repetitions = 1\n",
                    encoding="utf-8")
    ev2 = tmp_path / "eval2"
    main(["eval", "--checkpoint", str(run / "checkpoint_final"), "--config", str(conf), "--out-dir", str(ev2)])
    assert [r[0] for r in _rows(ev2 / "metrics" / "fusion.csv")] == ["n", "1"]
    assert _rows(ev2 / "metrics" / "metrics.csv")[1] == _rows(ev / "metrics" / "metrics.csv")[1]
    assert "test_manifest = held_out.tsv" in (ev2 / "config.resolved").read_text(encoding="utf-8")
    assert _exit_code(["eval", "--checkpoint", str(run / "checkpoint_final"), "--config", str(conf),
                       "--test-manifest", "absent.tsv"]) == 3

    assert _exit_code(["eval", "--checkpoint", str(tmp_path / "missing"), "--data-dir", str(data)]) == 3


def test_report_regenerates_html(tmp_path):
    run = tmp_path / "gc"
    main(["grad-check", "--category", "losses", "--out-dir", str(run)])
    (run / "report.html").unlink()
    main(["report", "--run-dir", str(run)])
    assert (run / "report.html").exists()
