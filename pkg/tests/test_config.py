"""Run configuration files, overrides and run directories."""

import pytest

from deepadapt.config import RESOLVED_FILE, RUN_ROOT_ENV, RunConfig, make_run_dir, parse_config_file
from deepadapt.errors import ConfigurationError, StorageError
from deepadapt.labels import AuxTask, LossSchedule
from deepadapt.net import AdaptiveMode


def test_defaults_match_full_size_network():
    config = RunConfig()
    net = config.network_config(writer_classes=50, vocab_size=100)
    assert (net.input_height, net.input_width) == (40, 120)
    assert net.channels_per_block == (64, 128, 256, 512)
    assert net.fc_widths == (1024, 1024)
    assert net.aux_head.vocab_size == 100


def test_config_file_comments_blank_lines_and_dashes(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# a run\n\nmode = deep   # adaptive\nfc-widths = 8, 8\n", encoding="utf-8")
    assert parse_config_file(path) == {"mode": "deep", "fc_widths": "8, 8"}
    config = RunConfig.from_sources(path)
    assert config.mode == AdaptiveMode.DEEP
    assert config.fc_widths == (8, 8)


@pytest.mark.parametrize("text", ["mode deep\n", "mode = deep\nmode = linear\n", "= 3\n"])
def test_malformed_config_files_are_rejected(tmp_path, text):
    path = tmp_path / "bad.conf"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigurationError):
        parse_config_file(path)


def test_unknown_keys_and_bad_values_are_configuration_errors(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("colour = blue\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="unknown key 'colour'"):
        RunConfig.from_sources(path)
    with pytest.raises(ConfigurationError):
        RunConfig.from_sources(overrides={"mode": "wide"})
    with pytest.raises(ConfigurationError):
        RunConfig.from_sources(overrides={"channels": "1,2,x,4"})


def test_missing_config_file_is_a_storage_error(tmp_path):
    with pytest.raises(StorageError):
        RunConfig.from_sources(tmp_path / "nope.conf")


def test_command_line_overrides_win_and_none_is_ignored(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("iterations = 100\nseed = 4\n", encoding="utf-8")
    config = RunConfig.from_sources(path, {"iterations": "7", "seed": None})
    assert config.iterations == 7
    assert config.seed == 4


def test_resolved_config_round_trips(tmp_path):
    config = RunConfig.from_sources(overrides={"mode": "linear", "single_task": True, "data_dir": "d",
                                               "adaptive_blocks": "2,4"})
    path = config.write_resolved(tmp_path)
    assert path.name == RESOLVED_FILE
    text = path.read_text(encoding="utf-8")
    assert "single_task = true" in text
    assert "adaptive_blocks = 2,4" in text
    assert RunConfig.from_sources(path) == config


def test_loss_schedule_selection():
    assert RunConfig(single_task=True).loss_schedule() == LossSchedule.constant(1.0)
    assert RunConfig(schedule="full").loss_schedule() == LossSchedule()
    assert RunConfig(iterations=1000).loss_schedule() == LossSchedule.scaled(1000)
    train = RunConfig(iterations=12, batch_size=3, seed=9).train_config()
    assert (train.iterations, train.batch_size, train.seed) == (12, 3, 9)


def test_vocab_size_only_reaches_vocabulary_heads():
    config = RunConfig(aux=AuxTask.CHARS)
    assert config.network_config(5, 40).aux_head.vocab_size == 0


def test_infeasible_network_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        RunConfig(adaptive_blocks=(1,)).network_config(5, 10)


def test_run_dir_defaults_to_timestamp_under_env_root(tmp_path, monkeypatch):
    monkeypatch.setenv(RUN_ROOT_ENV, str(tmp_path / "root"))
    run_dir = make_run_dir()
    assert run_dir.parent == tmp_path / "root"
    assert run_dir.is_dir()
    explicit = make_run_dir(tmp_path / "mine")
    assert explicit == tmp_path / "mine" and explicit.is_dir()


def test_stop_at_reaches_the_train_config():
    train = RunConfig.from_sources(overrides={"iterations": "8", "stop_at": "3"}).train_config()
    assert (train.iterations, train.stop_at, train.end) == (8, 3, 3)
    assert RunConfig(iterations=4, stop_at=9).train_config().end == 4
    assert RunConfig(iterations=4).train_config().end == 4


def test_resolved_notes_are_comments_the_parser_skips(tmp_path):
    config = RunConfig(data_dir="d", fuse_n=(1, 3))
    path = config.write_resolved(tmp_path, notes={"checkpoint": "/runs/a/checkpoint_final"})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# checkpoint = /runs/a/checkpoint_final"
    assert "fuse_n = 1,3" in lines
    assert RunConfig.from_sources(path) == config
