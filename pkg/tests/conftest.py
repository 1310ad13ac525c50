"""Shared fixtures: a tiny rendered corpus and small network configs."""

from __future__ import annotations

from typing import Callable

import pytest

from deepadapt.data import generate_corpus, split_manifest
from deepadapt.labels import AuxHeadSpec, AuxTask, build_vocab, build_writer_index
from deepadapt.net import AdaptiveMode, NetworkConfig
from deepadapt.trainer import TrainingSet

SMALL_WORDS = ["ab", "bed", "cab", "dace", "face", "faded"]
NUM_WRITERS = 4
WORDS_PER_WRITER = 10


def small_config(
    writers: int = NUM_WRITERS,
    mode: AdaptiveMode = AdaptiveMode.BASELINE,
    task: AuxTask = AuxTask.LENGTH,
    vocab_size: int = 0,
    **overrides,
) -> NetworkConfig:
    """A network small enough to train for a few iterations in a test."""
    values = dict(
        input_height=32,
        input_width=48,
        channels_per_block=(2, 2, 2, 2),
        fc_widths=(4, 4),
        writer_classes=writers,
        aux_head=AuxHeadSpec(task=task, vocab_size=vocab_size),
        adaptive_mode=mode,
        dropout_rate=0.5,
    )
    values.update(overrides)
    return NetworkConfig(**values)


@pytest.fixture
def make_config() -> Callable[..., NetworkConfig]:
    return small_config


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Four writers, ten words each, split 7/3 per writer."""
    root = tmp_path_factory.mktemp("corpus")
    manifest = generate_corpus(NUM_WRITERS, WORDS_PER_WRITER, SMALL_WORDS, seed=5, out_dir=root)
    train, test = split_manifest(manifest, 0.7, seed=5)
    return {"root": root, "manifest": manifest, "train": train, "test": test}


@pytest.fixture(scope="session")
def small_vocab(corpus):
    return build_vocab(corpus["train"].words(), min_instances=1)


@pytest.fixture(scope="session")
def writer_index(corpus):
    return build_writer_index(corpus["train"].writers())


@pytest.fixture
def training_set(corpus, small_vocab, writer_index):
    return TrainingSet.from_manifest(corpus["train"], small_config(), small_vocab, writer_index)
