"""Synthetic writers, rendering, image I/O, manifests and the train/test split."""

import numpy as np
import pytest

from deepadapt.core import RngStream
from deepadapt.data import (
    Manifest,
    ManifestRecord,
    check_closed_set,
    check_style_identifiability,
    default_vocab,
    generate_corpus,
    glyph_for,
    ink_coverage,
    load_and_resize,
    read_manifest,
    render_word,
    resize_bilinear,
    split_manifest,
    write_manifest,
    write_pgm,
    writer_ids,
    writer_style,
)
from deepadapt.errors import DataError, GlyphError, ParameterError, StorageError
from deepadapt.labels import length_class


def _records(counts: dict[str, int]) -> list[ManifestRecord]:
    return [ManifestRecord(f"{w}/{i}.pgm", w, "ab") for w, n in counts.items() for i in range(n)]


# =============================================================================
# Glyphs, styles and rendering
# =============================================================================

def test_every_letter_has_a_glyph_and_case_is_ignored():
    for ch in "abcdefghijklmnopqrstuvwxyz":
        assert glyph_for(ch) is not None
    assert glyph_for("Q") is glyph_for("q")
    assert glyph_for("7") is None


def test_default_vocab_covers_all_length_classes():
    classes = {length_class(w) for w in default_vocab()}
    assert classes == set(range(13))


def test_writer_style_depends_only_on_seed_and_writer():
    assert writer_style(3, "w001") == writer_style(3, "w001")
    assert writer_style(3, "w001") != writer_style(3, "w002")
    assert writer_style(3, "w001") != writer_style(4, "w001")


def test_identical_styles_are_rejected():
    style = writer_style(0, "w000")
    assert check_style_identifiability({"w000": style, "w001": writer_style(0, "w001")}) > 0
    with pytest.raises(DataError):
        check_style_identifiability({"a": style, "b": style})


def test_render_is_deterministic_and_in_range():
    style = writer_style(1, "w000")
    a = render_word(style, "handwriting", RngStream(5), writer_id="w000")
    b = render_word(style, "handwriting", RngStream(5), writer_id="w000")
    assert a.image.shape == (1, 40, 120)
    np.testing.assert_array_equal(a.image, b.image)
    assert a.image.min() >= 0.0 and a.image.max() <= 1.0
    assert (a.writer_id, a.word) == ("w000", "handwriting")
    assert 0.0 < ink_coverage(a.image) < 0.5


def test_render_output_size_follows_arguments():
    sample = render_word(writer_style(1, "w000"), "ab", RngStream(0), height=32, width=48)
    assert sample.image.shape == (1, 32, 48)


def test_writers_write_the_same_word_differently():
    a = render_word(writer_style(1, "w000"), "letter", RngStream(5))
    b = render_word(writer_style(1, "w001"), "letter", RngStream(5))
    assert not np.array_equal(a.image, b.image)


@pytest.mark.parametrize("word", ["", "abc1", "naïve"])
def test_unrenderable_words_raise_glyph_error(word):
    with pytest.raises(GlyphError):
        render_word(writer_style(1, "w000"), word, RngStream(0))


# =============================================================================
# Image I/O
# =============================================================================

def test_resize_keeps_constant_images_constant():
    out = resize_bilinear(np.full((10, 30), 0.25), 40, 120)
    assert out.shape == (40, 120)
    np.testing.assert_allclose(out, 0.25, atol=1e-9)


def test_resize_to_same_size_is_a_copy():
    image = RngStream(0).random((6, 8))
    out = resize_bilinear(image, 6, 8)
    np.testing.assert_array_equal(out, image)
    assert out is not image


def test_halving_a_checkerboard_averages_to_grey():
    board = (np.indices((8, 8)).sum(axis=0) % 2).astype(np.float64)
    np.testing.assert_allclose(resize_bilinear(board, 4, 4), 0.5, atol=1e-6)


def test_pgm_files_round_trip_through_eight_bits(tmp_path):
    image = np.linspace(0.0, 1.0, 12 * 20).reshape(12, 20)
    write_pgm(tmp_path / "x.pgm", image)
    assert (tmp_path / "x.pgm").read_bytes().startswith(b"P5")
    loaded = load_and_resize(tmp_path / "x.pgm", 12, 20)
    assert loaded.shape == (1, 12, 20)
    np.testing.assert_allclose(loaded[0], image, atol=0.5 / 255 + 1e-12)


def test_missing_image_is_a_storage_error(tmp_path):
    with pytest.raises(StorageError):
        load_and_resize(tmp_path / "missing.pgm", 4, 4)


# =============================================================================
# Manifests
# =============================================================================

def test_manifest_paths_are_rewritten_relative_to_new_location(tmp_path):
    manifest = Manifest(_records({"w000": 2}), root=tmp_path / "data")
    path = write_manifest(tmp_path / "lists" / "all.tsv", manifest)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "../data/w000/0.pgm\tw000\tab"
    loaded = read_manifest(path, split="test")
    assert loaded.split == "test"
    assert [loaded.resolve(r).resolve() for r in loaded] == [manifest.resolve(r).resolve() for r in manifest]


def test_malformed_manifest_lines_are_rejected(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("a.pgm\tw000\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_manifest(path)
    with pytest.raises(StorageError):
        read_manifest(tmp_path / "missing.tsv")


def test_duplicate_paths_are_rejected():
    rec = ManifestRecord("a.pgm", "w000", "ab")
    with pytest.raises(DataError):
        Manifest([rec, ManifestRecord("a.pgm", "w001", "cd")])


def test_closed_set_check():
    train = Manifest(_records({"w000": 2, "w001": 2}))
    check_closed_set(train, Manifest(_records({"w001": 1})))
    with pytest.raises(DataError):
        check_closed_set(train, Manifest(_records({"w002": 1})))


# =============================================================================
# Split
# =============================================================================

def test_split_counts_per_writer():
    manifest = Manifest(_records({"w000": 10, "w001": 4, "w002": 2}))
    train, test = split_manifest(manifest, 0.71, seed=0)
    train_counts = {w: len(i) for w, i in train.by_writer().items()}
    test_counts = {w: len(i) for w, i in test.by_writer().items()}
    assert train_counts == {"w000": 7, "w001": 3, "w002": 1}
    assert test_counts == {"w000": 3, "w001": 1, "w002": 1}
    assert not {r.path for r in train} & {r.path for r in test}


def test_split_is_deterministic_and_seed_dependent():
    manifest = Manifest(_records({"w000": 20}))
    first = [r.path for r in split_manifest(manifest, 0.5, seed=1)[0]]
    assert first == [r.path for r in split_manifest(manifest, 0.5, seed=1)[0]]
    assert first != [r.path for r in split_manifest(manifest, 0.5, seed=2)[0]]


def test_split_rejects_bad_fraction_and_single_sample_writers():
    with pytest.raises(ParameterError):
        split_manifest(Manifest(_records({"w000": 4})), 1.0, seed=0)
    with pytest.raises(DataError):
        split_manifest(Manifest(_records({"w000": 4, "w001": 1})), 0.5, seed=0)


# =============================================================================
# Corpus generation
# =============================================================================

def test_writer_ids_are_zero_padded():
    assert writer_ids(3) == ["w000", "w001", "w002"]
    assert writer_ids(1001)[-1] == "w1000"


def test_generated_corpus_layout(corpus):
    manifest = corpus["manifest"]
    writers = manifest.writers()
    assert len(writers) == 4
    assert len(manifest) == 4 * 10
    assert all(len(idx) == 10 for idx in manifest.by_writer().values())
    assert (corpus["root"] / "manifest.tsv").exists()
    assert all(manifest.resolve(r).exists() for r in manifest)
    assert len(corpus["train"]) == 4 * 7
    assert len(corpus["test"]) == 4 * 3


def test_generation_is_deterministic(tmp_path):
    a = generate_corpus(2, 3, ["ab", "cab"], seed=9, out_dir=tmp_path / "a")
    b = generate_corpus(2, 3, ["ab", "cab"], seed=9, out_dir=tmp_path / "b")
    assert [(r.path, r.writer_id, r.word) for r in a] == [(r.path, r.writer_id, r.word) for r in b]
    for ra, rb in zip(a, b):
        assert a.resolve(ra).read_bytes() == b.resolve(rb).read_bytes()
    assert (tmp_path / "a" / "manifest.tsv").read_bytes() == (tmp_path / "b" / "manifest.tsv").read_bytes()


def test_unrenderable_vocabulary_fails_before_writing(tmp_path):
    with pytest.raises(GlyphError):
        generate_corpus(2, 3, ["ab", "x-ray"], seed=0, out_dir=tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_generation_rejects_empty_inputs(tmp_path):
    with pytest.raises(ParameterError):
        generate_corpus(0, 3, ["ab"], seed=0, out_dir=tmp_path)
    with pytest.raises(DataError):
        generate_corpus(2, 3, [], seed=0, out_dir=tmp_path)
