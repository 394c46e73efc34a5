"""Corpus parsing, the embedding container, and synthetic generators."""

import json
import logging
import struct

import numpy as np
import pytest

from hypermatch import data
from hypermatch.data import (
    CorpusError,
    Document,
    EmbeddingFile,
    EmbeddingFormatError,
    load_corpus,
    load_embeddings,
    save_corpus,
    synth_corpus,
    synth_layers,
    write_embeddings,
)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def record(doc_id="d1", tokens=("alpha", "beta"), gold=(("alpha",),)):
    return json.dumps({
        "id": doc_id,
        "tokens": list(tokens),
        "keyphrases": [list(p) for p in gold],
    })


# -- corpus loading -----------------------------------------------------


def test_corpus_roundtrip(tmp_path):
    docs = [
        Document("a", ["one", "two"], [["one"]]),
        Document("b", ["three"], []),
    ]
    path = tmp_path / "c.jsonl"
    save_corpus(path, docs)
    back = load_corpus(path)
    assert [(d.doc_id, d.tokens, d.gold) for d in back] == [
        ("a", ["one", "two"], [["one"]]),
        ("b", ["three"], []),
    ]


def test_corpus_skips_blank_lines(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [record("a"), "", "   ", record("b")])
    assert [d.doc_id for d in load_corpus(path)] == ["a", "b"]


def test_corpus_invalid_json_names_line(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [record("a"), "{not json"])
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)


def test_corpus_non_object_line(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, ["[1, 2, 3]"])
    with pytest.raises(CorpusError, match="line 1.*object"):
        load_corpus(path)


def test_corpus_missing_fields_named(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [json.dumps({"id": "a", "tokens": ["x"]})])
    with pytest.raises(CorpusError, match="keyphrases"):
        load_corpus(path)


@pytest.mark.parametrize("bad", [
    {"id": "", "tokens": ["x"], "keyphrases": []},
    {"id": 7, "tokens": ["x"], "keyphrases": []},
    {"id": "a", "tokens": [], "keyphrases": []},
    {"id": "a", "tokens": "not-a-list", "keyphrases": []},
    {"id": "a", "tokens": ["x", 3], "keyphrases": []},
    {"id": "a", "tokens": ["x"], "keyphrases": "nope"},
    {"id": "a", "tokens": ["x"], "keyphrases": [[]]},
    {"id": "a", "tokens": ["x"], "keyphrases": [["ok", ""]]},
    {"id": "a", "tokens": ["x"], "keyphrases": ["flat"]},
])
def test_corpus_field_validation(tmp_path, bad):
    path = tmp_path / "c.jsonl"
    write_lines(path, [json.dumps(bad)])
    with pytest.raises(CorpusError, match="line 1"):
        load_corpus(path)


def test_corpus_duplicate_id_reports_both_lines(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [record("same"), record("other"), record("same")])
    with pytest.raises(CorpusError, match="line 3.*line 1"):
        load_corpus(path)


def test_corpus_truncates_long_documents(tmp_path, caplog):
    path = tmp_path / "c.jsonl"
    write_lines(path, [record("long", tokens=[f"t{i}" for i in range(10)])])
    with caplog.at_level(logging.WARNING, logger="hypermatch"):
        docs = load_corpus(path, max_seq_len=4)
    assert docs[0].tokens == ["t0", "t1", "t2", "t3"]
    assert any("truncated" in r.message for r in caplog.records)


def test_corpus_default_cap_is_512(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [record("big", tokens=[f"t{i}" for i in range(600)])])
    assert len(load_corpus(path)[0].tokens) == 512


# -- embedding container ------------------------------------------------


def stacks(rng, counts, n_layers=2, d_r=3):
    return [(f"doc{i}", rng.normal(size=(m, n_layers, d_r)))
            for i, m in enumerate(counts)]


def test_embeddings_roundtrip_is_f32_exact(tmp_path):
    rng = np.random.default_rng(50)
    docs = stacks(rng, [4, 1, 7])
    path = tmp_path / "e.hmeb"
    write_embeddings(path, docs)
    reader = EmbeddingFile(path)
    assert len(reader) == 3
    assert (reader.n_layers, reader.d_r) == (2, 3)
    for doc_id, arr in docs:
        assert doc_id in reader
        got = reader.load(doc_id)
        assert got.dtype == np.float64
        # disk precision is f32: the roundtrip equals a f32 cast exactly
        assert np.array_equal(got, arr.astype("<f4").astype(np.float64))


def test_embeddings_unknown_id_raises(tmp_path):
    path = tmp_path / "e.hmeb"
    write_embeddings(path, stacks(np.random.default_rng(51), [2]))
    reader = EmbeddingFile(path)
    with pytest.raises(KeyError, match="ghost"):
        reader.load("ghost")
    assert "ghost" not in reader


def test_embeddings_empty_file_valid(tmp_path):
    path = tmp_path / "e.hmeb"
    write_embeddings(path, [])
    assert len(EmbeddingFile(path)) == 0


def test_embeddings_zero_token_document(tmp_path):
    path = tmp_path / "e.hmeb"
    rng = np.random.default_rng(52)
    write_embeddings(path, [("empty", np.zeros((0, 2, 3))),
                            ("full", rng.normal(size=(3, 2, 3)))])
    reader = EmbeddingFile(path)
    assert reader.load("empty").shape == (0, 2, 3)
    assert reader.load("full").shape == (3, 2, 3)


def test_embeddings_writer_rejects_mixed_shapes(tmp_path):
    rng = np.random.default_rng(53)
    with pytest.raises(ValueError, match="inconsistent"):
        write_embeddings(tmp_path / "e.hmeb", [
            ("a", rng.normal(size=(2, 2, 3))),
            ("b", rng.normal(size=(2, 2, 4))),
        ])


def test_embeddings_writer_output_is_deterministic(tmp_path):
    rng = np.random.default_rng(54)
    docs = stacks(rng, [3, 2])
    p1, p2 = tmp_path / "a.hmeb", tmp_path / "b.hmeb"
    write_embeddings(p1, docs)
    write_embeddings(p2, docs)
    assert p1.read_bytes() == p2.read_bytes()


def test_embeddings_bad_magic(tmp_path):
    path = tmp_path / "e.hmeb"
    write_embeddings(path, stacks(np.random.default_rng(55), [2]))
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(raw)
    with pytest.raises(EmbeddingFormatError, match="magic"):
        EmbeddingFile(path)


def test_embeddings_bad_version(tmp_path):
    path = tmp_path / "e.hmeb"
    write_embeddings(path, stacks(np.random.default_rng(56), [2]))
    raw = bytearray(path.read_bytes())
    struct.pack_into("<I", raw, 4, 99)
    path.write_bytes(raw)
    with pytest.raises(EmbeddingFormatError, match="version 99"):
        EmbeddingFile(path)


def test_embeddings_short_file(tmp_path):
    path = tmp_path / "e.hmeb"
    path.write_bytes(b"HM")
    with pytest.raises(EmbeddingFormatError, match="header"):
        EmbeddingFile(path)


def test_embeddings_truncated_payload(tmp_path):
    path = tmp_path / "e.hmeb"
    write_embeddings(path, stacks(np.random.default_rng(57), [2]))
    raw = path.read_bytes()
    path.write_bytes(raw[:-2])
    with pytest.raises(EmbeddingFormatError, match="payload"):
        EmbeddingFile(path)


def test_embeddings_truncated_index(tmp_path):
    path = tmp_path / "e.hmeb"
    write_embeddings(path, stacks(np.random.default_rng(58), [2]))
    raw = path.read_bytes()
    path.write_bytes(raw[:30])  # header is 24 bytes, one entry needs 20
    with pytest.raises(EmbeddingFormatError, match="index"):
        EmbeddingFile(path)


def test_embeddings_index_offset_validated(tmp_path):
    path = tmp_path / "e.hmeb"
    write_embeddings(path, stacks(np.random.default_rng(59), [2]))
    raw = bytearray(path.read_bytes())
    # offset field of index entry 0 lives after the 8-byte hash + 4-byte count
    struct.pack_into("<Q", raw, 24 + 12, 9999)
    path.write_bytes(raw)
    with pytest.raises(EmbeddingFormatError, match="offset"):
        EmbeddingFile(path)


def test_load_embeddings_one_shot(tmp_path):
    rng = np.random.default_rng(60)
    docs = stacks(rng, [5])
    path = tmp_path / "e.hmeb"
    write_embeddings(path, docs)
    got = load_embeddings(path, "doc0")
    assert np.array_equal(got, docs[0][1].astype("<f4").astype(np.float64))


# -- synthetic embeddings ----------------------------------------------


def test_synth_layers_deterministic():
    a = synth_layers(["alpha", "beta"], 3, 8, seed=7)
    b = synth_layers(["alpha", "beta"], 3, 8, seed=7)
    assert np.array_equal(a, b)


def test_synth_layers_position_independent():
    stack = synth_layers(["x", "y", "x"], 2, 6, seed=1)
    assert np.array_equal(stack[0], stack[2])
    other = synth_layers(["pad", "x"], 2, 6, seed=1)
    assert np.array_equal(stack[0], other[1])


def test_synth_layers_vary_by_layer_token_seed():
    stack = synth_layers(["x", "y"], 2, 6, seed=1)
    assert not np.array_equal(stack[0, 0], stack[0, 1])
    assert not np.array_equal(stack[0, 0], stack[1, 0])
    reseeded = synth_layers(["x", "y"], 2, 6, seed=2)
    assert not np.array_equal(stack, reseeded)


def test_synth_layers_variance_scale():
    d_r = 64
    sample = synth_layers([f"t{i}" for i in range(200)], 1, d_r, seed=3)
    assert abs(sample.std() - 1.0 / np.sqrt(d_r)) <= 0.01


def test_synth_layers_validation():
    with pytest.raises(ValueError):
        synth_layers(["x"], 0, 4, seed=0)
    with pytest.raises(ValueError):
        synth_layers(["x"], 2, 0, seed=0)


def test_synth_layers_shape_and_empty():
    assert synth_layers([], 2, 4, seed=0).shape == (0, 2, 4)
    assert synth_layers(["a"], 2, 4, seed=0).shape == (1, 2, 4)


# -- synthetic corpus ---------------------------------------------------


def test_synth_corpus_shape_and_determinism():
    docs = synth_corpus(10, seed=5)
    again = synth_corpus(10, seed=5)
    assert len(docs) == 10
    assert [(d.doc_id, d.tokens, d.gold) for d in docs] == \
        [(d.doc_id, d.tokens, d.gold) for d in again]
    assert len({d.doc_id for d in docs}) == 10
    assert synth_corpus(10, seed=6)[0].tokens != docs[0].tokens


def test_synth_corpus_gold_counts():
    docs = synth_corpus(8, seed=2)
    assert [len(d.gold) for d in docs] == [1, 1, 1, 1, 1, 2, 2, 3]
    small = synth_corpus(3, seed=2)
    assert [len(d.gold) for d in small] == [1, 1, 1]


def test_synth_corpus_gold_phrases_are_planted_contiguously():
    for doc in synth_corpus(6, seed=9):
        for phrase in doc.gold:
            n = len(phrase)
            spans = [doc.tokens[i:i + n] for i in range(len(doc.tokens) - n + 1)]
            assert phrase in spans


def test_synth_corpus_gold_tokens_unique_per_doc():
    docs = synth_corpus(7, seed=4)
    for doc in docs:
        mine = {t for p in doc.gold for t in p}
        for other in docs:
            if other.doc_id == doc.doc_id:
                continue
            assert mine.isdisjoint(other.tokens)


def test_synth_corpus_token_budget():
    for doc in synth_corpus(12, seed=8, min_tokens=20, max_tokens=30):
        assert 20 <= len(doc.tokens) <= 30


def test_synth_corpus_validation():
    with pytest.raises(ValueError):
        synth_corpus(0, seed=0)


def test_synth_corpus_loadable_after_save(tmp_path):
    path = tmp_path / "synth.jsonl"
    docs = synth_corpus(5, seed=1)
    save_corpus(path, docs)
    assert [d.doc_id for d in load_corpus(path)] == [d.doc_id for d in docs]


def test_doc_id_hash_is_stable():
    # persisted in the index, so it must never drift between versions
    assert data.doc_id_hash("doc0") == data.doc_id_hash("doc0")
    assert data.doc_id_hash("doc0") != data.doc_id_hash("doc1")
