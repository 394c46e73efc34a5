"""Shared fixtures: a tiny randomly initialized encoder, built offline.

The model and tokenizer are constructed programmatically in a temp
directory (wordpiece vocab written by hand, random weights at a fixed
seed), so the suite needs no network and no model cache. The terminal
summary hook mirrors the primary package's acceptance reporting.
"""

import json

import pytest
import torch

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]",
    "hyper", "##bolic", "match", "ball", "curve", "##d", "space",
    "the", "a", "geo", "##metry", "deep", "model",
]

FIVE_DOCS = [
    {"id": "doc0", "tokens": ["hyperbolic", "space"],
     "keyphrases": [["hyperbolic", "space"]]},
    {"id": "doc1", "tokens": ["the", "curved", "ball"], "keyphrases": [["ball"]]},
    {"id": "doc2", "tokens": ["geometry", "model"], "keyphrases": [["model"]]},
    {"id": "doc3", "tokens": ["deep", "match"], "keyphrases": [["match"]]},
    {"id": "doc4", "tokens": ["a", "zzz", "space"], "keyphrases": [["space"]]},
]

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def build_model_dir(path, n_layers: int) -> str:
    from transformers import BertConfig, BertModel, BertTokenizer

    path.mkdir(parents=True, exist_ok=True)
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_file))
    tokenizer.save_pretrained(str(path))
    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=8,
                        num_hidden_layers=n_layers, num_attention_heads=2,
                        intermediate_size=16, max_position_embeddings=64)
    BertModel(config).save_pretrained(str(path))
    return str(path)


def write_corpus(path, docs) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    return build_model_dir(tmp_path_factory.mktemp("enc") / "layers2", 2)


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    return write_corpus(tmp_path_factory.mktemp("corpus") / "corpus.jsonl",
                        FIVE_DOCS)
