"""Run a pretrained contextual encoder over a corpus, dump every layer.

The scoring pipeline downstream consumes one vector per word per
encoder layer from a binary embedding file; this tool produces that
file from a real model. It owns the single concern the pipeline
deliberately does not: the subword bridge. Each pre-segmented word is
tokenized into subwords, the encoder runs over the subword sequence,
and subword vectors are pooled back to one vector per word and layer
(first subtoken by default, mean on request).

The static embedding-table output is excluded: a 12-layer encoder
contributes exactly its 12 transformer block outputs, and format
version 1 encodes that choice.

File layout, little endian throughout: a 24-byte header (magic "HMEB",
u32 version, u32 layer count, u32 hidden size, u64 document count),
one 20-byte index entry per document (u64 blake2b-64 hash of the utf-8
id, u32 word count, u64 absolute payload offset), then per document a
C-contiguous float32 block of shape (words, layers, hidden). Index
order is file order and offsets are contiguous.

Exports are deterministic: eval mode, no gradients, and a fixed batch
partition of the corpus, so the same corpus and model produce
byte-identical files run after run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass

import numpy as np
import torch

log = logging.getLogger("embed_export")

MAGIC = b"HMEB"
VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")      # magic, version, L, d_r, doc count
_INDEX_ENTRY = struct.Struct("<QIQ")    # id hash, word count, byte offset


class ExportError(Exception):
    """Bad configuration, corpus, or model; the CLI reports and exits."""


@dataclass(frozen=True)
class ExportConfig:
    model: str                  # model name or local path
    corpus: str
    out: str
    max_seq_len: int = 512      # subwords, special tokens included
    pooling: str = "first"      # "first" | "mean"
    layers: int = 12            # transformer blocks the model must have
    batch_size: int = 8

    def validate(self) -> "ExportConfig":
        if self.pooling not in ("first", "mean"):
            raise ExportError(f"pooling must be 'first' or 'mean', got '{self.pooling}'")
        if self.max_seq_len < 1:
            raise ExportError("max_seq_len must be positive")
        if self.layers < 1:
            raise ExportError("layer count must be positive")
        if self.batch_size < 1:
            raise ExportError("batch_size must be positive")
        return self


# -- corpus --------------------------------------------------------------


def read_corpus(path) -> list[tuple[str, list[str]]]:
    """(id, words) pairs from a JSON-lines corpus.

    Only `id` and `tokens` are consumed; gold labels and any other
    fields ride along unread. Blank lines are skipped, duplicate ids
    rejected.
    """
    docs: list[tuple[str, list[str]]] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path} line {lineno}: {exc}") from None
            if not isinstance(obj, dict):
                raise ExportError(f"{path} line {lineno}: expected a JSON object")
            doc_id = obj.get("id")
            tokens = obj.get("tokens")
            if not isinstance(doc_id, str) or not doc_id:
                raise ExportError(f"{path} line {lineno}: missing or empty 'id'")
            if (not isinstance(tokens, list)
                    or any(not isinstance(t, str) for t in tokens)):
                raise ExportError(f"{path} line {lineno}: 'tokens' must be a list of strings")
            if doc_id in seen:
                raise ExportError(
                    f"{path} line {lineno}: duplicate id '{doc_id}' "
                    f"(first seen line {seen[doc_id]})")
            seen[doc_id] = lineno
            docs.append((doc_id, tokens))
    return docs


# -- embedding file ------------------------------------------------------


def doc_id_hash(doc_id: str) -> int:
    digest = hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def write_embeddings(path, docs, n_layers: int, hidden: int) -> None:
    """Write (doc_id, (M, L, H) float32 array) pairs as one file.

    Layer count and hidden size are passed explicitly so an empty
    corpus still records the model's true dimensions in the header.
    """
    docs = list(docs)
    for doc_id, arr in docs:
        if arr.shape[1:] != (n_layers, hidden):
            raise ExportError(
                f"document '{doc_id}': block shape {arr.shape} does not match "
                f"(*, {n_layers}, {hidden})")
    base = _HEADER.size + _INDEX_ENTRY.size * len(docs)
    entries = []
    offset = base
    hashes: dict[int, str] = {}
    for doc_id, arr in docs:
        h = doc_id_hash(doc_id)
        if h in hashes:
            raise ExportError(
                f"id hash collision between '{hashes[h]}' and '{doc_id}'")
        hashes[h] = doc_id
        entries.append((h, arr.shape[0], offset))
        offset += arr.shape[0] * n_layers * hidden * 4
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n_layers, hidden, len(docs)))
        for entry in entries:
            fh.write(_INDEX_ENTRY.pack(*entry))
        for _, arr in docs:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


# -- subword bridge ------------------------------------------------------


def _word_pieces(tokenizer, words, budget: int, doc_id: str) -> list[list[int]]:
    """Subword ids per word, truncated at the last whole word.

    A word whose subwords would cross the budget is dropped along with
    everything after it; a word the tokenizer maps to nothing at all
    becomes a single unknown-token vector so the one-vector-per-word
    contract holds.
    """
    pieces: list[list[int]] = []
    used = 0
    for word in words:
        ids = tokenizer.encode(word, add_special_tokens=False)
        if not ids:
            ids = [tokenizer.unk_token_id]
        if used + len(ids) > budget:
            log.warning(
                "document '%s' truncated from %d to %d words "
                "(subword budget %d)", doc_id, len(words), len(pieces), budget)
            break
        pieces.append(ids)
        used += len(ids)
    return pieces


def _special_template(tokenizer) -> tuple[list[int], list[int]]:
    """Special-token ids wrapped around a single sequence, (prefix, suffix).

    Discovered by encoding the unknown token and locating it, which
    stays within the stable tokenizer API instead of per-family
    template methods.
    """
    unk = tokenizer.unk_token_id
    if unk is None:
        raise ExportError(
            "tokenizer has no unknown token; cannot infer its "
            "special-token template")
    wrapped = tokenizer.encode(tokenizer.unk_token, add_special_tokens=True)
    at = wrapped.index(unk)
    return wrapped[:at], wrapped[at + 1:]


def _encode_batch(model, tokenizer, plans: list[list[list[int]]],
                  pooling: str) -> list[np.ndarray]:
    """(words, layers, hidden) float32 block per document in the batch."""
    prefix, suffix = _special_template(tokenizer)
    n_lead = len(prefix)
    seqs = [
        prefix + [i for word in plan for i in word] + suffix
        for plan in plans
    ]
    pad_id = tokenizer.pad_token_id
    if pad_id is None:
        pad_id = 0
    width = max(len(s) for s in seqs)
    input_ids = torch.full((len(seqs), width), pad_id, dtype=torch.long)
    mask = torch.zeros((len(seqs), width), dtype=torch.long)
    for row, seq in enumerate(seqs):
        input_ids[row, :len(seq)] = torch.tensor(seq, dtype=torch.long)
        mask[row, :len(seq)] = 1
    with torch.inference_mode():
        out = model(input_ids=input_ids, attention_mask=mask,
                    output_hidden_states=True)
    # Block outputs only; hidden_states[0] is the embedding table.
    hidden = torch.stack(out.hidden_states[1:], dim=0)      # (L, B, T, H)
    blocks = []
    for row, plan in enumerate(plans):
        columns = []
        pos = n_lead
        for word in plan:
            span = hidden[:, row, pos:pos + len(word), :]   # (L, n_sub, H)
            if pooling == "first":
                columns.append(span[:, 0, :])
            else:
                columns.append(span.mean(dim=1))
            pos += len(word)
        if columns:
            block = torch.stack(columns, dim=0)             # (M, L, H)
            blocks.append(block.cpu().numpy().astype("<f4", copy=False))
        else:
            blocks.append(np.zeros((0, hidden.shape[0], hidden.shape[3]),
                                   dtype="<f4"))
    return blocks


# -- driver --------------------------------------------------------------


def export(cfg: ExportConfig) -> int:
    """Run the encoder over the corpus, write the file, return doc count."""
    from transformers import AutoModel, AutoTokenizer

    cfg.validate()
    corpus = read_corpus(cfg.corpus)
    tokenizer = AutoTokenizer.from_pretrained(cfg.model)
    model = AutoModel.from_pretrained(cfg.model)
    model.eval()
    n_layers = int(model.config.num_hidden_layers)
    if n_layers != cfg.layers:
        raise ExportError(
            f"model '{cfg.model}' has {n_layers} transformer layers, "
            f"expected {cfg.layers}")
    hidden = int(model.config.hidden_size)
    budget = cfg.max_seq_len - tokenizer.num_special_tokens_to_add()
    if budget < 1:
        raise ExportError(
            f"max_seq_len {cfg.max_seq_len} leaves no room for content "
            "after special tokens")

    blocks: list[np.ndarray] = []
    for start in range(0, len(corpus), cfg.batch_size):
        batch = corpus[start:start + cfg.batch_size]
        plans = [_word_pieces(tokenizer, words, budget, doc_id)
                 for doc_id, words in batch]
        blocks.extend(_encode_batch(model, tokenizer, plans, cfg.pooling))
    write_embeddings(cfg.out, zip((doc_id for doc_id, _ in corpus), blocks),
                     n_layers, hidden)
    return len(corpus)
