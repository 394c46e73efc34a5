"""Corpus and embedding I/O, plus the synthetic embedding generator.

Corpora are JSON-lines files with exactly the fields id/tokens/keyphrases.
Embeddings live in a little-endian binary format: a fixed header, an
index of (id hash, token count, byte offset) triples, then one f32
payload block per document holding the (M, L, d_r) layer stack
row-major. Disk precision is f32; everything widens to f64 in memory.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger("hypermatch")

MAX_SEQ_LEN = 512

EMBED_MAGIC = b"HMEB"
EMBED_VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")      # magic, version, L, d_r, doc count
_INDEX_ENTRY = struct.Struct("<QIQ")    # id hash, token count, byte offset


class CorpusError(ValueError):
    """Malformed corpus input; message carries the offending line."""


class EmbeddingFormatError(ValueError):
    """Bad magic, truncated payload, or inconsistent index."""


@dataclass
class Document:
    doc_id: str
    tokens: list[str]
    gold: list[list[str]] = field(default_factory=list)


def doc_id_hash(doc_id: str) -> int:
    """64-bit index key for a document id."""
    digest = hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _parse_record(obj, lineno: int) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    missing = {"id", "tokens", "keyphrases"} - obj.keys()
    if missing:
        raise CorpusError(f"line {lineno}: missing field(s) {sorted(missing)}")
    doc_id = obj["id"]
    tokens = obj["tokens"]
    gold = obj["keyphrases"]
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"line {lineno}: id must be a non-empty string")
    if (not isinstance(tokens, list) or not tokens
            or not all(isinstance(t, str) for t in tokens)):
        raise CorpusError(f"line {lineno}: tokens must be a non-empty string array")
    if not isinstance(gold, list):
        raise CorpusError(f"line {lineno}: keyphrases must be an array")
    for phrase in gold:
        if (not isinstance(phrase, list) or not phrase
                or not all(isinstance(t, str) and t for t in phrase)):
            raise CorpusError(
                f"line {lineno}: each keyphrase must be a non-empty array "
                f"of non-empty strings"
            )
    return Document(doc_id, list(tokens), [list(p) for p in gold])


def load_corpus(path, max_seq_len: int = MAX_SEQ_LEN) -> list[Document]:
    """Parse a corpus file; order-preserving, duplicate ids rejected.

    Documents longer than `max_seq_len` tokens are truncated with a
    warning, mirroring the model's sequence cap.
    """
    docs: list[Document] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"line {lineno}: invalid JSON ({e.msg})") from e
            doc = _parse_record(obj, lineno)
            if doc.doc_id in seen:
                raise CorpusError(
                    f"line {lineno}: duplicate id '{doc.doc_id}' "
                    f"(first seen on line {seen[doc.doc_id]})"
                )
            seen[doc.doc_id] = lineno
            if len(doc.tokens) > max_seq_len:
                log.warning("document '%s' truncated from %d to %d tokens",
                            doc.doc_id, len(doc.tokens), max_seq_len)
                doc.tokens = doc.tokens[:max_seq_len]
            docs.append(doc)
    return docs


def save_corpus(path, docs: list[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(
                {"id": doc.doc_id, "tokens": doc.tokens, "keyphrases": doc.gold},
                ensure_ascii=False) + "\n")


# -- embedding file ----------------------------------------------------


def write_embeddings(path, docs) -> None:
    """Write (doc_id, (M, L, d_r) array) pairs as one embedding file.

    All arrays must share (L, d_r). The index is laid out before the
    payload with absolute byte offsets; payload blocks are contiguous
    in index order, which the reader re-validates entry by entry.
    """
    docs = list(docs)
    if docs:
        shapes = {arr.shape[1:] for _, arr in docs}
        if len(shapes) > 1:
            raise ValueError(f"inconsistent layer/dim shapes: {sorted(shapes)}")
        n_layers, d_r = docs[0][1].shape[1:]
    else:
        n_layers, d_r = 0, 0
    base = _HEADER.size + _INDEX_ENTRY.size * len(docs)
    entries = []
    offset = base
    hashes: dict[int, str] = {}
    for doc_id, arr in docs:
        h = doc_id_hash(doc_id)
        if h in hashes:
            raise ValueError(f"id hash collision between '{hashes[h]}' and '{doc_id}'")
        hashes[h] = doc_id
        entries.append((h, arr.shape[0], offset))
        offset += arr.shape[0] * n_layers * d_r * 4
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMBED_MAGIC, EMBED_VERSION, n_layers, d_r, len(docs)))
        for entry in entries:
            fh.write(_INDEX_ENTRY.pack(*entry))
        for _, arr in docs:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


class EmbeddingFile:
    """Random-access reader over one embedding file.

    The whole index is validated up front (magic, version, offsets,
    payload length), so a truncated or corrupt file fails at open time
    rather than mid-run.
    """

    def __init__(self, path):
        self.path = path
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _HEADER.size:
            raise EmbeddingFormatError(f"{path}: file shorter than header")
        magic, version, n_layers, d_r, count = _HEADER.unpack_from(raw, 0)
        if magic != EMBED_MAGIC:
            raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
        if version != EMBED_VERSION:
            raise EmbeddingFormatError(f"{path}: unsupported version {version}")
        self.n_layers = n_layers
        self.d_r = d_r
        index_end = _HEADER.size + _INDEX_ENTRY.size * count
        if len(raw) < index_end:
            raise EmbeddingFormatError(f"{path}: truncated index")
        self._index: dict[int, tuple[int, int]] = {}
        expected = index_end
        for i in range(count):
            h, tokens, offset = _INDEX_ENTRY.unpack_from(
                raw, _HEADER.size + i * _INDEX_ENTRY.size)
            if offset != expected:
                raise EmbeddingFormatError(
                    f"{path}: index entry {i} offset {offset}, expected {expected}")
            if h in self._index:
                raise EmbeddingFormatError(f"{path}: duplicate id hash in index")
            self._index[h] = (tokens, offset)
            expected += tokens * n_layers * d_r * 4
        if len(raw) != expected:
            raise EmbeddingFormatError(
                f"{path}: payload is {len(raw) - index_end} bytes, "
                f"expected {expected - index_end}")
        self._raw = raw

    def __contains__(self, doc_id: str) -> bool:
        return doc_id_hash(doc_id) in self._index

    def __len__(self) -> int:
        return len(self._index)

    def load(self, doc_id: str) -> np.ndarray:
        """The (M, L, d_r) float64 stack for one document."""
        entry = self._index.get(doc_id_hash(doc_id))
        if entry is None:
            raise KeyError(f"document '{doc_id}' not present in {self.path}")
        tokens, offset = entry
        n = tokens * self.n_layers * self.d_r
        flat = np.frombuffer(self._raw, dtype="<f4", count=n, offset=offset)
        return flat.reshape(tokens, self.n_layers, self.d_r).astype(np.float64)


def load_embeddings(path, doc_id: str) -> np.ndarray:
    """One-shot load; prefer EmbeddingFile when reading many documents."""
    return EmbeddingFile(path).load(doc_id)


# -- synthetic embeddings ----------------------------------------------


def _token_seed(token: str, layer: int, seed: int) -> int:
    key = f"{seed}|{layer}|{token}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def synth_token_vector(token: str, layer: int, d_r: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(_token_seed(token, layer, seed))
    return rng.normal(0.0, 1.0 / math.sqrt(d_r), d_r)


def synth_layers(tokens, n_layers: int, d_r: int, seed: int) -> np.ndarray:
    """Deterministic stand-in for a contextual encoder, (M, L, d_r).

    Each (token string, layer) pair owns its own Gaussian stream, so a
    token embeds identically at every position and in every document;
    variance is 1/d_r. Deliberately context-free: determinism and
    cross-document consistency are the point, contextuality is not.
    """
    if n_layers < 1 or d_r < 1:
        raise ValueError("layer count and width must be positive")
    out = np.empty((len(tokens), n_layers, d_r), dtype=np.float64)
    for i, token in enumerate(tokens):
        for layer in range(n_layers):
            out[i, layer] = synth_token_vector(token, layer, d_r, seed)
    return out


def synth_embeddings(doc: Document, n_layers: int, d_r: int, seed: int) -> np.ndarray:
    return synth_layers(doc.tokens, n_layers, d_r, seed)


def synth_corpus(n_docs: int, seed: int, min_tokens: int = 24,
                 max_tokens: int = 36, filler_vocab: int = 40) -> list[Document]:
    """Planted-keyphrase corpus for smoke tests and overfit runs.

    Gold phrases use tokens unique to their document, so the synthetic
    embeddings carry an unambiguous signal; filler tokens are shared
    across documents and never collide with gold stems. Most documents
    carry one gold phrase; the last three carry two, two, and three, so
    multi-gold bookkeeping is exercised without dragging the F1@1
    ceiling down (recall at K = 1 caps a doc's F1 at 2 / (1 + gold
    count)).
    """
    if n_docs < 1:
        raise ValueError("need at least one document")
    rng = np.random.default_rng([seed, 0x5C])
    fillers = [f"w{i:02d}" for i in range(filler_vocab)]
    docs = []
    for i in range(n_docs):
        if n_docs >= 4 and i == n_docs - 1:
            n_gold = 3
        elif n_docs >= 4 and i >= n_docs - 3:
            n_gold = 2
        else:
            n_gold = 1
        gold = []
        for j in range(n_gold):
            length = 1 + (i + j) % 2
            gold.append([f"d{i:03d}k{j}x{t}" for t in range(length)])
        tokens: list[str] = []
        for phrase in gold:
            run = rng.integers(2, 5)
            tokens.extend(rng.choice(fillers, size=run).tolist())
            tokens.extend(phrase)
        target = int(rng.integers(min_tokens, max_tokens + 1))
        if len(tokens) < target:
            tokens.extend(rng.choice(fillers, size=target - len(tokens)).tolist())
        docs.append(Document(doc_id=f"synth-{i:04d}", tokens=tokens, gold=gold))
    return docs
