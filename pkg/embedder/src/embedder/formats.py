"""Readers and writers for the pipeline's file formats.

This package talks to the core toolkit only through its documented formats:
the JSONL corpus, the vocabulary and docs TSVs, the CEMB embedding store, and
the topics CSV. The tokenizer here mirrors the core chunker contract exactly
(whitespace split, lowercase, edge punctuation stripped, purely alphabetic,
length > 2, chunks of 200) so token positions align between the two sides.
"""

from __future__ import annotations

import json
import string
import struct

import numpy as np

CHUNK_SIZE = 200
MIN_WORD_LEN = 3

CEMB_MAGIC = b"CEMB"
CEMB_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


def tokenize(text: str) -> list[list[str]]:
    """Chunks of at most 200 filtered tokens, identical to the core rule."""
    tokens = [
        t for t in (tok.lower().strip(string.punctuation) for tok in text.split())
        if t.isalpha() and len(t) >= MIN_WORD_LEN
    ]
    return [tokens[i:i + CHUNK_SIZE] for i in range(0, len(tokens), CHUNK_SIZE)]


def read_corpus(path):
    """Yield (doc_id, year, text) records from a JSONL corpus file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                yield rec["doc_id"], int(rec["year"]), rec["text"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed record at line {lineno}: {exc}") from exc


def write_corpus(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, year, text in records:
            fh.write(json.dumps({"doc_id": doc_id, "year": year, "text": text}) + "\n")


def read_vocab_tsv(path) -> dict[str, int]:
    mapping: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("word\t"):
                continue
            word, wid, _count, _df = line.rstrip("\n").split("\t")
            mapping[word] = int(wid)
    return mapping


def read_docs_tsv(path) -> tuple[dict[str, int], dict[str, int]]:
    index: dict[str, int] = {}
    years: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("doc_id\t"):
                continue
            doc_id, idx, year, _n = line.rstrip("\n").split("\t")
            index[doc_id] = int(idx)
            years[doc_id] = int(year)
    return index, years


class CembWriter:
    """Streaming writer for the core's binary embedding store."""

    def __init__(self, path, dim: int):
        self.dim = dim
        self.count = 0
        self._fh = open(path, "wb")
        self._fh.write(_HEADER.pack(CEMB_MAGIC, CEMB_VERSION, dim, 0))
        self._record = struct.Struct(f"<IIHI{dim}f")

    def write(self, word_id: int, doc_id: int, year: int, position: int, vector) -> None:
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise ValueError(f"expected dimension {self.dim}, got {vec.shape}")
        self._fh.write(self._record.pack(word_id, doc_id, year, position,
                                         *vec.tolist()))
        self.count += 1

    def close(self) -> None:
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(CEMB_MAGIC, CEMB_VERSION, self.dim, self.count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_cemb(path):
    """Load (dim, records) back; mirrors the writer for round-trip tests."""
    with open(path, "rb") as fh:
        magic, version, dim, count = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != CEMB_MAGIC or version != CEMB_VERSION:
            raise ValueError(f"{path}: not a CEMB v{CEMB_VERSION} store")
        dtype = np.dtype([("word_id", "<u4"), ("doc_id", "<u4"), ("year", "<u2"),
                          ("position", "<u4"), ("vector", "<f4", (dim,))])
        records = np.fromfile(fh, dtype=dtype, count=count)
    if len(records) != count:
        raise ValueError(f"{path}: truncated store")
    return dim, records


def write_topics_csv(path, doc_ids, distributions) -> None:
    k = distributions.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("doc_id," + ",".join(f"p{i + 1}" for i in range(k)) + "\n")
        for doc_id, row in zip(doc_ids, distributions):
            fh.write(doc_id + "," + ",".join(f"{x:.8f}" for x in row) + "\n")
