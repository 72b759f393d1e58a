"""Year-stamped corpus loading, tokenization, and vocabulary construction.

The corpus file is line-delimited JSON, one record per line with fields
``doc_id`` (string), ``year`` (int) and ``text`` (string), UTF-8 encoded.
"""

from __future__ import annotations

import json
import string
from collections import Counter
from dataclasses import dataclass, field

CHUNK_SIZE = 200
MIN_WORD_LEN = 3
DEFAULT_MIN_COUNT = 30
DEFAULT_MAX_DF = 0.9

VOCAB_SCHEMA = "vocab/v1"
DOCS_SCHEMA = "docs/v1"
WORD_YEARS_SCHEMA = "word_years/v1"


class CorpusError(Exception):
    """Raised for malformed corpus files or empty corpora."""


def tokenize(text: str) -> list[list[str]]:
    """Split text into chunks of at most 200 filtered tokens.

    Tokens are whitespace-separated, lowercased, and stripped of punctuation
    at the edges; only purely alphabetic tokens longer than 2 characters are
    kept, so internal digits or hyphens drop the whole token.
    """
    tokens = [
        t for t in (tok.lower().strip(string.punctuation) for tok in text.split())
        if t.isalpha() and len(t) >= MIN_WORD_LEN
    ]
    return [tokens[i:i + CHUNK_SIZE] for i in range(0, len(tokens), CHUNK_SIZE)]


@dataclass
class Document:
    doc_id: str
    year: int
    chunks: list[list[str]]

    @property
    def n_tokens(self) -> int:
        return sum(len(c) for c in self.chunks)

    def tokens(self):
        for chunk in self.chunks:
            yield from chunk


@dataclass
class Corpus:
    documents: list[Document]
    year_range: tuple[int, int]
    doc_index: dict[str, int] = field(init=False)
    total_tokens_per_year: dict[int, int] = field(init=False)

    def __post_init__(self):
        self.doc_index = {d.doc_id: i for i, d in enumerate(self.documents)}
        if len(self.doc_index) != len(self.documents):
            raise CorpusError("duplicate doc_id in corpus")
        totals: dict[int, int] = {}
        for d in self.documents:
            totals[d.year] = totals.get(d.year, 0) + d.n_tokens
        self.total_tokens_per_year = totals

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def years(self) -> list[int]:
        return list(range(self.year_range[0], self.year_range[1] + 1))


def load_corpus(path, year_range: tuple[int, int]) -> Corpus:
    """Load a line-delimited corpus file, dropping documents outside year_range."""
    t_min, t_max = year_range
    documents = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                doc_id = rec["doc_id"]
                year = int(rec["year"])
                text = rec["text"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"malformed record at line {lineno}: {exc}") from exc
            if not isinstance(doc_id, str):
                raise CorpusError(f"malformed record at line {lineno}: doc_id must be a string")
            if doc_id in seen:
                raise CorpusError(f"duplicate doc_id {doc_id!r} at line {lineno}")
            seen.add(doc_id)
            if year < t_min or year > t_max:
                continue
            documents.append(Document(doc_id=doc_id, year=year, chunks=tokenize(text)))
    if not documents:
        raise CorpusError(f"empty corpus after filtering to years {t_min}-{t_max}")
    return Corpus(documents=documents, year_range=(t_min, t_max))


@dataclass
class Vocabulary:
    word_to_id: dict[str, int]
    corpus_count: dict[str, int]
    doc_freq: dict[str, int]
    year_counts: dict[str, dict[int, int]]
    n_documents: int
    year_range: tuple[int, int]

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_id

    def __len__(self) -> int:
        return len(self.word_to_id)

    @property
    def words(self) -> list[str]:
        return list(self.word_to_id)


def build_vocabulary(
    corpus: Corpus,
    min_count: int = DEFAULT_MIN_COUNT,
    max_df: float = DEFAULT_MAX_DF,
) -> Vocabulary:
    """Filter the corpus lexicon to words with corpus count >= min_count and
    document frequency <= max_df of all papers.

    Tokenization already enforces the alphabetic and length filters; ids are
    assigned densely in alphabetical order.
    """
    if len(corpus) == 0:
        raise CorpusError("cannot build vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    year_counts: dict[str, dict[int, int]] = {}
    for doc in corpus.documents:
        doc_counter = Counter(doc.tokens())
        for word, k in doc_counter.items():
            counts[word] += k
            doc_freq[word] += 1
            year_counts.setdefault(word, {})
            year_counts[word][doc.year] = year_counts[word].get(doc.year, 0) + k

    df_cap = max_df * len(corpus)
    kept = sorted(
        w for w, c in counts.items()
        if c >= min_count and doc_freq[w] <= df_cap
    )
    return Vocabulary(
        word_to_id={w: i for i, w in enumerate(kept)},
        corpus_count={w: counts[w] for w in kept},
        doc_freq={w: doc_freq[w] for w in kept},
        year_counts={w: dict(sorted(year_counts[w].items())) for w in kept},
        n_documents=len(corpus),
        year_range=corpus.year_range,
    )


def yearly_counts(vocab: Vocabulary, word: str) -> dict[int, int]:
    """Per-year usage counts over the corpus year span; absent years report 0."""
    if word not in vocab:
        raise KeyError(f"word {word!r} not in vocabulary")
    per_year = vocab.year_counts[word]
    t_min, t_max = vocab.year_range
    return {y: per_year.get(y, 0) for y in range(t_min, t_max + 1)}


def write_vocabulary_tsv(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {VOCAB_SCHEMA}\n")
        fh.write("word\tid\tcorpus_count\tdoc_freq\n")
        for word, wid in vocab.word_to_id.items():
            fh.write(f"{word}\t{wid}\t{vocab.corpus_count[word]}\t{vocab.doc_freq[word]}\n")


def read_vocabulary_tsv(path) -> dict[str, int]:
    """Read the word -> id map back from a vocabulary TSV."""
    mapping: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("word\t"):
                continue
            word, wid, _count, _df = line.rstrip("\n").split("\t")
            mapping[word] = int(wid)
    return mapping


def write_docs_tsv(corpus: Corpus, path) -> None:
    """Document table: stable doc_id <-> dense index mapping plus metadata."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {DOCS_SCHEMA}\n")
        fh.write("doc_id\tindex\tyear\tn_tokens\n")
        for doc in corpus.documents:
            fh.write(f"{doc.doc_id}\t{corpus.doc_index[doc.doc_id]}\t{doc.year}\t{doc.n_tokens}\n")


def write_word_years_tsv(vocab: Vocabulary, path) -> None:
    """Per-word per-year counts; lets later stages score lexical change
    without another pass over the corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {WORD_YEARS_SCHEMA}\n")
        fh.write("word\tyear\tcount\n")
        for word in vocab.word_to_id:
            for year, count in vocab.year_counts[word].items():
                fh.write(f"{word}\t{year}\t{count}\n")


def read_word_years_tsv(path) -> dict[str, dict[int, int]]:
    counts: dict[str, dict[int, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("word\t"):
                continue
            word, year, count = line.rstrip("\n").split("\t")
            counts.setdefault(word, {})[int(year)] = int(count)
    return counts


def read_docs_tsv(path) -> tuple[dict[str, int], dict[str, int]]:
    """Read (doc_id -> index, doc_id -> year) from a docs TSV."""
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
