"""Deterministic synthetic corpus for end-to-end runs.

Generates a 100-document, 20-year corpus with 8-dim embeddings in which a
known subset of words drifts in meaning (two well-separated sense clusters
switching at a planted transition year), another subset bursts lexically,
and per-document influence parameters drive the adoption cascades. Future
citations are drawn with a planted dependence on the semantic influence, so
the full pipeline should find that M4 predicts them better than M3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .store import record_dtype, write_store

N_SEMANTIC = 120
N_LEXICAL = 24
N_STABLE = 24
DIM = 8
DOCS_PER_YEAR = 5
YEAR_RANGE = (2000, 2019)
GAMMA_TRUE = 1.0
TAU_RANGE = (2001, 2011)
SEM_BASE_RATE = 2.5
LEX_BASE_RATE = 3.0

SEM_LEVELS = (0.4, 1.2, 2.8)
LEX_LEVELS = (0.4, 1.2, 2.8)

# citation model: ln E[future] = A0 + A_SHORT*ln(1+short) + A_SEM*z(alpha_sem) + A_TOPIC*topic0 + eps
A0 = 2.0
A_SHORT = 0.55
A_SEM = 1.4
A_TOPIC = 0.6
CITE_NOISE = 0.1


@dataclass
class FixtureTruth:
    doc_ids: list[str]
    doc_years: dict[str, int]
    alpha_semantic: dict[str, float]
    alpha_lexical: dict[str, float]
    semantic_words: dict[str, int]   # word -> transition year
    lexical_words: dict[str, int]
    stable_words: list[str]


def _word_names(prefix, n):
    return [f"{prefix}{chr(ord('a') + i // 26)}{chr(ord('a') + i % 26)}" for i in range(n)]


def _sample_cascade(rng, base, alpha, gamma, start_year, year_range, docs_per_year):
    """Yearly-count Hawkes draw restricted to years >= start_year; marks come
    from the documents published in the event year."""
    t_min, t_max = year_range
    events: list[tuple[int, int]] = []
    for t in range(start_year, t_max + 1):
        lam = base
        for (s, p) in events:
            lam += alpha[p] * math.exp(-gamma * (t - s))
        n = int(rng.poisson(lam))
        if n > 0:
            k = t - t_min
            marks = rng.integers(k * docs_per_year, (k + 1) * docs_per_year, size=n)
            events.extend((t, int(p)) for p in marks)
    return events


def generate_fixture(out_dir, seed: int = 13) -> FixtureTruth:
    """Write corpus.jsonl, embeddings.cemb, citations.csv, and topics.csv."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    t_min, t_max = YEAR_RANGE
    years = list(range(t_min, t_max + 1))
    P = DOCS_PER_YEAR * len(years)
    doc_ids = [f"P{p:04d}" for p in range(P)]
    doc_years = {doc_ids[p]: t_min + p // DOCS_PER_YEAR for p in range(P)}

    def tiered(levels):
        # stratify tiers within each publication year so per-year z-scores
        # and within-year Hawkes contrasts stay informative
        pattern = [0, 0, 1, 1, 2]
        out = np.empty(P)
        for k in range(len(years)):
            rolled = np.roll(pattern, k)
            for j in range(DOCS_PER_YEAR):
                out[k * DOCS_PER_YEAR + j] = levels[rolled[j % len(rolled)]]
        return out

    alpha_sem = tiered(SEM_LEVELS)
    alpha_lex = tiered(LEX_LEVELS)

    sem_words = _word_names("drift", N_SEMANTIC)
    lex_words = _word_names("burst", N_LEXICAL)
    stable_words = _word_names("filler", N_STABLE)

    sem_tau = {w: int(rng.integers(TAU_RANGE[0], TAU_RANGE[1] + 1)) for w in sem_words}
    lex_tau = {w: int(rng.integers(TAU_RANGE[0], TAU_RANGE[1] + 1)) for w in lex_words}

    # sense clusters: the new-sense mean sits 4 sigma from the old one
    centers = {}
    for w in stable_words + lex_words:
        centers[w] = rng.normal(0.0, 2.0, size=DIM)
    for w in sem_words:
        old = rng.normal(0.0, 2.0, size=DIM)
        direction = rng.normal(size=DIM)
        direction /= np.linalg.norm(direction)
        centers[w] = old
        centers[w + "/new"] = old + 4.0 * direction

    # occurrences[p] = list of (word, vector) pairs
    occurrences: list[list[tuple[str, np.ndarray]]] = [[] for _ in range(P)]

    def add(p, word, center_key):
        vec = centers[center_key] + rng.normal(0.0, 1.0, size=DIM)
        occurrences[p].append((word, vec))

    for w in stable_words:
        for p in range(P):
            if rng.random() < 0.55:
                for _ in range(1 + int(rng.poisson(1.5))):
                    add(p, w, w)

    for w in sem_words:
        tau = sem_tau[w]
        # declining old-sense background
        for p in range(P):
            rate = 1.2 if doc_years[doc_ids[p]] <= tau else 0.3
            for _ in range(int(rng.poisson(rate))):
                add(p, w, w)
        # new-sense adoption cascade driven by the planted influence
        events = _sample_cascade(rng, SEM_BASE_RATE, alpha_sem, GAMMA_TRUE, tau + 1,
                                 YEAR_RANGE, DOCS_PER_YEAR)
        for (_t, p) in events:
            add(p, w, w + "/new")

    for w in lex_words:
        events = _sample_cascade(rng, LEX_BASE_RATE, alpha_lex, GAMMA_TRUE, lex_tau[w] + 1,
                                 YEAR_RANGE, DOCS_PER_YEAR)
        for (_t, p) in events:
            add(p, w, w)

    # corpus file and embedding store share one token ordering per document
    corpus_path = f"{out_dir}/corpus.jsonl"
    store_path = f"{out_dir}/embeddings.cemb"
    word_ids = {}  # same alphabetical id rule as build_vocabulary
    all_words = sorted(stable_words + sem_words + lex_words)
    word_ids = {w: i for i, w in enumerate(all_words)}

    records = np.zeros(sum(len(o) for o in occurrences), dtype=record_dtype(DIM))
    r = 0
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for p in range(P):
            toks = occurrences[p]
            order = rng.permutation(len(toks))
            words = [toks[i][0] for i in order]
            fh.write(json.dumps({
                "doc_id": doc_ids[p],
                "year": doc_years[doc_ids[p]],
                "text": " ".join(words),
            }) + "\n")
            for pos, i in enumerate(order):
                word, vec = toks[i]
                records[r] = (word_ids[word], p, doc_years[doc_ids[p]], pos,
                              vec.astype(np.float32))
                r += 1
    write_store([records], store_path, dim=DIM)

    # topics
    topics = rng.dirichlet(np.ones(3), size=P)
    with open(f"{out_dir}/topics.csv", "w", encoding="utf-8") as fh:
        fh.write("doc_id,p1,p2,p3\n")
        for p in range(P):
            fh.write(doc_ids[p] + "," + ",".join(f"{x:.6f}" for x in topics[p]) + "\n")

    # citations: short-term from latent quality, future from the planted
    # semantic influence on top of short-term and topic effects
    quality = np.exp(rng.normal(0.0, 0.5, size=P))
    short_total = rng.poisson(3.0 * quality)
    z_sem = np.empty(P)
    for year in years:
        idx = [p for p in range(P) if doc_years[doc_ids[p]] == year]
        vals = alpha_sem[idx]
        sd = vals.std()
        z_sem[idx] = (vals - vals.mean()) / sd if sd > 0 else 0.0
    log_mu = (A0 + A_SHORT * np.log1p(short_total) + A_SEM * z_sem
              + A_TOPIC * topics[:, 0] + rng.normal(0.0, CITE_NOISE, size=P))
    future_total = rng.poisson(np.exp(log_mu))

    with open(f"{out_dir}/citations.csv", "w", encoding="utf-8") as fh:
        fh.write("doc_id,year,count\n")
        for p in range(P):
            pub = doc_years[doc_ids[p]]
            counts = {}
            for _ in range(int(short_total[p])):
                y = pub + int(rng.integers(0, 3))
                if y <= t_max:
                    counts[y] = counts.get(y, 0) + 1
            for _ in range(int(future_total[p])):
                y = pub + 3 + int(rng.integers(0, 3))
                if y <= t_max:
                    counts[y] = counts.get(y, 0) + 1
            for y in sorted(counts):
                fh.write(f"{doc_ids[p]},{y},{counts[y]}\n")
        # pin the citation horizon at the corpus end
        fh.write(f"{doc_ids[0]},{t_max},0\n")

    return FixtureTruth(
        doc_ids=doc_ids,
        doc_years=doc_years,
        alpha_semantic={doc_ids[p]: float(alpha_sem[p]) for p in range(P)},
        alpha_lexical={doc_ids[p]: float(alpha_lex[p]) for p in range(P)},
        semantic_words=sem_tau,
        lexical_words=lex_tau,
        stable_words=stable_words,
    )
