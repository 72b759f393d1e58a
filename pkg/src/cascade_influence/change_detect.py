"""Semantic and lexical change scoring, transition points, and ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary
from .store import DegenerateSplit, WordMoments, split_means

VARIANCE_FLOOR = 1e-8
DEFAULT_K_SEMANTIC = 2910
DEFAULT_K_LEXICAL = 3000
LEXICAL_SMOOTHING = 0.5

CHANGES_SCHEMA = "changes/v1"


class UnscorableWord(Exception):
    """Raised when every candidate split year is degenerate for a word."""


@dataclass
class ChangeScoreSeries:
    word_id: int
    years: np.ndarray
    scores: np.ndarray
    t_star: int
    max_score: float


@dataclass
class ChangeCandidate:
    word_id: int
    kind: str  # "semantic" | "lexical"
    t_star: int
    score: float
    rank: int


def candidate_years(year_range: tuple[int, int]) -> list[int]:
    """Split years to evaluate; the first and last corpus year are excluded
    because splits there are maximally lopsided."""
    t_min, t_max = year_range
    return list(range(t_min + 1, t_max))


def semantic_change_score(moments: WordMoments, t: int) -> float:
    """Frequency-corrected squared Mahalanobis distance between the mean
    embeddings before and after year t.

    Equals sqrt(m_minus * m_plus) * sum_d (v_minus_d - v_plus_d)^2 / s_d with
    s the per-dimension population variance over all usages. Zero-variance
    dimensions are clamped to VARIANCE_FLOOR.
    """
    split = split_means(moments, t)
    diff = split.v_minus - split.v_plus
    s = np.maximum(moments.variance, VARIANCE_FLOOR)
    return math.sqrt(split.m_minus * split.m_plus) * float(np.sum(diff * diff / s))


def transition_point(moments: WordMoments, years) -> ChangeScoreSeries:
    """Score every candidate year and pick the argmax; ties go to the
    earliest year. Degenerate split years are skipped."""
    kept_years, kept_scores = [], []
    for t in years:
        try:
            kept_scores.append(semantic_change_score(moments, t))
        except DegenerateSplit:
            continue
        kept_years.append(t)
    if not kept_years:
        raise UnscorableWord(f"word {moments.word_id}: all candidate years degenerate")
    scores = np.asarray(kept_scores)
    best = int(np.argmax(scores))  # argmax returns the first index on ties
    return ChangeScoreSeries(
        word_id=moments.word_id,
        years=np.asarray(kept_years),
        scores=scores,
        t_star=kept_years[best],
        max_score=float(scores[best]),
    )


def _ranked(entries: list[tuple[float, int, int]], kind: str, k: int) -> list[ChangeCandidate]:
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    entries.sort(key=lambda e: (-e[0], e[1]))
    return [
        ChangeCandidate(word_id=wid, kind=kind, t_star=t_star, score=score, rank=rank)
        for rank, (score, wid, t_star) in enumerate(entries[:k], start=1)
    ]


def rank_semantic_changes(moments_map: dict[int, WordMoments], years, k: int = DEFAULT_K_SEMANTIC):
    """Top-k words by max semantic change score; k is clamped to the number
    of scorable words. Deterministic: score desc, then word id asc."""
    entries = []
    for wid in sorted(moments_map):
        try:
            series = transition_point(moments_map[wid], years)
        except UnscorableWord:
            continue
        entries.append((series.max_score, wid, series.t_star))
    return _ranked(entries, "semantic", k)


def lexical_change_score(counts: dict[int, int], totals: dict[int, int], t: int) -> float:
    """Relative-frequency growth ratio across a split at year t, with
    additive smoothing so new words (zero pre-count) stay finite."""
    pre_n = sum(c for y, c in counts.items() if y <= t)
    post_n = sum(c for y, c in counts.items() if y > t)
    pre_total = sum(c for y, c in totals.items() if y <= t)
    post_total = sum(c for y, c in totals.items() if y > t)
    if pre_total <= 0 or post_total <= 0:
        raise DegenerateSplit(f"no corpus tokens on one side of t={t}")
    pre_rate = (pre_n + LEXICAL_SMOOTHING) / pre_total
    post_rate = (post_n + LEXICAL_SMOOTHING) / post_total
    return post_rate / pre_rate


def rank_lexical_changes_from_counts(
    word_counts: dict[int, dict[int, int]],
    totals: dict[int, int],
    years,
    k: int = DEFAULT_K_LEXICAL,
):
    """Top-k word ids by max-over-t relative-frequency ratio."""
    entries = []
    for wid in sorted(word_counts):
        counts = word_counts[wid]
        best_score, best_t = -math.inf, None
        for t in years:
            try:
                score = lexical_change_score(counts, totals, t)
            except DegenerateSplit:
                continue
            if score > best_score:
                best_score, best_t = score, t
        if best_t is None:
            continue
        entries.append((best_score, wid, best_t))
    return _ranked(entries, "lexical", k)


def rank_lexical_changes(
    vocab: Vocabulary,
    totals: dict[int, int],
    years,
    k: int = DEFAULT_K_LEXICAL,
):
    """Top-k vocabulary words by max-over-t relative-frequency ratio."""
    word_counts = {
        vocab.word_to_id[w]: vocab.year_counts[w] for w in vocab.word_to_id
    }
    return rank_lexical_changes_from_counts(word_counts, totals, years, k)


def write_changes_tsv(candidates, id_to_word: dict[int, str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {CHANGES_SCHEMA}\n")
        fh.write("word\tkind\tt_star\tscore\trank\n")
        for c in candidates:
            fh.write(f"{id_to_word[c.word_id]}\t{c.kind}\t{c.t_star}\t{c.score:.10g}\t{c.rank}\n")


def read_changes_tsv(path, word_to_id: dict[str, int]):
    candidates = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("word\t"):
                continue
            word, kind, t_star, score, rank = line.rstrip("\n").split("\t")
            candidates.append(ChangeCandidate(
                word_id=word_to_id[word], kind=kind, t_star=int(t_star),
                score=float(score), rank=int(rank)))
    return candidates
