"""English filtering for the corpus file.

A compact self-contained detector: documents are English when their
function-word overlap favors the English stopword list and their characters
are predominantly Latin. Documents with too few informative tokens are kept
and flagged as undetectable.
"""

from __future__ import annotations

import json

from .formats import read_corpus, write_corpus

ENGLISH = {
    "the", "and", "for", "that", "with", "this", "from", "are", "was", "were",
    "which", "have", "has", "been", "not", "but", "can", "their", "these",
    "such", "each", "also", "other", "into", "more", "than", "when", "where",
    "there", "between", "both", "because", "does", "about", "using", "used",
}
OTHER = {
    # French
    "les", "des", "une", "est", "dans", "pour", "que", "qui", "sur", "avec",
    "nous", "sont", "pas", "par", "aux", "cette", "ces", "mais", "ont", "être",
    # German
    "der", "die", "das", "und", "ist", "nicht", "ein", "eine", "mit", "auf",
    "sich", "für", "werden", "wird", "dem", "den", "von", "bei", "auch", "sind",
    # Spanish / Portuguese
    "los", "las", "una", "por", "como", "más", "pero", "sus", "este", "esta",
    "entre", "muy", "sin", "sobre", "ser", "está", "são", "não", "uma", "com",
}
MIN_TOKENS = 5


def detect_language(text: str) -> str:
    """Return 'en', 'other', or 'unknown' for a document."""
    tokens = [t.lower() for t in text.split()]
    if len(tokens) < MIN_TOKENS:
        return "unknown"
    letters = [ch for ch in text if ch.isalpha()]
    if letters:
        latin = sum(1 for ch in letters if ord(ch) < 0x250)
        if latin / len(letters) < 0.8:
            return "other"
    en_hits = sum(1 for t in tokens if t in ENGLISH)
    other_hits = sum(1 for t in tokens if t in OTHER)
    if en_hits == 0 and other_hits == 0:
        return "unknown"
    return "en" if en_hits >= other_hits else "other"


def filter_language(corpus_path, out_path, report_path=None):
    """Write an English-only corpus; returns (kept, removed, flagged) doc ids.

    Undetectable documents are kept but flagged.
    """
    kept, removed, flagged = [], [], []
    records = []
    for doc_id, year, text in read_corpus(corpus_path):
        lang = detect_language(text)
        if lang == "other":
            removed.append(doc_id)
            continue
        if lang == "unknown":
            flagged.append(doc_id)
        kept.append(doc_id)
        records.append((doc_id, year, text))
    write_corpus(out_path, records)
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump({"removed": removed, "flagged_undetectable": flagged,
                       "kept": len(kept)}, fh, indent=2)
    return kept, removed, flagged
