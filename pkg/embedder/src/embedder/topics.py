"""Per-document topic distributions from an LDA model."""

from __future__ import annotations

import numpy as np

from .formats import read_corpus, tokenize, write_topics_csv

DEFAULT_K = 20


def topic_features(corpus_path, out_path, k: int = DEFAULT_K, seed: int = 13):
    """Fit LDA on the corpus and write the doc-topic distributions.

    Rows sum to 1; returns (doc_ids, distributions).
    """
    from sklearn.decomposition import LatentDirichletAllocation
    from sklearn.feature_extraction.text import CountVectorizer

    if k < 2:
        raise ValueError(f"topic count must be >= 2, got {k}")
    doc_ids, texts = [], []
    for doc_id, _year, text in read_corpus(corpus_path):
        doc_ids.append(doc_id)
        texts.append(" ".join(t for chunk in tokenize(text) for t in chunk))
    if not doc_ids:
        raise ValueError(f"{corpus_path}: empty corpus")
    vectorizer = CountVectorizer(tokenizer=str.split, preprocessor=lambda x: x,
                                 token_pattern=None)
    counts = vectorizer.fit_transform(texts)
    lda = LatentDirichletAllocation(n_components=k, random_state=seed)
    distributions = lda.fit_transform(counts)
    distributions = distributions / distributions.sum(axis=1, keepdims=True)
    write_topics_csv(out_path, doc_ids, np.asarray(distributions))
    return doc_ids, distributions
