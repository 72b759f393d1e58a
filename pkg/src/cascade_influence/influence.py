"""Analysis-ready influence features: per-year Z-normalization and quantile bins."""

from __future__ import annotations

import numpy as np

QUANTILE_EDGES = (0.50, 0.75, 0.90)  # Q1 below 50th, Q2/Q3/Q4 above
QUANTILE_LABELS = ("Q1", "Q2", "Q3", "Q4")

FEATURES_SCHEMA = "features/v1"


def z_normalize_by_year(values: dict, years: dict) -> dict:
    """Z-score values within each publication year (population variance).

    A year with zero variance maps to all-zero scores.
    """
    by_year: dict[int, list] = {}
    for doc, year in years.items():
        by_year.setdefault(year, []).append(doc)
    out = {}
    for year, docs in by_year.items():
        x = np.array([values[d] for d in docs], dtype=np.float64)
        mu = x.mean()
        sigma = x.std()  # population
        if sigma == 0.0:
            z = np.zeros(len(docs))
        else:
            z = (x - mu) / sigma
        for doc, zi in zip(docs, z):
            out[doc] = float(zi)
    return out


def quantile_bins(scores: dict) -> dict:
    """Rank-based quantile bins over the whole population.

    Q1 < 50th percentile, Q2 in [50, 75), Q3 in [75, 90), Q4 >= 90th.
    Ties are broken by doc id ascending before ranking, so the assignment is
    deterministic and invariant under monotone transforms of the scores.
    """
    if len(scores) < 4:
        raise ValueError(f"need at least 4 documents, got {len(scores)}")
    docs = sorted(scores, key=lambda d: (scores[d], str(d)))
    n = len(docs)
    cuts = [int(np.ceil(q * n)) for q in QUANTILE_EDGES]
    out = {}
    for rank, doc in enumerate(docs):
        if rank < cuts[0]:
            out[doc] = "Q1"
        elif rank < cuts[1]:
            out[doc] = "Q2"
        elif rank < cuts[2]:
            out[doc] = "Q3"
        else:
            out[doc] = "Q4"
    return out


def featurize(
    alpha_by_kind_gamma: dict[tuple[str, float], dict[str, float]],
    doc_years: dict[str, int],
    selected_gamma: dict[str, float],
):
    """Build the per-document feature table from raw influence estimates.

    Documents absent from all cascades get alpha = 0 before normalization.
    Returns (rows, columns): z-scores for every (kind, gamma), plus quantile
    bins for the selected gamma of each kind.
    """
    docs = sorted(doc_years)
    gammas = sorted({g for _k, g in alpha_by_kind_gamma})
    kinds = sorted({k for k, _g in alpha_by_kind_gamma})

    z_cols: dict[str, dict[str, float]] = {}
    quantiles: dict[str, dict[str, str]] = {}
    for kind in kinds:
        for gamma in gammas:
            raw = alpha_by_kind_gamma.get((kind, gamma), {})
            values = {d: raw.get(d, 0.0) for d in docs}
            z = z_normalize_by_year(values, doc_years)
            z_cols[f"z_{kind}_g{gamma:g}"] = z
            if gamma == selected_gamma.get(kind):
                z_cols[f"z_{kind}"] = z
                quantiles[kind] = quantile_bins(z)

    columns = ["doc_id", "year"]
    for kind in kinds:
        columns += [f"z_{kind}", f"quantile_{kind}"]
    for kind in kinds:
        columns += [f"z_{kind}_g{g:g}" for g in gammas]

    rows = []
    for d in docs:
        row = {"doc_id": d, "year": doc_years[d]}
        for kind in kinds:
            row[f"z_{kind}"] = z_cols[f"z_{kind}"][d]
            row[f"quantile_{kind}"] = quantiles[kind][d]
            for g in gammas:
                row[f"z_{kind}_g{g:g}"] = z_cols[f"z_{kind}_g{g:g}"][d]
        rows.append(row)
    return rows, columns


def write_features_csv(path, rows, columns) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {FEATURES_SCHEMA}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row[col]
                cells.append(f"{v:.12g}" if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def read_features_csv(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = None
        for line in fh:
            if line.startswith("#"):
                continue
            parts = line.rstrip("\n").split(",")
            if header is None:
                header = parts
                continue
            row = {}
            for col, cell in zip(header, parts):
                if col == "doc_id" or col.startswith("quantile_"):
                    row[col] = cell
                elif col == "year":
                    row[col] = int(cell)
                else:
                    row[col] = float(cell)
            rows.append(row)
    return rows
