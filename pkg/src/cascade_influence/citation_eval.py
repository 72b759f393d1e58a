"""Validation of influence scores against future citations.

Covers the nested OLS regressions M1-M4 with likelihood-ratio tests, and the
online prediction task with incremental temporal train/test splits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .influence import z_normalize_by_year

SHORT_WINDOW = 2   # citations in [p, p+2]
LONG_START = 3     # future citations in [p+3, p+5]
LONG_END = 5
MODEL_TAGS = ("M1", "M2", "M3", "M4")
QUANTILE_DUMMIES = ("Q2", "Q3", "Q4")

CITATIONS_SCHEMA = "citations/v1"
TOPICS_SCHEMA = "topics/v1"


class ImmaturePaper(Exception):
    """The citation horizon does not yet cover publication year + 5."""


class DesignError(Exception):
    """Missing features or rank-deficient design matrix."""


@dataclass
class CitationRecord:
    doc_id: str
    year: int
    counts: dict[int, int]

    def window(self, start_offset: int, end_offset: int) -> int:
        return sum(
            self.counts.get(y, 0)
            for y in range(self.year + start_offset, self.year + end_offset + 1)
        )


def short_citations(record: CitationRecord) -> int:
    return record.window(0, SHORT_WINDOW)


def future_citations(record: CitationRecord, horizon: int) -> int:
    """Long-term citations: the 5-year cumulative count minus the 2-year one."""
    if record.year + LONG_END > horizon:
        raise ImmaturePaper(
            f"{record.doc_id}: needs citations through {record.year + LONG_END}, "
            f"horizon is {horizon}")
    return record.window(LONG_START, LONG_END)


def citation_targets(records, horizon: int):
    """Z-normalized log future citations per publication year.

    Returns (target dict, z-short dict); immature papers are excluded from
    both.
    """
    future, short, years = {}, {}, {}
    for rec in records:
        try:
            future[rec.doc_id] = math.log1p(future_citations(rec, horizon))
        except ImmaturePaper:
            continue
        short[rec.doc_id] = float(short_citations(rec))
        years[rec.doc_id] = rec.year
    return z_normalize_by_year(future, years), z_normalize_by_year(short, years)


@dataclass
class FeatureRow:
    doc_id: str
    year: int
    z_short: float
    topics: np.ndarray
    lex_quantile: str
    sem_quantile: str
    z_lex_by_gamma: dict[float, float]
    z_sem_by_gamma: dict[float, float]
    target: float


@dataclass
class RegressionFit:
    model_tag: str
    columns: list[str]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    log_likelihood: float
    sigma2: float
    n: int


@dataclass
class EvalReport:
    per_year: dict[int, dict[str, float]]
    micro: dict[str, float]
    n_examples: int
    skipped_years: list[int] = field(default_factory=list)


def build_design_matrix(model: str, rows, influence_features: str = "quantile"):
    """Design matrix and labels for one of the nested models.

    M1 = [const, z_short]; M2 adds the topic distribution (one column dropped
    to break the simplex collinearity); M3 adds lexical influence; M4 adds
    semantic influence. Influence enters as Q2-Q4 dummies for the regression
    task, or as continuous per-gamma z-scores for the prediction task.
    """
    if model not in MODEL_TAGS:
        raise ValueError(f"unknown model {model!r}")
    rows = list(rows)
    if not rows:
        raise DesignError("no feature rows")
    level = MODEL_TAGS.index(model)

    columns = ["const", "z_short"]
    k_topics = len(rows[0].topics)
    if level >= 1:
        columns += [f"topic_{i + 1}" for i in range(k_topics - 1)]
    gammas = sorted(rows[0].z_lex_by_gamma) if rows else []
    for kind, lvl in (("lex", 2), ("sem", 3)):
        if level >= lvl:
            if influence_features == "quantile":
                columns += [f"{kind}_{q}" for q in QUANTILE_DUMMIES]
            elif influence_features == "per_gamma":
                columns += [f"z_{kind}_g{g:g}" for g in gammas]
            else:
                raise ValueError(f"unknown influence_features {influence_features!r}")

    X = np.empty((len(rows), len(columns)))
    y = np.empty(len(rows))
    for i, row in enumerate(rows):
        if len(row.topics) != k_topics:
            raise DesignError(
                f"doc {row.doc_id}: expected {k_topics} topics, got {len(row.topics)}")
        vals = [1.0, row.z_short]
        if level >= 1:
            vals += list(row.topics[:-1])
        for kind, lvl, quant, by_gamma in (
            ("lex", 2, row.lex_quantile, row.z_lex_by_gamma),
            ("sem", 3, row.sem_quantile, row.z_sem_by_gamma),
        ):
            if level >= lvl:
                if influence_features == "quantile":
                    if quant is None:
                        raise DesignError(f"doc {row.doc_id}: missing {kind} quantile")
                    vals += [1.0 if quant == q else 0.0 for q in QUANTILE_DUMMIES]
                else:
                    for g in gammas:
                        if g not in by_gamma:
                            raise DesignError(
                                f"doc {row.doc_id}: missing column z_{kind}_g{g:g}")
                        vals.append(by_gamma[g])
        X[i] = vals
        y[i] = row.target
    return X, y, columns


def _dependent_columns(X, columns):
    """Name columns involved in a rank deficiency via pivoted QR."""
    _q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    return [columns[piv[i]] for i in range(len(diag)) if diag[i] <= tol]


def fit_ols(X, y, columns=None, model_tag: str = "") -> RegressionFit:
    """Least squares with ML-variance standard errors and Gaussian LL.

    sigma2 = RSS / N (not N - k), so the log likelihood is exactly the one
    the likelihood-ratio test compares.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = X.shape
    if columns is None:
        columns = [f"x{i}" for i in range(k)]
    if n < k:
        raise DesignError(f"{n} rows < {k} columns")
    rank = np.linalg.matrix_rank(X)
    if rank < k:
        raise DesignError(f"rank-deficient design: columns {_dependent_columns(X, columns)}")
    beta, _res, _rank, _sv = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    rss = float(resid @ resid)
    sigma2 = rss / n
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    with np.errstate(divide="ignore"):
        ll = float(-0.5 * n * (math.log(2.0 * math.pi) + np.log(sigma2) + 1.0))
    return RegressionFit(
        model_tag=model_tag, columns=list(columns), coefficients=beta,
        standard_errors=se, log_likelihood=ll, sigma2=sigma2, n=n)


def _regularized_upper_gamma(a: float, x: float) -> float:
    """Q(a, x) = Gamma(a, x) / Gamma(a), by series or continued fraction."""
    if a <= 0 or x < 0:
        raise ValueError(f"invalid incomplete gamma arguments a={a}, x={x}")
    if x == 0.0:
        return 1.0
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        # lower series, complemented
        term = 1.0 / a
        total = term
        ap = a
        for _ in range(1000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return 1.0 - total * math.exp(log_prefactor)
    # Lentz continued fraction for the upper tail
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(log_prefactor) * h


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-squared distribution."""
    return _regularized_upper_gamma(df / 2.0, x / 2.0)


def likelihood_ratio_test(fit_restricted: RegressionFit, fit_full: RegressionFit, df: int):
    """2 * (LL_full - LL_restricted) against the chi-squared upper tail."""
    if fit_restricted.n != fit_full.n:
        raise ValueError("nested fits must cover identical rows")
    stat = 2.0 * (fit_full.log_likelihood - fit_restricted.log_likelihood)
    if stat < -1e-9:
        raise ValueError(
            f"nesting violated: full LL {fit_full.log_likelihood} below "
            f"restricted {fit_restricted.log_likelihood}")
    stat = max(stat, 0.0)
    return stat, chi2_sf(stat, df)


def online_predict(
    rows,
    models=MODEL_TAGS,
    years=range(2001, 2015),
    influence_features: str = "per_gamma",
    train_lag: int = 3,
) -> EvalReport:
    """Incremental temporal evaluation.

    For test year t the training set is rows with publication year <= t - 3:
    their long-term windows are complete by t + 2, which is exactly the
    information available when predicting year-t papers.
    """
    rows = list(rows)
    per_year: dict[int, dict[str, float]] = {}
    totals = {m: 0.0 for m in models}
    n_total = 0
    skipped = []
    for t in years:
        train = [r for r in rows if r.year <= t - train_lag]
        test = [r for r in rows if r.year == t]
        if not train or not test:
            skipped.append(t)
            continue
        assert max(r.year for r in train) <= t - train_lag
        try:
            year_fits = {}
            for model in models:
                X_tr, y_tr, cols = build_design_matrix(model, train, influence_features)
                year_fits[model] = (fit_ols(X_tr, y_tr, cols, model_tag=model), cols)
        except DesignError:
            # not enough training rows yet for the widest model
            skipped.append(t)
            continue
        per_year[t] = {}
        for model in models:
            fit, _cols = year_fits[model]
            X_te, y_te, _ = build_design_matrix(model, test, influence_features)
            err = y_te - X_te @ fit.coefficients
            per_year[t][model] = float(np.mean(err * err))
            totals[model] += float(err @ err)
        n_total += len(test)
    if n_total == 0:
        raise DesignError(f"no evaluable years in {list(years)}")
    micro = {m: totals[m] / n_total for m in models}
    return EvalReport(per_year=per_year, micro=micro, n_examples=n_total,
                      skipped_years=skipped)


def read_citations_csv(path) -> dict[str, dict[int, int]]:
    """Long-form citations CSV (doc_id, year, count) -> per-doc count maps."""
    counts: dict[str, dict[int, int]] = {}
    for line in open(path, encoding="utf-8"):
        if line.startswith("#") or line.startswith("doc_id,"):
            continue
        doc_id, year, count = line.rstrip("\n").split(",")
        per_doc = counts.setdefault(doc_id, {})
        per_doc[int(year)] = per_doc.get(int(year), 0) + int(count)
    return counts


def build_citation_records(counts: dict[str, dict[int, int]],
                           pub_years: dict[str, int]) -> list[CitationRecord]:
    """Attach publication years (from the corpus doc table) to citation counts."""
    records = []
    for doc_id in sorted(pub_years):
        per_doc = counts.get(doc_id, {})
        if any(c < 0 for c in per_doc.values()):
            raise ValueError(f"{doc_id}: negative citation count")
        records.append(CitationRecord(doc_id=doc_id, year=pub_years[doc_id],
                                      counts=per_doc))
    return records


def read_topics_csv(path) -> dict[str, np.ndarray]:
    topics = {}
    header = None
    for line in open(path, encoding="utf-8"):
        if line.startswith("#"):
            continue
        parts = line.rstrip("\n").split(",")
        if header is None:
            header = parts
            continue
        topics[parts[0]] = np.array([float(x) for x in parts[1:]])
    return topics
