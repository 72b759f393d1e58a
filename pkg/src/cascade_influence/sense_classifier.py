"""Old/new sense labeling for semantic innovations and cascade construction.

Each selected word gets its own L2-regularized logistic regression trained on
provisional labels (before/after the transition year); 4-fold cross-validation
produces the final per-usage assignment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

DEFAULT_L2 = 1.0
DEFAULT_FOLDS = 4
GRAD_TOL = 1e-6

CASCADES_SCHEMA = "cascades/v1"

OLD, NEW = "old", "new"


class DegenerateLabels(Exception):
    """Raised when a training set contains a single class."""


class EmptyCascade(Exception):
    """Signals a cascade with no events; excluded from estimation."""


def _loss_and_grad(params, X, y01, l2):
    # y01 in {0,1}; bias is the last parameter and is not regularized
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + exp(-s*z)) with s = +/-1 via logaddexp for stability
    signs = 2.0 * y01 - 1.0
    loss = np.logaddexp(0.0, -signs * z).sum() + 0.5 * l2 * (w @ w)
    p = 1.0 / (1.0 + np.exp(-z))
    resid = p - y01
    grad = np.empty_like(params)
    grad[:-1] = X.T @ resid + l2 * w
    grad[-1] = resid.sum()
    return loss, grad


def fit_logistic(features, labels, l2_strength: float = DEFAULT_L2):
    """Fit weights and bias by minimizing the regularized logistic loss.

    Deterministic: zero initialization, quasi-Newton minimization to gradient
    norm <= 1e-6 (the loss is strongly convex for l2_strength > 0).
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    classes = np.unique(y)
    if len(classes) < 2:
        raise DegenerateLabels(f"degenerate labels: single class {classes}")
    x0 = np.zeros(X.shape[1] + 1)
    res = minimize(
        _loss_and_grad, x0, args=(X, y, l2_strength), jac=True,
        method="L-BFGS-B", options={"maxiter": 1000, "gtol": 1e-9, "ftol": 1e-14},
    )
    params = res.x
    # polish with a few more iterations if the first run stopped early
    if np.linalg.norm(_loss_and_grad(params, X, y, l2_strength)[1]) > GRAD_TOL:
        res = minimize(
            _loss_and_grad, params, args=(X, y, l2_strength), jac=True,
            method="L-BFGS-B", options={"maxiter": 5000, "gtol": 1e-10, "ftol": 0.0},
        )
        params = res.x
    return params[:-1], float(params[-1])


def predict_logistic(weights, bias, features):
    z = np.asarray(features, dtype=np.float64) @ weights + bias
    return z >= 0.0


@dataclass
class UsageLabel:
    word_id: int
    doc_id: int
    year: int
    position: int
    label: str  # OLD | NEW
    fold: int


@dataclass
class LabelResult:
    labels: list[UsageLabel]
    fallback: bool = False  # provisional labels used because a class was too small


def _stratified_folds(provisional, n_folds):
    """Round-robin fold assignment within each provisional class, in input
    order; per-class fold sizes differ by at most one."""
    folds = np.empty(len(provisional), dtype=np.int64)
    for cls in (False, True):
        idx = np.flatnonzero(provisional == cls)
        folds[idx] = np.arange(len(idx)) % n_folds
    return folds


def cv_label_usages(
    word_id: int,
    doc_ids,
    years,
    positions,
    vectors,
    t_star: int,
    n_folds: int = DEFAULT_FOLDS,
    l2_strength: float = DEFAULT_L2,
) -> LabelResult:
    """Label every usage of a word as old or new sense.

    Provisional labels come from the transition year (year <= t_star -> old);
    the final label of each usage is the prediction of a classifier trained
    on the other folds. Words with fewer than ``n_folds`` usages of either
    provisional class keep their provisional labels.
    """
    years = np.asarray(years, dtype=np.int64)
    X = np.asarray(vectors, dtype=np.float64)
    provisional = years > t_star  # True -> new

    def make(label_flags, folds):
        return [
            UsageLabel(word_id=word_id, doc_id=int(doc_ids[i]), year=int(years[i]),
                       position=int(positions[i]), label=NEW if label_flags[i] else OLD,
                       fold=int(folds[i]))
            for i in range(len(years))
        ]

    n_old = int((~provisional).sum())
    n_new = int(provisional.sum())
    if n_old < n_folds or n_new < n_folds:
        return LabelResult(labels=make(provisional, -np.ones(len(years))), fallback=True)

    folds = _stratified_folds(provisional, n_folds)
    final = np.zeros(len(years), dtype=bool)
    for f in range(n_folds):
        train = folds != f
        weights, bias = fit_logistic(X[train], provisional[train], l2_strength)
        final[~train] = predict_logistic(weights, bias, X[~train])
    return LabelResult(labels=make(final, folds))


@dataclass
class Cascade:
    """Time-ordered (year, doc) events for one innovation."""
    word_id: int
    kind: str
    t_star: int
    events: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.events = sorted(self.events)

    def counts_by_year(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for year, _doc in self.events:
            counts[year] = counts.get(year, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.events)


def build_semantic_cascade(word_id: int, labels: list[UsageLabel], t_star: int) -> Cascade:
    """Cascade holding exactly the new-labeled usages."""
    events = [(l.year, l.doc_id) for l in labels if l.label == NEW]
    if not events:
        raise EmptyCascade(f"word {word_id}: no new-labeled usages")
    return Cascade(word_id=word_id, kind="semantic", t_star=t_star, events=events)


def build_lexical_cascade(word_id: int, years, doc_ids, t_star: int) -> Cascade:
    """Cascade holding every usage of a lexical innovation."""
    events = [(int(y), int(d)) for y, d in zip(years, doc_ids)]
    if not events:
        raise EmptyCascade(f"word {word_id}: no usages")
    return Cascade(word_id=word_id, kind="lexical", t_star=t_star, events=events)


def write_cascades_jsonl(cascades, id_to_word, idx_to_doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": CASCADES_SCHEMA}) + "\n")
        for c in cascades:
            rec = {
                "word": id_to_word[c.word_id],
                "kind": c.kind,
                "t_star": c.t_star,
                "events": [[year, idx_to_doc[doc]] for year, doc in c.events],
            }
            fh.write(json.dumps(rec) + "\n")


def read_cascades_jsonl(path, word_to_id, doc_to_idx):
    cascades = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if "schema" in rec:
                continue
            cascades.append(Cascade(
                word_id=word_to_id[rec["word"]],
                kind=rec["kind"],
                t_star=rec["t_star"],
                events=[(year, doc_to_idx[doc]) for year, doc in rec["events"]],
            ))
    return cascades
