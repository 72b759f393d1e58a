"""Config-driven pipeline: deterministic, resumable stage execution.

Each stage writes its outputs atomically (temp file + rename) and records a
manifest with the SHA-256 of every input plus the stage parameters; reruns
with unchanged inputs are no-ops. Artifact files carry a schema comment on
their first line.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import change_detect as cd
from . import citation_eval as ce
from . import corpus as cp
from . import hawkes as hk
from . import influence as infl
from . import sense_classifier as sc
from . import store as st

STAGES = ("build-corpus", "moments", "changes", "cascades", "fit",
          "featurize", "evaluate", "report")

REGRESSION_SCHEMA = "regression/v1"
ONLINE_SCHEMA = "online/v1"
REPORT_SCHEMA = "report/v1"

PREDICTOR_LABELS = {
    "const": "Constant",
    "z_short": "Initial Citations",
    "lex_Q2": "Lex. Inf. Q2", "lex_Q3": "Lex. Inf. Q3", "lex_Q4": "Lex. Inf. Q4",
    "sem_Q2": "Sem. Inf. Q2", "sem_Q3": "Sem. Inf. Q3", "sem_Q4": "Sem. Inf. Q4",
}


class ConfigError(Exception):
    """Bad or missing configuration (CLI exit code 2)."""


class UpstreamMissing(Exception):
    """A required prior stage has not produced its artifact (exit code 3)."""


class NumericalFailure(Exception):
    """A numerical routine could not complete (exit code 4)."""


@dataclass
class PipelineConfig:
    corpus_path: str
    store_path: str
    workdir: str
    year_range: tuple[int, int]
    min_count: int = cp.DEFAULT_MIN_COUNT
    max_df: float = cp.DEFAULT_MAX_DF
    k_semantic: int = cd.DEFAULT_K_SEMANTIC
    k_lexical: int = cd.DEFAULT_K_LEXICAL
    l2_strength: float = sc.DEFAULT_L2
    folds: int = sc.DEFAULT_FOLDS
    gamma_grid: tuple[float, ...] = hk.DEFAULT_GAMMA_GRID
    heldout_fraction: float = hk.DEFAULT_HELDOUT
    seed: int = hk.DEFAULT_SEED
    max_iter: int = 1000
    citations_path: str | None = None
    topics_path: str | None = None
    models: tuple[str, ...] = ce.MODEL_TAGS
    online_years: tuple[int, int] = (2001, 2014)
    min_pub_year: int = 2000

    def artifact(self, name: str) -> str:
        return os.path.join(self.workdir, name)


def load_config(path) -> PipelineConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    try:
        paths = raw["paths"]
        corpus_cfg = raw.get("corpus", {})
        changes_cfg = raw.get("changes", {})
        clf_cfg = raw.get("classifier", {})
        hawkes_cfg = raw.get("hawkes", {})
        eval_cfg = raw.get("eval", {})
        year_range = tuple(corpus_cfg.get("year_range", (1990, 2019)))
        cfg = PipelineConfig(
            corpus_path=paths["corpus"],
            store_path=paths["store"],
            workdir=paths.get("workdir", "artifacts"),
            year_range=(int(year_range[0]), int(year_range[1])),
            min_count=int(corpus_cfg.get("min_count", cp.DEFAULT_MIN_COUNT)),
            max_df=float(corpus_cfg.get("max_df", cp.DEFAULT_MAX_DF)),
            k_semantic=int(changes_cfg.get("k_semantic", cd.DEFAULT_K_SEMANTIC)),
            k_lexical=int(changes_cfg.get("k_lexical", cd.DEFAULT_K_LEXICAL)),
            l2_strength=float(clf_cfg.get("l2_strength", sc.DEFAULT_L2)),
            folds=int(clf_cfg.get("folds", sc.DEFAULT_FOLDS)),
            gamma_grid=tuple(float(g) for g in hawkes_cfg.get(
                "gamma_grid", hk.DEFAULT_GAMMA_GRID)),
            heldout_fraction=float(hawkes_cfg.get("heldout_fraction", hk.DEFAULT_HELDOUT)),
            seed=int(hawkes_cfg.get("seed", hk.DEFAULT_SEED)),
            max_iter=int(hawkes_cfg.get("max_iter", 1000)),
            citations_path=eval_cfg.get("citations"),
            topics_path=eval_cfg.get("topics"),
            models=tuple(eval_cfg.get("models", list(ce.MODEL_TAGS))),
            online_years=tuple(eval_cfg.get("online_years", (2001, 2014))),
            min_pub_year=int(eval_cfg.get("min_pub_year", 2000)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    if cfg.year_range[0] > cfg.year_range[1]:
        raise ConfigError(f"empty year range {cfg.year_range}")
    for model in cfg.models:
        if model not in ce.MODEL_TAGS:
            raise ConfigError(f"unknown model {model!r}")
    return cfg


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path, writer) -> None:
    """writer(tmp_path) must produce the file; it is then renamed into place."""
    tmp = f"{path}.tmp"
    writer(tmp)
    os.replace(tmp, path)


def _require(path, produced_by: str) -> str:
    if not os.path.exists(path):
        raise UpstreamMissing(
            f"missing {path}; run the '{produced_by}' stage first")
    return path


def write_regression_tsv(path, fits) -> None:
    """Coefficient table shaped like the regression summary: one predictor
    per row, one model per column, cells 'coef (se)'."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {REGRESSION_SCHEMA}\n")
        fh.write("Predictors\t" + "\t".join(fits) + "\n")
        order = [k for k in PREDICTOR_LABELS
                 if any(k in f.columns for f in fits.values())]
        for key in order:
            cells = []
            for fit in fits.values():
                if key in fit.columns:
                    i = fit.columns.index(key)
                    cells.append(f"{fit.coefficients[i]:.3f} ({fit.standard_errors[i]:.3f})")
                else:
                    cells.append("")
            fh.write(PREDICTOR_LABELS[key] + "\t" + "\t".join(cells) + "\n")
        fh.write("Log Lik.\t" + "\t".join(
            f"{fit.log_likelihood:.1f}" for fit in fits.values()) + "\n")


def write_online_tsv(path, report) -> None:
    """Per-year MSE table with a micro-averaged 'All Years' footer row."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {ONLINE_SCHEMA}\n")
        models = list(report.micro)
        fh.write("Publication Year\t" + "\t".join(models) + "\n")
        for year in sorted(report.per_year):
            fh.write(str(year) + "\t" + "\t".join(
                f"{report.per_year[year][m]:.4f}" for m in models) + "\n")
        fh.write("All Years\t" + "\t".join(
            f"{report.micro[m]:.4f}" for m in models) + "\n")


def build_cascades_from_artifacts(changes_path, store_path, vocab_path,
                                  docs_path, l2, folds, log=print):
    """Shared by the pipeline stage and the direct CLI tool: read the change
    list, pull the selected words' usages from the store, label senses, and
    assemble cascades."""
    word_to_id = cp.read_vocabulary_tsv(vocab_path)
    id_to_word = {i: w for w, i in word_to_id.items()}
    candidates = cd.read_changes_tsv(changes_path, word_to_id)
    semantic = {c.word_id: c for c in candidates if c.kind == "semantic"}
    lexical = {c.word_id: c for c in candidates if c.kind == "lexical"}
    wanted = set(semantic) | set(lexical)
    usages: dict[int, list] = {wid: [] for wid in wanted}
    for batch in st.iter_store(store_path):
        mask = np.isin(batch["word_id"].astype(np.int64), list(wanted))
        for rec in batch[mask]:
            usages[int(rec["word_id"])].append(rec)

    cascades = []
    n_fallback = 0
    for wid, cand in sorted(semantic.items()):
        recs = usages.get(wid, [])
        if not recs:
            continue
        result = sc.cv_label_usages(
            wid,
            [int(r["doc_id"]) for r in recs],
            [int(r["year"]) for r in recs],
            [int(r["position"]) for r in recs],
            np.stack([np.asarray(r["vector"], dtype=np.float64) for r in recs]),
            cand.t_star, n_folds=folds, l2_strength=l2)
        n_fallback += int(result.fallback)
        try:
            cascades.append(sc.build_semantic_cascade(wid, result.labels, cand.t_star))
        except sc.EmptyCascade:
            log(f"cascades: {id_to_word[wid]} has no new-sense usages; skipped")
    for wid, cand in sorted(lexical.items()):
        recs = usages.get(wid, [])
        if not recs:
            continue
        cascades.append(sc.build_lexical_cascade(
            wid, [int(r["year"]) for r in recs], [int(r["doc_id"]) for r in recs],
            cand.t_star))
    return cascades, n_fallback


class StageRunner:
    """Executes stages against a config, with manifest-based no-op reruns."""

    def __init__(self, config: PipelineConfig, log=print):
        self.cfg = config
        self.log = log
        os.makedirs(config.workdir, exist_ok=True)
        os.makedirs(os.path.join(config.workdir, "manifests"), exist_ok=True)

    # manifest helpers

    def _manifest_path(self, stage):
        return os.path.join(self.cfg.workdir, "manifests", f"{stage}.json")

    def _manifest(self, stage, inputs, params, outputs):
        return {
            "stage": stage,
            "schema": "manifest/v1",
            "inputs": {p: sha256_file(p) for p in inputs},
            "params": params,
            "outputs": list(outputs),
        }

    def _is_fresh(self, stage, inputs, params, outputs) -> bool:
        path = self._manifest_path(stage)
        if not os.path.exists(path):
            return False
        try:
            with open(path, encoding="utf-8") as fh:
                old = json.load(fh)
        except (OSError, json.JSONDecodeError):
            return False
        if old.get("params") != params or set(old.get("outputs", [])) != set(outputs):
            return False
        if any(not os.path.exists(p) for p in outputs):
            return False
        current = {p: sha256_file(p) for p in inputs if os.path.exists(p)}
        return old.get("inputs") == current and len(current) == len(inputs)

    def _finish(self, stage, inputs, params, outputs):
        manifest = self._manifest(stage, inputs, params, outputs)
        atomic_write(self._manifest_path(stage), lambda tmp: json.dump(
            manifest, open(tmp, "w", encoding="utf-8"), indent=2, sort_keys=True))

    def run(self, stage: str) -> bool:
        """Run one stage; returns False when skipped as up to date."""
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
        return getattr(self, "stage_" + stage.replace("-", "_"))()

    def run_all(self):
        for stage in STAGES:
            self.run(stage)

    # stages

    def stage_build_corpus(self) -> bool:
        cfg = self.cfg
        inputs = [_require(cfg.corpus_path, "corpus file (input)")]
        outputs = [cfg.artifact("vocab.tsv"), cfg.artifact("docs.tsv"),
                   cfg.artifact("word_years.tsv")]
        params = {"year_range": list(cfg.year_range), "min_count": cfg.min_count,
                  "max_df": cfg.max_df}
        if self._is_fresh("build-corpus", inputs, params, outputs):
            self.log("build-corpus: up to date")
            return False
        corpus = cp.load_corpus(cfg.corpus_path, cfg.year_range)
        vocab = cp.build_vocabulary(corpus, min_count=cfg.min_count, max_df=cfg.max_df)
        atomic_write(outputs[0], lambda tmp: cp.write_vocabulary_tsv(vocab, tmp))
        atomic_write(outputs[1], lambda tmp: cp.write_docs_tsv(corpus, tmp))
        atomic_write(outputs[2], lambda tmp: cp.write_word_years_tsv(vocab, tmp))
        self._finish("build-corpus", inputs, params, outputs)
        self.log(f"build-corpus: {len(corpus)} docs, |vocab|={len(vocab)}")
        return True

    def stage_moments(self) -> bool:
        cfg = self.cfg
        inputs = [_require(cfg.store_path, "embedding store (input)"),
                  _require(cfg.artifact("vocab.tsv"), "build-corpus")]
        outputs = [cfg.artifact("moments.npz")]
        params = {}
        if self._is_fresh("moments", inputs, params, outputs):
            self.log("moments: up to date")
            return False
        word_to_id = cp.read_vocabulary_tsv(inputs[1])
        moments, skipped = st.accumulate_moments(
            cfg.store_path, valid_word_ids=set(word_to_id.values()))
        atomic_write(outputs[0], lambda tmp: st.save_moments(moments, tmp))
        self._finish("moments", inputs, params, outputs)
        self.log(f"moments: {len(moments)} words ({skipped} usages outside vocab)")
        return True

    def stage_changes(self) -> bool:
        cfg = self.cfg
        inputs = [_require(cfg.artifact("moments.npz"), "moments"),
                  _require(cfg.artifact("vocab.tsv"), "build-corpus"),
                  _require(cfg.artifact("docs.tsv"), "build-corpus"),
                  _require(cfg.artifact("word_years.tsv"), "build-corpus")]
        outputs = [cfg.artifact("changes.tsv")]
        params = {"k_semantic": cfg.k_semantic, "k_lexical": cfg.k_lexical,
                  "year_range": list(cfg.year_range)}
        if self._is_fresh("changes", inputs, params, outputs):
            self.log("changes: up to date")
            return False
        word_to_id = cp.read_vocabulary_tsv(inputs[1])
        id_to_word = {i: w for w, i in word_to_id.items()}
        moments = st.load_moments(inputs[0])
        years = cd.candidate_years(cfg.year_range)
        semantic = cd.rank_semantic_changes(moments, years, k=cfg.k_semantic)

        # lexical scoring needs per-word year counts and corpus token totals
        totals: dict[int, int] = {}
        with open(inputs[2], encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#") or line.startswith("doc_id\t"):
                    continue
                _d, _i, year, n_tokens = line.rstrip("\n").split("\t")
                totals[int(year)] = totals.get(int(year), 0) + int(n_tokens)
        word_years = cp.read_word_years_tsv(inputs[3])
        word_counts = {wid: word_years.get(word, {})
                       for word, wid in word_to_id.items()}
        lexical = cd.rank_lexical_changes_from_counts(
            word_counts, totals, years, k=cfg.k_lexical)

        atomic_write(outputs[0], lambda tmp: cd.write_changes_tsv(
            semantic + lexical, id_to_word, tmp))
        self._finish("changes", inputs, params, outputs)
        self.log(f"changes: {len(semantic)} semantic, {len(lexical)} lexical")
        return True

    def stage_cascades(self) -> bool:
        cfg = self.cfg
        inputs = [_require(cfg.artifact("changes.tsv"), "changes"),
                  _require(cfg.store_path, "embedding store (input)"),
                  _require(cfg.artifact("vocab.tsv"), "build-corpus"),
                  _require(cfg.artifact("docs.tsv"), "build-corpus")]
        outputs = [cfg.artifact("cascades.jsonl")]
        params = {"l2_strength": cfg.l2_strength, "folds": cfg.folds}
        if self._is_fresh("cascades", inputs, params, outputs):
            self.log("cascades: up to date")
            return False
        word_to_id = cp.read_vocabulary_tsv(inputs[2])
        id_to_word = {i: w for w, i in word_to_id.items()}
        doc_index, _years = cp.read_docs_tsv(inputs[3])
        idx_to_doc = {i: d for d, i in doc_index.items()}
        cascades, n_fallback = build_cascades_from_artifacts(
            inputs[0], cfg.store_path, inputs[2], inputs[3],
            cfg.l2_strength, cfg.folds, self.log)
        atomic_write(outputs[0], lambda tmp: sc.write_cascades_jsonl(
            cascades, id_to_word, idx_to_doc, tmp))
        self._finish("cascades", inputs, params, outputs)
        self.log(f"cascades: {len(cascades)} built"
                 + (f" ({n_fallback} label fallbacks)" if n_fallback else ""))
        return True

    def stage_fit(self) -> bool:
        cfg = self.cfg
        inputs = [_require(cfg.artifact("cascades.jsonl"), "cascades"),
                  _require(cfg.artifact("vocab.tsv"), "build-corpus"),
                  _require(cfg.artifact("docs.tsv"), "build-corpus")]
        outputs = [cfg.artifact("influence_raw.csv")]
        params = {"gamma_grid": list(cfg.gamma_grid),
                  "heldout_fraction": cfg.heldout_fraction, "seed": cfg.seed,
                  "max_iter": cfg.max_iter, "year_range": list(cfg.year_range)}
        if self._is_fresh("fit", inputs, params, outputs):
            self.log("fit: up to date")
            return False
        word_to_id = cp.read_vocabulary_tsv(inputs[1])
        doc_index, _years = cp.read_docs_tsv(inputs[2])
        idx_to_doc = {i: d for d, i in doc_index.items()}
        cascades = sc.read_cascades_jsonl(inputs[0], word_to_id, doc_index)

        rows = []
        for kind in ("semantic", "lexical"):
            subset = [c for c in cascades if c.kind == kind and len(c) > 0]
            if not subset:
                self.log(f"fit: no {kind} cascades; skipped")
                continue
            try:
                best, fits = hk.select_bandwidth(
                    subset, grid=cfg.gamma_grid, year_range=cfg.year_range,
                    heldout_fraction=cfg.heldout_fraction, seed=cfg.seed)
            except (ValueError, hk.InfeasibleParameters) as exc:
                raise NumericalFailure(f"hawkes fit failed for {kind}: {exc}") from exc
            for gamma in cfg.gamma_grid:
                fit = fits.get(gamma)
                if fit is None:
                    continue
                for doc_idx in sorted(fit.model.alpha):
                    rows.append((idx_to_doc[doc_idx], fit.model.alpha[doc_idx],
                                 kind, gamma, gamma == best))
            held = fits[best].heldout_ll
            self.log(f"fit: {kind} gamma={best:g} heldout_ll="
                     f"{held if held is None else round(held, 3)}")
        atomic_write(outputs[0], lambda tmp: hk.write_influence_csv(tmp, rows))
        self._finish("fit", inputs, params, outputs)
        return True

    def stage_featurize(self) -> bool:
        cfg = self.cfg
        inputs = [_require(cfg.artifact("influence_raw.csv"), "fit"),
                  _require(cfg.artifact("docs.tsv"), "build-corpus")]
        outputs = [cfg.artifact("features.csv")]
        params = {}
        if self._is_fresh("featurize", inputs, params, outputs):
            self.log("featurize: up to date")
            return False
        _index, doc_years = cp.read_docs_tsv(inputs[1])
        raw = hk.read_influence_csv(inputs[0])
        alpha_by_kind_gamma: dict[tuple[str, float], dict[str, float]] = {}
        selected: dict[str, float] = {}
        for doc_id, alpha, kind, gamma, is_selected in raw:
            alpha_by_kind_gamma.setdefault((kind, gamma), {})[doc_id] = alpha
            if is_selected:
                selected[kind] = gamma
        if not alpha_by_kind_gamma:
            raise NumericalFailure("influence_raw.csv holds no estimates")
        rows, columns = infl.featurize(alpha_by_kind_gamma, doc_years, selected)
        atomic_write(outputs[0], lambda tmp: infl.write_features_csv(tmp, rows, columns))
        self._finish("featurize", inputs, params, outputs)
        self.log(f"featurize: {len(rows)} documents, {len(columns)} columns")
        return True

    def _feature_rows(self):
        cfg = self.cfg
        if not cfg.citations_path or not cfg.topics_path:
            raise ConfigError("eval stage needs [eval] citations and topics paths")
        features = infl.read_features_csv(_require(cfg.artifact("features.csv"), "featurize"))
        _index, doc_years = cp.read_docs_tsv(_require(cfg.artifact("docs.tsv"), "build-corpus"))
        counts = ce.read_citations_csv(_require(cfg.citations_path, "citations file (input)"))
        topics = ce.read_topics_csv(_require(cfg.topics_path, "topics file (input)"))
        horizon = max((y for per_doc in counts.values() for y in per_doc), default=0)
        records = ce.build_citation_records(counts, doc_years)
        targets, z_short = ce.citation_targets(records, horizon)

        gammas = sorted(cfg.gamma_grid)
        rows = []
        for feat in features:
            doc_id = feat["doc_id"]
            if feat["year"] < cfg.min_pub_year:
                continue
            if doc_id not in targets or doc_id not in topics:
                continue
            rows.append(ce.FeatureRow(
                doc_id=doc_id, year=feat["year"], z_short=z_short[doc_id],
                topics=topics[doc_id],
                lex_quantile=feat["quantile_lexical"],
                sem_quantile=feat["quantile_semantic"],
                z_lex_by_gamma={g: feat[f"z_lexical_g{g:g}"] for g in gammas},
                z_sem_by_gamma={g: feat[f"z_semantic_g{g:g}"] for g in gammas},
                target=targets[doc_id]))
        if not rows:
            raise NumericalFailure("no evaluable documents (check citation horizon)")
        return rows

    def stage_evaluate(self) -> bool:
        cfg = self.cfg
        inputs = [_require(cfg.artifact("features.csv"), "featurize"),
                  _require(cfg.artifact("docs.tsv"), "build-corpus"),
                  _require(cfg.citations_path or "", "citations file (input)"),
                  _require(cfg.topics_path or "", "topics file (input)")]
        outputs = [cfg.artifact("regression.tsv"), cfg.artifact("online.tsv")]
        params = {"models": list(cfg.models), "online_years": list(cfg.online_years),
                  "min_pub_year": cfg.min_pub_year}
        if self._is_fresh("evaluate", inputs, params, outputs):
            self.log("evaluate: up to date")
            return False
        rows = self._feature_rows()

        fits = {}
        for model in cfg.models:
            X, y, cols = ce.build_design_matrix(model, rows, "quantile")
            try:
                fits[model] = ce.fit_ols(X, y, cols, model_tag=model)
            except ce.DesignError as exc:
                raise NumericalFailure(f"{model}: {exc}") from exc
        atomic_write(outputs[0], lambda tmp: write_regression_tsv(tmp, fits))

        years = range(cfg.online_years[0], cfg.online_years[1] + 1)
        try:
            report = ce.online_predict(rows, models=cfg.models, years=years,
                                       influence_features="per_gamma")
        except ce.DesignError as exc:
            raise NumericalFailure(f"online prediction failed: {exc}") from exc
        atomic_write(outputs[1], lambda tmp: write_online_tsv(tmp, report))
        self._finish("evaluate", inputs, params, outputs)
        self.log(f"evaluate: {len(rows)} documents; micro MSE "
                 + " ".join(f"{m}={report.micro[m]:.4f}" for m in cfg.models))
        return True

    def stage_report(self) -> bool:
        cfg = self.cfg
        inputs = [_require(cfg.artifact("regression.tsv"), "evaluate"),
                  _require(cfg.artifact("online.tsv"), "evaluate"),
                  _require(cfg.artifact("features.csv"), "featurize")]
        outputs = [cfg.artifact("report.txt"),
                   cfg.artifact("quantile_coefficients.csv")]
        params = {"models": list(cfg.models)}
        if self._is_fresh("report", inputs, params, outputs):
            self.log("report: up to date")
            return False
        rows = self._feature_rows()
        full_model = cfg.models[-1]
        X, y, cols = ce.build_design_matrix(full_model, rows, "quantile")
        fit = ce.fit_ols(X, y, cols, model_tag=full_model)

        def write_quantiles(tmp):
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(f"# schema: {REPORT_SCHEMA}\n")
                fh.write("kind,quantile,coefficient,se\n")
                for kind in ("lexical", "semantic"):
                    short = kind[:3]
                    fh.write(f"{kind},Q1,0.0,0.0\n")  # reference category
                    for q in ("Q2", "Q3", "Q4"):
                        key = f"{short}_{q}"
                        if key in cols:
                            i = cols.index(key)
                            fh.write(f"{kind},{q},{fit.coefficients[i]:.6f},"
                                     f"{fit.standard_errors[i]:.6f}\n")
        atomic_write(outputs[1], write_quantiles)

        def write_report(tmp):
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(f"# schema: {REPORT_SCHEMA}\n")
                with open(inputs[0], encoding="utf-8") as src:
                    fh.write("== Regression (coefficient (se) per model)\n")
                    fh.write(src.read())
                with open(inputs[1], encoding="utf-8") as src:
                    fh.write("\n== Online prediction (MSE per test year)\n")
                    fh.write(src.read())
                if len(cfg.models) >= 2:
                    fh.write("\n== Likelihood-ratio tests\n")
                    for restricted, full in zip(cfg.models, cfg.models[1:]):
                        Xr, yr, cr = ce.build_design_matrix(restricted, rows, "quantile")
                        Xf, yf, cf = ce.build_design_matrix(full, rows, "quantile")
                        fr = ce.fit_ols(Xr, yr, cr, model_tag=restricted)
                        ff = ce.fit_ols(Xf, yf, cf, model_tag=full)
                        stat, p = ce.likelihood_ratio_test(fr, ff, df=len(cf) - len(cr))
                        fh.write(f"{full} vs {restricted}: chi2({len(cf) - len(cr)}) "
                                 f"= {stat:.2f}, p = {p:.4g}\n")
        atomic_write(outputs[0], write_report)
        self._finish("report", inputs, params, outputs)
        self.log(f"report: wrote {outputs[0]}")
        return True
