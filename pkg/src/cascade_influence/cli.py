"""Command-line interface.

Two entry styles share one binary:

  cascade-influence <stage> --config pipeline.toml      # config-driven stages
  cascade-influence run --config pipeline.toml          # all stages in order
  cascade-influence corpus build --input ... --years 1990:2019 ...
  cascade-influence moments compute --store ... --vocab ... --out ...
  cascade-influence changes detect --kind semantic --k 2910 --out ...
  cascade-influence cascades build --changes ... --store ... --out ...
  cascade-influence hawkes fit --cascades ... --gamma-grid ... --out ...
  cascade-influence influence featurize --raw ... --meta docs.tsv --out ...
  cascade-influence eval regress|online ...
  cascade-influence fixture --out DIR --seed 13

Exit codes: 0 ok, 2 config error, 3 upstream artifact missing, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys


from . import change_detect as cd
from . import citation_eval as ce
from . import corpus as cp
from . import hawkes as hk
from . import influence as infl
from . import pipeline as pl
from . import sense_classifier as sc
from . import store as st

TOOL_VERBS = {
    "corpus": {"build"},
    "moments": {"compute"},
    "changes": {"detect"},
    "cascades": {"build"},
    "hawkes": {"fit"},
    "influence": {"featurize"},
    "eval": {"regress", "online"},
}


def _parse_years(text):
    lo, _, hi = text.partition(":")
    return int(lo), int(hi)


def _parse_grid(text):
    return tuple(float(x) for x in text.split(","))


def cmd_stage(stage, argv):
    parser = argparse.ArgumentParser(prog=f"cascade-influence {stage}")
    parser.add_argument("--config", required=True)
    args = parser.parse_args(argv)
    runner = pl.StageRunner(pl.load_config(args.config))
    if stage == "run":
        runner.run_all()
    else:
        runner.run(stage)


def cmd_corpus_build(argv):
    parser = argparse.ArgumentParser(prog="cascade-influence corpus build")
    parser.add_argument("--input", required=True)
    parser.add_argument("--years", type=_parse_years, default=(1990, 2019))
    parser.add_argument("--min-count", type=int, default=cp.DEFAULT_MIN_COUNT)
    parser.add_argument("--max-df", type=float, default=cp.DEFAULT_MAX_DF)
    parser.add_argument("--out-vocab", default="vocab.tsv")
    parser.add_argument("--out-docs", default="docs.tsv")
    parser.add_argument("--out-word-years", default="word_years.tsv")
    args = parser.parse_args(argv)
    pl._require(args.input, "corpus file (input)")
    corpus = cp.load_corpus(args.input, args.years)
    vocab = cp.build_vocabulary(corpus, min_count=args.min_count, max_df=args.max_df)
    pl.atomic_write(args.out_vocab, lambda tmp: cp.write_vocabulary_tsv(vocab, tmp))
    pl.atomic_write(args.out_docs, lambda tmp: cp.write_docs_tsv(corpus, tmp))
    pl.atomic_write(args.out_word_years, lambda tmp: cp.write_word_years_tsv(vocab, tmp))
    print(f"{len(corpus)} documents, vocabulary size {len(vocab)} -> {args.out_vocab}")


def cmd_moments_compute(argv):
    parser = argparse.ArgumentParser(prog="cascade-influence moments compute")
    parser.add_argument("--store", required=True)
    parser.add_argument("--vocab", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    pl._require(args.store, "embedding store (input)")
    pl._require(args.vocab, "corpus build")
    word_to_id = cp.read_vocabulary_tsv(args.vocab)
    moments, skipped = st.accumulate_moments(
        args.store, valid_word_ids=set(word_to_id.values()))
    pl.atomic_write(args.out, lambda tmp: st.save_moments(moments, tmp))
    print(f"{len(moments)} words with moments ({skipped} usages outside vocab)")


def cmd_changes_detect(argv):
    parser = argparse.ArgumentParser(prog="cascade-influence changes detect")
    parser.add_argument("--kind", choices=["semantic", "lexical"], required=True)
    parser.add_argument("--k", type=int, required=True)
    parser.add_argument("--vocab", required=True)
    parser.add_argument("--years", type=_parse_years, required=True)
    parser.add_argument("--moments", help="moments npz (semantic)")
    parser.add_argument("--word-years", help="word_years.tsv (lexical)")
    parser.add_argument("--docs", help="docs.tsv for corpus totals (lexical)")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    word_to_id = cp.read_vocabulary_tsv(pl._require(args.vocab, "corpus build"))
    id_to_word = {i: w for w, i in word_to_id.items()}
    years = cd.candidate_years(args.years)
    if args.kind == "semantic":
        if not args.moments:
            raise pl.ConfigError("--moments is required for semantic changes")
        moments = st.load_moments(pl._require(args.moments, "moments compute"))
        candidates = cd.rank_semantic_changes(moments, years, k=args.k)
    else:
        if not args.word_years or not args.docs:
            raise pl.ConfigError("--word-years and --docs are required for lexical changes")
        word_years = cp.read_word_years_tsv(pl._require(args.word_years, "corpus build"))
        totals: dict[int, int] = {}
        with open(pl._require(args.docs, "corpus build"), encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#") or line.startswith("doc_id\t"):
                    continue
                _d, _i, year, n_tokens = line.rstrip("\n").split("\t")
                totals[int(year)] = totals.get(int(year), 0) + int(n_tokens)
        word_counts = {wid: word_years.get(w, {}) for w, wid in word_to_id.items()}
        candidates = cd.rank_lexical_changes_from_counts(
            word_counts, totals, years, k=args.k)
    pl.atomic_write(args.out, lambda tmp: cd.write_changes_tsv(candidates, id_to_word, tmp))
    print(f"{len(candidates)} {args.kind} changes -> {args.out}")


def cmd_cascades_build(argv):
    parser = argparse.ArgumentParser(prog="cascade-influence cascades build")
    parser.add_argument("--changes", required=True)
    parser.add_argument("--store", required=True)
    parser.add_argument("--vocab", required=True)
    parser.add_argument("--docs", required=True)
    parser.add_argument("--l2", type=float, default=sc.DEFAULT_L2)
    parser.add_argument("--folds", type=int, default=sc.DEFAULT_FOLDS)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    cascades, n_fallback = pl.build_cascades_from_artifacts(
        pl._require(args.changes, "changes detect"),
        pl._require(args.store, "embedding store (input)"),
        pl._require(args.vocab, "corpus build"),
        pl._require(args.docs, "corpus build"),
        args.l2, args.folds, print)
    word_to_id = cp.read_vocabulary_tsv(args.vocab)
    id_to_word = {i: w for w, i in word_to_id.items()}
    doc_index, _years = cp.read_docs_tsv(args.docs)
    idx_to_doc = {i: d for d, i in doc_index.items()}
    pl.atomic_write(args.out, lambda tmp: sc.write_cascades_jsonl(
        cascades, id_to_word, idx_to_doc, tmp))
    print(f"{len(cascades)} cascades -> {args.out}"
          + (f" ({n_fallback} label fallbacks)" if n_fallback else ""))


def cmd_hawkes_fit(argv):
    parser = argparse.ArgumentParser(prog="cascade-influence hawkes fit")
    parser.add_argument("--cascades", required=True)
    parser.add_argument("--vocab", required=True)
    parser.add_argument("--docs", required=True)
    parser.add_argument("--years", type=_parse_years, required=True)
    parser.add_argument("--gamma-grid", type=_parse_grid,
                        default=hk.DEFAULT_GAMMA_GRID)
    parser.add_argument("--heldout", type=float, default=hk.DEFAULT_HELDOUT)
    parser.add_argument("--seed", type=int, default=hk.DEFAULT_SEED)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    word_to_id = cp.read_vocabulary_tsv(pl._require(args.vocab, "corpus build"))
    doc_index, _years = cp.read_docs_tsv(pl._require(args.docs, "corpus build"))
    idx_to_doc = {i: d for d, i in doc_index.items()}
    cascades = sc.read_cascades_jsonl(
        pl._require(args.cascades, "cascades build"), word_to_id, doc_index)
    rows = []
    for kind in ("semantic", "lexical"):
        subset = [c for c in cascades if c.kind == kind and len(c) > 0]
        if not subset:
            continue
        try:
            best, fits = hk.select_bandwidth(
                subset, grid=args.gamma_grid, year_range=args.years,
                heldout_fraction=args.heldout, seed=args.seed)
        except (ValueError, hk.InfeasibleParameters) as exc:
            raise pl.NumericalFailure(f"hawkes fit failed for {kind}: {exc}") from exc
        for gamma in args.gamma_grid:
            if gamma not in fits:
                continue
            for doc_idx in sorted(fits[gamma].model.alpha):
                rows.append((idx_to_doc[doc_idx], fits[gamma].model.alpha[doc_idx],
                             kind, gamma, gamma == best))
        print(f"{kind}: selected gamma={best:g}")
    pl.atomic_write(args.out, lambda tmp: hk.write_influence_csv(tmp, rows))
    print(f"influence estimates -> {args.out}")


def cmd_influence_featurize(argv):
    parser = argparse.ArgumentParser(prog="cascade-influence influence featurize")
    parser.add_argument("--raw", required=True)
    parser.add_argument("--meta", required=True, help="docs.tsv with doc years")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    _index, doc_years = cp.read_docs_tsv(pl._require(args.meta, "corpus build"))
    raw = hk.read_influence_csv(pl._require(args.raw, "hawkes fit"))
    alpha_by_kind_gamma: dict[tuple[str, float], dict[str, float]] = {}
    selected: dict[str, float] = {}
    for doc_id, alpha, kind, gamma, is_selected in raw:
        alpha_by_kind_gamma.setdefault((kind, gamma), {})[doc_id] = alpha
        if is_selected:
            selected[kind] = gamma
    rows, columns = infl.featurize(alpha_by_kind_gamma, doc_years, selected)
    pl.atomic_write(args.out, lambda tmp: infl.write_features_csv(tmp, rows, columns))
    print(f"{len(rows)} documents featurized -> {args.out}")


def _eval_parser(prog):
    parser = argparse.ArgumentParser(prog=prog)
    parser.add_argument("--features", required=True)
    parser.add_argument("--citations", required=True)
    parser.add_argument("--topics", required=True)
    parser.add_argument("--docs", required=True)
    parser.add_argument("--models", default="M1,M2,M3,M4")
    parser.add_argument("--min-pub-year", type=int, default=2000)
    parser.add_argument("--out", required=True)
    return parser


def _eval_rows(args):
    features = infl.read_features_csv(pl._require(args.features, "influence featurize"))
    _index, doc_years = cp.read_docs_tsv(pl._require(args.docs, "corpus build"))
    counts = ce.read_citations_csv(pl._require(args.citations, "citations file (input)"))
    topics = ce.read_topics_csv(pl._require(args.topics, "topics file (input)"))
    horizon = max((y for per_doc in counts.values() for y in per_doc), default=0)
    records = ce.build_citation_records(counts, doc_years)
    targets, z_short = ce.citation_targets(records, horizon)
    gammas = sorted({float(col.split("_g")[1]) for col in features[0]
                     if col.startswith("z_semantic_g")})
    rows = []
    for feat in features:
        doc_id = feat["doc_id"]
        if feat["year"] < args.min_pub_year or doc_id not in targets or doc_id not in topics:
            continue
        rows.append(ce.FeatureRow(
            doc_id=doc_id, year=feat["year"], z_short=z_short[doc_id],
            topics=topics[doc_id], lex_quantile=feat["quantile_lexical"],
            sem_quantile=feat["quantile_semantic"],
            z_lex_by_gamma={g: feat[f"z_lexical_g{g:g}"] for g in gammas},
            z_sem_by_gamma={g: feat[f"z_semantic_g{g:g}"] for g in gammas},
            target=targets[doc_id]))
    if not rows:
        raise pl.NumericalFailure("no evaluable documents")
    return rows


def cmd_eval_regress(argv):
    parser = _eval_parser("cascade-influence eval regress")
    args = parser.parse_args(argv)
    rows = _eval_rows(args)
    models = args.models.split(",")
    fits = {}
    for model in models:
        X, y, cols = ce.build_design_matrix(model, rows, "quantile")
        try:
            fits[model] = ce.fit_ols(X, y, cols, model_tag=model)
        except ce.DesignError as exc:
            raise pl.NumericalFailure(f"{model}: {exc}") from exc
    pl.atomic_write(args.out, lambda tmp: pl.write_regression_tsv(tmp, fits))
    print(f"regression table ({len(rows)} documents) -> {args.out}")


def cmd_eval_online(argv):
    parser = _eval_parser("cascade-influence eval online")
    parser.add_argument("--years", type=_parse_years, default=(2001, 2014))
    args = parser.parse_args(argv)
    rows = _eval_rows(args)
    models = args.models.split(",")
    try:
        report = ce.online_predict(
            rows, models=models, years=range(args.years[0], args.years[1] + 1),
            influence_features="per_gamma")
    except ce.DesignError as exc:
        raise pl.NumericalFailure(f"online prediction failed: {exc}") from exc
    pl.atomic_write(args.out, lambda tmp: pl.write_online_tsv(tmp, report))
    print("micro-averaged MSE: "
          + " ".join(f"{m}={report.micro[m]:.4f}" for m in models))


def cmd_fixture(argv):
    from . import fixtures

    parser = argparse.ArgumentParser(prog="cascade-influence fixture")
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=13)
    args = parser.parse_args(argv)
    truth = fixtures.generate_fixture(args.out, seed=args.seed)
    print(f"fixture with {len(truth.doc_ids)} documents -> {args.out}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        return 0
    head = argv[0]
    try:
        if head in TOOL_VERBS and len(argv) > 1 and argv[1] in TOOL_VERBS[head]:
            handler = globals()[f"cmd_{head}_{argv[1]}"]
            handler(argv[2:])
        elif head == "fixture":
            cmd_fixture(argv[1:])
        elif head in pl.STAGES or head == "run":
            cmd_stage(head, argv[1:])
        else:
            print(f"unknown command {head!r}; see --help", file=sys.stderr)
            return 2
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (pl.UpstreamMissing, cp.CorpusError, st.StoreError) as exc:
        code = 3 if isinstance(exc, pl.UpstreamMissing) else 2
        print(f"error: {exc}", file=sys.stderr)
        return code
    except pl.NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
