"""Command-line interface.

  embedder filter-language --input corpus.jsonl --out filtered.jsonl [--report r.json]
  embedder pretrain --input corpus.jsonl --config embedder.toml --out ckpt/
  embedder extract --input corpus.jsonl --checkpoint ckpt/ --vocab vocab.tsv \\
      --docs docs.tsv --config embedder.toml --out embeddings.cemb
  embedder topics --input corpus.jsonl --k 20 --out topics.csv
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, EmbedderConfig, load_config


def _config_from_args(args) -> EmbedderConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return EmbedderConfig()


def cmd_filter_language(argv):
    from .language import filter_language

    parser = argparse.ArgumentParser(prog="embedder filter-language")
    parser.add_argument("--input", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--report")
    args = parser.parse_args(argv)
    kept, removed, flagged = filter_language(args.input, args.out, args.report)
    print(f"kept {len(kept)} documents, removed {len(removed)}, "
          f"flagged {len(flagged)} undetectable")


def cmd_pretrain(argv):
    from .pretrain import continued_pretrain

    parser = argparse.ArgumentParser(prog="embedder pretrain")
    parser.add_argument("--input", required=True)
    parser.add_argument("--config")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    losses = continued_pretrain(args.input, _config_from_args(args), args.out)
    print(f"checkpoint -> {args.out}" +
          (f" (final mlm loss {losses[-1]:.4f})" if losses else " (no training epochs)"))


def cmd_extract(argv):
    from .extract import extract_embeddings

    parser = argparse.ArgumentParser(prog="embedder extract")
    parser.add_argument("--input", required=True)
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--vocab", required=True)
    parser.add_argument("--docs", required=True)
    parser.add_argument("--config")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    count, dim = extract_embeddings(
        args.input, args.checkpoint, args.vocab, args.docs,
        _config_from_args(args), out_path=args.out)
    print(f"{count} embeddings of dimension {dim} -> {args.out}")


def cmd_topics(argv):
    from .topics import topic_features

    parser = argparse.ArgumentParser(prog="embedder topics")
    parser.add_argument("--input", required=True)
    parser.add_argument("--k", type=int, default=20)
    parser.add_argument("--seed", type=int, default=13)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    doc_ids, _dist = topic_features(args.input, args.out, k=args.k, seed=args.seed)
    print(f"{len(doc_ids)} documents x {args.k} topics -> {args.out}")


COMMANDS = {
    "filter-language": cmd_filter_language,
    "pretrain": cmd_pretrain,
    "extract": cmd_extract,
    "topics": cmd_topics,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        return 0
    handler = COMMANDS.get(argv[0])
    if handler is None:
        print(f"unknown command {argv[0]!r}; see --help", file=sys.stderr)
        return 2
    try:
        handler(argv[1:])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
