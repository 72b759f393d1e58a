"""Per-token contextual embeddings in the core's CEMB store format.

Each whitespace token that survives the shared chunker filter is embedded as
the aggregate (mean by default) of its wordpiece vectors, where a wordpiece
vector is the concatenation of the selected encoder hidden layers. Tokens
outside the core vocabulary produce no record.
"""

from __future__ import annotations

import torch

from .config import EmbedderConfig
from .formats import CembWriter, read_corpus, read_docs_tsv, read_vocab_tsv, tokenize


def load_encoder(checkpoint):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModel.from_pretrained(checkpoint)
    model.eval()
    return tokenizer, model


def _chunk_pieces(tokenizer, words, max_len):
    """Wordpiece ids for one chunk plus per-word spans; words that would
    overflow the encoder's position budget are dropped."""
    ids = [tokenizer.cls_token_id]
    spans = []
    kept = []
    budget = max_len - 1  # room for the final [SEP]
    for w_idx, word in enumerate(words):
        pieces = tokenizer.tokenize(word)
        if not pieces:
            pieces = [tokenizer.unk_token]
        piece_ids = tokenizer.convert_tokens_to_ids(pieces)
        if len(ids) + len(piece_ids) > budget:
            break
        spans.append((len(ids), len(ids) + len(piece_ids)))
        kept.append(w_idx)
        ids.extend(piece_ids)
    ids.append(tokenizer.sep_token_id)
    return ids, spans, kept


def extract_embeddings(corpus_path, checkpoint, vocab_tsv, docs_tsv,
                       config: EmbedderConfig, out_path=None, log=print):
    """Write a CEMB store for every in-vocabulary token of the corpus.

    Positions are indices into the document's filtered token sequence, so
    they line up with the core tokenizer. Returns (record count, dim).
    """
    tokenizer, model = load_encoder(checkpoint)
    word_to_id = read_vocab_tsv(vocab_tsv)
    doc_index, _doc_years = read_docs_tsv(docs_tsv)
    out_path = out_path or config.store_path
    hidden = model.config.hidden_size
    dim = len(config.layers) * hidden
    max_len = min(getattr(tokenizer, "model_max_length", 512),
                  model.config.max_position_embeddings)

    n_skipped_docs = 0
    n_dropped_words = 0
    with CembWriter(out_path, dim) as writer, torch.no_grad():
        for doc_id, year, text in read_corpus(corpus_path):
            if doc_id not in doc_index:
                n_skipped_docs += 1
                continue
            doc_idx = doc_index[doc_id]
            position = 0
            for chunk in tokenize(text):
                ids, spans, kept = _chunk_pieces(tokenizer, chunk, max_len)
                n_dropped_words += len(chunk) - len(kept)
                input_ids = torch.tensor([ids])
                out = model(input_ids=input_ids, output_hidden_states=True)
                stacked = torch.cat([out.hidden_states[l] for l in config.layers],
                                    dim=-1)[0]  # (pieces, dim)
                for (lo, hi), w_idx in zip(spans, kept):
                    word = chunk[w_idx]
                    wid = word_to_id.get(word)
                    if wid is not None:
                        segment = stacked[lo:hi]
                        if config.aggregation == "mean":
                            vec = segment.mean(dim=0)
                        else:
                            vec = segment.max(dim=0).values
                        writer.write(wid, doc_idx, year, position + w_idx,
                                     vec.numpy())
                position += len(chunk)
        count = writer.count
    if n_skipped_docs or n_dropped_words:
        log(f"extract: skipped {n_skipped_docs} docs outside the doc table, "
            f"dropped {n_dropped_words} tokens past the position budget")
    return count, dim
