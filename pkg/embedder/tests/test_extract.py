import numpy as np
import pytest
import torch

from embedder.config import EmbedderConfig
from embedder.extract import extract_embeddings, load_encoder
from embedder.formats import read_cemb, tokenize


def manual_forward(checkpoint, words, layers=(-4, -3, -2, -1)):
    """Independent forward pass: wordpiece spans tracked by hand."""
    tokenizer, model = load_encoder(checkpoint)
    ids = [tokenizer.cls_token_id]
    spans = []
    for word in words:
        pieces = tokenizer.convert_tokens_to_ids(tokenizer.tokenize(word))
        spans.append((len(ids), len(ids) + len(pieces)))
        ids.extend(pieces)
    ids.append(tokenizer.sep_token_id)
    with torch.no_grad():
        out = model(input_ids=torch.tensor([ids]), output_hidden_states=True)
    stacked = torch.cat([out.hidden_states[l] for l in layers], dim=-1)[0]
    return {w: stacked[lo:hi].numpy() for w, (lo, hi) in zip(words, spans)}


@pytest.fixture(scope="module")
def store(tiny_checkpoint, tiny_corpus, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("store") / "embeddings.cemb")
    config = EmbedderConfig(encoder=tiny_checkpoint)
    count, dim = extract_embeddings(
        tiny_corpus["corpus"], tiny_checkpoint, tiny_corpus["vocab"],
        tiny_corpus["docs"], config, out_path=out)
    return out, count, dim


class TestExtract:
    def test_header_dim_is_layers_times_hidden(self, store):
        out, _count, dim = store
        assert dim == 4 * 16
        stored_dim, _records = read_cemb(out)
        assert stored_dim == 64

    def test_only_vocabulary_words_recorded(self, store, tiny_corpus):
        out, count, _dim = store
        _dim2, records = read_cemb(out)
        assert len(records) == count
        # "the" and "42" never produce records: one is out of vocab, the
        # other is dropped by the token filter
        expected = 0
        for _doc, _year, text in tiny_corpus["records"]:
            for chunk in tokenize(text):
                expected += sum(w not in ("the",) for w in chunk)
        assert count == expected

    def test_single_wordpiece_token_matches_manual_forward(self, store, tiny_checkpoint):
        out, _count, _dim = store
        _dim2, records = read_cemb(out)
        # doc D0 chunk: [the, model, corpus, driftaa, language]
        oracle = manual_forward(tiny_checkpoint,
                                ["the", "model", "corpus", "driftaa", "language"])
        rec = records[(records["doc_id"] == 0) & (records["position"] == 1)][0]
        np.testing.assert_allclose(rec["vector"], oracle["model"][0],
                                   rtol=1e-5, atol=1e-5)

    def test_two_wordpiece_token_is_elementwise_mean(self, store, tiny_checkpoint):
        out, _count, _dim = store
        _dim2, records = read_cemb(out)
        oracle = manual_forward(tiny_checkpoint,
                                ["the", "model", "corpus", "driftaa", "language"])
        pieces = oracle["driftaa"]
        assert pieces.shape[0] == 2
        rec = records[(records["doc_id"] == 0) & (records["position"] == 3)][0]
        np.testing.assert_allclose(rec["vector"], pieces.mean(axis=0),
                                   rtol=1e-5, atol=1e-5)

    def test_positions_follow_core_token_filter(self, store):
        out, _count, _dim = store
        _dim2, records = read_cemb(out)
        # D1 text "model data 42 burst words, test!" filters to
        # [model, data, burst, words, test]: positions 0..4, no gap for "42"
        d1 = records[records["doc_id"] == 1]
        assert sorted(d1["position"].tolist()) == [0, 1, 2, 3, 4]

    def test_mean_of_concat_commutes_with_concat_of_means(self, tiny_checkpoint):
        oracle = manual_forward(tiny_checkpoint, ["driftaa", "burst"])
        for word in ("driftaa", "burst"):
            pieces = oracle[word]  # (n_pieces, 4*hidden), already concatenated
            whole = pieces.mean(axis=0)
            per_layer = [pieces[:, i * 16:(i + 1) * 16].mean(axis=0) for i in range(4)]
            np.testing.assert_allclose(whole, np.concatenate(per_layer), rtol=1e-6)

    def test_max_aggregation_flag(self, tiny_checkpoint, tiny_corpus, tmp_path):
        out = str(tmp_path / "max.cemb")
        config = EmbedderConfig(encoder=tiny_checkpoint, aggregation="max")
        extract_embeddings(tiny_corpus["corpus"], tiny_checkpoint,
                           tiny_corpus["vocab"], tiny_corpus["docs"],
                           config, out_path=out)
        _dim, records = read_cemb(out)
        oracle = manual_forward(tiny_checkpoint,
                                ["the", "model", "corpus", "driftaa", "language"])
        rec = records[(records["doc_id"] == 0) & (records["position"] == 3)][0]
        np.testing.assert_allclose(rec["vector"], oracle["driftaa"].max(axis=0),
                                   rtol=1e-5, atol=1e-5)

    def test_custom_layer_selection(self, tiny_checkpoint, tiny_corpus, tmp_path):
        out = str(tmp_path / "two_layers.cemb")
        config = EmbedderConfig(encoder=tiny_checkpoint, layers=(-2, -1))
        _count, dim = extract_embeddings(
            tiny_corpus["corpus"], tiny_checkpoint, tiny_corpus["vocab"],
            tiny_corpus["docs"], config, out_path=out)
        assert dim == 2 * 16
