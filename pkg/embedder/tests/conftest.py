import json

import pytest
import torch

WORDPIECES = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "model", "language", "drift", "##aa", "##ab", "bur", "##st",
    "corpus", "neural", "data", "words", "test", "paper", "study",
]

CORE_WORDS = ["burst", "corpus", "data", "driftaa", "driftab", "language",
              "model", "neural", "paper", "study", "test", "words"]


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """A 4-layer, 16-wide masked LM with a handcrafted wordpiece vocab."""
    from transformers import BertConfig, BertForMaskedLM, BertTokenizer

    d = tmp_path_factory.mktemp("ckpt")
    vocab_path = d / "vocab.txt"
    vocab_path.write_text("\n".join(WORDPIECES) + "\n")
    tokenizer = BertTokenizer(str(vocab_path), do_lower_case=True)
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(WORDPIECES), hidden_size=16, num_hidden_layers=4,
        num_attention_heads=2, intermediate_size=32, max_position_embeddings=64)
    model = BertForMaskedLM(config)
    model.save_pretrained(d)
    tokenizer.save_pretrained(d)
    return str(d)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Corpus JSONL plus the core-format vocab and docs tables."""
    d = tmp_path_factory.mktemp("corpus")
    docs = [
        ("D0", 2001, "the model corpus driftaa language"),
        ("D1", 2002, "model data 42 burst words, test!"),
        ("D2", 2003, "driftab neural paper language study model"),
        ("D3", 2004, "burst burst data corpus the test"),
    ]
    corpus_path = d / "corpus.jsonl"
    with open(corpus_path, "w") as fh:
        for doc_id, year, text in docs:
            fh.write(json.dumps({"doc_id": doc_id, "year": year, "text": text}) + "\n")

    vocab_path = d / "vocab.tsv"
    with open(vocab_path, "w") as fh:
        fh.write("# schema: vocab/v1\nword\tid\tcorpus_count\tdoc_freq\n")
        for i, word in enumerate(CORE_WORDS):
            fh.write(f"{word}\t{i}\t10\t2\n")

    docs_path = d / "docs.tsv"
    with open(docs_path, "w") as fh:
        fh.write("# schema: docs/v1\ndoc_id\tindex\tyear\tn_tokens\n")
        for i, (doc_id, year, text) in enumerate(docs):
            fh.write(f"{doc_id}\t{i}\t{year}\t{len(text.split())}\n")

    return {"corpus": str(corpus_path), "vocab": str(vocab_path),
            "docs": str(docs_path), "records": docs}
