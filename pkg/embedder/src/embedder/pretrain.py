"""Continued masked-language-model pretraining on the corpus."""

from __future__ import annotations

import torch

from .config import EmbedderConfig
from .formats import read_corpus, tokenize


def _chunk_texts(corpus_path):
    for _doc_id, _year, text in read_corpus(corpus_path):
        for chunk in tokenize(text):
            yield " ".join(chunk)


def _mask_batch(input_ids, special_mask, tokenizer, probability, generator):
    """Standard MLM corruption: of the selected positions, 80% become [MASK],
    10% a random token, 10% stay; labels are -100 everywhere else."""
    labels = input_ids.clone()
    prob = torch.full(input_ids.shape, probability)
    prob.masked_fill_(special_mask, 0.0)
    selected = torch.bernoulli(prob, generator=generator).bool()
    labels[~selected] = -100

    replace = torch.bernoulli(torch.full(input_ids.shape, 0.8), generator=generator).bool() & selected
    input_ids[replace] = tokenizer.mask_token_id
    randomize = (torch.bernoulli(torch.full(input_ids.shape, 0.5), generator=generator).bool()
                 & selected & ~replace)
    random_ids = torch.randint(len(tokenizer), input_ids.shape, generator=generator)
    input_ids[randomize] = random_ids[randomize]
    return input_ids, labels


def continued_pretrain(corpus_path, config: EmbedderConfig, out_dir, log=print):
    """Further train the encoder on the corpus MLM objective; returns the
    per-epoch mean losses. With epochs=0 the checkpoint equals the base."""
    from transformers import AutoTokenizer, BertForMaskedLM

    tokenizer = AutoTokenizer.from_pretrained(config.encoder)
    model = BertForMaskedLM.from_pretrained(config.encoder)
    chunks = list(_chunk_texts(corpus_path))
    if not chunks:
        raise ValueError(f"{corpus_path}: no text to pretrain on")

    losses = []
    if config.epochs > 0:
        generator = torch.Generator().manual_seed(config.seed)
        optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
        model.train()
        max_len = min(tokenizer.model_max_length, 512)
        for epoch in range(config.epochs):
            epoch_loss, n_batches = 0.0, 0
            for start in range(0, len(chunks), config.batch_size):
                batch = chunks[start:start + config.batch_size]
                enc = tokenizer(batch, padding=True, truncation=True,
                                max_length=max_len, return_tensors="pt")
                special = torch.tensor([
                    tokenizer.get_special_tokens_mask(ids, already_has_special_tokens=True)
                    for ids in enc["input_ids"].tolist()
                ], dtype=torch.bool)
                special |= enc["attention_mask"] == 0
                input_ids, labels = _mask_batch(
                    enc["input_ids"].clone(), special, tokenizer,
                    config.masking_probability, generator)
                try:
                    out = model(input_ids=input_ids,
                                attention_mask=enc["attention_mask"], labels=labels)
                    out.loss.backward()
                except RuntimeError as exc:
                    if "out of memory" in str(exc).lower():
                        raise RuntimeError(
                            f"out of memory at batch_size={config.batch_size}; "
                            "lower [embedder] batch_size in the config") from exc
                    raise
                optimizer.step()
                optimizer.zero_grad()
                epoch_loss += float(out.loss.detach())
                n_batches += 1
            losses.append(epoch_loss / n_batches)
            log(f"epoch {epoch + 1}/{config.epochs}: mlm loss {losses[-1]:.4f}")

    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return losses
