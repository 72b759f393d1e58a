"""Binary store for per-token contextual embeddings and per-word moment statistics.

Store layout (little-endian): header ``[magic "CEMB", u32 version, u32 dim,
u64 count]`` followed by packed records ``[u32 word_id, u32 doc_id, u16 year,
u32 position, dim x f32]``. Payloads are f32 on disk; all accumulation is
done in f64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"CEMB"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")

MOMENTS_SCHEMA = "moments/v1"


class StoreError(Exception):
    """Raised for malformed store files or inconsistent record dimensions."""


class DegenerateSplit(Exception):
    """Signals that one side of a pre/post split holds no usages."""


def record_dtype(dim: int) -> np.dtype:
    return np.dtype([
        ("word_id", "<u4"),
        ("doc_id", "<u4"),
        ("year", "<u2"),
        ("position", "<u4"),
        ("vector", "<f4", (dim,)),
    ])


@dataclass
class EmbeddedUsage:
    word_id: int
    doc_id: int
    year: int
    position: int
    vector: np.ndarray


def write_store(usages, path, dim: int | None = None) -> int:
    """Write a stream of usages; returns the record count.

    ``usages`` may be an iterable of EmbeddedUsage or of structured record
    batches. The header count is patched once the stream is exhausted.
    """
    count = 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim or 0, 0))
        dtype = record_dtype(dim) if dim else None
        for usage in usages:
            if isinstance(usage, EmbeddedUsage):
                vec = np.asarray(usage.vector, dtype=np.float32)
                if dtype is None:
                    dim = vec.shape[0]
                    dtype = record_dtype(dim)
                if vec.shape != (dim,):
                    raise StoreError(
                        f"dimension mismatch: expected {dim}, got {vec.shape[0]}")
                rec = np.zeros(1, dtype=dtype)
                rec["word_id"] = usage.word_id
                rec["doc_id"] = usage.doc_id
                rec["year"] = usage.year
                rec["position"] = usage.position
                rec["vector"] = vec
                fh.write(rec.tobytes())
                count += 1
            else:
                batch = np.asarray(usage)
                if dtype is None:
                    dim = batch.dtype["vector"].shape[0]
                    dtype = record_dtype(dim)
                if batch.dtype != dtype:
                    raise StoreError("dimension mismatch in record batch")
                fh.write(batch.tobytes())
                count += len(batch)
        fh.seek(0)
        fh.write(_HEADER.pack(MAGIC, VERSION, dim or 0, count))
    return count


def read_header(path) -> tuple[int, int]:
    """Return (dim, count) from a store file header."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise StoreError(f"{path}: truncated header")
    magic, version, dim, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise StoreError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise StoreError(f"{path}: unsupported version {version}")
    return dim, count


def read_store(path) -> tuple[int, np.ndarray]:
    """Load a whole store into memory; returns (dim, records)."""
    dim, count = read_header(path)
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        records = np.fromfile(fh, dtype=record_dtype(dim), count=count)
    if len(records) != count:
        raise StoreError(f"{path}: expected {count} records, found {len(records)}")
    return dim, records


def iter_store(path, batch_size: int = 65536):
    """Stream record batches without materializing the full store."""
    dim, count = read_header(path)
    dtype = record_dtype(dim)
    remaining = count
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        while remaining > 0:
            n = min(batch_size, remaining)
            batch = np.fromfile(fh, dtype=dtype, count=n)
            if len(batch) == 0:
                raise StoreError(f"{path}: truncated records")
            remaining -= len(batch)
            yield batch


@dataclass
class WordMoments:
    """Per-year sufficient statistics for one word's embeddings.

    ``year_sums`` holds exact f64 accumulations, so any pre/post split mean is
    recoverable without another pass over the store.
    """
    word_id: int
    years: np.ndarray        # (Y,) sorted int
    year_counts: np.ndarray  # (Y,) int64
    year_sums: np.ndarray    # (Y, D) float64
    total_count: int
    total_sum: np.ndarray    # (D,) float64
    total_sumsq: np.ndarray  # (D,) float64

    @property
    def mean(self) -> np.ndarray:
        return self.total_sum / self.total_count

    @property
    def variance(self) -> np.ndarray:
        """Per-dimension population variance over all usages."""
        mu = self.mean
        return self.total_sumsq / self.total_count - mu * mu


@dataclass
class SplitStats:
    v_minus: np.ndarray
    v_plus: np.ndarray
    m_minus: int
    m_plus: int


def split_means(moments: WordMoments, t: int) -> SplitStats:
    """Mean embeddings over usages with year <= t versus year > t."""
    mask = moments.years <= t
    m_minus = int(moments.year_counts[mask].sum())
    m_plus = moments.total_count - m_minus
    if m_minus == 0 or m_plus == 0:
        raise DegenerateSplit(f"word {moments.word_id}: no usages on one side of t={t}")
    sum_minus = moments.year_sums[mask].sum(axis=0)
    return SplitStats(
        v_minus=sum_minus / m_minus,
        v_plus=(moments.total_sum - sum_minus) / m_plus,
        m_minus=m_minus,
        m_plus=m_plus,
    )


def accumulate_moments(store_path, valid_word_ids=None, batch_size: int = 65536):
    """Single-pass accumulation of WordMoments for every word in the store.

    Records whose word_id is not in ``valid_word_ids`` (when given) are
    skipped; returns (moments dict, skipped count).
    """
    valid = None
    if valid_word_ids is not None:
        valid = np.zeros(max(valid_word_ids) + 1 if valid_word_ids else 0, dtype=bool)
        for wid in valid_word_ids:
            valid[wid] = True

    per_year: dict[int, dict[int, list]] = {}
    totals: dict[int, list] = {}
    skipped = 0

    for batch in iter_store(store_path, batch_size=batch_size):
        wids = batch["word_id"].astype(np.int64)
        if valid is not None:
            ok = (wids < len(valid)) & valid[np.minimum(wids, len(valid) - 1)]
            skipped += int((~ok).sum())
            if not ok.all():
                batch = batch[ok]
                wids = wids[ok]
            if len(batch) == 0:
                continue
        years = batch["year"].astype(np.int64)
        vecs = batch["vector"].astype(np.float64)

        order = np.lexsort((years, wids))
        wids, years, vecs = wids[order], years[order], vecs[order]
        boundary = np.empty(len(wids), dtype=bool)
        boundary[0] = True
        boundary[1:] = (wids[1:] != wids[:-1]) | (years[1:] != years[:-1])
        starts = np.flatnonzero(boundary)
        counts = np.diff(np.append(starts, len(wids)))
        group_sums = np.add.reduceat(vecs, starts, axis=0)
        group_sumsqs = np.add.reduceat(vecs * vecs, starts, axis=0)

        for g, start in enumerate(starts):
            wid = int(wids[start])
            year = int(years[start])
            cnt = int(counts[g])
            word_years = per_year.setdefault(wid, {})
            if year in word_years:
                word_years[year][0] += cnt
                word_years[year][1] += group_sums[g]
            else:
                word_years[year] = [cnt, group_sums[g].copy()]
            if wid in totals:
                tot = totals[wid]
                tot[0] += cnt
                tot[1] += group_sums[g]
                tot[2] += group_sumsqs[g]
            else:
                totals[wid] = [cnt, group_sums[g].copy(), group_sumsqs[g].copy()]

    moments: dict[int, WordMoments] = {}
    for wid in sorted(totals):
        years = np.array(sorted(per_year[wid]), dtype=np.int64)
        counts = np.array([per_year[wid][y][0] for y in years], dtype=np.int64)
        sums = np.stack([per_year[wid][y][1] for y in years])
        tot = totals[wid]
        moments[wid] = WordMoments(
            word_id=wid,
            years=years,
            year_counts=counts,
            year_sums=sums,
            total_count=int(tot[0]),
            total_sum=tot[1],
            total_sumsq=tot[2],
        )
    return moments, skipped


def save_moments(moments: dict[int, WordMoments], path) -> None:
    """Serialize a moments map to a compressed npz archive."""
    wids = sorted(moments)
    row_word, row_year, row_count, row_sum = [], [], [], []
    for wid in wids:
        m = moments[wid]
        row_word.extend([wid] * len(m.years))
        row_year.extend(m.years.tolist())
        row_count.extend(m.year_counts.tolist())
        row_sum.append(m.year_sums)
    if hasattr(path, "write"):
        fh = path
    else:
        fh = open(path, "wb")  # keep np.savez from appending ".npz"
    np.savez_compressed(
        fh,
        schema=np.array(MOMENTS_SCHEMA),
        word_ids=np.array(wids, dtype=np.int64),
        total_counts=np.array([moments[w].total_count for w in wids], dtype=np.int64),
        total_sums=np.stack([moments[w].total_sum for w in wids]) if wids else np.zeros((0, 0)),
        total_sumsqs=np.stack([moments[w].total_sumsq for w in wids]) if wids else np.zeros((0, 0)),
        row_word=np.array(row_word, dtype=np.int64),
        row_year=np.array(row_year, dtype=np.int64),
        row_count=np.array(row_count, dtype=np.int64),
        row_sums=np.concatenate(row_sum) if row_sum else np.zeros((0, 0)),
    )
    if fh is not path:
        fh.close()


def load_moments(path) -> dict[int, WordMoments]:
    with np.load(path, allow_pickle=False) as data:
        if str(data["schema"]) != MOMENTS_SCHEMA:
            raise StoreError(f"{path}: unknown moments schema {data['schema']}")
        wids = data["word_ids"]
        row_word = data["row_word"]
        moments: dict[int, WordMoments] = {}
        for i, wid in enumerate(wids):
            rows = np.flatnonzero(row_word == wid)
            moments[int(wid)] = WordMoments(
                word_id=int(wid),
                years=data["row_year"][rows],
                year_counts=data["row_count"][rows],
                year_sums=data["row_sums"][rows],
                total_count=int(data["total_counts"][i]),
                total_sum=data["total_sums"][i],
                total_sumsq=data["total_sumsqs"][i],
            )
    return moments
