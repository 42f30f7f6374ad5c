"""Dataset ingestion: the sparse multi-label text format, skip-gram sample
generation from raw corpora, frequency tables, and batching.

The sparse format is one header line ``num_points num_features num_labels``
followed by one line per sample: a comma-separated label list, then
whitespace-separated ``feature:value`` pairs. Samples whose label list is
empty cannot train a softmax and are dropped (counted).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from lshsoftmax.errors import ParseError
from lshsoftmax.samplers import FrequencyTable
from lshsoftmax.vectors import SparseVector


@dataclass
class XcDataset:
    """Sparse-input multi-label dataset held in memory."""

    num_features: int
    num_labels: int
    samples: list[tuple[SparseVector, np.ndarray]]
    n_dropped: int = 0
    vocab: list[str] | None = None   # set for corpus-derived datasets

    def __len__(self) -> int:
        return len(self.samples)

    def subset(self, idx) -> "XcDataset":
        return XcDataset(
            self.num_features,
            self.num_labels,
            [self.samples[i] for i in idx],
            vocab=self.vocab,
        )


@dataclass
class Batch:
    inputs: list[SparseVector]
    labels: list[np.ndarray]

    @property
    def size(self) -> int:
        return len(self.inputs)


def parse_xc(path, normalize: bool = False) -> XcDataset:
    """Parse the sparse multi-label format, validating every index against
    the header. Malformed lines raise ``ParseError`` with the line number."""
    samples: list[tuple[SparseVector, np.ndarray]] = []
    n_dropped = 0
    with open(path) as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'num_points num_features num_labels', got {header!r}", line=1)
        try:
            num_points, num_features, num_labels = (int(p) for p in parts)
        except ValueError:
            raise ParseError(f"non-integer header field in {header!r}", line=1) from None
        n_lines = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            n_lines += 1
            tokens = line.split()
            label_tok = None
            if not line[0].isspace() and tokens and ":" not in tokens[0]:
                label_tok = tokens[0]
                tokens = tokens[1:]
            labels = _parse_labels(label_tok, num_labels, lineno)
            vec = _parse_features(tokens, num_features, lineno, normalize)
            if labels.size == 0:
                n_dropped += 1
                continue
            samples.append((vec, labels))
        if n_lines != num_points:
            raise ParseError(f"header declares {num_points} samples, file has {n_lines}")
    return XcDataset(num_features, num_labels, samples, n_dropped)


def _parse_labels(tok: str | None, num_labels: int, lineno: int) -> np.ndarray:
    if tok is None or tok == "":
        return np.empty(0, dtype=np.int64)
    try:
        labels = np.array(sorted({int(p) for p in tok.split(",")}), dtype=np.int64)
    except ValueError:
        raise ParseError(f"bad label list {tok!r}", line=lineno) from None
    if labels.size and (labels[0] < 0 or labels[-1] >= num_labels):
        raise ParseError(f"label out of range in {tok!r} (num_labels={num_labels})", line=lineno)
    return labels


def _parse_features(tokens: list[str], num_features: int, lineno: int, normalize: bool) -> SparseVector:
    idx: list[int] = []
    val: list[float] = []
    for tok in tokens:
        i, sep, v = tok.partition(":")
        if not sep:
            raise ParseError(f"bad feature token {tok!r}", line=lineno)
        try:
            i, v = int(i), float(v)
        except ValueError:
            raise ParseError(f"bad feature token {tok!r}", line=lineno) from None
        if not 0 <= i < num_features:
            raise ParseError(f"feature index {i} out of range (num_features={num_features})", line=lineno)
        if v != 0.0:
            idx.append(i)
            val.append(v)
    order = np.argsort(idx, kind="stable")
    indices = np.asarray(idx, dtype=np.int64)[order]
    values = np.asarray(val, dtype=np.float64)[order]
    if indices.size > 1 and np.any(np.diff(indices) == 0):
        raise ParseError("duplicate feature index", line=lineno)
    if normalize and values.size:
        values = values / np.linalg.norm(values)
    return SparseVector(indices, values, num_features)


def write_xc(ds: XcDataset, path):
    """Serialize in the same format ``parse_xc`` reads (round-trip safe)."""
    with open(path, "w") as fh:
        fh.write(f"{len(ds.samples)} {ds.num_features} {ds.num_labels}\n")
        for vec, labels in ds.samples:
            lab = ",".join(str(int(l)) for l in labels)
            feats = " ".join(f"{int(i)}:{v:.17g}" for i, v in zip(vec.indices, vec.values))
            fh.write(f"{lab} {feats}".rstrip() + "\n")


def build_skipgram(corpus_path, window: int = 2, max_vocab: int | None = None) -> XcDataset:
    """Skip-gram samples from a whitespace-tokenized corpus.

    The vocabulary keeps the ``max_vocab`` most frequent tokens (ties by
    first occurrence). Every corpus position whose center token is in the
    vocabulary emits one sample: a one-hot input for the center word, and
    the set of in-vocabulary tokens within ``window`` positions on either
    side as labels. Positions with no in-vocabulary context are dropped.
    """
    with open(corpus_path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValueError(f"empty corpus: {corpus_path}")
    counts = Counter(tokens)
    first_seen: dict[str, int] = {}
    for pos, tok in enumerate(tokens):
        if tok not in first_seen:
            first_seen[tok] = pos
    vocab = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    if max_vocab is not None:
        vocab = vocab[:max_vocab]
    tok2id = {t: i for i, t in enumerate(vocab)}
    v = len(vocab)

    ids = np.array([tok2id.get(t, -1) for t in tokens], dtype=np.int64)
    samples: list[tuple[SparseVector, np.ndarray]] = []
    n_dropped = 0
    one = np.ones(1)
    for pos in range(len(ids)):
        center = ids[pos]
        if center < 0:
            continue
        lo = max(0, pos - window)
        ctx = np.concatenate([ids[lo:pos], ids[pos + 1 : pos + 1 + window]])
        labels = np.unique(ctx[ctx >= 0])
        if labels.size == 0:
            n_dropped += 1
            continue
        samples.append((SparseVector(np.array([center]), one, v), labels))
    return XcDataset(v, v, samples, n_dropped, vocab=vocab)


def class_frequencies(ds: XcDataset) -> FrequencyTable:
    """Occurrence count per class: the number of samples containing it."""
    counts = np.zeros(ds.num_labels, dtype=np.int64)
    for _, labels in ds.samples:
        counts[labels] += 1
    return FrequencyTable(counts)


def batches(ds: XcDataset, batch_size: int, rng: np.random.Generator):
    """One shuffled epoch of batches; the last partial batch is emitted."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = rng.permutation(len(ds.samples))
    for start in range(0, order.size, batch_size):
        chunk = order[start : start + batch_size]
        yield Batch(
            inputs=[ds.samples[i][0] for i in chunk],
            labels=[ds.samples[i][1] for i in chunk],
        )


def train_test_split(ds: XcDataset, test_fraction: float, rng: np.random.Generator) -> tuple[XcDataset, XcDataset]:
    order = rng.permutation(len(ds.samples))
    n_test = int(round(test_fraction * len(ds.samples)))
    return ds.subset(order[n_test:]), ds.subset(order[:n_test])
