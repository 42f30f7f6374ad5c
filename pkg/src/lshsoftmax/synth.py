"""Synthetic desk-scale tasks for benchmarks and acceptance experiments.

``planted_clusters`` builds a classification task whose classes form known
clusters: same-cluster classes are the confusable ("hard") negatives, so
the task exercises exactly the behavior adaptive negative sampling is
supposed to buy. ``clustered_corpus`` builds a Zipfian text corpus with
topical co-occurrence structure for the skip-gram path.
"""

from __future__ import annotations

import numpy as np

from lshsoftmax.data import XcDataset
from lshsoftmax.vectors import SparseVector


def planted_prototypes(
    num_classes: int,
    num_clusters: int,
    dim: int,
    rng: np.random.Generator,
    cluster_spread: float = 0.35,
) -> np.ndarray:
    """Unit-norm class prototypes grouped into ``num_clusters`` clusters.

    Within a cluster, prototypes share a center plus a spread term, so
    same-cluster prototypes have high mutual cosine similarity.
    """
    centers = rng.standard_normal((num_clusters, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    assign = np.arange(num_classes) % num_clusters
    protos = centers[assign] + cluster_spread * rng.standard_normal((num_classes, dim))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    return protos


def planted_clusters(
    num_classes: int = 1000,
    num_clusters: int = 10,
    dim: int = 64,
    num_samples: int = 20000,
    sample_noise: float = 0.25,
    cluster_spread: float = 0.35,
    seed: int = 0,
) -> tuple[XcDataset, np.ndarray]:
    """Single-label dataset: each sample is a noisy copy of one prototype.

    Returns the dataset and the (num_classes, dim) prototype matrix.
    """
    rng = np.random.default_rng(seed)
    protos = planted_prototypes(num_classes, num_clusters, dim, rng, cluster_spread)
    classes = rng.integers(num_classes, size=num_samples)
    noise = sample_noise * rng.standard_normal((num_samples, dim))
    xs = protos[classes] + noise
    samples = []
    all_idx = np.arange(dim, dtype=np.int64)
    for i in range(num_samples):
        row = xs[i]
        keep = row != 0.0
        samples.append(
            (SparseVector(all_idx[keep], row[keep], dim), np.array([classes[i]], dtype=np.int64))
        )
    return XcDataset(dim, num_classes, samples), protos


def clustered_corpus(
    num_tokens: int = 200000,
    vocab_size: int = 5000,
    num_topics: int = 20,
    stay_prob: float = 0.995,
    zipf_exponent: float = 1.05,
    seed: int = 0,
) -> str:
    """Whitespace-joined synthetic corpus with topical structure.

    A hidden topic performs a sticky random walk; each topic owns a
    Zipfian distribution over its own slice of the vocabulary plus a small
    shared-background mass. Nearby tokens therefore tend to come from the
    same topic slice, giving skip-gram training real co-occurrence
    clusters to learn.
    """
    rng = np.random.default_rng(seed)
    per_topic = vocab_size // num_topics
    ranks = np.arange(1, per_topic + 1, dtype=np.float64)
    topic_mass = ranks ** (-zipf_exponent)
    topic_mass /= topic_mass.sum()

    background = rng.permutation(vocab_size)
    out = np.empty(num_tokens, dtype=np.int64)
    topic = int(rng.integers(num_topics))
    for pos in range(num_tokens):
        if rng.random() >= stay_prob:
            topic = int(rng.integers(num_topics))
        if rng.random() < 0.05:
            out[pos] = background[int(rng.integers(vocab_size))]
        else:
            r = int(rng.choice(per_topic, p=topic_mass))
            out[pos] = topic * per_topic + r
    return " ".join(f"w{t:05d}" for t in out)
