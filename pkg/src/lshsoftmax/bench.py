"""Benchmark probes: sampling-distribution adaptivity, query-cost scaling,
and the brute-force similarity oracle used by tests.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from lshsoftmax.hashes import SimHashFamily
from lshsoftmax.network import NetworkParams, forward_embedding
from lshsoftmax.samplers import sample_uniform
from lshsoftmax.tables import LshTables

ADAPTIVITY_HEADER = ["iteration", "class_id", "target_mass", "empirical_mass"]


@dataclass
class AdaptivityReport:
    """Sampler distribution vs the full-softmax target at one snapshot.

    ``target_mass`` is the softmax over all class logits with true classes
    removed and renormalized, averaged over the probe inputs.
    ``empirical_mass`` is the frequency of each class over all sampler
    draws. Both sum to one.
    """

    iteration: int
    target_mass: np.ndarray
    empirical_mass: np.ndarray
    tv_uniform: float
    tv_target: float
    n_draws: int


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def adaptivity_probe(
    params: NetworkParams,
    probe_samples,
    sampler_kind: str,
    *,
    k: int,
    l: int,
    capacity: int | None,
    n_samples: int,
    draws_per_input: int = 200,
    seed: int = 0,
    iteration: int = 0,
) -> AdaptivityReport:
    """Measure the sampler's marginal class distribution on probe inputs.

    For every draw the hash tables are rebuilt with a fresh seed over the
    current output weights, exposing the hash randomness that the
    closed-form retrieval probability averages over; each probe input then
    contributes one sampler invocation. The uniform control draws
    ``n_samples`` ids per invocation instead of querying tables.
    """
    if sampler_kind not in ("lns_label", "lns_embedding", "uniform"):
        raise ValueError(f"unsupported probe sampler {sampler_kind!r}")
    n = params.num_classes
    rng = np.random.default_rng(seed)
    counts = np.zeros(n, dtype=np.int64)
    embeddings = [forward_embedding(x, params) for x, _ in probe_samples]
    truths = [np.asarray(y, dtype=np.int64) for _, y in probe_samples]

    for draw in range(draws_per_input):
        tables = None
        if sampler_kind != "uniform":
            family = SimHashFamily(params.hidden_dim, k, l, seed=int(rng.integers(2**63)))
            tables = LshTables.build(
                (np.arange(n), params.w_out), family, capacity=capacity,
                seed=int(rng.integers(2**63)),
            )
        for e, y in zip(embeddings, truths):
            if sampler_kind == "uniform":
                got = sample_uniform(n_samples, n, y, rng)
            elif sampler_kind == "lns_label":
                y_star = int(y[rng.integers(y.size)])
                got = np.setdiff1d(tables.query(params.w_out[y_star]), y)
            else:
                got = np.setdiff1d(tables.query(e), y)
            counts[got] += 1

    total = int(counts.sum())
    empirical = counts / total if total else np.full(n, 1.0 / n)

    target = np.zeros(n)
    for e, y in zip(embeddings, truths):
        logits = params.w_out @ e + params.b_out
        logits[y] = -np.inf
        z = logits - logits.max()
        mass = np.exp(z)
        target += mass / mass.sum()
    target /= len(probe_samples)

    uniform = np.full(n, 1.0 / n)
    return AdaptivityReport(
        iteration=iteration,
        target_mass=target,
        empirical_mass=empirical,
        tv_uniform=tv_distance(empirical, uniform),
        tv_target=tv_distance(empirical, target),
        n_draws=total,
    )


def write_adaptivity_csv(report: AdaptivityReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ADAPTIVITY_HEADER)
        for cid in range(report.target_mass.size):
            w.writerow(
                [report.iteration, cid,
                 repr(float(report.target_mass[cid])),
                 repr(float(report.empirical_mass[cid]))]
            )


@dataclass
class ScalingRow:
    num_classes: int
    mean_query_s: float
    hash_evals_per_query: int


def query_cost_scaling(
    dim: int,
    class_counts,
    *,
    k: int,
    l: int,
    capacity: int | None = 128,
    n_queries: int = 10000,
    seed: int = 0,
) -> list[ScalingRow]:
    """Mean query latency and exact hash-evaluation counts at several store
    sizes, with identical (K, L, capacity) throughout. Hash evaluations per
    query are K*L by construction; latency should stay flat as the store
    grows because a query touches at most L*capacity ids."""
    rows = []
    rng = np.random.default_rng(seed)
    for n in class_counts:
        family = SimHashFamily(dim, k, l, seed=int(rng.integers(2**63)))
        mat = rng.standard_normal((int(n), dim))
        tables = LshTables.build((np.arange(int(n)), mat), family, capacity=capacity,
                                 seed=int(rng.integers(2**63)))
        queries = rng.standard_normal((n_queries, dim))
        evals_before = tables.n_hash_evals
        t0 = time.perf_counter()
        for i in range(n_queries):
            tables.query(queries[i])
        elapsed = time.perf_counter() - t0
        per_query_evals = (tables.n_hash_evals - evals_before) // n_queries
        rows.append(ScalingRow(int(n), elapsed / n_queries, int(per_query_evals)))
    return rows


def write_scaling_csv(rows: list[ScalingRow], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["num_classes", "mean_query_s", "hash_evals_per_query"])
        for r in rows:
            w.writerow([r.num_classes, repr(r.mean_query_s), r.hash_evals_per_query])


def brute_force_similar(query, vectors: np.ndarray, metric: str, k: int) -> np.ndarray:
    """Exact top-k ids of ``vectors`` by similarity to ``query``.

    ``metric`` is one of cosine, inner_product, rank_agreement (hyphens
    accepted). Ties break toward the lower id. O(n d) scan plus a sort:
    this is the oracle the sub-linear paths are tested against.
    """
    metric = metric.replace("-", "_")
    vectors = np.asarray(vectors, dtype=np.float64)
    q = np.asarray(query, dtype=np.float64)
    if metric == "inner_product":
        scores = vectors @ q
    elif metric == "cosine":
        norms = np.linalg.norm(vectors, axis=1) * np.linalg.norm(q)
        scores = np.divide(vectors @ q, norms, out=np.zeros(len(vectors)), where=norms > 0)
    elif metric == "rank_agreement":
        qr = rankdata(q)
        qc = qr - qr.mean()
        scores = np.empty(len(vectors))
        for i, row in enumerate(vectors):
            rr = rankdata(row)
            rc = rr - rr.mean()
            denom = np.linalg.norm(qc) * np.linalg.norm(rc)
            scores[i] = (qc @ rc) / denom if denom > 0 else 0.0
    else:
        raise ValueError(f"unknown metric {metric!r}")
    if k < 1 or k > len(vectors):
        raise ValueError(f"k must lie in [1, {len(vectors)}], got {k}")
    return np.argsort(-scores, kind="stable")[:k]
