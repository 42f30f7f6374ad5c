"""Precision metrics and the streaming metrics CSV.

The CSV schema is fixed: ``iteration,wall_clock_s,train_loss,p_at_1,p_at_k``
with one row per evaluation point, flushed per record so a crashed run
still leaves a usable file.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

CSV_HEADER = ["iteration", "wall_clock_s", "train_loss", "p_at_1", "p_at_k"]


@dataclass
class MetricsRecord:
    iteration: int
    wall_clock_s: float
    train_loss: float
    p_at_1: float
    p_at_k: float | None = None


def precision_at_k(scores: np.ndarray, truth, k: int) -> float:
    """|top-k of scores that are true| / k, ties broken toward lower id.

    ``scores`` must rank the full class universe: evaluation always scores
    every class, whatever sampler trained the model.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if k < 1 or k > scores.size:
        raise ValueError(f"k must lie in [1, {scores.size}], got {k}")
    top = np.argsort(-scores, kind="stable")[:k]
    tset = set(int(t) for t in truth)
    return sum(1 for c in top if int(c) in tset) / k


class MetricsWriter:
    """Append-safe streaming writer; one file handle per run."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_HEADER)
        self._fh.flush()

    def write(self, rec: MetricsRecord):
        pk = "" if rec.p_at_k is None or (isinstance(rec.p_at_k, float) and math.isnan(rec.p_at_k)) else repr(float(rec.p_at_k))
        p1 = "" if isinstance(rec.p_at_1, float) and math.isnan(rec.p_at_1) else repr(float(rec.p_at_1))
        self._writer.writerow(
            [rec.iteration, repr(float(rec.wall_clock_s)), repr(float(rec.train_loss)), p1, pk]
        )
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def emit_metrics(records, path):
    """Write a full record list to ``path`` in the standard schema."""
    with MetricsWriter(path) as w:
        for rec in records:
            w.write(rec)


def read_metrics(path) -> list[MetricsRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected metrics header {reader.fieldnames}")
        for row in reader:
            out.append(
                MetricsRecord(
                    iteration=int(row["iteration"]),
                    wall_clock_s=float(row["wall_clock_s"]),
                    train_loss=float(row["train_loss"]) if row["train_loss"] else float("nan"),
                    p_at_1=float(row["p_at_1"]) if row["p_at_1"] else float("nan"),
                    p_at_k=float(row["p_at_k"]) if row["p_at_k"] else None,
                )
            )
    return out
