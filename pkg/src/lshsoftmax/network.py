"""Sparse-input MLP with an active-set output layer.

The forward path computes a hidden embedding from the sparse input, scores
only the classes in the per-input active set, and trains with softmax
cross-entropy restricted to that set. Output rows outside the active set
are untouched bit-for-bit, which keeps the per-iteration cost proportional
to the active-set size instead of the number of classes.

The optimizer keeps adaptive moments per parameter row with a per-row step
counter, so a class row that is touched for the t-th time is bias-corrected
by its own age t. Rows whose aggregated gradient is exactly zero are
skipped entirely: no moment decay, no counter bump.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from lshsoftmax.metrics import MetricsRecord
from lshsoftmax.samplers import ActiveSet, NegativeSampler
from lshsoftmax.vectors import SparseVector


@dataclass
class NetworkParams:
    """Two-layer network: sparse input -> hidden relu -> per-class scores.

    Row i of ``w_out`` is the class vector of class i.
    """

    w1: np.ndarray      # (d_in, hidden)
    b1: np.ndarray      # (hidden,)
    w_out: np.ndarray   # (num_classes, hidden)
    b_out: np.ndarray   # (num_classes,)

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, num_classes: int, rng: np.random.Generator) -> "NetworkParams":
        lim1 = math.sqrt(6.0 / (input_dim + hidden_dim))
        lim2 = math.sqrt(6.0 / (hidden_dim + num_classes))
        return cls(
            w1=rng.uniform(-lim1, lim1, size=(input_dim, hidden_dim)),
            b1=np.zeros(hidden_dim),
            w_out=rng.uniform(-lim2, lim2, size=(num_classes, hidden_dim)),
            b_out=np.zeros(num_classes),
        )

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w_out.shape[0]


@dataclass
class AdamState:
    """Adaptive-moment state with per-row lazy bias correction."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_w1: np.ndarray = None
    v_w1: np.ndarray = None
    w1_steps: np.ndarray = None      # per input-feature row
    m_b1: np.ndarray = None
    v_b1: np.ndarray = None
    b1_steps: int = 0
    m_wout: np.ndarray = None
    v_wout: np.ndarray = None
    m_bout: np.ndarray = None
    v_bout: np.ndarray = None
    wout_steps: np.ndarray = None    # per class row, shared by w_out and b_out

    @classmethod
    def init(cls, params: NetworkParams, lr: float = 1e-4, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
            m_w1=np.zeros_like(params.w1), v_w1=np.zeros_like(params.w1),
            w1_steps=np.zeros(params.input_dim, dtype=np.int64),
            m_b1=np.zeros_like(params.b1), v_b1=np.zeros_like(params.b1),
            m_wout=np.zeros_like(params.w_out), v_wout=np.zeros_like(params.w_out),
            m_bout=np.zeros_like(params.b_out), v_bout=np.zeros_like(params.b_out),
            wout_steps=np.zeros(params.num_classes, dtype=np.int64),
        )

    def update_output_rows(self, params: NetworkParams, rows: np.ndarray,
                           g_w: np.ndarray, g_b: np.ndarray):
        """Apply one moment update to the given class rows (and biases)."""
        live = np.any(g_w != 0.0, axis=1) | (g_b != 0.0)
        if not live.all():
            rows, g_w, g_b = rows[live], g_w[live], g_b[live]
        if rows.size == 0:
            return
        self.wout_steps[rows] += 1
        t = self.wout_steps[rows]
        c1 = 1.0 - np.power(self.beta1, t)
        c2 = 1.0 - np.power(self.beta2, t)
        m = self.m_wout[rows] = self.beta1 * self.m_wout[rows] + (1 - self.beta1) * g_w
        v = self.v_wout[rows] = self.beta2 * self.v_wout[rows] + (1 - self.beta2) * g_w**2
        params.w_out[rows] -= self.lr * (m / c1[:, None]) / (np.sqrt(v / c2[:, None]) + self.eps)
        mb = self.m_bout[rows] = self.beta1 * self.m_bout[rows] + (1 - self.beta1) * g_b
        vb = self.v_bout[rows] = self.beta2 * self.v_bout[rows] + (1 - self.beta2) * g_b**2
        params.b_out[rows] -= self.lr * (mb / c1) / (np.sqrt(vb / c2) + self.eps)

    def update_input_rows(self, params: NetworkParams, rows: np.ndarray, g_w: np.ndarray):
        live = np.any(g_w != 0.0, axis=1)
        if not live.all():
            rows, g_w = rows[live], g_w[live]
        if rows.size == 0:
            return
        self.w1_steps[rows] += 1
        t = self.w1_steps[rows]
        c1 = 1.0 - np.power(self.beta1, t)
        c2 = 1.0 - np.power(self.beta2, t)
        m = self.m_w1[rows] = self.beta1 * self.m_w1[rows] + (1 - self.beta1) * g_w
        v = self.v_w1[rows] = self.beta2 * self.v_w1[rows] + (1 - self.beta2) * g_w**2
        params.w1[rows] -= self.lr * (m / c1[:, None]) / (np.sqrt(v / c2[:, None]) + self.eps)

    def update_hidden_bias(self, params: NetworkParams, g_b: np.ndarray):
        if not np.any(g_b != 0.0):
            return
        self.b1_steps += 1
        c1 = 1.0 - self.beta1**self.b1_steps
        c2 = 1.0 - self.beta2**self.b1_steps
        m = self.m_b1 = self.beta1 * self.m_b1 + (1 - self.beta1) * g_b
        v = self.v_b1 = self.beta2 * self.v_b1 + (1 - self.beta2) * g_b**2
        params.b1 -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class UpdateSchedule:
    """When to refresh the hash tables: first at ``initial_period``, then at
    intervals that grow by ``gamma`` after every refresh."""

    initial_period: int = 50
    gamma: float = 1.05
    period: float = field(default=None)
    next_update: int = field(default=None)

    def __post_init__(self):
        if self.initial_period < 1:
            raise ValueError("initial_period must be >= 1")
        if self.gamma < 1.0:
            raise ValueError("gamma must be >= 1")
        if self.period is None:
            self.period = float(self.initial_period)
        if self.next_update is None:
            self.next_update = self.initial_period

    def advance(self):
        self.period *= self.gamma
        self.next_update += math.ceil(self.period)


# -- forward / backward ops -------------------------------------------------


def forward_embedding(x: SparseVector, params: NetworkParams) -> np.ndarray:
    """Hidden embedding relu(W1^T x + b1), touching only the nonzeros of x."""
    if x.nnz == 0:
        pre = params.b1.copy()
    else:
        pre = x.values @ params.w1[x.indices] + params.b1
    return np.maximum(pre, 0.0)


def forward_output_active(e: np.ndarray, active: ActiveSet, params: NetworkParams) -> np.ndarray:
    """Scores of the active classes only; every other class is implicitly zero."""
    logits = params.w_out[active.ids] @ e + params.b_out[active.ids]
    if active.logit_adjust is not None:
        logits = logits - active.logit_adjust
    return logits


def softmax_ce_active(logits: np.ndarray, active: ActiveSet) -> tuple[float, np.ndarray]:
    """Cross-entropy over the active subset with normalized multi-hot targets.

    Targets put mass 1/|true| on each true label. Returns (loss, dlogits).
    """
    assert active.true_mask.any(), "active set lost its true labels"
    z = logits - logits.max()
    log_probs = z - np.log(np.exp(z).sum())
    targets = active.true_mask / active.true_mask.sum()
    loss = float(-(targets * log_probs).sum())
    dlogits = np.exp(log_probs) - targets
    return loss, dlogits


def backward_update(
    x: SparseVector,
    e: np.ndarray,
    dlogits: np.ndarray,
    active: ActiveSet,
    params: NetworkParams,
    adam: AdamState,
):
    """Single-sample gradient step restricted to the active rows.

    Gradients flow to the active w_out rows (plus biases) and to the w1
    rows of the input's nonzero features; everything else is untouched.
    """
    adam.step += 1
    g_w_out = np.outer(dlogits, e)
    de = params.w_out[active.ids].T @ dlogits
    dpre = de * (e > 0.0)
    adam.update_output_rows(params, active.ids, g_w_out, dlogits)
    if x.nnz:
        adam.update_input_rows(params, x.indices, np.outer(x.values, dpre))
    adam.update_hidden_bias(params, dpre)


# -- training loop ------------------------------------------------------------


def to_csr(inputs: list[SparseVector], num_features: int) -> sp.csr_matrix:
    indptr = np.zeros(len(inputs) + 1, dtype=np.int64)
    for i, v in enumerate(inputs):
        indptr[i + 1] = indptr[i] + v.nnz
    indices = np.concatenate([v.indices for v in inputs]) if inputs else np.empty(0, dtype=np.int64)
    data = np.concatenate([v.values for v in inputs]) if inputs else np.empty(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(inputs), num_features))


def maybe_update_tables(step: int, schedule: UpdateSchedule | None, touched: np.ndarray,
                        tables, params: NetworkParams) -> int:
    """Refresh stale table entries at scheduled steps.

    At a scheduled step, every class touched since the last refresh is
    re-inserted with its current weight row; if more than 20% of all
    classes were touched a full rebuild is cheaper and is used instead.
    Returns the number of per-id updates performed (0 on rebuild or no-op).
    """
    if tables is None or schedule is None or step != schedule.next_update:
        return 0
    ids = np.flatnonzero(touched)
    n_updates = 0
    if ids.size > 0.2 * params.num_classes:
        tables.rebuild(np.arange(params.num_classes), params.w_out)
    else:
        for cid in ids:
            tables.update(int(cid), params.w_out[cid])
        n_updates = int(ids.size)
    touched[:] = False
    schedule.advance()
    return n_updates


class Trainer:
    """Epoch/batch training loop with pluggable negative sampling.

    Within a batch, per-sample gradient contributions to the same class row
    are summed and applied as one moment update. Table refreshes run
    between iterations, never concurrently with sampling.
    """

    def __init__(
        self,
        params: NetworkParams,
        sampler: NegativeSampler,
        adam: AdamState,
        *,
        tables=None,
        schedule: UpdateSchedule | None = None,
        batch_size: int = 256,
        shuffle_rng: np.random.Generator | None = None,
        eval_every: int = 100,
        eval_k: int = 5,
        clock: str = "real",
    ):
        if sampler.needs_tables and tables is None:
            raise ValueError(f"sampler {sampler.kind.name} needs built tables")
        if clock not in ("real", "iteration"):
            raise ValueError(f"clock must be 'real' or 'iteration', got {clock!r}")
        self.params = params
        self.sampler = sampler
        self.adam = adam
        self.tables = tables
        self.schedule = schedule if tables is not None else None
        self.batch_size = batch_size
        self.shuffle_rng = shuffle_rng or np.random.default_rng(0)
        self.eval_every = eval_every
        self.eval_k = eval_k
        self.clock = clock
        self.iteration = 0
        self.touched = np.zeros(params.num_classes, dtype=bool)
        self._eval_time = 0.0
        self._start = None

    # -- batched forward/backward ------------------------------------------

    def batch_embeddings(self, x_csr: sp.csr_matrix) -> np.ndarray:
        return np.maximum(x_csr @ self.params.w1 + self.params.b1, 0.0)

    def _batch_active_sets(self, labels: list[np.ndarray], embeddings: np.ndarray) -> list[ActiveSet]:
        name = self.sampler.kind.name
        if name == "lns_label":
            rng = self.sampler.rng
            stars = np.array(
                [int(y[rng.integers(len(y))]) for y in labels], dtype=np.int64
            )
            cand_lists = self.tables.query_many(self.params.w_out[stars])
            return [
                self.sampler.active_set(y, candidates=np.setdiff1d(c, y))
                for y, c in zip(labels, cand_lists)
            ]
        if name == "lns_embedding":
            live = embeddings.any(axis=1)
            cand_lists: list[np.ndarray | None] = [None] * len(labels)
            if live.any():
                for i, c in zip(np.flatnonzero(live), self.tables.query_many(embeddings[live])):
                    cand_lists[i] = np.setdiff1d(c, labels[i])
            out = []
            for i, y in enumerate(labels):
                if cand_lists[i] is None:
                    out.append(self.sampler.active_set(y, embedding=embeddings[i], tables=self.tables))
                else:
                    out.append(self.sampler.active_set(y, candidates=cand_lists[i]))
            return out
        if name == "top_k":
            full = embeddings @ self.params.w_out.T + self.params.b_out
            return [self.sampler.active_set(y, full_logits=full[i]) for i, y in enumerate(labels)]
        return [
            self.sampler.active_set(
                y, embedding=embeddings[i], weights=self.params.w_out, tables=self.tables
            )
            for i, y in enumerate(labels)
        ]

    def train_step(self, inputs: list[SparseVector], labels: list[np.ndarray]) -> float:
        """One iteration over a batch; returns the mean sample loss."""
        p = self.params
        b = len(inputs)
        x_csr = to_csr(inputs, p.input_dim)
        E = self.batch_embeddings(x_csr)

        if self.sampler.kind.name == "full":
            union = np.arange(p.num_classes, dtype=np.int64)
            mask = np.ones((b, p.num_classes), dtype=bool)
            positions = [np.asarray(y, dtype=np.int64) for y in labels]
            adjust = None
        else:
            actives = self._batch_active_sets(labels, E)
            union = np.unique(np.concatenate([a.ids for a in actives]))
            mask = np.zeros((b, union.size), dtype=bool)
            adjust = np.zeros((b, union.size)) if any(
                a.logit_adjust is not None for a in actives
            ) else None
            positions = []
            for i, a in enumerate(actives):
                pos = np.searchsorted(union, a.ids)
                mask[i, pos] = True
                if adjust is not None and a.logit_adjust is not None:
                    adjust[i, pos] = a.logit_adjust
                positions.append(pos[a.true_mask])

        logits = E @ p.w_out[union].T + p.b_out[union]
        if adjust is not None:
            logits = logits - adjust
        neg_inf = np.finfo(np.float64).min
        masked = np.where(mask, logits, neg_inf)
        zmax = masked.max(axis=1, keepdims=True)
        expz = np.where(mask, np.exp(masked - zmax), 0.0)
        zsum = expz.sum(axis=1, keepdims=True)
        probs = expz / zsum

        targets = np.zeros_like(probs)
        rows = np.repeat(np.arange(b), [len(pos) for pos in positions])
        cols = np.concatenate(positions)
        weights_t = np.concatenate([np.full(len(pos), 1.0 / len(pos)) for pos in positions])
        targets[rows, cols] = weights_t

        log_probs = (masked - zmax) - np.log(zsum)
        loss = float(-(targets * np.where(mask, log_probs, 0.0)).sum() / b)
        dlogits = (probs - targets) / b

        # backward
        g_w_out = dlogits.T @ E
        g_b_out = dlogits.sum(axis=0)
        de = dlogits @ p.w_out[union]
        dpre = de * (E > 0.0)
        g_w1_full = (x_csr.T @ dpre)
        feat_rows = np.unique(x_csr.indices) if x_csr.nnz else np.empty(0, dtype=np.int64)
        g_b1 = dpre.sum(axis=0)

        self.adam.step += 1
        self.adam.update_output_rows(p, union, g_w_out, g_b_out)
        if feat_rows.size:
            self.adam.update_input_rows(p, feat_rows, np.asarray(g_w1_full[feat_rows]))
        self.adam.update_hidden_bias(p, g_b1)

        self.touched[union] = True
        self.iteration += 1
        maybe_update_tables(self.iteration, self.schedule, self.touched, self.tables, p)
        return loss

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, eval_csr: sp.csr_matrix, eval_labels: list[np.ndarray], k: int) -> tuple[float, float]:
        """Full-scoring precision@1 and @k; sampling never affects evaluation."""
        E = self.batch_embeddings(eval_csr)
        scores = E @ self.params.w_out.T + self.params.b_out
        hits1 = hitsk = 0
        n = 0
        for i, truth in enumerate(eval_labels):
            if len(truth) == 0:
                continue
            n += 1
            order = np.argsort(-scores[i], kind="stable")[:k]
            tset = set(int(t) for t in truth)
            if int(order[0]) in tset:
                hits1 += 1
            hitsk += len(tset.intersection(int(o) for o in order)) / k
        if n == 0:
            return float("nan"), float("nan")
        return hits1 / n, hitsk / n

    # -- driver ----------------------------------------------------------------

    def run(
        self,
        dataset,
        epochs: int,
        *,
        eval_dataset=None,
        eval_max_samples: int = 2000,
        writer=None,
        log_every: int | None = None,
    ) -> list[MetricsRecord]:
        """Train for ``epochs`` passes, recording metrics at the eval cadence.

        Wall-clock excludes evaluation time. With ``clock='iteration'`` the
        wall-clock column carries the iteration index instead, which makes
        metrics files byte-reproducible for determinism checks.
        """
        from lshsoftmax.data import batches  # local import to avoid a cycle

        records: list[MetricsRecord] = []
        eval_csr = eval_labels = None
        if eval_dataset is not None and len(eval_dataset) > 0:
            samples = eval_dataset.samples[:eval_max_samples]
            eval_csr = to_csr([s for s, _ in samples], self.params.input_dim)
            eval_labels = [y for _, y in samples]

        self._start = time.perf_counter()
        self._eval_time = 0.0
        loss_window: list[float] = []

        def emit():
            if eval_csr is None:
                p1 = pk = float("nan")
            else:
                t0 = time.perf_counter()
                p1, pk = self.evaluate(eval_csr, eval_labels, self.eval_k)
                self._eval_time += time.perf_counter() - t0
            wall = (
                float(self.iteration)
                if self.clock == "iteration"
                else time.perf_counter() - self._start - self._eval_time
            )
            rec = MetricsRecord(
                iteration=self.iteration,
                wall_clock_s=wall,
                train_loss=float(np.mean(loss_window)) if loss_window else float("nan"),
                p_at_1=p1,
                p_at_k=pk,
            )
            records.append(rec)
            if writer is not None:
                writer.write(rec)
            loss_window.clear()
            return rec

        for _ in range(epochs):
            for batch in batches(dataset, self.batch_size, self.shuffle_rng):
                loss = self.train_step(batch.inputs, batch.labels)
                loss_window.append(loss)
                if self.iteration % self.eval_every == 0:
                    rec = emit()
                    if log_every and self.iteration % log_every == 0:
                        print(
                            f"iter {rec.iteration:6d} loss {rec.train_loss:.4f} "
                            f"p@1 {rec.p_at_1:.4f}"
                        )
        if epochs > 0 and (not records or records[-1].iteration != self.iteration):
            emit()
        return records
