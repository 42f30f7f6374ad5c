"""Plain dense trainer used as a numerical oracle.

Implements the same model and update rule as the active-set path with
ordinary dense matrix algebra: full logits over every class, dense softmax
cross-entropy, dense backprop. Kept deliberately free of any hashing,
sampling, or active-set machinery so it can serve as an independent
reference for the full-softmax reduction check.

The optimizer matches the documented row-lazy rule: a parameter row whose
gradient is exactly zero in an iteration is skipped (no moment decay, no
step-count bump), and bias correction uses the row's own age.
"""

from __future__ import annotations

import numpy as np


class DenseReferenceTrainer:
    def __init__(self, w1, b1, w_out, b_out, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.w1 = np.array(w1, dtype=np.float64)
        self.b1 = np.array(b1, dtype=np.float64)
        self.w_out = np.array(w_out, dtype=np.float64)
        self.b_out = np.array(b_out, dtype=np.float64)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(getattr(self, k)) for k in ("w1", "b1", "w_out", "b_out")}
        self.v = {k: np.zeros_like(getattr(self, k)) for k in ("w1", "b1", "w_out", "b_out")}
        self.ages = {
            "w1": np.zeros(self.w1.shape[0], dtype=np.int64),
            "b1": 0,
            "w_out": np.zeros(self.w_out.shape[0], dtype=np.int64),
        }

    def forward(self, x_dense: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        hidden = np.maximum(x_dense @ self.w1 + self.b1, 0.0)
        logits = hidden @ self.w_out.T + self.b_out
        return hidden, logits

    def step(self, x_dense: np.ndarray, labels: list) -> float:
        """One full-softmax batch step; returns mean cross-entropy."""
        b = x_dense.shape[0]
        hidden, logits = self.forward(x_dense)
        zmax = logits.max(axis=1, keepdims=True)
        logz = zmax + np.log(np.exp(logits - zmax).sum(axis=1, keepdims=True))
        probs = np.exp(logits - logz)
        targets = np.zeros_like(probs)
        for i, y in enumerate(labels):
            y = np.asarray(y, dtype=np.int64)
            targets[i, y] = 1.0 / y.size
        loss = float(-(targets * (logits - logz)).sum() / b)
        dlogits = (probs - targets) / b

        g_w_out = dlogits.T @ hidden
        g_b_out = dlogits.sum(axis=0)
        dhidden = dlogits @ self.w_out
        dpre = dhidden * (hidden > 0.0)
        g_w1 = x_dense.T @ dpre
        g_b1 = dpre.sum(axis=0)

        self._row_lazy("w_out", g_w_out, g_b=("b_out", g_b_out))
        self._row_lazy("w1", g_w1)
        self._scalar_lazy("b1", g_b1)
        return loss

    def _row_lazy(self, key: str, grad: np.ndarray, g_b=None):
        live = np.any(grad != 0.0, axis=1)
        if g_b is not None:
            live |= g_b[1] != 0.0
        if not live.any():
            return
        self.ages[key][live] += 1
        t = self.ages[key][live]
        c1 = (1.0 - self.beta1 ** t)[:, None]
        c2 = (1.0 - self.beta2 ** t)[:, None]
        m = self.m[key]
        v = self.v[key]
        m[live] = self.beta1 * m[live] + (1 - self.beta1) * grad[live]
        v[live] = self.beta2 * v[live] + (1 - self.beta2) * grad[live] ** 2
        p = getattr(self, key)
        p[live] -= self.lr * (m[live] / c1) / (np.sqrt(v[live] / c2) + self.eps)
        if g_b is not None:
            bkey, gb = g_b
            mb, vb = self.m[bkey], self.v[bkey]
            mb[live] = self.beta1 * mb[live] + (1 - self.beta1) * gb[live]
            vb[live] = self.beta2 * vb[live] + (1 - self.beta2) * gb[live] ** 2
            pb = getattr(self, bkey)
            pb[live] -= self.lr * (mb[live] / c1[:, 0]) / (np.sqrt(vb[live] / c2[:, 0]) + self.eps)

    def _scalar_lazy(self, key: str, grad: np.ndarray):
        if not np.any(grad != 0.0):
            return
        self.ages[key] += 1
        t = self.ages[key]
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        m = self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * grad
        v = self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * grad ** 2
        p = getattr(self, key)
        p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
