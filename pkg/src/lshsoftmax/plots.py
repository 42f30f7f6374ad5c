"""Figure rendering for run artifacts.

Each renderer takes a delimited report produced by the harness and writes
a PNG next to it (or to an explicit path). Figures are a convenience view
of the CSVs, which remain the interface of record.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from lshsoftmax.metrics import read_metrics


def _sibling_png(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".png")


def plot_metrics(csv_path, out_png=None) -> Path:
    """Loss and precision learning curves: vs iteration and vs wall-clock."""
    records = read_metrics(csv_path)
    out = Path(out_png) if out_png else _sibling_png(csv_path)
    it = [r.iteration for r in records]
    wall = [r.wall_clock_s for r in records]
    loss = [r.train_loss for r in records]
    p1 = [r.p_at_1 for r in records]

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
    axes[0].plot(it, loss, marker=".", color="tab:red")
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("train loss")
    axes[1].plot(it, p1, marker=".", color="tab:blue")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("P@1")
    axes[2].plot(wall, p1, marker=".", color="tab:green")
    axes[2].set_xlabel("wall clock (s)")
    axes[2].set_ylabel("P@1")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_adaptivity(csv_path, out_png=None, tv_uniform=None, tv_target=None) -> Path:
    """Target vs empirical sampling mass, classes sorted by target mass."""
    out = Path(out_png) if out_png else _sibling_png(csv_path)
    target, empirical = [], []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            target.append(float(row["target_mass"]))
            empirical.append(float(row["empirical_mass"]))
    target = np.asarray(target)
    empirical = np.asarray(empirical)
    order = np.argsort(-target)
    n = target.size

    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.plot(target[order], label="target (full softmax)", color="tab:red")
    ax.plot(empirical[order], label="sampler empirical", color="tab:blue", alpha=0.7)
    ax.axhline(1.0 / n, color="gray", linestyle="--", label="uniform")
    ax.set_yscale("log")
    ax.set_xlabel("class (sorted by target mass)")
    ax.set_ylabel("probability mass")
    title = "sampling distribution"
    if tv_uniform is not None and tv_target is not None:
        title += f"  TV(emp,unif)={tv_uniform:.3f}  TV(emp,target)={tv_target:.3f}"
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_scaling(rows, out_png) -> Path:
    """Query latency and hash-evaluation count against store size."""
    out = Path(out_png)
    ns = [r.num_classes for r in rows]
    lat = [r.mean_query_s * 1e6 for r in rows]
    evals = [r.hash_evals_per_query for r in rows]

    fig, axes = plt.subplots(1, 2, figsize=(8.5, 3.2))
    axes[0].plot(ns, lat, marker="o", color="tab:blue")
    axes[0].set_xscale("log")
    axes[0].set_xlabel("stored classes")
    axes[0].set_ylabel("mean query latency (us)")
    axes[1].plot(ns, evals, marker="s", color="tab:orange")
    axes[1].set_xscale("log")
    axes[1].set_xlabel("stored classes")
    axes[1].set_ylabel("hash evals per query")
    axes[1].set_ylim(0, max(evals) * 1.5)
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
