"""Binds a validated config to datasets, trainer, benchmark, and probe runs,
and writes the run artifacts (CSV reports, figures, checkpoint, config echo).
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from lshsoftmax import bench, plots
from lshsoftmax.checkpoint import load_checkpoint, save_checkpoint
from lshsoftmax.config import RunConfig
from lshsoftmax.data import (XcDataset, build_skipgram, class_frequencies,
                             parse_xc, train_test_split)
from lshsoftmax.hashes import DwtaFamily, SimHashFamily
from lshsoftmax.metrics import MetricsWriter
from lshsoftmax.network import AdamState, NetworkParams, Trainer, UpdateSchedule, to_csr
from lshsoftmax.samplers import NegativeSampler, SamplerKind
from lshsoftmax.synth import planted_clusters
from lshsoftmax.tables import LshTables


def load_datasets(cfg: RunConfig) -> tuple[XcDataset, XcDataset]:
    """(train, test) per the [data] section."""
    d = cfg["data"]
    if d["kind"] == "planted":
        ds, _ = planted_clusters(
            num_classes=d["planted_classes"],
            num_clusters=d["planted_clusters"],
            dim=d["planted_dim"],
            num_samples=d["planted_samples"],
            sample_noise=d["planted_noise"],
            cluster_spread=d["planted_spread"],
            seed=int(cfg.rng("data").integers(2**63)),
        )
        return train_test_split(ds, d["test_fraction"], cfg.rng("split"))
    if d["kind"] == "xc":
        train = parse_xc(d["path"], normalize=d["normalize"])
        if d["test_path"]:
            return train, parse_xc(d["test_path"], normalize=d["normalize"])
        return train_test_split(train, d["test_fraction"], cfg.rng("split"))
    ds = build_skipgram(d["path"], window=d["window"], max_vocab=d["max_vocab"])
    return train_test_split(ds, d["test_fraction"], cfg.rng("split"))


def build_hash_family(cfg: RunConfig, dim: int):
    h = cfg["hash"]
    seed = int(cfg.rng("hash").integers(2**63))
    if h["family"] == "simhash":
        return SimHashFamily(dim, h["k"], h["l"], seed=seed)
    return DwtaFamily(dim, h["k"], h["l"], h["m"], seed=seed)


def build_trainer(cfg: RunConfig, train_ds: XcDataset, params: NetworkParams | None = None) -> Trainer:
    t = cfg["train"]
    s = cfg["sampler"]
    o = cfg["optimizer"]
    num_classes = train_ds.num_labels
    if params is None:
        params = NetworkParams.init(
            train_ds.num_features, cfg["model"]["hidden_dim"], num_classes, cfg.rng("init")
        )
    kind = SamplerKind(s["kind"], n_samples=s["n_samples"], k=s["top_k"])
    freq = class_frequencies(train_ds) if kind.name == "frequency" else None
    sampler = NegativeSampler(
        kind, num_classes, cfg.rng("sampler"), freq=freq,
        logit_correction=s["logit_correction"],
    )
    tables = schedule = None
    if sampler.needs_tables:
        family = build_hash_family(cfg, params.hidden_dim)
        capacity = cfg["hash"]["capacity"] or None
        tables = LshTables.build(
            (np.arange(num_classes), params.w_out), family, capacity=capacity,
            seed=int(cfg.rng("tables").integers(2**63)),
        )
        schedule = UpdateSchedule(cfg["schedule"]["initial_period"], cfg["schedule"]["gamma"])
    adam = AdamState.init(params, lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"])
    return Trainer(
        params, sampler, adam, tables=tables, schedule=schedule,
        batch_size=t["batch_size"], shuffle_rng=cfg.rng("shuffle"),
        eval_every=t["eval_every"], eval_k=t["eval_k"], clock=cfg["run"]["clock"],
    )


def run_train(cfg: RunConfig, log_every: int | None = None) -> dict:
    out_dir = Path(cfg["run"]["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.echo(out_dir)
    train_ds, test_ds = load_datasets(cfg)
    trainer = build_trainer(cfg, train_ds)
    metrics_path = out_dir / "metrics.csv"
    t0 = time.perf_counter()
    with MetricsWriter(metrics_path) as writer:
        records = trainer.run(
            train_ds, cfg["train"]["epochs"],
            eval_dataset=test_ds, eval_max_samples=cfg["train"]["eval_max_samples"],
            writer=writer, log_every=log_every,
        )
    total_s = time.perf_counter() - t0
    ckpt_path = out_dir / "checkpoint.npz"
    save_checkpoint(
        ckpt_path, trainer.params, trainer.adam,
        trainer.schedule or UpdateSchedule(cfg["schedule"]["initial_period"], cfg["schedule"]["gamma"]),
        cfg["run"]["seed"], trainer.iteration,
    )
    if records:
        plots.plot_metrics(metrics_path)
    final_p1 = records[-1].p_at_1 if records else float("nan")
    return {
        "metrics": metrics_path,
        "checkpoint": ckpt_path,
        "final_p_at_1": final_p1,
        "iterations": trainer.iteration,
        "wall_clock_s": total_s,
        "records": records,
    }


def run_bench_query(cfg: RunConfig, class_counts, n_queries: int = 10000) -> list[bench.ScalingRow]:
    out_dir = Path(cfg["run"]["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = bench.query_cost_scaling(
        cfg["model"]["hidden_dim"], class_counts,
        k=cfg["hash"]["k"], l=cfg["hash"]["l"],
        capacity=cfg["hash"]["capacity"] or None,
        n_queries=n_queries, seed=cfg["run"]["seed"],
    )
    csv_path = out_dir / "scaling.csv"
    bench.write_scaling_csv(rows, csv_path)
    plots.plot_scaling(rows, out_dir / "scaling.png")
    return rows


def run_probe(cfg: RunConfig, checkpoint_path, draws: int = 200,
              n_probe_inputs: int = 20) -> bench.AdaptivityReport:
    out_dir = Path(cfg["run"]["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = load_checkpoint(checkpoint_path)
    train_ds, _ = load_datasets(cfg)
    rng = cfg.rng("probe")
    pick = rng.choice(len(train_ds), size=min(n_probe_inputs, len(train_ds)), replace=False)
    probe_samples = [train_ds.samples[i] for i in pick]
    kind = cfg["sampler"]["kind"]
    if kind not in ("lns_label", "lns_embedding", "uniform"):
        kind = "lns_label"
    report = bench.adaptivity_probe(
        ckpt.params, probe_samples, kind,
        k=cfg["hash"]["k"], l=cfg["hash"]["l"],
        capacity=cfg["hash"]["capacity"] or None,
        n_samples=cfg["sampler"]["n_samples"],
        draws_per_input=draws,
        seed=int(rng.integers(2**63)),
        iteration=ckpt.iteration,
    )
    csv_path = out_dir / "adaptivity.csv"
    bench.write_adaptivity_csv(report, csv_path)
    plots.plot_adaptivity(csv_path, tv_uniform=report.tv_uniform, tv_target=report.tv_target)
    return report


def run_eval(cfg: RunConfig, checkpoint_path) -> dict:
    ckpt = load_checkpoint(checkpoint_path)
    _, test_ds = load_datasets(cfg)
    samples = test_ds.samples[: cfg["train"]["eval_max_samples"]]
    if not samples:
        raise ValueError("evaluation split is empty")
    csr = to_csr([s for s, _ in samples], ckpt.params.input_dim)
    labels = [y for _, y in samples]
    hidden = np.maximum(csr @ ckpt.params.w1 + ckpt.params.b1, 0.0)
    scores = hidden @ ckpt.params.w_out.T + ckpt.params.b_out
    k = cfg["train"]["eval_k"]
    hits1 = hitsk = n = 0
    for i, truth in enumerate(labels):
        if len(truth) == 0:
            continue
        n += 1
        order = np.argsort(-scores[i], kind="stable")[:k]
        tset = set(int(t) for t in truth)
        hits1 += int(order[0]) in tset
        hitsk += len(tset.intersection(int(o) for o in order)) / k
    return {"p_at_1": hits1 / n, f"p_at_{k}": hitsk / n, "n_samples": n}
