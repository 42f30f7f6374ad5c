"""Run configuration: one TOML (or JSON) tree, validated as a whole.

Every key has a default; unknown keys are rejected. Command-line overrides
win over the file. The fully resolved config is echoed into the output
directory so a run can be reproduced by feeding the echo back.

One master seed derives every RNG stream in a run through a labeled
split, so a single knob controls full determinism.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import numpy as np

from lshsoftmax.errors import ConfigError

DEFAULTS: dict[str, dict] = {
    "run": {
        "seed": 1234,
        "out_dir": "runs/out",
        "workers": 1,          # accepted for forward compatibility; execution is sequential
        "clock": "real",       # 'real' wall time or 'iteration' (byte-reproducible)
    },
    "data": {
        "kind": "planted",     # planted | xc | corpus
        "path": "",
        "test_path": "",
        "test_fraction": 0.1,
        "normalize": False,
        "window": 2,
        "max_vocab": 5000,
        "planted_classes": 1000,
        "planted_clusters": 10,
        "planted_dim": 64,
        "planted_samples": 20000,
        "planted_noise": 0.25,
        "planted_spread": 0.35,
    },
    "model": {
        "hidden_dim": 128,
    },
    "sampler": {
        "kind": "lns_label",
        "n_samples": 64,
        "top_k": 10,
        "logit_correction": False,
    },
    "hash": {
        "family": "simhash",   # simhash | dwta
        "k": 6,
        "l": 50,
        "m": 8,
        "capacity": 128,       # 0 means unbounded buckets
    },
    "schedule": {
        "initial_period": 50,
        "gamma": 1.05,
    },
    "optimizer": {
        "lr": 1e-4,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
    },
    "train": {
        "batch_size": 256,
        "epochs": 1,
        "eval_every": 100,
        "eval_k": 5,
        "eval_max_samples": 2000,
    },
}

_CHOICES = {
    ("run", "clock"): ("real", "iteration"),
    ("data", "kind"): ("planted", "xc", "corpus"),
    ("sampler", "kind"): ("full", "lns_label", "lns_embedding", "uniform",
                          "log_uniform", "frequency", "top_k"),
    ("hash", "family"): ("simhash", "dwta"),
}

_POSITIVE = [
    ("model", "hidden_dim"), ("sampler", "n_samples"), ("sampler", "top_k"),
    ("hash", "k"), ("hash", "l"), ("hash", "m"),
    ("schedule", "initial_period"), ("train", "batch_size"),
    ("train", "eval_every"), ("train", "eval_k"), ("run", "workers"),
    ("data", "planted_classes"), ("data", "planted_clusters"),
    ("data", "planted_dim"), ("data", "planted_samples"), ("data", "max_vocab"),
    ("data", "window"),
]


class RunConfig:
    """Validated configuration tree with attribute-style section access."""

    def __init__(self, tree: dict):
        self._tree = tree

    def __getitem__(self, section: str) -> dict:
        return self._tree[section]

    def get(self, section: str, key: str):
        return self._tree[section][key]

    @property
    def tree(self) -> dict:
        return copy.deepcopy(self._tree)

    # -- seed streams ------------------------------------------------------

    def rng(self, label: str) -> np.random.Generator:
        """Independent generator for this run, derived from (seed, label)."""
        return derive_rng(self._tree["run"]["seed"], label)

    # -- serialization ------------------------------------------------------

    def to_toml(self) -> str:
        lines = []
        for section in DEFAULTS:
            lines.append(f"[{section}]")
            for key, value in self._tree[section].items():
                lines.append(f"{key} = {_toml_value(value)}")
            lines.append("")
        return "\n".join(lines)

    def echo(self, out_dir) -> Path:
        path = Path(out_dir) / "resolved_config.toml"
        path.write_text(self.to_toml())
        return path


def derive_rng(master_seed: int, label: str) -> np.random.Generator:
    digest = hashlib.sha256(label.encode()).digest()
    child = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), child]))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    raise ConfigError(f"cannot serialize config value {v!r}")


def _load_tree(path) -> dict:
    text = Path(path).read_bytes()
    if str(path).endswith(".json"):
        return json.loads(text.decode())
    try:
        import tomllib  # py311+
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text.decode())


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults <- file <- overrides, then validate the whole tree.

    ``overrides`` maps dotted keys ('sampler.kind') to values.
    """
    tree = copy.deepcopy(DEFAULTS)
    if path is not None:
        file_tree = _load_tree(path)
        for section, entries in file_tree.items():
            if section not in tree:
                raise ConfigError(f"unknown config section [{section}]")
            if not isinstance(entries, dict):
                raise ConfigError(f"section [{section}] must be a table")
            for key, value in entries.items():
                if key not in tree[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                tree[section][key] = value
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in tree or key not in tree[section]:
            raise ConfigError(f"unknown config key {dotted}")
        tree[section][key] = value
    _validate(tree)
    return RunConfig(tree)


def _validate(tree: dict):
    for (section, key), choices in _CHOICES.items():
        v = tree[section][key]
        if v not in choices:
            raise ConfigError(f"{section}.{key} must be one of {choices}, got {v!r}")
    for section, key in _POSITIVE:
        v = tree[section][key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{section}.{key} must be a positive integer, got {v!r}")
    for section, key, lo in [("optimizer", "lr", 0.0), ("optimizer", "eps", 0.0)]:
        if not tree[section][key] > lo:
            raise ConfigError(f"{section}.{key} must be > {lo}")
    for key in ("beta1", "beta2"):
        b = tree["optimizer"][key]
        if not 0.0 <= b < 1.0:
            raise ConfigError(f"optimizer.{key} must lie in [0, 1)")
    if tree["schedule"]["gamma"] < 1.0:
        raise ConfigError("schedule.gamma must be >= 1")
    cap = tree["hash"]["capacity"]
    if not isinstance(cap, int) or isinstance(cap, bool) or cap < 0:
        raise ConfigError(f"hash.capacity must be a non-negative integer, got {cap!r}")
    for key in ("epochs", "eval_max_samples"):
        v = tree["train"][key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ConfigError(f"train.{key} must be a non-negative integer")
    frac = tree["data"]["test_fraction"]
    if not 0.0 <= frac < 1.0:
        raise ConfigError("data.test_fraction must lie in [0, 1)")
    if tree["data"]["kind"] in ("xc", "corpus") and not tree["data"]["path"]:
        raise ConfigError(f"data.kind={tree['data']['kind']!r} requires data.path")
