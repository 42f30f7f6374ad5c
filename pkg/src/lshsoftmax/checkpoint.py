"""Versioned binary checkpoints: parameters, optimizer state, update
schedule, and the RNG master seed, in one ``.npz`` archive."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from lshsoftmax.network import AdamState, NetworkParams, UpdateSchedule

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    params: NetworkParams
    adam: AdamState
    schedule: UpdateSchedule
    master_seed: int
    iteration: int


def save_checkpoint(path, params: NetworkParams, adam: AdamState,
                    schedule: UpdateSchedule, master_seed: int, iteration: int):
    meta = {
        "version": FORMAT_VERSION,
        "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps,
        "step": adam.step, "b1_steps": adam.b1_steps,
        "initial_period": schedule.initial_period, "gamma": schedule.gamma,
        "period": schedule.period, "next_update": schedule.next_update,
        "master_seed": int(master_seed), "iteration": int(iteration),
    }
    np.savez_compressed(
        path,
        meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
        w1=params.w1, b1=params.b1, w_out=params.w_out, b_out=params.b_out,
        m_w1=adam.m_w1, v_w1=adam.v_w1, w1_steps=adam.w1_steps,
        m_b1=adam.m_b1, v_b1=adam.v_b1,
        m_wout=adam.m_wout, v_wout=adam.v_wout,
        m_bout=adam.m_bout, v_bout=adam.v_bout,
        wout_steps=adam.wout_steps,
    )


def load_checkpoint(path) -> Checkpoint:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        params = NetworkParams(w1=z["w1"], b1=z["b1"], w_out=z["w_out"], b_out=z["b_out"])
        adam = AdamState(
            lr=meta["lr"], beta1=meta["beta1"], beta2=meta["beta2"], eps=meta["eps"],
            step=meta["step"], b1_steps=meta["b1_steps"],
            m_w1=z["m_w1"], v_w1=z["v_w1"], w1_steps=z["w1_steps"],
            m_b1=z["m_b1"], v_b1=z["v_b1"],
            m_wout=z["m_wout"], v_wout=z["v_wout"],
            m_bout=z["m_bout"], v_bout=z["v_bout"],
            wout_steps=z["wout_steps"],
        )
        schedule = UpdateSchedule(
            initial_period=meta["initial_period"], gamma=meta["gamma"],
            period=meta["period"], next_update=meta["next_update"],
        )
        return Checkpoint(params, adam, schedule, meta["master_seed"], meta["iteration"])
