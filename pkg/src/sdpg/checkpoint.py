"""Versioned single-file container for networks, arrays and metadata.

Layout, little-endian:

    8 bytes    magic b"SDPGCKPT"
    uint32     container version (1)
    uint32     header length H
    H bytes    UTF-8 JSON header:
                 {"kind": ..., "meta": {...},
                  "entries": [{"name", "type": "net" | "array",
                               "offset", "length", "dtype"?, "shape"?}, ...]}
    payload    entries back to back; offsets are relative to the payload start

A "net" entry holds one network parameter record (see
``netcore.net_to_bytes``); an "array" entry holds raw C-order array bytes.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .netcore import DenseNet, net_from_bytes, net_to_bytes

MAGIC = b"SDPGCKPT"
VERSION = 1


def write_container(path, kind: str, meta: dict, nets: dict | None = None,
                    arrays: dict | None = None) -> None:
    entries, blobs, offset = [], [], 0
    for name, net in (nets or {}).items():
        data = net_to_bytes(net)
        entries.append({"name": name, "type": "net", "offset": offset, "length": len(data)})
        blobs.append(data)
        offset += len(data)
    for name, arr in (arrays or {}).items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        data = arr.astype(dtype).tobytes()
        entries.append({"name": name, "type": "array", "offset": offset, "length": len(data),
                        "dtype": dtype.str, "shape": list(arr.shape)})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"kind": kind, "meta": meta, "entries": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path):
    """Returns (kind, meta, nets, arrays)."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not an SDPG container")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    header = json.loads(data[16:16 + hlen])
    base = 16 + hlen
    nets: dict[str, DenseNet] = {}
    arrays: dict[str, np.ndarray] = {}
    for e in header["entries"]:
        blob = data[base + e["offset"]: base + e["offset"] + e["length"]]
        if e["type"] == "net":
            nets[e["name"]] = net_from_bytes(blob)
        else:
            arrays[e["name"]] = np.frombuffer(blob, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return header["kind"], header["meta"], nets, arrays


def save_agent(agent, path) -> None:
    meta = {"algorithm": agent.algorithm, "gamma": agent.gamma,
            "action_low": agent.actor.action_low.tolist(),
            "action_high": agent.actor.action_high.tolist(),
            "dtype": str(agent.actor.net.dtype)}
    arrays = {}
    if agent.algorithm == "sdpg":
        meta.update(noise_dim=agent.critic.noise_dim, n_samples=agent.grid.n, zeta=agent.grid.zeta)
    else:
        arrays["atoms"] = agent.critic.atoms
    write_container(path, "agent", meta, agent.networks(), arrays)


def load_agent(path, optimizer="adam", alpha=1e-4, beta=1e-4):
    """Rebuild an agent from a checkpoint; optimizer moments start fresh."""
    from .agent import Actor, Critic, NoiseSource, SDPGAgent
    from .d4pg import CategoricalCritic, D4PGAgent
    from .netcore import Optimizer

    kind, meta, nets, arrays = read_container(path)
    if kind != "agent":
        raise ValueError(f"{path}: expected an agent checkpoint, found {kind!r}")
    # network records are always float64; the float32 round trip is exact
    dtype = np.dtype(meta.get("dtype", "float64"))
    for net in nets.values():
        net.weights = [w.astype(dtype) for w in net.weights]
        net.biases = [b.astype(dtype) for b in net.biases]
    low = np.asarray(meta["action_low"])
    high = np.asarray(meta["action_high"])
    actor = Actor(nets["actor"], nets["actor_target"], low, high)
    obs_dim, act_dim = actor.obs_dim, actor.action_dim
    if meta["algorithm"] == "sdpg":
        critic = Critic(nets["critic"], nets["critic_target"], obs_dim, act_dim, meta["noise_dim"])
        return SDPGAgent(actor, critic, Optimizer(optimizer, alpha), Optimizer(optimizer, beta),
                         meta["n_samples"], meta["gamma"], meta["zeta"], NoiseSource(0))
    critic = CategoricalCritic(nets["critic"], nets["critic_target"], arrays["atoms"], obs_dim, act_dim)
    return D4PGAgent(actor, critic, Optimizer(optimizer, alpha), Optimizer(optimizer, beta),
                     meta["gamma"], NoiseSource(0))


def save_pool(pool, path) -> None:
    write_container(path, "replay", {}, arrays=pool.to_arrays())


def load_pool(path):
    from .replay import ReplayPool
    kind, _, _, arrays = read_container(path)
    if kind != "replay":
        raise ValueError(f"{path}: expected a replay dump, found {kind!r}")
    return ReplayPool.from_arrays(arrays)
