"""Oracle fixture generation: analytic return laws and brute-force OT values.

A fixture spec is a dict (or TOML table) with optional lists ``chain``,
``bandit`` and ``ot``. Each entry produces one JSON fixture. Regeneration
from the same spec is byte-identical.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import oracles

DEFAULT_SPEC = {
    "chain": [{"name": "chain_k3", "means": [1.0, 1.0, 1.0], "stds": [1.0, 1.0, 1.0], "gamma": 0.5,
               "levels": 21}],
    "bandit": [{"name": "bandit_bimodal", "weights": [0.5, 0.5], "means": [-1.0, 1.0],
                "stds": [0.1, 0.1], "levels": 51}],
    "ot": [{"name": "ot_n4", "n": 4, "p": [1, 2], "cases": 20, "seed": 0}],
}


def _levels(k):
    return (np.arange(k) + 0.5) / k


def chain_fixture(entry) -> dict:
    mean, var = oracles.chain_return_law(entry["means"], entry["stds"], entry["gamma"])
    from scipy.stats import norm
    lv = _levels(int(entry.get("levels", 21)))
    return {"kind": "chain", **entry, "mean": mean, "variance": var, "std": float(np.sqrt(var)),
            "level_values": lv.tolist(), "quantiles": (mean + np.sqrt(var) * norm.ppf(lv)).tolist()}


def bandit_fixture(entry) -> dict:
    lv = _levels(int(entry.get("levels", 51)))
    q = oracles.mixture_quantiles(lv, entry["weights"], entry["means"], entry["stds"])
    return {"kind": "bandit", **entry, "level_values": lv.tolist(), "quantiles": q.tolist()}


def ot_fixture(entry) -> dict:
    rng = np.random.default_rng(entry.get("seed", 0))
    n = int(entry["n"])
    cases = []
    for _ in range(int(entry.get("cases", 10))):
        xs, ys = rng.normal(size=n), rng.normal(size=n)
        for p in entry.get("p", [1]):
            cases.append({"xs": xs.tolist(), "ys": ys.tolist(), "p": p,
                          "cost": oracles.brute_force_ot(xs, ys, p)})
    return {"kind": "ot", **entry, "cases": cases}


BUILDERS = {"chain": chain_fixture, "bandit": bandit_fixture, "ot": ot_fixture}


def build_fixtures(spec: dict | None = None) -> dict:
    """name -> fixture dict. An empty spec gives an empty set."""
    spec = DEFAULT_SPEC if spec is None else spec
    unknown = set(spec) - set(BUILDERS)
    if unknown:
        raise ValueError(f"unknown fixture kinds: {sorted(unknown)}")
    out = {}
    for kind, entries in spec.items():
        for entry in entries:
            out[entry["name"]] = BUILDERS[kind](dict(entry))
    return out


def write_fixtures(fixtures: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, fx in sorted(fixtures.items()):
        path = out_dir / f"{name}.json"
        path.write_text(json.dumps(fx, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        paths.append(path)
    return paths
