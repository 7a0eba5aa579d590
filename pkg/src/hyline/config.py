"""Experiment configuration: YAML file, strict keys, dotted overrides."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import yaml

from .simengine import SimParams
from .topology import Topology, build_fat_tree, delay_for_rtt
from .workload import (
    BoundedPareto,
    SizeDistribution,
    WorkloadSpec,
    fit_bounded_pareto,
)

SCHEMES = ("hyline", "hyline_nopfc", "baseline_fair", "baseline_srpt")

DEFAULTS: Dict[str, Any] = {
    "topology": {"k": 4, "hosts_per_edge": 2, "link_gbps": 1.0, "rtt_us": 300.0},
    "hyline": {"h_bytes": 1_000_000, "t_cost_us": 100.0},
    "switch": {"buffer_pkts": 225, "pause_pkts": 215, "resume_pkts": 205, "pfc_enabled": True},
    "transport": {
        "init_window": 25,
        "minrto_ms_class1": 4.0,
        "minrto_s_class2": 1.0,
        "max_window": SimParams.max_window,
    },
    "workload": {"file": "websearch", "pareto": None, "load": 0.6, "flows": 2000, "seed": 1},
    "mode": "hyline",
    "sweep": {"loads": [0.6], "seeds": [1], "schemes": ["hyline", "baseline_fair"]},
    "threshold": {
        "loads": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        "band_load": 0.6,
        "points": 200,
        "min_bytes": 1000,
    },
    "out": "out",
}

_PARETO_KEYS = {"alpha", "frac_below", "low", "high"}


class ConfigError(ValueError):
    pass


def _merge(base: Dict, new: Dict, where: str = "") -> Dict:
    out = copy.deepcopy(base)
    for k, v in new.items():
        path = f"{where}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key '{path}'")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"'{path}' must be a mapping")
            out[k] = _merge(base[k], v, path + ".")
        else:
            out[k] = v
    return out


def parse_override(text: str) -> Dict:
    """'a.b=value' -> {'a': {'b': value}}, value parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not key=value")
    key, raw = text.split("=", 1)
    value = yaml.safe_load(raw)
    node: Dict = {}
    cur = node
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur[p] = {}
        cur = cur[p]
    cur[parts[-1]] = value
    return node


def _num(d, key, kind=float, lo=None, hi=None, lo_open=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(f"'{key}' must be an integer")
    v = kind(v)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"'{key}' = {v} is out of range")
    if hi is not None and v > hi:
        raise ConfigError(f"'{key}' = {v} is out of range")
    return v


@dataclass
class ExperimentConfig:
    raw: Dict[str, Any]

    # -- derived objects ---------------------------------------------------

    @property
    def mode(self) -> str:
        return self.raw["mode"]

    @property
    def out(self) -> str:
        return self.raw["out"]

    def topology(self) -> Topology:
        t = self.raw["topology"]
        cap = t["link_gbps"] * 1e9
        delay = delay_for_rtt(t["rtt_us"] * 1e-6, cap)
        return build_fat_tree(int(t["k"]), int(t["hosts_per_edge"]), cap, delay)

    def distribution(self):
        w = self.raw["workload"]
        if w["pareto"] is not None:
            p = w["pareto"]
            low, high = p.get("low", 1000), p.get("high", 100_000_000)
            if "alpha" in p:
                alpha = p["alpha"]
            else:
                alpha = fit_bounded_pareto(p["frac_below"], low, high)
            return BoundedPareto(alpha, low, high).to_distribution()
        f = w["file"]
        if os.path.exists(f):
            return SizeDistribution.from_file(f)
        return SizeDistribution.builtin(f)

    def workload(self, load: Optional[float] = None, seed: Optional[int] = None) -> WorkloadSpec:
        w = self.raw["workload"]
        return WorkloadSpec(
            self.distribution(),
            w["load"] if load is None else load,
            flow_count=int(w["flows"]),
            rng_seed=int(w["seed"] if seed is None else seed),
        )

    def sim_params(self, scheme: Optional[str] = None, seed: Optional[int] = None) -> SimParams:
        h, s, tr = self.raw["hyline"], self.raw["switch"], self.raw["transport"]
        pfc = bool(s["pfc_enabled"])
        if scheme == "hyline_nopfc":
            pfc = False
        return SimParams(
            h_bytes=float(h["h_bytes"]),
            t_cost=h["t_cost_us"] * 1e-6,
            buffer_pkts=int(s["buffer_pkts"]),
            pause_pkts=int(s["pause_pkts"]),
            resume_pkts=int(s["resume_pkts"]),
            pfc_enabled=pfc,
            init_window=int(tr["init_window"]),
            minrto_class1=tr["minrto_ms_class1"] * 1e-3,
            minrto_class2=float(tr["minrto_s_class2"]),
            max_window=int(tr["max_window"]),
            seed=int(self.raw["workload"]["seed"] if seed is None else seed),
        )

    def sweep_axes(self):
        s = self.raw["sweep"]
        return list(s["schemes"]), [float(x) for x in s["loads"]], [int(x) for x in s["seeds"]]


def validate(raw: Dict[str, Any]) -> ExperimentConfig:
    t = raw["topology"]
    k = _num(t, "k", int, 4)
    if k % 2:
        raise ConfigError("topology.k must be even")
    _num(t, "hosts_per_edge", int, 1)
    _num(t, "link_gbps", float, 0, lo_open=True)
    _num(t, "rtt_us", float, 0, lo_open=True)
    h = raw["hyline"]
    _num(h, "h_bytes", float, 0)
    _num(h, "t_cost_us", float, 0)
    s = raw["switch"]
    for key in ("buffer_pkts", "pause_pkts", "resume_pkts"):
        _num(s, key, int, 1)
    if not isinstance(s["pfc_enabled"], bool):
        raise ConfigError("switch.pfc_enabled must be true or false")
    tr = raw["transport"]
    _num(tr, "init_window", int, 1)
    _num(tr, "max_window", int, 1)
    _num(tr, "minrto_ms_class1", float, 0, lo_open=True)
    _num(tr, "minrto_s_class2", float, 0, lo_open=True)
    w = raw["workload"]
    _num(w, "load", float, 0, 1, lo_open=True)
    if w["load"] >= 1:
        raise ConfigError("workload.load must be below 1")
    _num(w, "flows", int, 1)
    _num(w, "seed", int, 0)
    if w["pareto"] is not None:
        p = w["pareto"]
        if not isinstance(p, dict) or set(p) - _PARETO_KEYS:
            raise ConfigError(f"workload.pareto accepts keys {sorted(_PARETO_KEYS)}")
        if ("alpha" in p) == ("frac_below" in p):
            raise ConfigError("workload.pareto needs exactly one of alpha or frac_below")
    elif not isinstance(w["file"], str) or not w["file"]:
        raise ConfigError("workload needs a 'file' or a 'pareto' section")
    if raw["mode"] not in SCHEMES:
        raise ConfigError(f"mode must be one of {SCHEMES}")
    sw = raw["sweep"]
    for key in ("loads", "seeds", "schemes"):
        if not isinstance(sw[key], list) or not sw[key]:
            raise ConfigError(f"sweep.{key} must be a non-empty list")
    for sc in sw["schemes"]:
        if sc not in SCHEMES:
            raise ConfigError(f"unknown scheme {sc!r} in sweep.schemes")
    for ld in sw["loads"]:
        if isinstance(ld, bool) or not isinstance(ld, (int, float)) or not 0 < ld < 1:
            raise ConfigError(f"sweep load {ld!r} must be in (0, 1)")
    th = raw["threshold"]
    if not isinstance(th["loads"], list) or not th["loads"]:
        raise ConfigError("threshold.loads must be a non-empty list")
    _num(th, "points", int, 2)
    _num(th, "min_bytes", float, 0, lo_open=True)
    _num(th, "band_load", float, 0)
    cfg = ExperimentConfig(raw)
    try:
        SimParams(**{k: v for k, v in vars(cfg.sim_params()).items()}).validate()
        cfg.distribution()
    except ConfigError:
        raise
    except (ValueError, OSError) as e:
        raise ConfigError(str(e)) from e
    return cfg


def load_config(path: Optional[str] = None, overrides: Optional[List[Dict]] = None) -> ExperimentConfig:
    raw = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed YAML: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        raw = _merge(raw, data)
    for o in overrides or ():
        raw = _merge(raw, o)
    return validate(raw)
