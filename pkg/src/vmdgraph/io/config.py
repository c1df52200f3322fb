"""Run configuration: YAML file plus ``key=value`` overrides.

Recognised keys (defaults in ``DEFAULTS``)::

    data.flows / data.metadata / data.distances   CSV paths (optional)
    data.aggregation                              sum | mean
    data.synthetic.{nodes,length,seed}            used when data.flows is unset
    vmd.{num_modes,alpha,tau,epsilon,max_iter,omega_init,seed}
    modeselect.{sample_fraction,k_min,k_max,zeta,seed}
    graph.{sigma,r}                               sigma null -> std of distances
    model.{variant,window,horizon,blocks,cheb_order,channels,time_kernel}
    train.{lr,batch_size,max_epochs,patience,seed,loss}
    sweep                                         list of partial vmd/model overrides
    cache_dir, output_dir, workers

Only ``VMDGRAPH_CACHE_DIR`` is read from the environment; it replaces
``cache_dir`` unless that key is overridden explicitly.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass

import yaml

from ..modeselect import ModeSelectConfig
from ..model import VARIANTS
from ..traineval.pipeline import ExperimentSpec
from ..traineval.training import TrainConfig
from ..vmd import InvalidConfigError, VmdConfig

CACHE_ENV = "VMDGRAPH_CACHE_DIR"

DEFAULTS = {
    "data": {
        "flows": None, "metadata": None, "distances": None, "aggregation": "sum",
        "synthetic": {"nodes": 10, "length": 2000, "seed": 0},
    },
    "vmd": {"num_modes": 4, "alpha": 2000.0, "tau": 0.0, "epsilon": 1e-7,
            "max_iter": 500, "omega_init": "uniform", "seed": 0},
    "modeselect": {"sample_fraction": 0.02, "k_min": 2, "k_max": 29, "zeta": 1e-3, "seed": 0},
    "graph": {"sigma": None, "r": 0.1},
    "model": {"variant": "v2", "window": 12, "horizon": 12, "blocks": 2,
              "cheb_order": 3, "channels": 16, "time_kernel": 3},
    "train": {"lr": 1e-3, "batch_size": 32, "max_epochs": 100, "patience": 10,
              "seed": 0, "loss": "mae"},
    "sweep": [],
    "cache_dir": ".vmdgraph-cache",
    "output_dir": "vmdgraph-out",
    "workers": 1,
}


class ConfigError(InvalidConfigError):
    pass


def parse_value(text: str):
    """YAML scalar parsing so ``1e-3``, ``true`` and ``null`` behave."""
    value = yaml.safe_load(text)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _merge(base: dict, extra: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and base[key] and isinstance(value, dict):
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def set_key(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


@dataclass
class RunConfig:
    tree: dict

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        tree = copy.deepcopy(DEFAULTS)
        if path:
            with open(path, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh) or {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: top level must be a mapping")
            tree = _merge(tree, loaded)
            base = os.path.dirname(os.path.abspath(path))
            for key in ("flows", "metadata", "distances"):
                p = tree["data"][key]
                if p and not os.path.isabs(p):
                    tree["data"][key] = os.path.join(base, p)
        overrides = list(overrides)
        for dotted, value in overrides:
            set_key(tree, dotted, value)
        # an explicit override beats the environment
        if os.environ.get(CACHE_ENV) and "cache_dir" not in {k for k, _ in overrides}:
            tree["cache_dir"] = os.environ[CACHE_ENV]
        cfg = cls(tree)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.tree[key]

    # typed views ---------------------------------------------------------

    @property
    def vmd(self) -> VmdConfig:
        v = self.tree["vmd"]
        return VmdConfig(int(v["num_modes"]), float(v["alpha"]), float(v["tau"]),
                         float(v["epsilon"]), int(v["max_iter"]), str(v["omega_init"]),
                         int(v["seed"]))

    @property
    def modeselect(self) -> ModeSelectConfig:
        m = self.tree["modeselect"]
        return ModeSelectConfig(float(m["sample_fraction"]), int(m["k_min"]), int(m["k_max"]),
                                float(m["zeta"]), int(m["seed"]))

    @property
    def train(self) -> TrainConfig:
        t = self.tree["train"]
        return TrainConfig(lr=float(t["lr"]), batch_size=int(t["batch_size"]),
                           max_epochs=int(t["max_epochs"]), patience=int(t["patience"]),
                           seed=int(t["seed"]), loss=str(t["loss"]))

    def experiment(self, **vmd_changes) -> ExperimentSpec:
        m = self.tree["model"]
        return ExperimentSpec(
            vmd=self.vmd.replace(**vmd_changes) if vmd_changes else self.vmd,
            variant=m["variant"], window=int(m["window"]), horizon=int(m["horizon"]),
            blocks=int(m["blocks"]), cheb_order=int(m["cheb_order"]),
            channels=int(m["channels"]), time_kernel=int(m["time_kernel"]), train=self.train,
        )

    def sweep_specs(self) -> list[ExperimentSpec]:
        specs = []
        for i, entry in enumerate(self.tree["sweep"] or []):
            entry = dict(entry)
            desc = str(entry.pop("description", f"run{i}"))
            variant = entry.pop("variant", self.tree["model"]["variant"])
            base = self.experiment(**entry)
            specs.append(ExperimentSpec(**{**base.__dict__, "variant": variant, "description": desc}))
        return specs

    def validate(self) -> None:
        try:
            self.vmd, self.modeselect, self.train
            self.experiment()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.tree["model"]["variant"] not in VARIANTS:
            raise ConfigError(f"model.variant must be one of {VARIANTS}")
        g = self.tree["graph"]
        if g["sigma"] is not None and not float(g["sigma"]) > 0:
            raise ConfigError("graph.sigma must be > 0 or null")
        if not 0 <= float(g["r"]):
            raise ConfigError("graph.r must be >= 0")
        if self.tree["data"]["aggregation"] not in ("sum", "mean"):
            raise ConfigError("data.aggregation must be sum or mean")
        if int(self.tree["workers"]) < 1:
            raise ConfigError("workers must be >= 1")
        for entry in self.tree["sweep"] or []:
            if not isinstance(entry, dict):
                raise ConfigError("sweep entries must be mappings")
            unknown = set(entry) - set(DEFAULTS["vmd"]) - {"description", "variant"}
            if unknown:
                raise ConfigError(f"unknown sweep keys {sorted(unknown)}")
        self.sweep_specs()

    # fingerprints --------------------------------------------------------

    def fingerprint(self, *sections) -> str:
        """Hash of the named sections; the data section includes file digests."""
        payload = {}
        for s in sections:
            payload[s] = self.data_identity() if s == "data" else self._typed(s)
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def _typed(self, section: str):
        # validated values so that 2000 and 2000.0 hash alike
        if section == "vmd":
            return asdict(self.vmd)
        if section == "modeselect":
            return asdict(self.modeselect)
        if section == "train":
            return asdict(self.train)
        if section == "graph":
            g = self.tree["graph"]
            return {"sigma": None if g["sigma"] is None else float(g["sigma"]), "r": float(g["r"])}
        if section == "model":
            spec = self.experiment()
            return {"variant": spec.variant, "window": spec.window, "horizon": spec.horizon,
                    "blocks": spec.blocks, "cheb_order": spec.cheb_order,
                    "channels": spec.channels, "time_kernel": spec.time_kernel}
        return self.tree[section]

    def data_identity(self) -> dict:
        d = self.tree["data"]
        ident = {"aggregation": d["aggregation"]}
        if d["flows"]:
            for key in ("flows", "metadata", "distances"):
                ident[key] = file_digest(d[key]) if d[key] else None
        else:
            ident["synthetic"] = {k: int(v) for k, v in d["synthetic"].items()}
        return ident


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
