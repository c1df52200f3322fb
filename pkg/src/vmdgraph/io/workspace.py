"""Cached pipeline stages behind the command line.

Each stage stores one container in the cache directory whose header holds
the fingerprint of every config field the stage depends on. A matching
fingerprint short-circuits the computation; a mismatch recomputes and
overwrites with a notice.
"""
from __future__ import annotations

import logging
import sys
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import torch

from ..data import SeriesSet, synthetic_ring
from ..graph import RoadGraph, SpectralOps
from ..modeselect import ModeSelection, select_num_modes
from ..model import DTYPE, ModelConfig, StModel, basis_tensor
from ..spectral import InvalidInputError
from ..traineval.pipeline import model_config_for, prepare
from ..traineval.training import TrainResult, train
from ..vmd import ModeSet, decompose_many
from .config import RunConfig
from .container import read_container, read_header, write_container
from .ingest import ingest, read_distances, read_metadata

log = logging.getLogger(__name__)

EXT = ".vmdc"


@dataclass
class Inputs:
    series: SeriesSet
    distances: np.ndarray | None
    metadata: list


class Workspace:
    def __init__(self, cfg: RunConfig, notice=None):
        self.cfg = cfg
        self.cache = Path(cfg["cache_dir"])
        self.out = Path(cfg["output_dir"])
        self._notice = notice or (lambda msg: print(msg, file=sys.stderr))
        self._memo = {}

    def notice(self, msg: str) -> None:
        self._notice(msg)

    # generic cache ------------------------------------------------------

    def _cached(self, name: str, fingerprint: str, compute, save, load):
        if name in self._memo:
            return self._memo[name]
        path = self.cache / f"{name}{EXT}"
        if path.exists():
            try:
                header = read_header(path)
            except Exception as exc:  # unreadable cache is just stale
                header = {"fingerprint": None}
                self.notice(f"{name}: unreadable cache ({exc}); recomputing")
            if header.get("fingerprint") == fingerprint:
                self.notice(f"{name}: cache hit ({fingerprint})")
                value = load(*read_container(path))
                self._memo[name] = value
                return value
            if header.get("fingerprint") is not None:
                self.notice(f"{name}: stale cache ({header.get('fingerprint')} != {fingerprint}); recomputing")
        else:
            self.notice(f"{name}: computing ({fingerprint})")
        value = compute()
        header, arrays = save(value)
        header.update({"kind": name, "fingerprint": fingerprint})
        write_container(path, header, arrays)
        self._memo[name] = value
        return value

    def cache_path(self, name: str) -> Path:
        return self.cache / f"{name}{EXT}"

    # stages -------------------------------------------------------------

    def inputs(self) -> Inputs:
        fp = self.cfg.fingerprint("data")

        def compute():
            d = self.cfg["data"]
            if d["flows"]:
                series, report = ingest(d["flows"], d["aggregation"])
                for nid, why in report.rejected.items():
                    self.notice(f"ingest: rejected {nid}: {why}")
                meta = read_metadata(d["metadata"]) if d["metadata"] else []
                dist = read_distances(d["distances"], series.node_ids) if d["distances"] else None
                return Inputs(series, dist, meta)
            s = d["synthetic"]
            net = synthetic_ring(int(s["nodes"]), int(s["length"]), int(s["seed"]))
            return Inputs(net.series, net.distances, net.metadata)

        def save(inp: Inputs):
            arrays = {"values": inp.series.values}
            if inp.distances is not None:
                arrays["distances"] = inp.distances
            header = {"node_ids": inp.series.node_ids,
                      "start_time": inp.series.start_time.isoformat(),
                      "step_seconds": inp.series.step.total_seconds(),
                      "metadata": inp.metadata}
            return header, arrays

        def load(header, arrays):
            series = SeriesSet(header["node_ids"], arrays["values"],
                               datetime.fromisoformat(header["start_time"]),
                               timedelta(seconds=header["step_seconds"]))
            return Inputs(series, arrays.get("distances"), header["metadata"])

        return self._cached("series", fp, compute, save, load)

    def graph(self) -> RoadGraph:
        inp = self.inputs()
        if inp.distances is None:
            raise InvalidInputError("no distance file configured (data.distances)")
        g = self.cfg["graph"]
        sigma = None if g["sigma"] is None else float(g["sigma"])
        meta = {m["node_id"]: m for m in inp.metadata}
        return RoadGraph.build(inp.series.node_ids, inp.distances, sigma, float(g["r"]), meta)

    def spectral_ops(self) -> SpectralOps:
        return self.graph().spectral_ops(int(self.cfg["model"]["cheb_order"]))

    def modesets(self) -> list[ModeSet]:
        fp = self.cfg.fingerprint("data", "vmd")
        vcfg = self.cfg.vmd

        def compute():
            return decompose_many(self.inputs().series.series(), vcfg, int(self.cfg["workers"]))

        def save(sets):
            records = [{"node_id": ms.node_id, "K": ms.num_modes, "alpha": vcfg.alpha,
                        "tau": vcfg.tau, "epsilon": vcfg.epsilon,
                        "omegas": [float(w) for w in ms.omegas],
                        "iterations": ms.iterations_used, "converged": ms.converged,
                        "residual": ms.reconstruction_residual} for ms in sets]
            arrays = {f"modes_{i}": ms.modes for i, ms in enumerate(sets)}
            return {"vmd_config": vcfg.__dict__, "vmd_fingerprint": vcfg.fingerprint(),
                    "records": records}, arrays

        def load(header, arrays):
            return [ModeSet(arrays[f"modes_{i}"], np.array(r["omegas"]), r["iterations"],
                            r["converged"], r["residual"], r["node_id"])
                    for i, r in enumerate(header["records"])]

        return self._cached("modes", fp, compute, save, load)

    def selection(self) -> ModeSelection:
        fp = self.cfg.fingerprint("data", "vmd", "modeselect")

        def compute():
            return select_num_modes(self.inputs().series.series(), self.cfg.modeselect, self.cfg.vmd)

        def save(sel):
            return {"k": sel.k, "zeta": sel.zeta, "threshold_met": sel.threshold_met,
                    "sampled_nodes": sel.sampled_nodes}, {"curve": np.array(sel.curve, dtype=np.float64)}

        def load(header, arrays):
            curve = [(int(k), float(v)) for k, v in arrays["curve"]]
            return ModeSelection(header["k"], curve, header["zeta"], header["sampled_nodes"],
                                 header["threshold_met"])

        return self._cached("k_selection", fp, compute, save, load)

    def dataset(self):
        spec = self.cfg.experiment()
        _, ds = prepare(self.inputs().series, spec, self.modesets())
        return ds

    def trained(self):
        """``(model, dataset, TrainResult)``; trains only on a cache miss."""
        fp = self.cfg.fingerprint("data", "vmd", "graph", "model", "train")
        spec = self.cfg.experiment()
        ds = self.dataset()
        mcfg = model_config_for(ds, spec)

        def compute():
            model = StModel(mcfg)
            result = train(model, ds, basis_tensor(self.spectral_ops()), spec.train)
            return model, result

        def save(value):
            model, result = value
            state = {k: v.detach().numpy() for k, v in model.state_dict().items()}
            header = {"model_config": mcfg.__dict__, "seed": mcfg.seed,
                      "model_fingerprint": mcfg.fingerprint(),
                      "shapes": {k: list(v.shape) for k, v in state.items()},
                      "history": [list(map(float, row)) for row in result.history],
                      "best_epoch": result.best_epoch, "best_val_mae": result.best_val_mae,
                      "stopped_early": result.stopped_early, "diverged": result.diverged}
            return header, state

        def load(header, arrays):
            model = StModel(ModelConfig(**header["model_config"]))
            model.load_state_dict({k: torch.as_tensor(v, dtype=DTYPE) for k, v in arrays.items()})
            hist = [(int(e), tr, va) for e, tr, va in header["history"]]
            result = TrainResult(hist, header["best_epoch"], header["best_val_mae"],
                                 header["stopped_early"], header["diverged"])
            return model, result

        model, result = self._cached("checkpoint", fp, compute, save, load)
        return model, ds, result

    def has_checkpoint(self) -> bool:
        path = self.cache_path("checkpoint")
        if not path.exists():
            return False
        fp = self.cfg.fingerprint("data", "vmd", "graph", "model", "train")
        return read_header(path).get("fingerprint") == fp
