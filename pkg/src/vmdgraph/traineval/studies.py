"""Mode ablation, decomposition divergence and hyper-parameter sweeps."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from ..spectral import InvalidInputError
from .metrics import MetricsReport, evaluate
from .training import predict

log = logging.getLogger(__name__)

REPORT_HORIZONS = (3, 6, 12)


def mode_channels(channel_map) -> list[int]:
    return [i for i, name in enumerate(channel_map) if name.startswith("mode_")]


def ablate_modes(model, ds, basis, modes, split: str = "test") -> MetricsReport:
    """Signed metric change from zeroing the given 1-based mode channels.

    The channels are zeroed after normalization, i.e. set to their training
    mean.
    """
    chans = mode_channels(ds.channel_map)
    idx = []
    for k in modes:
        if not 1 <= k <= len(chans):
            raise InvalidInputError(f"mode {k} out of range 1..{len(chans)}")
        idx.append(chans[k - 1])
    target = ds.targets(split)
    intact = evaluate(predict(model, ds, split, basis), target)
    ablated = evaluate(predict(model, ds.with_channels_zeroed(idx), split, basis), target)
    return ablated.delta(intact)


def ablate_mode(model, ds, basis, k: int, split: str = "test") -> MetricsReport:
    return ablate_modes(model, ds, basis, [k], split)


def ablation_table(model, ds, basis, split: str = "test") -> dict:
    return {k: ablate_mode(model, ds, basis, k, split)
            for k in range(1, len(mode_channels(ds.channel_map)) + 1)}


def write_ablation_csv(table: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "horizon", "delta_mae", "delta_rmse", "delta_mape"])
        for k in sorted(table):
            rep = table[k]
            for h in range(rep.horizon):
                w.writerow([k, h + 1, repr(float(rep.mae[h])), repr(float(rep.rmse[h])),
                            repr(float(rep.mape[h]))])
            w.writerow([k, "average", repr(rep.average["mae"]), repr(rep.average["rmse"]),
                        repr(rep.average["mape"])])


def mode_divergence(modes_a, modes_b) -> float:
    """Mean absolute difference between two reconstructions ``sum_k u_k``."""
    a = np.asarray(getattr(modes_a, "modes", modes_a), dtype=np.float64)
    b = np.asarray(getattr(modes_b, "modes", modes_b), dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"mode sets differ in shape: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a.sum(axis=0) - b.sum(axis=0))))


SWEEP_HEADER = (
    ["description", "variant", "num_modes", "alpha", "epsilon", "tau", "reconstruction_loss"]
    + [f"h{h}_{m}" for h in REPORT_HORIZONS for m in ("mae", "rmse", "mape")]
    + ["avg_mae", "avg_rmse", "avg_mape", "error"]
)


@dataclass
class SweepRow:
    values: dict

    def as_list(self):
        return [self.values.get(col, "") for col in SWEEP_HEADER]


def _row_for(spec, recon=None, report=None, error=""):
    v = {
        "description": spec.description, "variant": spec.variant,
        "num_modes": spec.vmd.num_modes, "alpha": spec.vmd.alpha,
        "epsilon": spec.vmd.epsilon, "tau": spec.vmd.tau, "error": error,
    }
    if recon is not None:
        v["reconstruction_loss"] = recon
    if report is not None:
        for h in REPORT_HORIZONS:
            if h <= report.horizon:
                for m, val in report.at(h).items():
                    v[f"h{h}_{m}"] = val
        for m, val in report.average.items():
            v[f"avg_{m}"] = val
    return SweepRow(v)


def sweep(specs, series, ops, runner=None) -> list[SweepRow]:
    """Train and evaluate each spec; failures become rows with ``error`` set."""
    from .pipeline import run_experiment

    specs = list(specs)
    if not specs:
        raise InvalidInputError("sweep needs at least one configuration")
    runner = runner or run_experiment
    rows = []
    for spec in specs:
        try:
            res = runner(series, ops, spec)
        except Exception as exc:  # keep sweeping
            log.warning("sweep entry %r failed: %s", spec.description, exc)
            rows.append(_row_for(spec, error=f"{type(exc).__name__}: {exc}"))
            continue
        rows.append(_row_for(spec, res.reconstruction_loss, res.report))
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for row in rows:
            w.writerow(row.as_list())
