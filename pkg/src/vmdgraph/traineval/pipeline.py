"""One end-to-end experiment: decompose, window, train, evaluate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import SeriesSet
from ..graph import SpectralOps
from ..model import ModelConfig, StModel, basis_tensor
from ..vmd import ModeSet, VmdConfig, decompose_many
from .metrics import MetricsReport, evaluate
from .training import TrainConfig, TrainResult, baseline_predictions, predict, train
from .windows import WindowedDataset, build_features, make_windows


@dataclass(frozen=True)
class ExperimentSpec:
    vmd: VmdConfig = VmdConfig()
    variant: str = "v2"
    window: int = 12
    horizon: int = 12
    blocks: int = 2
    cheb_order: int = 3
    channels: int = 16
    time_kernel: int = 3
    train: TrainConfig = TrainConfig()
    fractions: tuple = (0.6, 0.2, 0.2)
    description: str = ""


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    modesets: list
    dataset: WindowedDataset
    model: StModel
    training: TrainResult
    report: MetricsReport
    baseline: MetricsReport
    reconstruction_loss: float
    extras: dict = field(default_factory=dict)


def normalized_residual(values, ms: ModeSet) -> float:
    """Mean absolute residual relative to the series' min-max range."""
    values = np.asarray(values, dtype=np.float64)
    span = values.max() - values.min()
    resid = np.mean(np.abs(values - ms.modes.sum(axis=0)))
    return float(resid / span) if span > 0 else float(resid)


def prepare(series: SeriesSet, spec: ExperimentSpec, modesets=None):
    if modesets is None:
        modesets = decompose_many(series.series(), spec.vmd)
    feats = build_features(series, modesets, spec.variant)
    ds = make_windows(feats, series.values, spec.window, spec.horizon, spec.fractions,
                      node_ids=series.node_ids, timestamps=series.timestamps())
    return modesets, ds


def model_config_for(ds: WindowedDataset, spec: ExperimentSpec) -> ModelConfig:
    return ModelConfig(
        num_nodes=ds.num_nodes, in_channels=ds.num_channels, window=spec.window,
        horizon=spec.horizon, blocks=spec.blocks, cheb_order=spec.cheb_order,
        channels=spec.channels, time_kernel=spec.time_kernel, seed=spec.train.seed,
    )


def run_experiment(series: SeriesSet, ops: SpectralOps, spec: ExperimentSpec,
                   modesets=None) -> ExperimentResult:
    if ops.order != spec.cheb_order:
        raise ValueError(f"spectral ops have order {ops.order}, spec wants {spec.cheb_order}")
    modesets, ds = prepare(series, spec, modesets)
    model = StModel(model_config_for(ds, spec))
    basis = basis_tensor(ops)
    result = train(model, ds, basis, spec.train)
    report = evaluate(predict(model, ds, "test", basis), ds.targets("test"))
    base = evaluate(baseline_predictions(ds, "test"), ds.targets("test"))
    by_id = {ms.node_id: ms for ms in modesets}
    recon = float(np.mean([
        normalized_residual(series.values[i], by_id.get(nid, modesets[i]))
        for i, nid in enumerate(series.node_ids)
    ]))
    return ExperimentResult(spec, modesets, ds, model, result, report, base, recon)
