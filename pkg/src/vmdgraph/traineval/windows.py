"""Sliding windows over feature tensors with chronological splits."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..data import SeriesSet
from ..model import FeatureTensor, assemble_features
from ..spectral import InvalidInputError
from ..vmd import ModeSet, redemption

SPLITS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.6, 0.2, 0.2)


def window_starts(length: int, window: int, horizon: int) -> np.ndarray:
    """Start indices of every stride-1 window of ``window + horizon`` steps."""
    if length < window + horizon:
        raise InvalidInputError(
            f"series of length {length} is shorter than window+horizon={window + horizon}"
        )
    return np.arange(length - window - horizon + 1)


def split_bounds(length: int, fractions=DEFAULT_FRACTIONS) -> dict:
    """Contiguous ``[lo, hi)`` time ranges for train, val and test."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise InvalidInputError(f"split fractions must be three non-negatives summing to 1, got {fractions}")
    cut1 = int(round(fractions[0] * length))
    cut2 = int(round((fractions[0] + fractions[1]) * length))
    return {"train": (0, cut1), "val": (cut1, cut2), "test": (cut2, length)}


def build_features(series: SeriesSet, modesets: list[ModeSet], variant: str) -> FeatureTensor:
    """Full-length ``N x d x T`` features from per-node decompositions."""
    if len(modesets) != series.num_nodes:
        raise InvalidInputError("need one mode set per node")
    by_id = {ms.node_id: ms for ms in modesets}
    ordered = [by_id.get(nid, ms) for nid, ms in zip(series.node_ids, modesets)]
    modes = np.stack([ms.modes for ms in ordered])
    phi = np.stack([redemption(series.values[i], ms) for i, ms in enumerate(ordered)])
    return assemble_features(modes, series.values, phi, variant, series.timestamps())


@dataclass
class WindowedDataset:
    """Normalized features, raw flows and window start indices per split.

    Inputs are z-scored per channel with statistics from the training range.
    Targets stay in raw units; ``target_mean``/``target_std`` are what the
    model's normalized outputs are mapped back with.
    """

    features: np.ndarray          # (N, d, T), normalized
    flows: np.ndarray             # (N, T), raw
    channel_map: list[str]
    window: int
    horizon: int
    starts: dict
    channel_mean: np.ndarray
    channel_std: np.ndarray
    target_mean: float
    target_std: float
    bounds: dict = field(default_factory=dict)
    node_ids: list = field(default_factory=list)
    timestamps: list = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_channels(self) -> int:
        return self.features.shape[1]

    def size(self, split: str) -> int:
        return len(self.starts[split])

    def inputs(self, split: str, idx=None) -> np.ndarray:
        s = self.starts[split] if idx is None else self.starts[split][idx]
        offs = s[:, None] + np.arange(self.window)[None, :]
        return np.ascontiguousarray(np.moveaxis(self.features[:, :, offs], 2, 0))

    def targets(self, split: str, idx=None) -> np.ndarray:
        s = self.starts[split] if idx is None else self.starts[split][idx]
        offs = s[:, None] + self.window + np.arange(self.horizon)[None, :]
        return np.ascontiguousarray(np.moveaxis(self.flows[:, offs], 1, 0))

    def last_observed(self, split: str) -> np.ndarray:
        s = self.starts[split]
        return self.flows[:, s + self.window - 1].T

    def normalize_target(self, y):
        return (y - self.target_mean) / self.target_std

    def denormalize(self, y):
        return y * self.target_std + self.target_mean

    def with_channels_zeroed(self, channels) -> "WindowedDataset":
        feats = self.features.copy()
        feats[:, list(channels), :] = 0.0
        return replace(self, features=feats)


def make_windows(features: FeatureTensor, flows, window: int = 12, horizon: int = 12,
                 fractions=DEFAULT_FRACTIONS, node_ids=None, timestamps=None) -> WindowedDataset:
    flows = np.asarray(flows, dtype=np.float64)
    data = np.asarray(features.data, dtype=np.float64)
    T = data.shape[-1]
    if flows.shape != (data.shape[0], T):
        raise InvalidInputError(f"flows shape {flows.shape} does not match features {data.shape}")
    starts = window_starts(T, window, horizon)
    bounds = split_bounds(T, fractions)
    span = window + horizon
    by_split = {}
    for name in SPLITS:
        lo, hi = bounds[name]
        by_split[name] = starts[(starts >= lo) & (starts + span <= hi)]

    lo, hi = bounds["train"]
    if hi - lo < 1:
        raise InvalidInputError("training range is empty")
    train = data[:, :, lo:hi]
    mean = train.mean(axis=(0, 2))
    std = train.std(axis=(0, 2))
    std[std == 0] = 1.0
    normed = (data - mean[None, :, None]) / std[None, :, None]
    t_mean = float(flows[:, lo:hi].mean())
    t_std = float(flows[:, lo:hi].std()) or 1.0
    return WindowedDataset(
        normed, flows, list(features.channel_map), window, horizon, by_split,
        mean, std, t_mean, t_std, bounds,
        list(node_ids) if node_ids is not None else [str(i) for i in range(data.shape[0])],
        list(timestamps) if timestamps is not None else [],
    )
