"""Pick the number of modes for a region from a small node sample."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import InvalidInputError, TimeSeries
from .vmd import InvalidConfigError, VmdConfig, decompose, minmax_normalize, reconstruction_loss


@dataclass(frozen=True)
class ModeSelectConfig:
    sample_fraction: float = 0.02
    k_min: int = 2
    k_max: int = 29
    zeta: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.sample_fraction <= 1:
            raise InvalidConfigError(f"sample_fraction must be in (0, 1], got {self.sample_fraction}")
        if self.k_min < 1 or self.k_max < self.k_min:
            raise InvalidConfigError(f"need 1 <= k_min <= k_max, got {self.k_min}..{self.k_max}")
        if not self.zeta > 0:
            raise InvalidConfigError(f"zeta must be > 0, got {self.zeta}")


@dataclass
class ModeSelection:
    k: int
    curve: list[tuple[int, float]]
    zeta: float
    sampled_nodes: list[str] = field(default_factory=list)
    threshold_met: bool = True

    @property
    def status(self) -> str:
        return "ok" if self.threshold_met else "threshold-not-met"

    def rows(self):
        return [(k, loss, loss < self.zeta) for k, loss in self.curve]


def sample_nodes(dataset, fraction: float, seed: int) -> list:
    n = len(dataset)
    count = max(1, math.ceil(fraction * n))
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(n, size=count, replace=False))
    return [dataset[i] for i in picked]


def select_num_modes(dataset, cfg: ModeSelectConfig = ModeSelectConfig(),
                     vmd_base: VmdConfig = VmdConfig()) -> ModeSelection:
    """Sweep ``K`` over a seeded node sample and stop at the first ``K``
    whose mean reconstruction loss is below ``cfg.zeta``.

    The whole range is always evaluated so the curve can be exported. Signals
    are min-max normalized before decomposition.
    """
    dataset = list(dataset)
    if not dataset:
        raise InvalidInputError("select_num_modes needs at least one series")
    sample = sample_nodes(dataset, cfg.sample_fraction, cfg.seed)
    normalized = [
        TimeSeries(minmax_normalize(ts.values), node_id=ts.node_id) for ts in sample
    ]
    curve = []
    for K in range(cfg.k_min, cfg.k_max + 1):
        vcfg = vmd_base.replace(num_modes=K)
        losses = [reconstruction_loss(ts, decompose(ts, vcfg)) for ts in normalized]
        curve.append((K, float(np.sum(losses) / len(losses))))
    chosen = next((k for k, loss in curve if loss < cfg.zeta), None)
    ids = [ts.node_id for ts in sample]
    if chosen is None:
        return ModeSelection(cfg.k_max, curve, cfg.zeta, ids, threshold_met=False)
    return ModeSelection(chosen, curve, cfg.zeta, ids)


def write_k_selection_csv(sel: ModeSelection, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "mean_loss", "qualifying"])
        for k, loss, ok in sel.rows():
            w.writerow([k, repr(loss), str(ok).lower()])
