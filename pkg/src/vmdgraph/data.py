"""Multi-node flow container and the synthetic ring network used for demos."""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .spectral import InvalidInputError, TimeSeries


@dataclass
class SeriesSet:
    """Flows for ``N`` nodes on a shared clock, shape ``(N, T)``."""

    node_ids: list[str]
    values: np.ndarray
    start_time: datetime = datetime(2019, 1, 1)
    step: timedelta = timedelta(minutes=15)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.node_ids):
            raise InvalidInputError("values must be (N, T) with one row per node id")
        if self.values.shape[1] < 4:
            raise InvalidInputError("series need at least 4 samples")

    @property
    def num_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def timestamps(self) -> list[datetime]:
        return [self.start_time + i * self.step for i in range(self.length)]

    def series(self) -> list[TimeSeries]:
        return [
            TimeSeries(self.values[i], node_id=nid, start_time=self.start_time, step=self.step)
            for i, nid in enumerate(self.node_ids)
        ]


@dataclass
class RingNetwork:
    series: SeriesSet
    distances: np.ndarray
    metadata: list[dict]


def ring_distances(num_nodes: int, spacing_km: float = 1.0) -> np.ndarray:
    i = np.arange(num_nodes)
    hops = np.abs(i[:, None] - i[None, :])
    return np.minimum(hops, num_nodes - hops) * spacing_km


def synthetic_ring(num_nodes: int = 10, length: int = 2000, seed: int = 0,
                   steps_per_day: int = 96, coupling: float = 0.3,
                   noise: float = 3.0) -> RingNetwork:
    """Daily cycles plus a diffusing disturbance on a ring of sensors.

    Each node has its own level, amplitude and phase. A mean-reverting
    disturbance spreads to ring neighbours each step, and white measurement
    noise is added on top. Flows are clipped at zero.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    level = rng.uniform(80.0, 160.0, num_nodes)
    amp = level * rng.uniform(0.4, 0.7, num_nodes)
    phase = rng.uniform(-0.5, 0.5, num_nodes)
    daily = level[:, None] + amp[:, None] * np.sin(
        2 * np.pi * t[None, :] / steps_per_day - phase[:, None]
    )

    left = np.roll(np.arange(num_nodes), 1)
    right = np.roll(np.arange(num_nodes), -1)
    h = np.zeros((num_nodes, length))
    shocks = rng.standard_normal((num_nodes, length)) * 4.0
    for k in range(1, length):
        prev = h[:, k - 1]
        spread = 0.5 * (prev[left] + prev[right]) - prev
        h[:, k] = 0.9 * prev + coupling * spread + shocks[:, k]
    flows = np.clip(daily + h + noise * rng.standard_normal((num_nodes, length)), 0.0, None)

    ids = [f"n{i:02d}" for i in range(num_nodes)]
    angle = 2 * np.pi * np.arange(num_nodes) / num_nodes
    meta = [
        {"node_id": ids[i], "lat": 32.7 + 0.01 * np.sin(angle[i]),
         "lon": -117.1 + 0.01 * np.cos(angle[i]), "lanes": int(rng.integers(2, 6))}
        for i in range(num_nodes)
    ]
    return RingNetwork(SeriesSet(ids, flows), ring_distances(num_nodes), meta)


def tone_region(num_nodes: int = 50, length: int = 1024, seed: int = 0,
                noise: float = 1e-3) -> list[TimeSeries]:
    """Nodes made of five separated tones plus weak white noise.

    Tones sit on exact half-bins of the mirrored length so the mirrored
    extension is periodic and each tone occupies a single spectral bin.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    centers = np.array([0.02, 0.11, 0.20, 0.31, 0.41])
    out = []
    for i in range(num_nodes):
        bins = np.round((centers + rng.uniform(-0.01, 0.01, centers.size)) * 2 * length)
        amps = rng.uniform(0.5, 1.5, centers.size)
        x = sum(a * np.cos(np.pi * m * (t + 0.5) / length) for a, m in zip(amps, bins))
        x = x + noise * rng.standard_normal(length)
        out.append(TimeSeries(x, node_id=f"t{i:03d}"))
    return out


def lowfreq_driven(num_nodes: int = 4, length: int = 1200, seed: int = 0,
                   period: float = 150.0) -> RingNetwork:
    """Flows dominated by one slow oscillation with weak fast ripples on top."""
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    phase = rng.uniform(0, 2 * np.pi, num_nodes)
    slow = 40.0 * np.sin(2 * np.pi * t[None, :] / period + phase[:, None])
    fast = 3.0 * np.sin(2 * np.pi * t / 7.0) + 2.0 * np.sin(2 * np.pi * t / 3.3)
    flows = 50.0 + slow + fast[None, :] + rng.standard_normal((num_nodes, length))
    ids = [f"s{i:02d}" for i in range(num_nodes)]
    meta = [{"node_id": nid, "lat": 0.0, "lon": 0.0, "lanes": 2} for nid in ids]
    return RingNetwork(SeriesSet(ids, flows), ring_distances(num_nodes), meta)
