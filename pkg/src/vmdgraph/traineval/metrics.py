"""Point-forecast error metrics and per-horizon reports."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..spectral import InvalidInputError

MAPE_MASK_THRESHOLD = 1.0


class UndefinedMetricError(ValueError):
    pass


def _pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidInputError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return pred, target


def mae(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def rmse(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def mape(pred, target, mask_threshold: float = MAPE_MASK_THRESHOLD, return_masked=False):
    """Mean absolute percentage error in percent.

    Targets with ``|y| < mask_threshold`` are left out.
    """
    pred, target = _pair(pred, target)
    keep = np.abs(target) >= mask_threshold
    masked = int(keep.size - keep.sum())
    if not keep.any():
        raise UndefinedMetricError("every target point is below the MAPE mask threshold")
    value = float(np.mean(np.abs(pred[keep] - target[keep]) / np.abs(target[keep])) * 100.0)
    return (value, masked) if return_masked else value


@dataclass
class MetricsReport:
    """Errors per horizon step (index 0 is one step ahead) and averaged."""

    mae: np.ndarray
    rmse: np.ndarray
    mape: np.ndarray
    average: dict = field(default_factory=dict)
    samples: int = 0
    masked: int = 0

    @property
    def horizon(self) -> int:
        return self.mae.shape[0]

    def at(self, h: int) -> dict:
        """Metrics at horizon step ``h`` (1-based)."""
        i = h - 1
        return {"mae": float(self.mae[i]), "rmse": float(self.rmse[i]), "mape": float(self.mape[i])}

    def to_dict(self) -> dict:
        return {
            "horizons": [
                {"horizon": h + 1, **self.at(h + 1)} for h in range(self.horizon)
            ],
            "average": dict(self.average),
            "samples": self.samples,
            "masked": self.masked,
        }

    def delta(self, other: "MetricsReport") -> "MetricsReport":
        """``self - other`` metric by metric."""
        return MetricsReport(
            self.mae - other.mae, self.rmse - other.rmse, self.mape - other.mape,
            {k: self.average[k] - other.average[k] for k in self.average},
            self.samples, self.masked,
        )


def evaluate(pred, target, mask_threshold: float = MAPE_MASK_THRESHOLD) -> MetricsReport:
    """Report for forecasts shaped ``(..., N_H)``; the last axis is horizon."""
    pred, target = _pair(pred, target)
    H = pred.shape[-1]
    p = pred.reshape(-1, H)
    y = target.reshape(-1, H)
    if p.shape[0] == 0:
        raise InvalidInputError("nothing to evaluate: no forecast windows")
    maes, rmses, mapes = np.empty(H), np.empty(H), np.empty(H)
    masked = 0
    for h in range(H):
        maes[h] = mae(p[:, h], y[:, h])
        rmses[h] = rmse(p[:, h], y[:, h])
        try:
            mapes[h], m = mape(p[:, h], y[:, h], mask_threshold, return_masked=True)
        except UndefinedMetricError:
            mapes[h], m = np.nan, y.shape[0]
        masked += m
    try:
        avg_mape = mape(p, y, mask_threshold)
    except UndefinedMetricError:
        avg_mape = float("nan")
    average = {"mae": mae(p, y), "rmse": rmse(p, y), "mape": avg_mape}
    return MetricsReport(maes, rmses, mapes, average, samples=p.shape[0], masked=masked)
