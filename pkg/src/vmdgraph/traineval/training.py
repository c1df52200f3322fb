"""Adam training with early stopping, inference and the naive baseline."""
from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from ..model import DTYPE, StModel, basis_tensor, loss_value
from ..spectral import InvalidInputError
from ..vmd import InvalidConfigError
from .metrics import MetricsReport, evaluate
from .windows import WindowedDataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    loss: str = "mae"
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise InvalidConfigError("lr must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1:
            raise InvalidConfigError("batch_size, patience must be >= 1 and max_epochs >= 0")


@dataclass
class TrainResult:
    history: list = field(default_factory=list)   # (epoch, train_mae, val_mae)
    best_epoch: int = 0
    best_val_mae: float = math.inf
    stopped_early: bool = False
    diverged: bool = False


def _as_basis(basis):
    return basis if isinstance(basis, torch.Tensor) else basis_tensor(basis)


def predict(model: StModel, ds: WindowedDataset, split: str, basis,
            batch_size: int = 256) -> np.ndarray:
    """Raw-unit forecasts ``(n_windows, N, N_H)`` for one split."""
    basis = _as_basis(basis)
    n = ds.size(split)
    out = np.empty((n, ds.num_nodes, ds.horizon))
    model.eval()
    with torch.no_grad():
        for lo in range(0, n, batch_size):
            idx = np.arange(lo, min(n, lo + batch_size))
            X = torch.as_tensor(ds.inputs(split, idx), dtype=DTYPE)
            out[idx] = ds.denormalize(model(X, basis).numpy())
    return out


def evaluate_model(model, ds, split, basis) -> MetricsReport:
    return evaluate(predict(model, ds, split, basis), ds.targets(split))


def historical_last_baseline(window, horizon: int = 12) -> np.ndarray:
    """Repeat the last observed raw value of each node across the horizon.

    ``window`` is ``(..., N, T_w)``; the result is ``(..., N, horizon)``.
    """
    w = np.asarray(window, dtype=np.float64)
    if w.shape[-1] == 0:
        raise InvalidInputError("empty window")
    return np.repeat(w[..., -1:], horizon, axis=-1)


def baseline_predictions(ds: WindowedDataset, split: str) -> np.ndarray:
    last = ds.last_observed(split)
    return np.repeat(last[:, :, None], ds.horizon, axis=2)


def _epoch_mae(model, ds, split, basis) -> float:
    return evaluate(predict(model, ds, split, basis), ds.targets(split)).average["mae"]


def train(model: StModel, ds: WindowedDataset, basis, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Fit ``model`` in place and restore the best-on-validation parameters.

    History row 0 is the untrained model. MAE values are in raw units.
    """
    if ds.size("train") < 1 or ds.size("val") < 1:
        raise InvalidInputError("training needs at least one train and one val window")
    basis = _as_basis(basis)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=cfg.betas, eps=cfg.eps)

    result = TrainResult()
    val = _epoch_mae(model, ds, "val", basis)
    result.history.append((0, _epoch_mae(model, ds, "train", basis), val))
    best_state = copy.deepcopy(model.state_dict())
    result.best_val_mae, result.best_epoch = val, 0
    stale = 0
    n = ds.size("train")
    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = np.sort(order[lo:lo + cfg.batch_size])
            X = torch.as_tensor(ds.inputs("train", idx), dtype=DTYPE)
            y = torch.as_tensor(ds.normalize_target(ds.targets("train", idx)), dtype=DTYPE)
            opt.zero_grad(set_to_none=True)
            loss = loss_value(model(X, basis), y, cfg.loss)
            if not torch.isfinite(loss):
                log.error("non-finite loss at epoch %d; restoring epoch %d", epoch, result.best_epoch)
                result.diverged = True
                model.load_state_dict(best_state)
                return result
            loss.backward()
            opt.step()
            total += float(loss.item()) * len(idx)
        train_loss = total / n
        # mae loss on normalized targets maps back to raw units by the scale
        train_mae = train_loss * ds.target_std if cfg.loss == "mae" else _epoch_mae(model, ds, "train", basis)
        val = _epoch_mae(model, ds, "val", basis)
        result.history.append((epoch, train_mae, val))
        log.info("epoch %d train_mae %.4f val_mae %.4f", epoch, train_mae, val)
        if val < result.best_val_mae:
            result.best_val_mae, result.best_epoch = val, epoch
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                result.stopped_early = True
                break
    model.load_state_dict(best_state)
    return result


def write_history_csv(result: TrainResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_mae", "val_mae"])
        for epoch, tr, va in result.history:
            w.writerow([epoch, repr(float(tr)), repr(float(va))])
