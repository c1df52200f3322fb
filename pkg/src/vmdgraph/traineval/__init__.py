from .metrics import MetricsReport, UndefinedMetricError, evaluate, mae, mape, rmse
from .pipeline import ExperimentResult, ExperimentSpec, run_experiment
from .studies import ablate_mode, ablate_modes, mode_divergence, sweep
from .training import TrainConfig, TrainResult, historical_last_baseline, predict, train
from .windows import WindowedDataset, make_windows, split_bounds, window_starts

__all__ = [
    "ExperimentResult", "ExperimentSpec", "MetricsReport", "TrainConfig", "TrainResult",
    "UndefinedMetricError", "WindowedDataset", "ablate_mode", "ablate_modes", "evaluate",
    "historical_last_baseline", "mae", "make_windows", "mape", "mode_divergence", "predict",
    "rmse", "run_experiment", "split_bounds", "sweep", "train", "window_starts",
]
