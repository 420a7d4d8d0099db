"""KAN, Temporal KAN and recurrent forecasters for daily weather variables, on a small numpy autodiff core."""

__version__ = "0.1.0"

from .benchmark import BenchmarkConfig, load_config, run_benchmark  # noqa: E402
from .data import FEATURES, MinMaxScaler, WeatherSeries, ingest_csv, make_windows, prepare_dataset, split  # noqa: E402
from .metrics import MetricsReport, compute_metrics  # noqa: E402
from .models import ALL_MODELS, BENCHMARK_MODELS, build_model  # noqa: E402
from .synthetic import synthetic_series  # noqa: E402
from .tensor import Tape, Tensor, no_grad  # noqa: E402
from .train import Checkpoint, TrainConfig, evaluate, fit_model, fit_steps, train_model  # noqa: E402

__all__ = [
    "BenchmarkConfig",
    "load_config",
    "run_benchmark",
    "FEATURES",
    "MinMaxScaler",
    "WeatherSeries",
    "ingest_csv",
    "make_windows",
    "prepare_dataset",
    "split",
    "MetricsReport",
    "compute_metrics",
    "ALL_MODELS",
    "BENCHMARK_MODELS",
    "build_model",
    "synthetic_series",
    "Tape",
    "Tensor",
    "no_grad",
    "Checkpoint",
    "TrainConfig",
    "evaluate",
    "fit_model",
    "fit_steps",
    "train_model",
]
