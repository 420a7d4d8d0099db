"""Mini-batch MSE training with Adam, best-validation checkpointing and evaluation."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import DEFAULT_SPLIT, MinMaxScaler, WindowedDataset
from .errors import ConfigurationError, ContractError, TrainingError
from .metrics import MetricsReport, compute_metrics
from .models import Forecaster, build_model, predict_features
from .nn import AdamState, adam_step
from .tensor import Tape, Tensor

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    model: str = "LSTM"
    hyper: dict = field(default_factory=dict)
    epochs: int = 100
    batch_size: int = 64
    lr: float = 0.001
    seed: int = 0
    patience: int = 15
    target: str = "T2M"
    window: int = 14
    horizon: int = 1
    fractions: tuple = DEFAULT_SPLIT

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if not 1 <= self.patience <= self.epochs:
            raise ConfigurationError(f"patience must lie in 1..epochs, got {self.patience}")
        self.fractions = tuple(self.fractions)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fractions"] = list(self.fractions)
        return d


@dataclass
class History:
    rows: list = field(default_factory=list)  # (epoch, train_mse, val_mse)
    visited: set = field(default_factory=set)  # training sample indices ever batched

    @property
    def best_val(self) -> list[float]:
        return list(np.minimum.accumulate([r[2] for r in self.rows])) if self.rows else []

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epoch", "train_mse", "val_mse"))
            for epoch, tr, va in self.rows:
                w.writerow((epoch, repr(tr), repr(va)))


@dataclass
class Checkpoint:
    state: dict  # parameter name -> float64 array
    config: dict  # TrainConfig snapshot plus dataset / ensemble metadata
    best_val_mse: float
    epoch: int

    def save(self, path) -> None:
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": self.config,
            "best_val_mse": self.best_val_mse,
            "epoch": self.epoch,
            "shapes": {k: list(v.shape) for k, v in self.state.items()},
        }
        arrays = {f"param/{k}": np.ascontiguousarray(v, dtype="<f8") for k, v in self.state.items()}
        arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        with Path(path).open("wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ContractError(f"{path}: unsupported checkpoint version {meta.get('version')}")
            state = {k[len("param/"):]: z[k].astype(np.float64) for k in z.files if k.startswith("param/")}
        for k, shape in meta["shapes"].items():
            if list(state[k].shape) != shape:
                raise ContractError(f"{path}: {k} has shape {state[k].shape}, header says {shape}")
        return cls(state, meta["config"], meta["best_val_mse"], meta["epoch"])


def _mse(y: np.ndarray, p: np.ndarray) -> float:
    err = y - p
    return float(np.mean(err * err))


def fit_model(model: Forecaster, train_split, val_split, config: TrainConfig,
              sample_ids: np.ndarray | None = None) -> tuple[Checkpoint, History]:
    """Minimise scaled-space MSE; keep the best-validation parameters.

    ``train_split`` and ``val_split`` are (windows, targets) pairs.  ``sample_ids``
    names the training samples for the leakage record (defaults to 0..n-1).
    """
    x_tr, y_tr = train_split
    x_va, y_va = val_split
    if len(y_tr) == 0 or len(y_va) == 0:
        raise ContractError("training and validation splits must be non-empty")
    ids = np.arange(len(y_tr)) if sample_ids is None else np.asarray(sample_ids)
    rng = np.random.default_rng(config.seed)
    f_tr, f_va = model.features(x_tr), model.features(x_va)
    y_tr = np.asarray(y_tr, dtype=np.float64)
    y_va = np.asarray(y_va, dtype=np.float64)
    params = model.trainable()
    opt = AdamState(lr=config.lr)
    history = History()
    best_val, best_state, best_epoch, stale = np.inf, model.state_dict(), 0, 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(y_tr))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            history.visited.update(ids[idx].tolist())
            with Tape() as tape:
                pred = model.forward(f_tr[idx], training=True, rng=rng)
                diff = pred - Tensor(y_tr[idx][:, None])
                loss = (diff * diff).mean()
            if not np.isfinite(loss.data):
                raise TrainingError(f"loss became {loss.item()} at epoch {epoch}", epoch=epoch)
            tape.backward(loss)
            adam_step(opt, params)
            total += float(loss.data) * len(idx)
        val = _mse(y_va, predict_features(model, f_va, config.batch_size))
        if not np.isfinite(val):
            raise TrainingError(f"validation loss became {val} at epoch {epoch}", epoch=epoch)
        history.rows.append((epoch, total / len(y_tr), val))
        if val < best_val:
            best_val, best_state, best_epoch, stale = val, model.state_dict(), epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    model.load_state_dict(best_state)
    snapshot = {"train": config.to_dict(), "kind": model.kind, "hyper": model.hyper}
    return Checkpoint(model.state_dict(), snapshot, float(best_val), best_epoch), history


def fit_steps(model: Forecaster, windows: np.ndarray, y: np.ndarray, max_steps: int = 2000,
              lr: float = 0.001, target_mse: float | None = None, seed: int = 0) -> tuple[int, float]:
    """Full-batch Adam steps on (windows, y) until the training MSE drops below ``target_mse``.

    Returns (steps taken, final training MSE measured in inference mode). A capacity check
    rather than a training protocol: there is no validation split and no shuffling.
    """
    rng = np.random.default_rng(seed)
    feats = model.features(windows)
    y = np.asarray(y, dtype=np.float64)
    target = Tensor(y[:, None])
    params = model.trainable()
    opt = AdamState(lr=lr)
    mse = _mse(y, predict_features(model, feats, len(y)))
    steps = 0
    while steps < max_steps and not (target_mse is not None and mse < target_mse):
        with Tape() as tape:
            diff = model.forward(feats, training=True, rng=rng) - target
            loss = (diff * diff).mean()
        if not np.isfinite(loss.data):
            raise TrainingError(f"loss became {loss.item()} at step {steps}", epoch=steps)
        tape.backward(loss)
        adam_step(opt, params)
        steps += 1
        mse = _mse(y, predict_features(model, feats, len(y)))
    return steps, mse


def _model_meta(model: Forecaster) -> dict:
    meta = {"kind": model.kind, "hyper": model.hyper}
    if model.kind == "Ensemble":
        meta["bases"] = [{"kind": b.kind, "hyper": b.hyper} for b in model.bases]
    return meta


def train_model(config: TrainConfig, dataset: WindowedDataset, bases: list | None = None,
                model: Forecaster | None = None) -> tuple[Checkpoint, History]:
    """Build (unless given), train and checkpoint one model on a prepared dataset."""
    if not dataset.splits:
        raise ContractError("dataset has no split indices")
    if model is None:
        d = dataset.X.shape[2]
        model = build_model(config.model, d, dataset.window, config.seed, config.hyper, bases=bases)
    tr = dataset.splits["train"]
    ckpt, history = fit_model(model, dataset.part("train"), dataset.part("val"), config,
                              sample_ids=np.arange(tr.start, tr.stop))
    ckpt.config.update(_model_meta(model))
    ckpt.config["dataset"] = {
        "target": dataset.target,
        "target_col": dataset.target_col,
        "window": dataset.window,
        "horizon": dataset.horizon,
        "n_features": int(dataset.X.shape[2]),
        "scaler": dataset.scaler.to_dict() if dataset.scaler is not None else None,
    }
    return ckpt, history


def load_model(checkpoint: Checkpoint) -> Forecaster:
    """Rebuild the network described by a checkpoint and load its parameters."""
    cfg = checkpoint.config
    ds = cfg["dataset"]
    seed = cfg["train"]["seed"]
    bases = None
    if cfg["kind"] == "Ensemble":
        bases = [build_model(b["kind"], ds["n_features"], ds["window"], seed, b["hyper"]) for b in cfg["bases"]]
    model = build_model(cfg["kind"], ds["n_features"], ds["window"], seed, cfg["hyper"], bases=bases)
    model.load_state_dict(checkpoint.state)
    return model


@dataclass
class Evaluation:
    report: MetricsReport  # physical units
    scaled: MetricsReport  # scaled space, the units training minimises
    dates: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray

    def series_rows(self):
        return [(str(d), float(a), float(p)) for d, a, p in zip(self.dates, self.actual, self.predicted)]


def evaluate(checkpoint: Checkpoint, dataset: WindowedDataset, split: str = "test",
             scaler: MinMaxScaler | None = None, city: str = "") -> Evaluation:
    """Predict one split, inverse-scale the target and compute both metric sets."""
    scaler = scaler or dataset.scaler
    stored = checkpoint.config["dataset"]["scaler"]
    if scaler is None or stored is None or scaler.to_dict() != stored:
        raise ContractError("scaler does not match the one the checkpoint was trained with")
    if checkpoint.config["dataset"]["target_col"] != dataset.target_col:
        raise ContractError("checkpoint target does not match the dataset")
    model = load_model(checkpoint)
    r = dataset.splits[split]
    x, y = dataset.part(split)
    batch = checkpoint.config["train"]["batch_size"]
    pred = predict_features(model, model.features(x), batch)
    actual = dataset.y_raw[r.start:r.stop]
    predicted = scaler.inverse_column(pred, dataset.target_col)
    name = checkpoint.config["kind"]
    return Evaluation(
        report=compute_metrics(actual, predicted, name, city, dataset.target),
        scaled=compute_metrics(y, pred, name, city, dataset.target),
        dates=dataset.dates[r.start:r.stop],
        actual=actual,
        predicted=predicted,
    )
