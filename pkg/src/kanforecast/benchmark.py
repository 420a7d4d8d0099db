"""
Config-driven benchmark: every (city, target, model) job is ingest, scale,
window, split, train and evaluate, followed by report files.

Output layout under the run directory::

    tables/{city}_{target}.csv|.txt            physical units
    tables/{city}_{target}_scaled.csv|.txt     scaled units
    series/{city}_{target}_{model}.csv         date, actual, predicted (test split)
    history/{city}_{target}_{model}.csv        epoch, train_mse, val_mse
    checkpoints/{city}_{target}_{model}.npz
    manifest.json                              config, seed, versions, wall times
"""

from __future__ import annotations

import csv
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .data import DEFAULT_SPLIT, TARGETS, ingest_csv, prepare_dataset
from .errors import ConfigurationError, ContractError
from .metrics import HIGHER_IS_BETTER, METRIC_NAMES, MetricsReport
from .models import ALL_MODELS, RNN_MODELS, model_family, resolve_hyper
from .train import Checkpoint, TrainConfig, evaluate, load_model, train_model

HEADER_LABELS = {"MSE": "MSE ↓", "RMSE": "RMSE ↓", "MAE": "MAE ↓", "R2": "R² ↑", "MAPE": "MAPE ↓"}


class LeakageError(ContractError):
    """The training loop touched a sample whose target lies in the test split."""


@dataclass
class BenchmarkConfig:
    datasets: list  # [(city, csv path)]
    targets: list = field(default_factory=lambda: list(TARGETS))
    models: list = field(default_factory=lambda: ["KAN"])
    hyperparameters: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)  # epochs, batch_size, lr, patience
    data: dict = field(default_factory=dict)  # window, horizon, fractions, missing
    seed: int = 0
    workers: int = 1
    output_dir: str = "runs/benchmark"

    def validate(self) -> None:
        if not self.datasets:
            raise ConfigurationError("no datasets configured")
        cities = [c for c, _ in self.datasets]
        if len(set(cities)) != len(cities):
            raise ConfigurationError(f"duplicate city labels {cities}")
        bad = [t for t in self.targets if t not in TARGETS]
        if bad or not self.targets:
            raise ConfigurationError(f"targets must be a non-empty subset of {TARGETS}, got {self.targets}")
        bad = [m for m in self.models if m not in ALL_MODELS]
        if bad or not self.models:
            raise ConfigurationError(f"unknown model(s) {bad}; choose from {ALL_MODELS}")
        if len(set(self.models)) != len(self.models):
            raise ConfigurationError(f"duplicate models {self.models}")
        for kind, over in self.hyperparameters.items():
            resolve_hyper(kind, over)
        unknown = set(self.train) - {"epochs", "batch_size", "lr", "patience"}
        if unknown:
            raise ConfigurationError(f"unknown train option(s) {sorted(unknown)}")
        unknown = set(self.data) - {"window", "horizon", "fractions", "missing"}
        if unknown:
            raise ConfigurationError(f"unknown data option(s) {sorted(unknown)}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        self.train_config("LSTM", "T2M")

    def train_config(self, kind: str, target: str) -> TrainConfig:
        return TrainConfig(
            model=kind,
            hyper=dict(self.hyperparameters.get(kind, {})),
            seed=self.seed,
            target=target,
            window=self.data.get("window", 14),
            horizon=self.data.get("horizon", 1),
            fractions=tuple(self.data.get("fractions", DEFAULT_SPLIT)),
            **self.train,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["datasets"] = [{"city": c, "path": str(p)} for c, p in self.datasets]
        return d


def load_config(path) -> BenchmarkConfig:
    """Read a JSON config; relative dataset and output paths resolve against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    known = {"datasets", "targets", "models", "hyperparameters", "train", "data", "seed", "workers", "output_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown key(s) {sorted(unknown)}")
    base = path.parent
    ds = raw.get("datasets", [])
    if isinstance(ds, dict):
        ds = [{"city": k, "path": v} for k, v in ds.items()]
    try:
        datasets = [(d["city"], str(base / d["path"])) for d in ds]
    except (KeyError, TypeError):
        raise ConfigurationError(f"{path}: datasets must be a list of {{city, path}} objects") from None
    out = raw.get("output_dir", "runs/benchmark")
    return BenchmarkConfig(
        datasets=datasets,
        targets=list(raw.get("targets", TARGETS)),
        models=list(raw.get("models", ["KAN"])),
        hyperparameters=dict(raw.get("hyperparameters", {})),
        train=dict(raw.get("train", {})),
        data=dict(raw.get("data", {})),
        seed=int(raw.get("seed", 0)),
        workers=int(raw.get("workers", 1)),
        output_dir=str(base / out),
    )


def _stem(city: str, target: str, kind: str | None = None) -> str:
    parts = [city, target] if kind is None else [city, target, kind]
    return "_".join(p.replace("/", "-").replace(" ", "-") for p in parts)


def _checkpoint_path(out: Path, city: str, target: str, kind: str) -> Path:
    return out / "checkpoints" / f"{_stem(city, target, kind)}.npz"


def check_ensemble_inputs(config: BenchmarkConfig) -> None:
    """Ensemble needs its four bases in this run or checkpoints already on disk."""
    if "Ensemble" not in config.models:
        return
    out = Path(config.output_dir)
    missing = []
    for city, _ in config.datasets:
        for target in config.targets:
            for kind in RNN_MODELS:
                if kind not in config.models and not _checkpoint_path(out, city, target, kind).exists():
                    missing.append(str(_checkpoint_path(out, city, target, kind)))
    if missing:
        raise ConfigurationError(
            "Ensemble needs LSTM, GRU, BiLSTM and BiGRU in the run or their checkpoints; missing " + ", ".join(missing)
        )


def _assert_no_leakage(dataset, visited: set) -> None:
    tr, te = dataset.splits["train"], dataset.splits["test"]
    ids = np.fromiter(visited, dtype=np.intp)
    if ids.size and (ids.min() < tr.start or ids.max() >= tr.stop):
        raise LeakageError(f"training visited samples outside {tr}")
    test_days = set(dataset.target_days[te.start:te.stop].tolist())
    if test_days & set(dataset.target_days[ids].tolist()):
        raise LeakageError("training visited a test-split target day")


def emit_series(evaluation, path) -> None:
    """date, actual, predicted for each test day, in date order and physical units."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "actual", "predicted"))
        for d, a, p in evaluation.series_rows():
            w.writerow((d, repr(a), repr(p)))


def run_job(job: dict) -> dict:
    """One (city, target, model) job; returns metrics and timing. Top-level so it can cross processes."""
    t0 = time.perf_counter()
    config = BenchmarkConfig(**job["config"])
    city, path, target, kind = job["city"], job["path"], job["target"], job["model"]
    out = Path(config.output_dir)
    tc = config.train_config(kind, target)
    series = ingest_csv(path, city=city, missing=config.data.get("missing", "error"))
    dataset = prepare_dataset(series, target, model_family(kind), tc.window, tc.horizon, tc.fractions)

    bases = None
    if kind == "Ensemble":
        bases = []
        for base_kind in RNN_MODELS:
            ckpt = Checkpoint.load(_checkpoint_path(out, city, target, base_kind))
            if ckpt.config["dataset"]["scaler"] != dataset.scaler.to_dict():
                raise ConfigurationError(f"{base_kind} checkpoint was trained with a different scaler")
            bases.append(load_model(ckpt))

    ckpt, history = train_model(tc, dataset, bases=bases)
    _assert_no_leakage(dataset, history.visited)
    ev = evaluate(ckpt, dataset, "test", city=city)

    stem = _stem(city, target, kind)
    ckpt.save(_checkpoint_path(out, city, target, kind))
    history.to_csv(out / "history" / f"{stem}.csv")
    emit_series(ev, out / "series" / f"{stem}.csv")
    return {
        "city": city,
        "target": target,
        "model": kind,
        "report": asdict(ev.report),
        "scaled": asdict(ev.scaled),
        "epochs": len(history.rows),
        "best_epoch": ckpt.epoch,
        "best_val_mse": ckpt.best_val_mse,
        "wall_seconds": time.perf_counter() - t0,
    }


def _fmt(metric: str, value: float) -> str:
    if not np.isfinite(value):
        return "nan"
    return f"{value:.2f}" if metric == "MAPE" else f"{value:.4f}"


def best_rows(reports: list[MetricsReport]) -> dict[str, set]:
    """Metric -> indices of the rows holding the best value (ties all marked; NaN never best)."""
    best = {}
    for m in METRIC_NAMES:
        vals = np.array([getattr(r, m) for r in reports], dtype=np.float64)
        ok = np.isfinite(vals)
        if not ok.any():
            best[m] = set()
            continue
        target = vals[ok].max() if HIGHER_IS_BETTER[m] else vals[ok].min()
        best[m] = {i for i in range(len(vals)) if ok[i] and vals[i] == target}
    return best


def write_table(reports: list[MetricsReport], stem: Path) -> None:
    """``stem``.csv (full precision plus a ``best`` column) and ``stem``.txt (aligned, best marked with *)."""
    best = best_rows(reports)
    with stem.with_suffix(".csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("model",) + METRIC_NAMES + ("n", "best"))
        for i, r in enumerate(reports):
            marks = ";".join(m for m in METRIC_NAMES if i in best[m])
            w.writerow((r.model,) + tuple(repr(v) for v in r.values()) + (r.n, marks))

    header = ["Model"] + [HEADER_LABELS[m] for m in METRIC_NAMES]
    rows = [
        [r.model] + [_fmt(m, getattr(r, m)) + ("*" if i in best[m] else " ") for m in METRIC_NAMES]
        for i, r in enumerate(reports)
    ]
    widths = [max(len(row[c]) for row in rows + [header]) for c in range(len(header))]
    lines = ["  ".join(h.ljust(widths[0]) if c == 0 else h.rjust(widths[c]) for c, h in enumerate(header))]
    lines.append("  ".join("-" * wd for wd in widths))
    for row in rows:
        lines.append("  ".join(v.ljust(widths[0]) if c == 0 else v.rjust(widths[c]) for c, v in enumerate(row)))
    first = reports[0]
    title = f"{first.city} / {first.variable}   (* best in column)"
    stem.with_suffix(".txt").write_text(title + "\n\n" + "\n".join(lines) + "\n", encoding="utf-8")


def _versions() -> dict:
    return {"kanforecast": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _execute(jobs: list[dict], workers: int) -> list[dict]:
    if workers == 1 or len(jobs) == 1:
        return [_guarded(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_guarded, jobs))


def _guarded(job: dict) -> dict:
    try:
        return {"ok": True, **run_job(job)}
    except Exception as exc:  # one failing job must not sink the others
        return {"ok": False, "city": job["city"], "target": job["target"], "model": job["model"],
                "error": f"{type(exc).__name__}: {exc}"}


def run_benchmark(config: BenchmarkConfig) -> dict:
    """Run every job, write reports, return the manifest. Raises ConfigurationError before training on bad input."""
    config.validate()
    for city, path in config.datasets:
        if not Path(path).is_file():
            raise ConfigurationError(f"{city}: dataset file {path} not found")
    check_ensemble_inputs(config)
    out = Path(config.output_dir)
    for sub in ("tables", "series", "history", "checkpoints"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    snapshot = config.to_dict()
    jobs = [
        {"config": snapshot | {"datasets": config.datasets}, "city": city, "path": path,
         "target": target, "model": kind}
        for city, path in config.datasets
        for target in config.targets
        for kind in config.models
    ]
    t0 = time.perf_counter()
    first = _execute([j for j in jobs if j["model"] != "Ensemble"], config.workers)
    failed_bases = {(r["city"], r["target"]) for r in first if not r["ok"] and r["model"] in RNN_MODELS}
    ensembles = [j for j in jobs if j["model"] == "Ensemble"]
    runnable = [j for j in ensembles if (j["city"], j["target"]) not in failed_bases]
    second = _execute(runnable, config.workers) if runnable else []
    second += [
        {"ok": False, "city": j["city"], "target": j["target"], "model": "Ensemble",
         "error": "skipped: a base model failed"}
        for j in ensembles if (j["city"], j["target"]) in failed_bases
    ]
    results = {(r["city"], r["target"], r["model"]): r for r in first + second}

    for city, _ in config.datasets:
        for target in config.targets:
            rows = [results[(city, target, k)] for k in config.models if results[(city, target, k)]["ok"]]
            if not rows:
                continue
            stem = out / "tables" / _stem(city, target)
            write_table([MetricsReport(**r["report"]) for r in rows], stem)
            write_table([MetricsReport(**r["scaled"]) for r in rows], stem.with_name(stem.name + "_scaled"))

    ordered = [results[(j["city"], j["target"], j["model"])] for j in jobs]
    manifest = {
        "config": snapshot,
        "seed": config.seed,
        "versions": _versions(),
        "wall_seconds": time.perf_counter() - t0,
        "jobs": [
            {k: r[k] for k in ("city", "target", "model", "ok", "error", "epochs", "best_epoch",
                               "best_val_mse", "wall_seconds") if k in r}
            for r in ordered
        ],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
