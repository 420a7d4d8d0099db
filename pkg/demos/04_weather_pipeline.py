"""
From a station CSV to test metrics
==================================

Ingest a daily file, scale on the training days only, cut 14-day windows,
split 72/8/20 chronologically, then train and evaluate two models.  The file
here is synthetic; a NASA POWER export with the same columns works the same way.
"""

# %%
import tempfile
from pathlib import Path

from kanforecast.data import ingest_csv, prepare_dataset, write_csv
from kanforecast.models import model_family
from kanforecast.synthetic import synthetic_series
from kanforecast.train import TrainConfig, evaluate, train_model

workdir = Path(tempfile.mkdtemp())
write_csv(synthetic_series(5115, seed=0, city="Demo"), workdir / "demo.csv")

# %% Ingestion validates the schema, sorts by date and checks the calendar
series = ingest_csv(workdir / "demo.csv", city="Demo")
print(len(series), "days from", series.dates[0], "to", series.dates[-1])

# %% Windows and splits: 5115 days -> 5101 samples -> 3672 / 408 / 1021
ds = prepare_dataset(series, target="T2M", family=model_family("KAN"))
print({k: len(r) for k, r in ds.splits.items()}, "scaler range", ds.scaler.feature_range)

# %% Precipitation with a recurrent model is scaled to [-1, 1]
print("PREC/LSTM range:", prepare_dataset(series, "PREC", model_family("LSTM")).scaler.feature_range)

# %% Train a small KAN and a small LSTM for a few epochs, report test metrics in degrees C
for kind, hyper in [("KAN", {"hidden_widths": [16]}), ("LSTM", {"hidden": 16})]:
    data = prepare_dataset(series, "T2M", model_family(kind))
    config = TrainConfig(model=kind, hyper=hyper, epochs=10, patience=5)
    ckpt, history = train_model(config, data)
    ev = evaluate(ckpt, data, city="Demo")
    r = ev.report
    print(f"{kind:5s} best epoch {ckpt.epoch:2d}  MSE {r.MSE:.4f}  MAE {r.MAE:.4f}  R2 {r.R2:.4f}")
    print("      first test day:", ev.series_rows()[0])
