"""
The benchmark harness
=====================

A JSON config names the station files, targets and models.  The same run is
available from the shell as ``kanforecast run config.json``.
"""

# %%
import json
import tempfile
from pathlib import Path

from kanforecast.cli import main
from kanforecast.data import write_csv
from kanforecast.synthetic import synthetic_series

root = Path(tempfile.mkdtemp())
for i, city in enumerate(["Coast", "Highland"]):
    write_csv(synthetic_series(1200, seed=i, city=city), root / f"{city}.csv")

config = {
    "datasets": [{"city": "Coast", "path": "Coast.csv"}, {"city": "Highland", "path": "Highland.csv"}],
    "targets": ["T2M", "PS"],
    "models": ["LSTM", "GRU", "BiLSTM", "BiGRU", "Ensemble", "KAN", "TKAN"],
    "hyperparameters": {k: {"hidden": 8} for k in ["LSTM", "GRU", "BiLSTM", "BiGRU", "TKAN"]}
    | {"KAN": {"hidden_widths": [8]}},
    "train": {"epochs": 5, "patience": 5},
    "seed": 0,
    "output_dir": "run",
}
(root / "config.json").write_text(json.dumps(config, indent=2))

# %% Flags override the file: here only the temperature target
exit_code = main(["run", str(root / "config.json"), "--targets", "T2M"])
print("exit code", exit_code)

# %% One aligned table per (city, target); * marks the best value in each column
print((root / "run" / "tables" / "Coast_T2M.txt").read_text(encoding="utf-8"))
print(sorted(p.name for p in (root / "run" / "series").iterdir())[:3], "...")
