"""
Rolling-window forecasts against the naive baseline
===================================================

Train on the earliest weeks, forecast i weeks ahead, slide the window by i
and repeat.  MASE below 1 means the model beats carrying the value from
i weeks ago forward.
"""

import datetime as dt
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from unrestcast.evaluation import confusion_rates, count_metrics
from unrestcast.harness import ExperimentPlan, rolling_forecast
from unrestcast.ingest import read_dataset_csv
from unrestcast.cli import main
from unrestcast.synthetic import BundleSpec, write_bundle

work = Path(tempfile.mkdtemp())
cfg = write_bundle(work, BundleSpec(n_trees=200))
main(["ingest", "--config", str(cfg), "--regions", "DNK"])
ds = read_dataset_csv(work / "out" / "datasets" / "DNK.csv", "DNK")

train_end, test_end = dt.date(2020, 10, 31), dt.date(2021, 6, 26)
tracks = {}
for model in ("glm", "random_forest", "naive"):
    plan = ExperimentPlan("DNK", 2, "count", model, train_end, test_end, n_trees=200)
    tracks[model] = rolling_forecast(ds, plan)

for model, track in tracks.items():
    m = count_metrics(track, tracks["naive"])
    print(f"{model:>14s}  MASE_2 = {m.mase:.3f}  R2 = {m.r2_shift0:.3f}")

binary = rolling_forecast(ds, ExperimentPlan("DNK", 2, "binary", "random_forest", train_end, test_end, n_trees=200))
print("binary random forest BAC", confusion_rates(binary).bac)

fig, ax = plt.subplots(figsize=(8, 3))
weeks = [w.start_date for w in tracks["naive"].weeks]
ax.plot(weeks, tracks["naive"].y_true, color="k", label="observed")
for model in ("glm", "naive"):
    ax.plot(weeks, tracks[model].y_pred, label=model)
ax.legend()
fig.savefig(work / "dnk_counts.png", dpi=80)
print("chart written to", work / "dnk_counts.png")
