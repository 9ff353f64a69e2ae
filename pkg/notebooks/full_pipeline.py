"""
The command-line pipeline on a synthetic bundle
===============================================

ingest -> explore -> forecast -> report, exactly as on real data.  The
bundle plants a two-week lead from the stringency index to protest counts.
"""

import csv
import tempfile
from pathlib import Path

from unrestcast.cli import main
from unrestcast.synthetic import BundleSpec, write_bundle

work = Path(tempfile.mkdtemp())
cfg = str(write_bundle(work, BundleSpec(horizons=(2,))))

for command in ("ingest", "explore", "forecast", "report"):
    code = main([command, "--config", cfg, "--svg"])
    print(command, "exit", code)

out = work / "out"
with open(out / "granger_significant.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        if row["predictor"] == "stringency":
            print(row)

with open(out / "metrics.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        if row["metric"] in ("mase", "bac"):
            print(row["region"], row["outcome"], row["model"], row["metric"], row["value"])
print("outputs in", out)
