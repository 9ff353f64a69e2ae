"""SVG line charts of count forecasts against truth and the naive baseline."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import ForecastTrack  # noqa: E402

LABELS = {"glm": "Poisson GLM", "random_forest": "random forest", "naive": "naive"}


def write_count_charts(tracks: Iterable[ForecastTrack], out_dir: str | Path) -> list[Path]:
    """One chart per (region, horizon) count outcome; returns the written paths."""
    out_dir = Path(out_dir)
    groups: dict[tuple[str, int], dict[str, ForecastTrack]] = defaultdict(dict)
    for tr in tracks:
        if tr.plan.outcome == "count":
            groups[(tr.plan.region, tr.plan.horizon)][tr.plan.model] = tr
    if not groups:
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = "unrestcast"
    written = []
    for (region, horizon), by_model in sorted(groups.items()):
        fig, ax = plt.subplots(figsize=(8, 4))
        any_track = next(iter(by_model.values()))
        dates = [w.start_date for w in any_track.weeks]
        ax.plot(dates, any_track.y_true, color="black", lw=2, label="observed")
        for model in ("glm", "random_forest", "naive"):
            if model in by_model:
                tr = by_model[model]
                ax.plot([w.start_date for w in tr.weeks], tr.y_pred, lw=1.2,
                        ls="--" if model == "naive" else "-", label=LABELS[model])
        ax.set_title(f"{region}: {horizon}-week count forecasts")
        ax.set_ylabel("weekly protests")
        ax.legend(frameon=False)
        fig.autofmt_xdate()
        path = out_dir / f"{region}_h{horizon}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
