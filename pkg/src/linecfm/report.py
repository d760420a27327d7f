"""Run reports and the CSV / SVG emitters used by the experiment harness.

CSV outputs are fully deterministic: floats are written with a fixed ``%.12g``
format and no timestamps, so identical seeds give byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = [
    "RunReport",
    "format_cell",
    "write_rows_csv",
    "write_loss_csv",
    "write_key_values",
    "plot_budget_curves",
]


@dataclass
class RunReport:
    """Everything one training run produced, ready to serialize."""

    config: dict
    loss_curve: list[float]
    seed: int
    metrics: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1] if self.loss_curve else float("nan")


def format_cell(value) -> str:
    """Fixed textual form for one CSV cell (floats as %.12g)."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_rows_csv(path, fieldnames: list[str], rows: list[dict]) -> Path:
    """Write dict rows with a header; cells go through :func:`format_cell`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_cell(row[k]) for k in fieldnames])
    return path


def write_loss_csv(report: RunReport, path) -> Path:
    """Serialize a loss curve as ``epoch,mean_loss`` rows."""
    rows = [{"epoch": i, "mean_loss": loss} for i, loss in enumerate(report.loss_curve)]
    return write_rows_csv(path, ["epoch", "mean_loss"], rows)


def write_key_values(path, items: dict) -> Path:
    """Write a ``key = value`` snapshot (same schema the CLI config files use)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {format_cell(value)}" for key, value in items.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def plot_budget_curves(rows: list[dict], path, metric: str = "mean_distance",
                       ylabel: str = "mean distance to line") -> Path:
    """SVG line plot of a metric against the sampling step budget, one line per mode.

    ``rows`` are per-(mode, seed, budget) records; seeds are averaged.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    modes = sorted({row["mode"] for row in rows})
    for mode in modes:
        budgets = sorted({row["budget"] for row in rows if row["mode"] == mode})
        means = []
        for budget in budgets:
            vals = [row[metric] for row in rows
                    if row["mode"] == mode and row["budget"] == budget
                    and row.get("status", "ok") == "ok"]
            means.append(sum(vals) / len(vals) if vals else float("nan"))
        ax.plot(budgets, means, marker="o", label=mode)
    ax.set_xlabel("sampling steps")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
