"""Run artifacts: delimited tables and the matplotlib figures beside them.

Every report-producing command writes a machine-readable file (CSV or JSON)
and, where a picture helps, a PNG rendered from the same numbers: training
loss curves, the window-length sweep, and predicted-vs-actual scatter.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport, SweepPoint


def write_loss_trace(path: str | Path, trace) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, loss in enumerate(trace):
            writer.writerow([i, repr(float(loss))])


def loss_curve_figure(trace, path: str | Path, title: str = "training loss") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(trace)), trace, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def write_sweep_csv(path: str | Path, points: list[SweepPoint]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["L", "rmse", "mae", "seed"])
        for p in points:
            writer.writerow([p.L, repr(p.rmse), repr(p.mae), p.seed])


def sweep_figure(points: list[SweepPoint], path: str | Path) -> None:
    """Mean RMSE and MAE against window length, averaged over seeds."""
    lengths = sorted({p.L for p in points})
    mean_rmse = [float(np.mean([p.rmse for p in points if p.L == L])) for L in lengths]
    mean_mae = [float(np.mean([p.mae for p in points if p.L == L])) for L in lengths]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lengths, mean_rmse, marker="o", label="RMSE")
    ax.plot(lengths, mean_mae, marker="s", label="MAE")
    ax.set_xlabel("sequence length")
    ax.set_ylabel("error")
    ax.set_xticks(lengths)
    ax.legend()
    ax.set_title("prediction error vs. sequence length")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def write_eval_report(report: EvalReport, json_path: str | Path, csv_path: str | Path) -> None:
    Path(json_path).write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(report.csv_header())
        writer.writerow(report.csv_row())


def pred_scatter_figure(preds, targets, path: str | Path, max_points: int = 2000) -> None:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(preds) > max_points:
        idx = np.random.default_rng(0).choice(len(preds), size=max_points, replace=False)
        preds, targets = preds[idx], targets[idx]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(targets, preds, s=6, alpha=0.4)
    lo = min(targets.min(), preds.min())
    hi = max(targets.max(), preds.max())
    ax.plot([lo, hi], [lo, hi], color="gray", lw=1, ls="--")
    ax.set_xlabel("actual rating")
    ax.set_ylabel("predicted rating")
    ax.set_title("predictions vs. actuals")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
