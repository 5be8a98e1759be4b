"""Static figures for the search, cross-validation and evaluation stages."""

from __future__ import annotations

from typing import Sequence
from pathlib import Path

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
import matplotlib
import numpy as np
import numpy.typing as npt
import pandas as pd

from agctactile.imaging import write_ppm

matplotlib.rcParams["svg.hashsalt"] = "agctactile"

# SVG metadata without a timestamp, so reruns produce identical files
_SVG_METADATA = {"Date": None}

_SWEEP_AXES = ("log10_lr", "optimizer", "schedule", "weight_decay", "val_loss")


def _save_svg(figure: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format="svg", metadata=_SVG_METADATA)
    return path


def plot_search_sweep(table: pd.DataFrame, path: Path) -> Path:
    """Parallel-coordinates view of every searched config, colored by validation loss."""
    frame = pd.DataFrame(
        {
            "log10_lr": np.log10(table["lr"].astype(float)),
            "optimizer": table["optimizer"].astype("category").cat.codes.astype(float),
            "schedule": table["schedule"].astype("category").cat.codes.astype(float),
            "weight_decay": table["weight_decay"].astype(float),
            "val_loss": pd.to_numeric(table["val_loss"], errors="coerce").astype(float),
        }
    )
    spans = (frame.max() - frame.min()).replace(0, 1.0)
    scaled = ((frame - frame.min()) / spans).fillna(1.0)
    losses = frame["val_loss"].fillna(frame["val_loss"].max() if frame["val_loss"].notna().any() else 0.0)
    colors = matplotlib.colormaps["viridis_r"]((losses - losses.min()) / ((losses.max() - losses.min()) or 1.0))
    figure = Figure(figsize=(8, 4.5))
    axes = figure.subplots()
    for row, color, selected in zip(scaled.to_numpy(), colors, table.get("selected", [False] * len(table))):
        axes.plot(range(len(_SWEEP_AXES)), row, color=color, linewidth=2.5 if selected else 1.0, alpha=0.9)
    axes.set_xticks(range(len(_SWEEP_AXES)), _SWEEP_AXES)
    axes.set_yticks([])
    axes.set_title("Hyperparameter sweep (thick line: selected)")
    figure.tight_layout()
    return _save_svg(figure, path)


def plot_kfold_curves(curves: pd.DataFrame, path: Path) -> Path:
    """Mean accuracy per epoch over the folds, with a one-standard-deviation band."""
    figure = Figure(figsize=(6, 4))
    axes = figure.subplots()
    epochs = curves["epoch"].to_numpy() + 1
    for prefix, label in (("train_acc", "train"), ("val_acc", "validation")):
        mean = curves[f"{prefix}_mean"].to_numpy()
        std = curves[f"{prefix}_std"].to_numpy()
        axes.plot(epochs, mean, label=label)
        axes.fill_between(epochs, mean - std, mean + std, alpha=0.2)
    axes.set_xlabel("epoch")
    axes.set_ylabel("accuracy")
    axes.set_ylim(0, 1)
    axes.legend()
    figure.tight_layout()
    return _save_svg(figure, path)


def render_confusion(
    normalized: npt.ArrayLike, class_names: Sequence[str], title: str, stem: Path
) -> tuple[Path, Path]:
    """Write the row-normalized confusion matrix as <stem>.svg and <stem>.ppm."""
    matrix = np.asarray(normalized, dtype=np.float64)
    figure = Figure(figsize=(4.5, 4), dpi=100)
    axes = figure.subplots()
    image = axes.imshow(matrix, cmap="Blues", vmin=0.0, vmax=1.0)
    for (row, column), value in np.ndenumerate(matrix):
        axes.text(column, row, f"{value:.2f}", ha="center", va="center", color="white" if value > 0.5 else "black")
    ticks = range(len(class_names))
    axes.set_xticks(ticks, [f"Type {name}" for name in class_names])
    axes.set_yticks(ticks, [f"Type {name}" for name in class_names])
    axes.set_xlabel("predicted")
    axes.set_ylabel("true")
    axes.set_title(title)
    figure.colorbar(image, ax=axes)
    figure.tight_layout()

    svg_path = _save_svg(figure, stem.with_suffix(".svg"))
    canvas = FigureCanvasAgg(figure)
    canvas.draw()
    pixels = np.asarray(canvas.buffer_rgba())[..., :3]
    ppm_path = stem.with_suffix(".ppm")
    write_ppm(ppm_path, pixels)
    return svg_path, ppm_path
