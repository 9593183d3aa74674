"""Line charts for sweep results and learning curves (Agg backend, PNG output)"""
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

# PNG metadata without the matplotlib version keeps identical inputs byte-identical
PNG_METADATA = {"Software": None}
FIGSIZE = (9, 4)
DPI = 120


def save_figure(fig, path: str) -> str:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    logger.info(f"[Plot] Wrote {target}")
    return str(target)


def sweep_figure(results) -> "plt.Figure":
    """SHD and precision against sample count, one line per sweep with a +-1 std band"""
    fig, (ax_shd, ax_prec) = plt.subplots(1, 2, figsize=FIGSIZE)
    for result in results:
        samples = np.array(result.sample_sizes, dtype=float)
        mean_shd = np.array([r.mean_shd for r in result.rows])
        std_shd = np.array([r.std_shd for r in result.rows])
        mean_prec = np.array([r.mean_precision for r in result.rows])
        std_prec = np.array([r.std_precision for r in result.rows])
        label = result.universe_id or "sweep"
        ax_shd.plot(samples, mean_shd, marker="o", label=label)
        ax_shd.fill_between(samples, mean_shd - std_shd, mean_shd + std_shd, alpha=0.2)
        ax_prec.plot(samples, mean_prec, marker="o", label=label)
        ax_prec.fill_between(samples, np.clip(mean_prec - std_prec, 0, 1), np.clip(mean_prec + std_prec, 0, 1),
                             alpha=0.2)
    ax_shd.set_xlabel("Samples")
    ax_shd.set_ylabel("SHD")
    ax_prec.set_xlabel("Samples")
    ax_prec.set_ylabel("Precision")
    ax_prec.set_ylim(-0.05, 1.05)
    for ax in (ax_shd, ax_prec):
        ax.set_xscale("log")
        ax.grid(alpha=0.3)
        ax.legend()
    fig.tight_layout()
    return fig


def min_samples_figure(rows: Sequence[Tuple[int, Optional[int]]], target: float) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=FIGSIZE)
    reached = [(v, n) for v, n in rows if n is not None]
    if reached:
        ax.plot([v for v, _ in reached], [n for _, n in reached], marker="o")
    ax.set_xlabel("Variables")
    ax.set_ylabel(f"Minimum samples for precision {target:g}")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def learning_curve_figure(series: Dict[str, Tuple[Sequence[int], Sequence[float]]],
                          ylabel: str = "Mean goal reached (smoothed)") -> "plt.Figure":
    """One line per label; series maps label -> (timesteps, values)"""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label, (timesteps, values) in series.items():
        ax.plot(timesteps, values, label=label)
    ax.set_xlabel("Timesteps")
    ax.set_ylabel(ylabel)
    ax.set_ylim(-0.05, 1.05)
    ax.grid(alpha=0.3)
    if series:
        ax.legend()
    fig.tight_layout()
    return fig
