"""Figure rendering for the CLI report paths.

Every function draws one figure and writes it straight to a file next to
the delimited output it illustrates.  The Agg backend is forced so the CLI
never needs a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import PointCloud, SampleSet, Scene


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sample_figure(
    cloud: PointCloud, samples: SampleSet, path, scene: Scene | None = None, title: str = ""
) -> None:
    """Top-down scatter of the cloud with sampled points highlighted.

    When ground truth is available its box footprints are drawn too.
    """
    pts = cloud.points
    picked = samples.as_array()
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(pts[:, 0], pts[:, 1], s=2, c="0.8", label="points")
    ax.scatter(pts[picked, 0], pts[picked, 1], s=14, c="tab:green", label="sampled")
    if scene is not None:
        for box in scene.gt.boxes:
            lo, hi = box.bounds()
            ax.add_patch(
                plt.Rectangle(
                    (lo[0], lo[1]), hi[0] - lo[0], hi[1] - lo[1],
                    fill=False, edgecolor="tab:blue", linewidth=1.0,
                )
            )
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)


def save_ap_figure(class_names: list[str], aps: list[float], mean: float, path) -> None:
    """Per-class AP bars with the mean drawn as a reference line."""
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(class_names)), 4))
    ax.bar(range(len(class_names)), aps, color="tab:blue")
    ax.axhline(mean, color="tab:red", linestyle="--", label=f"mAP = {mean:.3f}")
    ax.set_xticks(range(len(class_names)))
    ax.set_xticklabels(class_names, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("AP")
    ax.set_ylim(0, 1.05)
    ax.legend()
    _save(fig, path)


def save_bench_figure(rows: list[dict], path) -> None:
    """Timing curves (seconds vs N) per method and sample count."""
    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict[tuple[str, int], list[tuple[int, float]]] = {}
    for row in rows:
        series.setdefault((row["method"], row["k"]), []).append((row["n"], row["seconds"]))
    for (method, k), points in sorted(series.items()):
        points.sort()
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            marker="o",
            label=f"{method} (k={k})",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("points")
    ax.set_ylabel("seconds")
    ax.legend(fontsize=8)
    _save(fig, path)


def save_weights_figure(per_layer_weights: list[np.ndarray], level_ids, path) -> None:
    """Heatmap of aggregation weights across decoder layers."""
    matrix = np.stack(per_layer_weights)
    fig, ax = plt.subplots(figsize=(5, 4))
    image = ax.imshow(matrix, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(matrix.shape[1]))
    ax.set_xticklabels([str(i) for i in level_ids])
    ax.set_yticks(range(matrix.shape[0]))
    ax.set_xlabel("feature level")
    ax.set_ylabel("decoder layer")
    fig.colorbar(image, ax=ax, label="weight")
    _save(fig, path)


def save_sweep_figure(lambdas: list[float], values: list[float], ylabel: str, path) -> None:
    """Line plot of a statistic across the lambda sweep."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(lambdas, values, marker="o")
    ax.set_xlabel("lambda_dist")
    ax.set_ylabel(ylabel)
    _save(fig, path)
