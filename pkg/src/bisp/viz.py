"""Rendered artifacts: score curves, prediction/error triptychs, ROC curves.

Every plotted number is also written to a plain tab-separated table so tests
and downstream tooling can assert on values instead of pixels.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first
import numpy as np
import torch
from PIL import Image

from .data import TestWindow
from .errors import DataError
from .model import BispModel
from .scoring import RocResult, ScoreSeries, ScoringConfig, frame_error_map, fuse_errors

PANEL_MARGIN = 8
ERROR_COLORMAP = "inferno"


def label_runs(labels) -> list[tuple[int, int]]:
    """Contiguous [start, end) spans of label 1."""
    runs = []
    start = None
    for i, v in enumerate(labels):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(labels)))
    return runs


def plot_score_curves(series: list[ScoreSeries],
                      out_dir: str | Path) -> list[Path]:
    """One score-curve image + table per video; label runs shaded red."""
    if not series:
        raise DataError("no score series to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for s in series:
        fig, ax = plt.subplots(figsize=(8, 3))
        if s.labels is not None:
            for lo, hi in label_runs(s.labels):
                ax.axvspan(lo, hi - 1, color="red", alpha=0.2, linewidth=0)
        ax.plot(s.frame_indices, s.scores, color="tab:blue")
        ax.set_xlabel("frame")
        ax.set_ylabel("anomaly score")
        ax.set_ylim(-0.05, 1.05)
        ax.set_title(s.video_id)
        fig.tight_layout()
        img_path = out_dir / f"scores_{s.video_id}.png"
        fig.savefig(img_path, dpi=100)
        plt.close(fig)

        table_path = out_dir / f"scores_{s.video_id}.tsv"
        lines = ["frame_index\tscore\tlabel"]
        for i in range(len(s.frame_indices)):
            label = "" if s.labels is None else str(int(s.labels[i]))
            lines.append(f"{int(s.frame_indices[i])}\t{s.scores[i]:.6f}\t{label}")
        table_path.write_text("\n".join(lines) + "\n")
        written.extend([img_path, table_path])
    return written


def render_window(model: BispModel, window: TestWindow,
                  cfg: ScoringConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Co-predict one test window.

    Returns (truth, mean prediction, fused error map); single-stream models
    contribute their lone prediction unaveraged.
    """
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            fwd = bwd = None
            if model.variant.has_forward:
                fwd = torch.from_numpy(window.forward_model_input()[None])
            if model.variant.has_backward:
                bwd = torch.from_numpy(window.backward_model_input()[None])
            pred_f, pred_b = model.predict_pair(fwd, bwd)
    finally:
        if was_training:
            model.train()
    truth = window.target
    preds = [p[0].numpy() for p in (pred_f, pred_b) if p is not None]
    mean_pred = np.mean(preds, axis=0)
    if pred_f is not None and pred_b is not None:
        fused = fuse_errors(frame_error_map(preds[0], truth),
                            frame_error_map(preds[1], truth), cfg)
    else:
        fused = frame_error_map(preds[0], truth)
    return truth, mean_pred, fused


def _frame_to_uint8(frame: np.ndarray) -> np.ndarray:
    """(3, H, W) in [-1, 1] -> (H, W, 3) uint8."""
    return np.clip((frame.transpose(1, 2, 0) + 1.0) * 127.5, 0, 255).astype(np.uint8)


def _error_to_uint8(err: np.ndarray) -> np.ndarray:
    """Heat-map an error surface; brighter means larger error."""
    peak = float(err.max())
    norm = err / peak if peak > 0 else np.zeros_like(err)
    cmap = matplotlib.colormaps[ERROR_COLORMAP]
    return (cmap(norm)[..., :3] * 255).astype(np.uint8)


def plot_error_triptych(truth: np.ndarray, prediction: np.ndarray,
                        error_map: np.ndarray, out_path: str | Path,
                        margin: int = PANEL_MARGIN) -> tuple[Path, Path]:
    """Truth | prediction | error heat map in one image, plus a stats table.

    The canvas is H x 3W plus margins. The table carries the numbers a test
    can assert on: error min/max/mean and the brightest pixel's position.
    """
    if truth.shape != prediction.shape:
        raise DataError(f"shape mismatch: {truth.shape} vs {prediction.shape}")
    if error_map.shape != truth.shape[1:]:
        raise DataError(f"error map {error_map.shape} does not match frames")
    panels = [_frame_to_uint8(truth), _frame_to_uint8(prediction),
              _error_to_uint8(error_map)]
    h, w = error_map.shape
    canvas = np.full((h + 2 * margin, 3 * w + 4 * margin, 3), 255, dtype=np.uint8)
    for i, panel in enumerate(panels):
        x = margin + i * (w + margin)
        canvas[margin:margin + h, x:x + w] = panel
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(canvas).save(out_path)

    peak_flat = int(np.argmax(error_map))
    peak_row, peak_col = divmod(peak_flat, w)
    table_path = out_path.with_suffix(".tsv")
    table_path.write_text(
        "stat\tvalue\n"
        f"error_min\t{error_map.min():.8f}\n"
        f"error_max\t{error_map.max():.8f}\n"
        f"error_mean\t{error_map.mean():.8f}\n"
        f"peak_row\t{peak_row}\n"
        f"peak_col\t{peak_col}\n"
    )
    return out_path, table_path


def plot_roc_curves(curves: list[tuple[str, RocResult]],
                    out_path: str | Path) -> tuple[Path, Path]:
    """Overlay ROC curves with AUC in the legend; table holds every point."""
    if not curves:
        raise DataError("no ROC curves to plot")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", linewidth=1)
    for name, roc in curves:
        ax.plot(roc.fpr, roc.tpr, label=f"{name} (AUC={roc.auc:.4f})")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=100)
    plt.close(fig)

    table_path = out_path.with_suffix(".tsv")
    lines = ["curve\tfpr\ttpr"]
    for name, roc in curves:
        for f, t in zip(roc.fpr, roc.tpr):
            lines.append(f"{name}\t{f:.8f}\t{t:.8f}")
    table_path.write_text("\n".join(lines) + "\n")
    return out_path, table_path
