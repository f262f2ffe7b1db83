"""Test-time anomaly scoring.

Per target frame the forward and backward prediction errors are fused by a
convex weighted sum, reduced to a peak-signal-to-noise ratio over a pyramid
of mean-pooled patch maxima, min-max normalized per video, inverted so high
values mean anomalous, and smoothed along time with a Gaussian kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.metrics import roc_curve

from .errors import ConfigurationError, DataError

WEIGHT_TOLERANCE = 1e-6
# Frames at the video edges have no 7-frame window centred on them.
SCORE_PAD_BEFORE = 3
SCORE_PAD_AFTER = 3


@dataclass
class ScoringConfig:
    """Weights and scales of the anomaly-score pipeline."""

    w_f: float = 0.5
    w_b: float = 0.5
    num_scales: int = 3
    pool_sizes: tuple[int, ...] = (4, 8, 16)
    smooth_sigma: float = 3.0
    epsilon: float = 1e-8

    def __post_init__(self):
        self.pool_sizes = tuple(int(p) for p in self.pool_sizes)
        self.validate()

    def validate(self) -> None:
        if not (0.0 <= self.w_f <= 1.0 and 0.0 <= self.w_b <= 1.0):
            raise ConfigurationError(f"fusion weights must lie in [0, 1]: {self.w_f}, {self.w_b}")
        if abs(self.w_f + self.w_b - 1.0) > WEIGHT_TOLERANCE:
            raise ConfigurationError(
                f"fusion weights must sum to 1, got {self.w_f} + {self.w_b}"
            )
        if len(self.pool_sizes) != self.num_scales:
            raise ConfigurationError(
                f"{self.num_scales} scales but {len(self.pool_sizes)} pool sizes"
            )
        if any(p < 1 for p in self.pool_sizes):
            raise ConfigurationError(f"pool sizes must be >= 1: {self.pool_sizes}")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")

    def with_weights(self, w_f: float, w_b: float) -> "ScoringConfig":
        return ScoringConfig(w_f, w_b, self.num_scales, self.pool_sizes,
                             self.smooth_sigma, self.epsilon)


@dataclass
class ScoreSeries:
    """Per-frame scoring record of one test video.

    All arrays cover every frame of the video; entries for frames outside the
    prediction span copy their nearest scored neighbour. ``fused_errors``
    holds the peak of each frame's fused error map.
    """

    video_id: str
    frame_indices: np.ndarray
    fused_errors: np.ndarray
    psnr: np.ndarray
    scores: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.frame_indices)
        for name in ("fused_errors", "psnr", "scores"):
            if len(getattr(self, name)) != n:
                raise DataError(f"score series '{self.video_id}': {name} length mismatch")
        if self.labels is not None and len(self.labels) != n:
            raise DataError(f"score series '{self.video_id}': labels length mismatch")


def frame_error_map(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-pixel squared error averaged over channels: (C, H, W) -> (H, W)."""
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    diff = pred.astype(np.float64) - truth.astype(np.float64)
    return (diff * diff).mean(axis=0)


def fuse_errors(e_f: np.ndarray, e_b: np.ndarray, cfg: ScoringConfig) -> np.ndarray:
    """Convex combination w_f * e_f + w_b * e_b."""
    cfg.validate()
    if e_f.shape != e_b.shape:
        raise ValueError(f"shape mismatch: {e_f.shape} vs {e_b.shape}")
    return cfg.w_f * e_f + cfg.w_b * e_b


def block_mean_pool(err: np.ndarray, kernel: int) -> np.ndarray:
    """Mean-pool with kernel == stride; trailing remainder rows/cols dropped."""
    h, w = err.shape
    if h < kernel or w < kernel:
        raise ValueError(f"map {h}x{w} smaller than pool kernel {kernel}")
    hb, wb = h // kernel, w // kernel
    blocks = err[: hb * kernel, : wb * kernel].reshape(hb, kernel, wb, kernel)
    return blocks.mean(axis=(1, 3))


def multiscale_psnr(fused: np.ndarray, cfg: ScoringConfig) -> float:
    """PSNR of the summed per-scale maxima of mean-pooled error patches.

    Lower values mean a worse (more concentrated) prediction error.
    """
    total = 0.0
    for kernel in cfg.pool_sizes:
        total += float(block_mean_pool(fused, kernel).max())
    return 10.0 * math.log10(1.0 / (total + cfg.epsilon))


def normalize_scores(psnr_series) -> np.ndarray:
    """Min-max normalize one video's PSNR series to [0, 1].

    A constant series (including a singleton) maps to all 0.5.
    """
    values = np.asarray(psnr_series, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot normalize an empty series")
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)


def gaussian_smooth(values: np.ndarray, sigma: float) -> np.ndarray:
    """1D Gaussian smoothing with reflective boundary handling.

    The kernel is the sampled Gaussian on [-r, r], r = ceil(4 * sigma),
    normalized to sum 1; r is clamped to len(values) - 1 for short series.
    """
    values = np.asarray(values, dtype=np.float64)
    if sigma <= 0 or values.size < 2:
        return values.copy()
    radius = min(math.ceil(4.0 * sigma), values.size - 1)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(xs ** 2) / (2.0 * sigma ** 2))
    kernel /= kernel.sum()
    padded = np.pad(values, radius, mode="reflect")
    return np.convolve(padded, kernel, mode="valid")


def anomaly_scores(normalized: np.ndarray, cfg: ScoringConfig,
                   pad_before: int = SCORE_PAD_BEFORE,
                   pad_after: int = SCORE_PAD_AFTER) -> np.ndarray:
    """Turn normalized PSNR into per-frame anomaly scores (1 = anomalous).

    Inverts the series, smooths it, then extends it to full video length by
    copying the nearest scored value into the unpredicted edge frames.
    """
    normalized = np.asarray(normalized, dtype=np.float64)
    if normalized.size == 0:
        raise ValueError("empty score series")
    if normalized.min() < 0.0 or normalized.max() > 1.0:
        raise ValueError("normalized PSNR must lie in [0, 1]")
    smoothed = gaussian_smooth(1.0 - normalized, cfg.smooth_sigma)
    return pad_edges(smoothed, pad_before, pad_after)


def pad_edges(values: np.ndarray, pad_before: int, pad_after: int) -> np.ndarray:
    """Extend a series by repeating its first and last entries."""
    return np.concatenate([
        np.full(pad_before, values[0]),
        values,
        np.full(pad_after, values[-1]),
    ])


@dataclass
class RocResult:
    """Frame-level ROC over every labeled frame of every video."""

    auc: float
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray = field(repr=False, default=None)


def compute_auc(all_series: list[ScoreSeries]) -> RocResult:
    """Frame-level ROC AUC (trapezoidal) over the concatenated videos."""
    if not all_series:
        raise DataError("no score series to evaluate")
    for s in all_series:
        if s.labels is None:
            raise DataError(f"score series '{s.video_id}' carries no labels")
    labels = np.concatenate([s.labels for s in all_series])
    scores = np.concatenate([s.scores for s in all_series])
    if labels.min() == labels.max():
        raise DataError(
            "AUC is undefined: labels are all "
            f"{int(labels[0])} across {labels.size} frames"
        )
    fpr, tpr, thresholds = roc_curve(labels, scores)
    return RocResult(float(np.trapezoid(tpr, fpr)), fpr, tpr, thresholds)


SCORE_DUMP_HEADER = ("video_id", "frame_index", "psnr", "score", "label")


def write_score_dump(path: str | Path, all_series: list[ScoreSeries]) -> Path:
    """One tab-separated record per frame; label column empty when unknown."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("\t".join(SCORE_DUMP_HEADER) + "\n")
        for s in all_series:
            for i in range(len(s.frame_indices)):
                label = "" if s.labels is None else str(int(s.labels[i]))
                fh.write(
                    f"{s.video_id}\t{int(s.frame_indices[i])}\t"
                    f"{s.psnr[i]:.6f}\t{s.scores[i]:.6f}\t{label}\n"
                )
    return path


def read_score_dump(path: str | Path) -> list[ScoreSeries]:
    """Parse a score dump back into per-video series (in file order)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"score dump not found: {path}")
    rows: dict[str, list[tuple]] = {}
    order: list[str] = []
    with path.open() as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != SCORE_DUMP_HEADER:
            raise DataError(f"{path} is not a score dump (header {header})")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(SCORE_DUMP_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(SCORE_DUMP_HEADER)} columns")
            vid, idx, psnr, score, label = parts
            if vid not in rows:
                rows[vid] = []
                order.append(vid)
            rows[vid].append((int(idx), float(psnr), float(score),
                              None if label == "" else int(label)))
    series = []
    for vid in order:
        recs = rows[vid]
        labels = None
        if all(r[3] is not None for r in recs):
            labels = np.array([r[3] for r in recs], dtype=np.int64)
        series.append(ScoreSeries(
            video_id=vid,
            frame_indices=np.array([r[0] for r in recs], dtype=np.int64),
            fused_errors=np.zeros(len(recs)),
            psnr=np.array([r[1] for r in recs]),
            scores=np.array([r[2] for r in recs]),
            labels=labels,
        ))
    return series


def write_roc_table(path: str | Path, roc: RocResult) -> Path:
    """Two-column table of (false positive rate, true positive rate)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("fpr\ttpr\n")
        for f, t in zip(roc.fpr, roc.tpr):
            fh.write(f"{f:.6f}\t{t:.6f}\n")
    return path
