"""Training loop, evaluation harness, ablation grid, and weight sweep."""

from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import torch
from torch.utils.data import DataLoader

from .data import FrameClip, TrainingSampleDataset, load_dataset, make_test_windows
from .errors import ConfigurationError, DataError, TrainingDivergedError
from .losses import LossBundle, single_stream_loss, total_loss
from .model import BispModel, VariantSpec, build_variant, save_checkpoint
from .scoring import (
    RocResult,
    ScoreSeries,
    ScoringConfig,
    anomaly_scores,
    compute_auc,
    frame_error_map,
    fuse_errors,
    multiscale_psnr,
    normalize_scores,
    pad_edges,
)

Progress = Callable[[str], None] | None

WEIGHT_SWEEP_RATIOS = ((0.1, 0.9), (0.3, 0.7), (0.5, 0.5), (0.7, 0.3), (0.9, 0.1))


@dataclass
class TrainConfig:
    """Everything one training/evaluation run depends on."""

    data_root: str | Path | None = None
    image_size: int = 256
    variant: VariantSpec = field(default_factory=VariantSpec)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    learning_rate: float = 2e-4
    betas: tuple[float, float] = (0.9, 0.999)
    adam_epsilon: float = 1e-8
    batch_size: int = 4
    epochs: int = 5
    max_steps: int | None = None
    seed: int = 0
    log_every: int = 10

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.image_size % 8 != 0 or self.image_size < 16:
            raise ConfigurationError(
                f"image_size must be a multiple of 8 and >= 16, got {self.image_size}"
            )


@dataclass
class TrainResult:
    model: BispModel
    history: list[dict]
    steps: int
    checkpoint_path: Path | None = None


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2 ** 32)
    torch.manual_seed(seed)


def moving_average(values, window: int) -> np.ndarray:
    """Sliding mean with full windows only; output length len - window + 1."""
    values = np.asarray(values, dtype=np.float64)
    if window < 1 or window > len(values):
        raise ValueError(f"window {window} out of range for {len(values)} values")
    return np.convolve(values, np.full(window, 1.0 / window), mode="valid")


def _step_losses(model: BispModel, batch) -> LossBundle:
    fwd_in, fwd_target, bwd_in, bwd_target = batch
    variant = model.variant
    if variant.dual:
        pred_f, pred_b = model.predict_pair(fwd_in, bwd_in)
        return total_loss(pred_f, pred_b, fwd_target, bwd_target)
    if variant.strategy == "forward":
        pred_f, _ = model.predict_pair(fwd_in, None)
        return single_stream_loss(pred_f, fwd_target, forward=True)
    _, pred_b = model.predict_pair(None, bwd_in)
    return single_stream_loss(pred_b, bwd_target, forward=False)


def _dump_divergence(out_dir: Path | None, record: dict) -> Path | None:
    if out_dir is None:
        return None
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "divergence.json"
    path.write_text(json.dumps(record, indent=2, default=str))
    return path


def train(config: TrainConfig, clips: list[FrameClip] | None = None,
          out_dir: str | Path | None = None, progress: Progress = None) -> TrainResult:
    """Optimize a model on the train split; returns it with the loss history.

    Adam with a cosine-annealed learning rate decaying to zero over the total
    step count. Fully seeded: two runs with equal configs produce equal
    histories. A non-finite loss aborts with a diagnostic dump in ``out_dir``.
    When ``out_dir`` is given, per-step metrics are appended to
    ``metrics.jsonl`` and the final model is saved as ``model.pt``.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    seed_everything(config.seed)

    if clips is None:
        if config.data_root is None:
            raise ConfigurationError("config has no data_root and no clips were given")
        clips = load_dataset(config.data_root, "train", config.image_size)
    if not clips:
        raise DataError("training dataset is empty")
    dataset = TrainingSampleDataset(clips, config.variant.skip_frames)
    if len(dataset) == 0:
        raise DataError("no training windows; videos are too short")

    loader = DataLoader(
        dataset,
        batch_size=config.batch_size,
        shuffle=True,
        num_workers=0,
        generator=torch.Generator().manual_seed(config.seed),
    )
    steps_per_epoch = len(loader)
    total_steps = steps_per_epoch * config.epochs
    if config.max_steps is not None:
        total_steps = min(total_steps, config.max_steps)

    model = build_variant(config.variant)
    model.train()
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=config.learning_rate,
        betas=config.betas,
        eps=config.adam_epsilon,
    )
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=total_steps, eta_min=0.0
    )

    metrics_file = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_file = (out_dir / "metrics.jsonl").open("w")

    history: list[dict] = []
    step = 0
    try:
        done = False
        for epoch in range(config.epochs):
            if done:
                break
            for batch in loader:
                step += 1
                lr = optimizer.param_groups[0]["lr"]
                optimizer.zero_grad()
                bundle = _step_losses(model, batch)
                loss = bundle.total
                record = {"step": step, "epoch": epoch, "lr": lr}
                record.update(bundle.detach_floats())
                if not math.isfinite(record["total"]):
                    dump = dict(record, variant=model.variant.to_dict(),
                                seed=config.seed, recent_history=history[-10:])
                    path = _dump_divergence(out_dir, dump)
                    where = f"; diagnostics at {path}" if path else ""
                    raise TrainingDivergedError(
                        f"non-finite loss at step {step} "
                        f"(l_fp={record['l_fp']}, l_bp={record['l_bp']}, "
                        f"l_con={record['l_con']}){where}"
                    )
                loss.backward()
                optimizer.step()
                scheduler.step()
                history.append(record)
                if metrics_file is not None:
                    metrics_file.write(json.dumps(record) + "\n")
                if progress and (step % config.log_every == 0 or step == total_steps):
                    progress(
                        f"step {step}/{total_steps} "
                        f"loss {record['total']:.4f} lr {lr:.2e}"
                    )
                if step >= total_steps:
                    done = True
                    break
    finally:
        if metrics_file is not None:
            metrics_file.close()

    checkpoint_path = None
    if out_dir is not None:
        checkpoint_path = save_checkpoint(
            out_dir / "model.pt", model, step,
            extra={"seed": config.seed, "epochs": config.epochs,
                   "image_size": config.image_size},
        )
    return TrainResult(model=model, history=history, steps=step,
                       checkpoint_path=checkpoint_path)


@dataclass
class VideoErrors:
    """Raw per-window prediction errors of one test video.

    ``target_indices[i]`` is the frame each window predicts; error maps are
    (windows, H, W) float32, one entry per stream the variant runs.
    """

    video_id: str
    num_frames: int
    target_indices: np.ndarray
    e_f: np.ndarray | None
    e_b: np.ndarray | None
    labels: np.ndarray | None = None


def collect_error_pairs(model: BispModel, clips: list[FrameClip],
                        batch_size: int = 4,
                        progress: Progress = None) -> list[VideoErrors]:
    """Run co-prediction over every test window and keep the raw error maps.

    Both streams predict the same middle frame; the per-stream squared-error
    maps are stored so different fusion weights can be scored without
    re-running the model. Parameters and BatchNorm statistics are untouched.
    """
    variant = model.variant
    was_training = model.training
    model.eval()
    results = []
    try:
        with torch.no_grad():
            for clip in clips:
                windows = make_test_windows(clip)
                if not windows:
                    warnings.warn(f"video '{clip.video_id}' is too short to score; skipped")
                    continue
                maps_f, maps_b, targets = [], [], []
                for lo in range(0, len(windows), batch_size):
                    chunk = windows[lo:lo + batch_size]
                    truth = np.stack([w.target for w in chunk])
                    fwd = bwd = None
                    if variant.has_forward:
                        fwd = torch.from_numpy(
                            np.stack([w.forward_model_input() for w in chunk])
                        )
                    if variant.has_backward:
                        bwd = torch.from_numpy(
                            np.stack([w.backward_model_input() for w in chunk])
                        )
                    pred_f, pred_b = model.predict_pair(fwd, bwd)
                    for i, w in enumerate(chunk):
                        if pred_f is not None:
                            maps_f.append(frame_error_map(
                                pred_f[i].numpy(), truth[i]).astype(np.float32))
                        if pred_b is not None:
                            maps_b.append(frame_error_map(
                                pred_b[i].numpy(), truth[i]).astype(np.float32))
                        targets.append(w.target_frame_index)
                results.append(VideoErrors(
                    video_id=clip.video_id,
                    num_frames=len(clip),
                    target_indices=np.asarray(targets),
                    e_f=np.stack(maps_f) if maps_f else None,
                    e_b=np.stack(maps_b) if maps_b else None,
                    labels=clip.labels,
                ))
                if progress:
                    progress(f"scored {clip.video_id} ({len(windows)} windows)")
    finally:
        if was_training:
            model.train()
    return results


def score_from_errors(video_errors: list[VideoErrors],
                      cfg: ScoringConfig) -> list[ScoreSeries]:
    """Turn stored error maps into per-frame anomaly scores.

    Dual-stream errors are fused with the configured weights; single-stream
    variants use their lone map unchanged. Edge frames outside the prediction
    span copy the nearest scored value, so each series covers every frame.
    """
    cfg.validate()
    series = []
    for video in video_errors:
        if video.e_f is None and video.e_b is None:
            raise DataError(f"video '{video.video_id}' has no error maps")
        n_windows = len(video.target_indices)
        psnr = np.empty(n_windows, dtype=np.float64)
        peaks = np.empty(n_windows, dtype=np.float64)
        for i in range(n_windows):
            if video.e_f is not None and video.e_b is not None:
                fused = fuse_errors(video.e_f[i], video.e_b[i], cfg)
            elif video.e_f is not None:
                fused = video.e_f[i]
            else:
                fused = video.e_b[i]
            psnr[i] = multiscale_psnr(fused, cfg)
            peaks[i] = float(fused.max())
        pad_before = int(video.target_indices[0])
        pad_after = video.num_frames - 1 - int(video.target_indices[-1])
        scores = anomaly_scores(normalize_scores(psnr), cfg,
                                pad_before=pad_before, pad_after=pad_after)
        series.append(ScoreSeries(
            video_id=video.video_id,
            frame_indices=np.arange(video.num_frames),
            fused_errors=pad_edges(peaks, pad_before, pad_after),
            psnr=pad_edges(psnr, pad_before, pad_after),
            scores=scores,
            labels=video.labels,
        ))
    return series


@dataclass
class EvalResult:
    series: list[ScoreSeries]
    roc: RocResult | None

    @property
    def auc(self) -> float | None:
        return self.roc.auc if self.roc is not None else None


def evaluate(model: BispModel, clips: list[FrameClip], cfg: ScoringConfig,
             batch_size: int = 4, progress: Progress = None) -> EvalResult:
    """Score every test video and compute the frame-level AUC.

    Videos without labels still get score series; the AUC is skipped with a
    warning when any labels are missing.
    """
    if not clips:
        raise DataError("test dataset is empty")
    errors = collect_error_pairs(model, clips, batch_size, progress)
    series = score_from_errors(errors, cfg)
    if any(s.labels is None for s in series):
        warnings.warn("some videos have no labels; AUC skipped")
        return EvalResult(series=series, roc=None)
    return EvalResult(series=series, roc=compute_auc(series))


@dataclass
class SweepPoint:
    w_f: float
    w_b: float
    auc: float


def run_weight_sweep(video_errors: list[VideoErrors], cfg: ScoringConfig,
                     ratios=WEIGHT_SWEEP_RATIOS) -> list[SweepPoint]:
    """Re-score stored error pairs under several fusion-weight ratios."""
    for video in video_errors:
        if video.e_f is None or video.e_b is None:
            raise ConfigurationError(
                "weight sweep needs both streams; "
                f"video '{video.video_id}' is single-stream"
            )
    points = []
    for w_f, w_b in ratios:
        series = score_from_errors(video_errors, cfg.with_weights(w_f, w_b))
        points.append(SweepPoint(w_f, w_b, compute_auc(series).auc))
    return points


@dataclass
class GridRow:
    variant: VariantSpec
    auc: float | None = None
    error: str | None = None


def default_grid_variants() -> list[VariantSpec]:
    """Ablation toggles plus stream strategies, deduplicated by name."""
    from .model import ablation_variants, strategy_variants

    seen = {}
    for v in ablation_variants() + strategy_variants():
        seen.setdefault(v.name, v)
    return list(seen.values())


def run_ablation_grid(config: TrainConfig,
                      variants: list[VariantSpec] | None = None,
                      train_clips: list[FrameClip] | None = None,
                      test_clips: list[FrameClip] | None = None,
                      out_dir: str | Path | None = None,
                      progress: Progress = None) -> list[GridRow]:
    """Train and evaluate each variant with fusion weights fixed at 0.5.

    Every cell restarts from the same seed so rows differ only in the
    variant. A failing cell records its error and the grid moves on. An
    empty variant list yields an empty table.
    """
    if variants is None:
        variants = default_grid_variants()
    out_dir = Path(out_dir) if out_dir is not None else None
    if train_clips is None:
        train_clips = load_dataset(config.data_root, "train", config.image_size)
    if test_clips is None:
        test_clips = load_dataset(config.data_root, "test", config.image_size)

    scoring = config.scoring.with_weights(0.5, 0.5)
    rows = []
    for variant in variants:
        cell_dir = out_dir / variant.name if out_dir is not None else None
        if progress:
            progress(f"grid cell: {variant.name}")
        try:
            cell_config = replace(config, variant=variant, scoring=scoring)
            result = train(cell_config, clips=train_clips, out_dir=cell_dir,
                           progress=progress)
            outcome = evaluate(result.model, test_clips, scoring,
                               batch_size=config.batch_size)
            if outcome.auc is None:
                raise DataError("test videos lack labels; no AUC for grid cell")
            rows.append(GridRow(variant=variant, auc=outcome.auc))
        except Exception as exc:  # noqa: BLE001 - grid must continue past failures
            rows.append(GridRow(variant=variant, error=f"{type(exc).__name__}: {exc}"))
            if progress:
                progress(f"  cell {variant.name} failed: {exc}")
    return rows


GRID_HEADER = ("variant", "strategy", "skip_frames", "varca", "consa", "auc", "error")


def format_grid(rows: list[GridRow]) -> str:
    """Render grid rows as a tab-separated table (header always present)."""
    lines = ["\t".join(GRID_HEADER)]
    for row in rows:
        v = row.variant
        lines.append("\t".join([
            v.name,
            v.strategy,
            str(int(v.skip_frames)),
            str(int(v.varca)),
            str(int(v.consa)),
            "" if row.auc is None else f"{row.auc:.6f}",
            row.error or "",
        ]))
    return "\n".join(lines) + "\n"


SWEEP_HEADER = ("w_f", "w_b", "auc")


def format_sweep(points: list[SweepPoint]) -> str:
    lines = ["\t".join(SWEEP_HEADER)]
    for p in points:
        lines.append(f"{p.w_f:g}\t{p.w_b:g}\t{p.auc:.6f}")
    return "\n".join(lines) + "\n"
