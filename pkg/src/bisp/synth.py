"""Deterministic synthetic surveillance-style videos for desk-scale runs.

Normal videos show small bright sprites (circles and squares) gliding
rightward at a constant integer speed over a static textured background.
Test videos additionally contain one contiguous anomalous segment: a sprite
that moves much faster, has a shape never seen in training, or travels
against the scene's direction of motion. Labels mark the segment frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigurationError, DataError

ANOMALY_MODES = ("fast_motion", "novel_shape", "reverse_direction")
RENDER_SIZE = 256
FAST_SPEED = 8
NORMAL_SHAPES = ("circle", "square")
NOVEL_SHAPE = "cross"
SPRITE_COLORS = (
    (235, 80, 70),
    (90, 205, 90),
    (250, 245, 110),
    (110, 150, 250),
    (245, 150, 60),
)


@dataclass
class SynthSpec:
    """Shape of a generated dataset; everything derives from ``seed``."""

    num_train_videos: int = 8
    num_test_videos: int = 4
    frames_per_video: int = 60
    normal_speed: int = 2
    anomaly_modes: tuple[str, ...] = ("fast_motion", "novel_shape")
    seed: int = 0

    def __post_init__(self):
        self.anomaly_modes = tuple(self.anomaly_modes)
        if self.frames_per_video < 7:
            raise ConfigurationError("frames_per_video must be >= 7")
        if self.normal_speed < 1:
            raise ConfigurationError("normal_speed must be >= 1")
        unknown = set(self.anomaly_modes) - set(ANOMALY_MODES)
        if unknown:
            raise ConfigurationError(
                f"unknown anomaly modes {sorted(unknown)}; expected subset of {ANOMALY_MODES}"
            )
        if self.num_test_videos > 0 and not self.anomaly_modes:
            raise ConfigurationError("test videos need at least one anomaly mode")


@dataclass
class AnomalySegment:
    video_id: str
    mode: str
    start: int
    end: int  # exclusive


@dataclass
class GeneratedDataset:
    root: Path
    train_videos: list[str]
    test_videos: list[str]
    segments: list[AnomalySegment] = field(default_factory=list)


def _background(rng: np.random.Generator) -> np.ndarray:
    """Static low-frequency texture shared by every video of a dataset."""
    coarse = rng.integers(55, 125, size=(8, 8, 3), dtype=np.uint8)
    img = Image.fromarray(coarse).resize(
        (RENDER_SIZE, RENDER_SIZE), Image.Resampling.BILINEAR
    )
    return np.asarray(img, dtype=np.uint8)


def _draw_sprite(frame: np.ndarray, shape: str, cx: int, cy: int,
                 size: int, color: tuple[int, int, int]) -> None:
    h, w = frame.shape[:2]
    yy, xx = np.ogrid[:h, :w]
    if shape == "circle":
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= size ** 2
    elif shape == "square":
        mask = (np.abs(xx - cx) <= size) & (np.abs(yy - cy) <= size)
    elif shape == "cross":
        arm = max(2, size // 3)
        in_box = (np.abs(xx - cx) <= size) & (np.abs(yy - cy) <= size)
        mask = in_box & ((np.abs(xx - cx) <= arm) | (np.abs(yy - cy) <= arm))
    else:
        raise ConfigurationError(f"unknown sprite shape '{shape}'")
    frame[mask] = color


@dataclass
class _Sprite:
    shape: str
    color: tuple[int, int, int]
    size: int
    x0: int
    y0: int
    vx: int
    vy: int
    first_frame: int = 0
    last_frame: int | None = None  # inclusive; None = whole video

    def position(self, t: int) -> tuple[int, int]:
        dt = t - self.first_frame
        return self.x0 + self.vx * dt, self.y0 + self.vy * dt

    def visible(self, t: int) -> bool:
        if t < self.first_frame:
            return False
        return self.last_frame is None or t <= self.last_frame


def _normal_sprite(rng: np.random.Generator, spec: SynthSpec) -> _Sprite:
    """A rightward constant-velocity sprite whose whole path stays in frame."""
    size = int(rng.integers(10, 15))
    margin = size + 2
    travel = spec.normal_speed * (spec.frames_per_video - 1)
    vy = int(rng.integers(-1, 2))
    x0 = int(rng.integers(margin, RENDER_SIZE - margin - travel))
    y_lo = margin + max(0, -vy * (spec.frames_per_video - 1))
    y_hi = RENDER_SIZE - margin - max(0, vy * (spec.frames_per_video - 1))
    y0 = int(rng.integers(y_lo, y_hi))
    return _Sprite(
        shape=NORMAL_SHAPES[int(rng.integers(len(NORMAL_SHAPES)))],
        color=SPRITE_COLORS[int(rng.integers(len(SPRITE_COLORS)))],
        size=size,
        x0=x0, y0=y0, vx=spec.normal_speed, vy=vy,
    )


def _anomaly_segment_bounds(spec: SynthSpec) -> tuple[int, int]:
    third = spec.frames_per_video // 3
    length = max(4, third)
    start = max(4, third)
    end = min(start + length, spec.frames_per_video - 4)
    return start, max(end, start + 1)


def _anomaly_sprite(rng: np.random.Generator, spec: SynthSpec, mode: str,
                    start: int, end: int) -> _Sprite:
    duration = end - start
    mid_y = int(rng.integers(60, RENDER_SIZE - 60))
    if mode == "fast_motion":
        size = 12
        margin = size + 2
        travel = FAST_SPEED * max(duration - 1, 1)
        x0 = int(rng.integers(margin, max(margin + 1, RENDER_SIZE - margin - travel)))
        return _Sprite("circle", (250, 250, 250), size, x0, mid_y,
                       FAST_SPEED, 0, first_frame=start, last_frame=end - 1)
    if mode == "novel_shape":
        size = 16
        margin = size + 2
        travel = spec.normal_speed * max(duration - 1, 1)
        x0 = int(rng.integers(margin, RENDER_SIZE - margin - travel))
        return _Sprite(NOVEL_SHAPE, (250, 250, 250), size, x0, mid_y,
                       spec.normal_speed, 0, first_frame=start, last_frame=end - 1)
    if mode == "reverse_direction":
        size = 12
        margin = size + 2
        travel = spec.normal_speed * max(duration - 1, 1)
        x0 = int(rng.integers(margin + travel, RENDER_SIZE - margin))
        return _Sprite("square", (250, 250, 250), size, x0, mid_y,
                       -spec.normal_speed, 0, first_frame=start, last_frame=end - 1)
    raise ConfigurationError(f"unknown anomaly mode '{mode}'")


def _render_video(out_dir: Path, background: np.ndarray,
                  sprites: list[_Sprite], num_frames: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for t in range(num_frames):
        frame = background.copy()
        for sprite in sprites:
            if sprite.visible(t):
                x, y = sprite.position(t)
                _draw_sprite(frame, sprite.shape, x, y, sprite.size, sprite.color)
        Image.fromarray(frame).save(out_dir / f"{t:06d}.png")


def generate(spec: SynthSpec, out_dir: str | Path) -> GeneratedDataset:
    """Render the dataset into the frame-directory layout.

    Writes ``<out_dir>/train/<vid>/``, ``<out_dir>/test/<vid>/`` and
    ``<out_dir>/test_labels/<vid>.txt``. Byte-identical for equal specs.
    """
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {root}: {exc}") from exc

    background = _background(np.random.default_rng([spec.seed, 0]))
    result = GeneratedDataset(root=root, train_videos=[], test_videos=[])

    for i in range(spec.num_train_videos):
        rng = np.random.default_rng([spec.seed, 1, i])
        vid = f"train{i:03d}"
        sprites = [_normal_sprite(rng, spec) for _ in range(2)]
        _render_video(root / "train" / vid, background, sprites, spec.frames_per_video)
        result.train_videos.append(vid)

    (root / "test_labels").mkdir(exist_ok=True)
    for i in range(spec.num_test_videos):
        rng = np.random.default_rng([spec.seed, 2, i])
        vid = f"test{i:03d}"
        mode = spec.anomaly_modes[i % len(spec.anomaly_modes)]
        start, end = _anomaly_segment_bounds(spec)
        sprites = [_normal_sprite(rng, spec) for _ in range(2)]
        sprites.append(_anomaly_sprite(rng, spec, mode, start, end))
        _render_video(root / "test" / vid, background, sprites, spec.frames_per_video)
        labels = np.zeros(spec.frames_per_video, dtype=np.int64)
        labels[start:end] = 1
        (root / "test_labels" / f"{vid}.txt").write_text(
            "".join(f"{v}\n" for v in labels)
        )
        result.test_videos.append(vid)
        result.segments.append(AnomalySegment(vid, mode, start, end))
    return result


@dataclass
class SplitSummary:
    videos: int
    frames: int
    anomalous_frames: int

    @property
    def anomaly_ratio(self) -> float:
        return self.anomalous_frames / self.frames if self.frames else 0.0


@dataclass
class DatasetSummary:
    root: Path
    splits: dict[str, SplitSummary]

    def __str__(self) -> str:
        lines = [f"dataset at {self.root}"]
        for name, s in self.splits.items():
            lines.append(
                f"  {name}: {s.videos} videos, {s.frames} frames, "
                f"anomaly ratio {s.anomaly_ratio:.3f}"
            )
        return "\n".join(lines)


def describe(root: str | Path) -> DatasetSummary:
    """Summarize a dataset directory; raises listing any malformed paths."""
    root = Path(root)
    problems = []
    splits = {}
    if not root.is_dir():
        raise DataError(f"dataset root does not exist: {root}")
    for split in ("train", "test"):
        split_dir = root / split
        if not split_dir.is_dir():
            continue
        videos = sorted(p for p in split_dir.iterdir() if p.is_dir())
        if not videos:
            problems.append(f"{split_dir}: no video directories")
        total_frames = 0
        anomalous = 0
        for video in videos:
            frames = [p for p in video.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")]
            if not frames:
                problems.append(f"{video}: no frames")
                continue
            total_frames += len(frames)
            label_file = root / "test_labels" / f"{video.name}.txt"
            if split == "test" and label_file.is_file():
                labels = [int(x) for x in label_file.read_text().split()]
                if len(labels) != len(frames):
                    problems.append(
                        f"{label_file}: {len(labels)} labels for {len(frames)} frames"
                    )
                anomalous += sum(labels)
        splits[split] = SplitSummary(len(videos), total_frames, anomalous)
    if not splits:
        problems.append(f"{root}: neither train/ nor test/ exists")
    if problems:
        raise DataError("malformed dataset layout:\n  " + "\n  ".join(problems))
    return DatasetSummary(root, splits)
